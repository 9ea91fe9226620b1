//! Synthetic survey statistics and end-to-end sanity runs.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sidescan::pipeline::detect_pings;
use sidescan::synth::{gen_survey, ground_row, Shape, TargetSpec, Texture};
use sidescan::{PipelineConfig, Side, SurveyScenario};

fn one_target(seed: u64, ping_count: usize) -> SurveyScenario {
    SurveyScenario {
        seed,
        ping_count,
        targets: vec![TargetSpec {
            shape: Shape::Rect,
            side: Side::Starboard,
            ping: ping_count as f64 / 2.0,
            range_m: 90.0,
            along_m: 5.0,
            across_m: 5.0,
            gain: 4.0,
            shadow_m: 8.0,
        }],
        ..SurveyScenario::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn highlight_exceeds_background_and_shadow_is_darker_than_its_tail() {
    let sc = one_target(0, 200);
    let t = &sc.targets[0];
    let gr = sc.ground_range_per_col();
    let sigma_mean = sc.background.sigma * (std::f64::consts::PI / 2.0).sqrt();
    let on = (t.range_m - 2.0) / gr..(t.range_m + 2.0) / gr;
    let shadow = (t.range_m + 3.0) / gr..(t.range_m + 2.5 + t.shadow_m - 0.5) / gr;
    let cols = |r: &std::ops::Range<f64>| r.start.ceil() as usize..r.end.floor() as usize;

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tex = Texture::new(&mut rng, 60.0, 300.0, sc.background.texture_scale_m);
        let target_row = ground_row(&sc, &tex, Side::Starboard, 100, &mut rng);
        let clear_row = ground_row(&sc, &tex, Side::Starboard, 100 + 40, &mut rng);

        let hi = mean(&target_row[cols(&on)]);
        let bg = mean(&clear_row[cols(&on)]);
        assert!(hi - bg >= (t.gain - 1.0) / 2.0 * sigma_mean, "seed {seed}: {hi} vs {bg}");

        let mut tail = clear_row.clone();
        tail.sort_by(f64::total_cmp);
        let p5 = tail[tail.len() / 20];
        let dark = &target_row[cols(&shadow)];
        assert!(!dark.is_empty());
        assert!(dark.iter().all(|&v| v < p5), "seed {seed}: shadow above {p5}");
    }
}

#[test]
fn single_rect_target_gives_one_object_near_truth() {
    let survey = gen_survey(&one_target(11, 400)).unwrap();
    let found = detect_pings(&PipelineConfig::default(), "one.xtf", &survey.pings).unwrap();
    assert_eq!(found.len(), 1, "{found:#?}");
    let s = common::score(&survey.truth, &found, 5.0);
    assert_eq!(s.matched, 1);
    assert!(s.max_error() <= 5.0);
}

#[test]
fn empty_seafloor_yields_at_most_one_spurious_object_over_20_seeds() {
    let cfg = PipelineConfig::default();
    let mut spurious = 0;
    for seed in 100..120u64 {
        let sc = SurveyScenario {
            seed,
            targets: vec![],
            ..SurveyScenario::default()
        };
        let survey = gen_survey(&sc).unwrap();
        spurious += detect_pings(&cfg, "empty.xtf", &survey.pings).unwrap().len();
    }
    assert!(spurious <= 1, "{spurious} spurious objects");
}

#[test]
fn per_ping_generation_ignores_neighbouring_pings() {
    let long = gen_survey(&SurveyScenario {
        targets: vec![],
        ..one_target(3, 120)
    })
    .unwrap();
    let short = gen_survey(&SurveyScenario {
        targets: vec![],
        ..one_target(3, 60)
    })
    .unwrap();
    assert_eq!(&long.pings[..short.pings.len()], &short.pings[..]);
}
