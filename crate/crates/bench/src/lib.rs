//! Fixtures shared by the benchmarks.

use sidescan::synth::{gen_survey, Survey};
use sidescan::waterfall::build_tiles;
use sidescan::{Side, SurveyScenario, WaterfallTile};

/// The default ten-target scenario cut down to `ping_count` pings.
pub fn survey(ping_count: usize) -> Survey {
    let mut sc = SurveyScenario {
        ping_count,
        ..SurveyScenario::default()
    };
    let last = ping_count as f64 - 20.0;
    sc.targets.retain(|t| t.ping < last);
    gen_survey(&sc).expect("benchmark scenario is valid")
}

/// First full port tile of `survey`.
pub fn port_tile(survey: &Survey, rows: usize) -> WaterfallTile {
    build_tiles(&survey.pings, Side::Port, rows, 0)
        .into_iter()
        .next()
        .expect("survey fills a tile")
}

/// Feature positions of a tile as DBSCAN input.
pub fn feature_points(tile: &WaterfallTile) -> Vec<(f64, f64)> {
    sidescan::features::detect_features(tile, &sidescan::features::FeatureConfig::both())
        .iter()
        .map(|f| (f.row as f64, f.col as f64))
        .collect()
}
