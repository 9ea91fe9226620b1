use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, Context};
use chrono::{DateTime, Utc};
use sidescan::config::ChannelSelection;
use sidescan::georef::{object_properties, write_catalog, CatalogFormat};
use sidescan::imageio::{self, OverlayKind};
use sidescan::pipeline::{Pipeline, PipelineError, TileResult};
use sidescan::synth::{gen_survey, write_survey, ScenarioError};
use sidescan::xtf::{Packet, PacketReader, XtfError};
use sidescan::{PipelineConfig, SurveyScenario};

use crate::input::Source;
use crate::{DetectArgs, Failure, InfoArgs, OutputFormat, PipelineOpts, SynthArgs, WaterfallArgs};

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn out_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Other(e.into())
}

fn pipeline_err(e: PipelineError) -> Failure {
    match e {
        PipelineError::Xtf(x) => Failure::Input(x.into()),
        other => Failure::Other(other.into()),
    }
}

/// Config file plus command-line overrides.
fn effective_config(opts: &PipelineOpts) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &opts.config {
        Some(p) => PipelineConfig::load(p).map_err(config_err)?,
        None => PipelineConfig::default(),
    };
    if let Some(list) = &opts.channels {
        cfg.channels = ChannelSelection::parse_list(list).map_err(|e| config_err(anyhow!("--channels: {e}")))?;
    }
    if opts.no_equalize {
        cfg.tile.equalize = false;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn dump(text: &str) -> Result<(), Failure> {
    std::io::stdout().write_all(text.as_bytes()).map_err(out_err)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(out_err)
}

pub fn detect(args: DetectArgs) -> Result<(), Failure> {
    let cfg = effective_config(&args.pipeline)?;
    if args.pipeline.dump_config {
        return dump(&cfg.to_toml_string());
    }
    let source = Source::from_args(args.input.as_deref(), args.live.as_deref());
    let mut reader = source.open()?;
    ensure_dir(&args.out)?;

    let live = args.live.is_some();
    let mut pipeline = Pipeline::new(cfg, source.label()).map_err(pipeline_err)?;
    let stdout = std::io::stdout();
    let mut events_open = live;
    let summary = pipeline
        .run_reader(&mut reader, |o| {
            if !events_open {
                return;
            }
            let mut event = object_properties(o);
            event.insert("event".into(), "object".into());
            let line = serde_json::to_string(&event).expect("event serializes");
            let mut lock = stdout.lock();
            if let Err(e) = writeln!(lock, "{line}").and_then(|_| lock.flush()) {
                // the catalog is still written at the end
                tracing::warn!(event = "live_events_closed", error = %e);
                events_open = false;
            }
        })
        .map_err(pipeline_err)?;

    let objects = pipeline.objects();
    let formats: &[CatalogFormat] = match args.format {
        OutputFormat::Geojson => &[CatalogFormat::GeoJson],
        OutputFormat::Csv => &[CatalogFormat::Csv],
        OutputFormat::Both => &[CatalogFormat::GeoJson, CatalogFormat::Csv],
    };
    let stem = source.stem();
    for &f in formats {
        let path = args.out.join(format!("{stem}.objects.{}", f.extension()));
        write_catalog(objects, f, &path).map_err(out_err)?;
        tracing::info!(event = "catalog_written", path = %path.display(), objects = objects.len());
    }
    tracing::info!(
        event = "detect_done",
        objects = objects.len(),
        pings = summary.pings,
        packets = summary.reader.packets,
        skipped_unknown = summary.reader.skipped_unknown,
        resyncs = summary.reader.resyncs,
        truncated = summary.truncated,
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let mut sc = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read scenario {}", p.display()))
                .map_err(config_err)?;
            SurveyScenario::from_toml_str(&text).map_err(config_err)?
        }
        None => SurveyScenario::default(),
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if args.dump_config {
        return dump(&sc.to_toml_string());
    }
    let survey = gen_survey(&sc).map_err(|e| match e {
        ScenarioError::Io { .. } | ScenarioError::Xtf(_) => out_err(e),
        other => config_err(other),
    })?;
    ensure_dir(&args.out)?;
    let xtf_path = args.out.join(format!("{}.xtf", sc.name));
    let truth = write_survey(&survey, &xtf_path).map_err(out_err)?;
    tracing::info!(
        event = "synth_written",
        xtf = %xtf_path.display(),
        truth = %truth.display(),
        pings = sc.ping_count,
        targets = survey.truth.len(),
    );
    println!("{}", xtf_path.display());
    println!("{}", truth.display());
    Ok(())
}

#[derive(Default)]
struct ChannelCount {
    pings: u64,
    samples: BTreeSet<usize>,
}

fn read_counted<R: Read>(reader: &mut PacketReader<R>, mut on_batch: impl FnMut(&[sidescan::SonarPing])) -> Result<bool, Failure> {
    loop {
        match reader.next_packet() {
            Ok(Packet::Pings(batch)) => on_batch(&batch),
            Ok(Packet::Attitude(_)) => {}
            Ok(Packet::EndOfStream) => return Ok(false),
            Err(XtfError::TruncatedPacket { offset }) => {
                tracing::warn!(event = "xtf_truncated", offset, "stream ended inside a packet");
                return Ok(true);
            }
            Err(e) => return Err(Failure::Input(e.into())),
        }
    }
}

fn fmt_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn info(args: InfoArgs) -> Result<(), Failure> {
    let source = Source::from_args(Some(&args.input), None);
    let mut reader = source.open()?;
    let header = reader.header().clone();

    let mut per_channel: BTreeMap<u16, ChannelCount> = BTreeMap::new();
    let mut rows = 0u64;
    let mut rows_with_nav = 0u64;
    let mut span: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
    let truncated = read_counted(&mut reader, |batch| {
        rows += 1;
        if batch.iter().any(|p| p.nav.as_ref().is_some_and(|n| n.is_valid())) {
            rows_with_nav += 1;
        }
        for p in batch {
            let c = per_channel.entry(p.channel).or_default();
            c.pings += 1;
            c.samples.insert(p.samples.len());
            span = Some(match span {
                None => (p.timestamp, p.timestamp),
                Some((a, b)) => (a.min(p.timestamp), b.max(p.timestamp)),
            });
        }
    })?;
    let stats = reader.stats();

    let mut out = String::new();
    out.push_str(&format!("source: {}\n", source.label()));
    out.push_str(&format!("channels: {}\n", header.channel_infos.len()));
    for (i, ch) in header.channel_infos.iter().enumerate() {
        let count = per_channel.get(&(i as u16));
        let samples = count
            .map(|c| c.samples.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("/"))
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| ch.samples_per_ping_hint.to_string());
        out.push_str(&format!(
            "  channel {i}: {} {}-bit, {samples} samples, {} pings\n",
            ch.side,
            ch.bytes_per_sample as u32 * 8,
            count.map_or(0, |c| c.pings)
        ));
    }
    out.push_str(&format!("pings: {rows}\n"));
    match span {
        Some((a, b)) => out.push_str(&format!(
            "time span: {} .. {} ({:.2} s)\n",
            fmt_time(a),
            fmt_time(b),
            (b - a).num_milliseconds() as f64 / 1000.0
        )),
        None => out.push_str("time span: none\n"),
    }
    let coverage = if rows == 0 { 0.0 } else { 100.0 * rows_with_nav as f64 / rows as f64 };
    out.push_str(&format!("nav coverage {coverage:.0}%\n"));
    let widths: BTreeSet<u32> = header.channel_infos.iter().map(|c| c.bytes_per_sample as u32 * 8).collect();
    let widths: Vec<String> = widths.iter().map(|w| format!("{w}-bit")).collect();
    out.push_str(&format!("sample width: {}\n", widths.join(", ")));
    out.push_str(&format!(
        "packets: {} (unknown skipped {}, resyncs {}, bytes discarded {})\n",
        stats.packets, stats.skipped_unknown, stats.resyncs, stats.discarded_bytes
    ));
    if truncated {
        out.push_str("truncated: yes\n");
    }
    dump(&out)
}

fn write_tile_images(dir: &Path, survey: &str, r: &TileResult, overlay: OverlayKind) -> Result<(), Failure> {
    let t = &r.tile;
    let pgm = dir.join(imageio::tile_file_name(survey, t.channel_side, t.tile_origin_row, "pgm"));
    imageio::write_pgm(&pgm, t)
        .with_context(|| format!("cannot write {}", pgm.display()))
        .map_err(out_err)?;
    if let Some(name) = imageio::overlay_file_name(survey, t.channel_side, t.tile_origin_row, overlay) {
        let rgb = match overlay {
            OverlayKind::Features => imageio::render_feature_overlay(t, &r.features),
            _ => imageio::render_roi_overlay(t, &r.features, &r.labels, &r.rois),
        };
        let path = dir.join(name);
        std::fs::write(&path, imageio::encode_ppm(t.cols, t.rows, &rgb))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(out_err)?;
    }
    Ok(())
}

pub fn waterfall(args: WaterfallArgs) -> Result<(), Failure> {
    let cfg = effective_config(&args.pipeline)?;
    if args.pipeline.dump_config {
        return dump(&cfg.to_toml_string());
    }
    let source = Source::from_args(args.input.as_deref(), None);
    let mut reader = source.open()?;
    ensure_dir(&args.out)?;

    let mut pipeline = Pipeline::new(cfg, source.label()).map_err(pipeline_err)?;
    let finished: Arc<Mutex<Vec<TileResult>>> = Arc::default();
    let sink = finished.clone();
    pipeline.set_tile_observer(move |r| sink.lock().expect("tile queue").push(r.clone()));

    let survey = source.stem();
    let mut tiles = 0usize;
    let flush = |tiles: &mut usize| -> Result<(), Failure> {
        let batch: Vec<TileResult> = std::mem::take(&mut *finished.lock().expect("tile queue"));
        for r in &batch {
            write_tile_images(&args.out, &survey, r, args.overlay)?;
        }
        *tiles += batch.len();
        Ok(())
    };
    let mut failed = None;
    let truncated = read_counted(&mut reader, |batch| {
        pipeline.push_batch(batch);
        if failed.is_none() {
            failed = flush(&mut tiles).err();
        }
    })?;
    if let Some(f) = failed {
        return Err(f);
    }
    pipeline.finish();
    flush(&mut tiles)?;
    tracing::info!(event = "waterfall_done", tiles, truncated, out = %args.out.display());
    Ok(())
}
