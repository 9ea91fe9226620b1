//! End-to-end detection over a ping stream.
//!
//! Pings are tiled per channel as they arrive. Each finished tile goes through
//! feature detection, DBSCAN and ROI extraction on a bounded worker pool; the
//! results are then folded into the channel's region list in ping order, so a
//! file and a live stream with the same bytes produce the same catalog.
//!
//! Overlapping tiles see the same rows twice. A tile keeps only regions whose
//! centroid row falls in its core, the tile minus half the overlap at each end,
//! so every object is reported by exactly one tile.

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use thiserror::Error;

use crate::clustering::{clusters_to_rois, dbscan, merge_rois, DbscanParams, Label, RegionOfInterest};
use crate::config::PipelineConfig;
use crate::features::{detect_features, FeatureConfig, FeaturePoint};
use crate::georef::{roi_to_object, GeoObject, Layback, PixelGeoContext, RowNav};
use crate::waterfall::{TileBuilder, WaterfallTile};
use crate::xtf::{interpolate_nav, Packet, PacketReader, ReaderStats, Side, SonarPing, XtfError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Xtf(#[from] XtfError),
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

/// Everything computed for one tile, in tile coordinates.
#[derive(Debug, Clone)]
pub struct TileResult {
    pub tile: WaterfallTile,
    pub features: Vec<FeaturePoint>,
    pub labels: Vec<Label>,
    pub rois: Vec<RegionOfInterest>,
}

/// Runs detection on one tile without any cross-tile bookkeeping.
pub fn analyze_tile(
    tile: WaterfallTile,
    features_cfg: &FeatureConfig,
    dbscan_params: &DbscanParams,
    padding: i64,
) -> TileResult {
    let features = detect_features(&tile, features_cfg);
    let points: Vec<(f64, f64)> = features.iter().map(|f| (f.row as f64, f.col as f64)).collect();
    let labels = dbscan(&points, dbscan_params);
    let rois = clusters_to_rois(&features, &labels, padding, tile.rows, tile.cols);
    TileResult {
        tile,
        features,
        labels,
        rois,
    }
}

struct ChannelState {
    side: Side,
    builder: Option<TileBuilder>,
    rows: Vec<RowNav>,
    /// Ground range per column of the latest tile covering each row.
    row_gr: Vec<f64>,
    pending: Vec<RegionOfInterest>,
    /// Regions in the trailing half-overlap of the latest tile. The next tile
    /// owns those rows; they are kept only if no next tile comes.
    tentative: Vec<RegionOfInterest>,
}

/// Summary of a completed stream run.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub reader: ReaderStats,
    pub pings: u64,
    /// Stream ended inside a packet.
    pub truncated: bool,
}

type TileObserver = Box<dyn FnMut(&TileResult) + Send>;

pub struct Pipeline {
    config: PipelineConfig,
    features: FeatureConfig,
    dbscan: DbscanParams,
    layback: Layback,
    source: String,
    channels: BTreeMap<u16, ChannelState>,
    objects: Vec<GeoObject>,
    next_id: u64,
    pool: rayon::ThreadPool,
    lags: Vec<usize>,
    observer: Option<TileObserver>,
}

impl Pipeline {
    /// `source` names the input in the catalog. The config must already be valid.
    pub fn new(config: PipelineConfig, source: impl Into<String>) -> Result<Self, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .build()
            .map_err(|e| PipelineError::Workers(e.to_string()))?;
        Ok(Self {
            features: config.feature_config(),
            dbscan: config.dbscan_params(),
            layback: config.layback(),
            config,
            source: source.into(),
            channels: BTreeMap::new(),
            objects: Vec::new(),
            next_id: 1,
            pool,
            lags: Vec::new(),
            observer: None,
        })
    }

    /// Called with every analyzed tile, in stream order.
    pub fn set_tile_observer(&mut self, f: impl FnMut(&TileResult) + Send + 'static) {
        self.observer = Some(Box::new(f));
    }

    /// Objects emitted so far, in emission order.
    pub fn objects(&self) -> &[GeoObject] {
        &self.objects
    }

    /// For each object emitted before end of stream: rows ingested on its
    /// channel at emission minus its last row.
    pub fn emission_lags(&self) -> &[usize] {
        &self.lags
    }

    /// Feeds one ping batch; returns objects that became final.
    pub fn push_batch(&mut self, pings: &[SonarPing]) -> Vec<GeoObject> {
        let mut ready: Vec<(u16, WaterfallTile)> = Vec::new();
        for ping in pings {
            if !self.config.channels.includes(ping.side) {
                continue;
            }
            let (rows, overlap, eq) = (self.config.tile.rows, self.config.tile.overlap, self.config.tile.equalize);
            let st = self.channels.entry(ping.channel).or_insert_with(|| ChannelState {
                side: ping.side,
                builder: Some(TileBuilder::new(ping.channel, ping.side, rows, overlap, eq)),
                rows: Vec::new(),
                row_gr: Vec::new(),
                pending: Vec::new(),
                tentative: Vec::new(),
            });
            let builder = st.builder.as_mut().expect("channel not finished");
            if builder.accepts(ping.ping_number) {
                st.rows.push(RowNav {
                    ping_number: ping.ping_number,
                    timestamp: ping.timestamp,
                    nav: ping.nav.clone().filter(|n| n.is_valid()),
                });
            }
            if let Some(tile) = builder.push(ping) {
                ready.push((ping.channel, tile));
            }
        }
        self.process(ready, false)
    }

    /// Flushes trailing tiles and every remaining region.
    pub fn finish(&mut self) -> Vec<GeoObject> {
        let mut ready = Vec::new();
        for (&ch, st) in self.channels.iter_mut() {
            if let Some(tile) = st.builder.take().and_then(TileBuilder::finish) {
                ready.push((ch, tile));
            }
        }
        let mut out = self.process(ready, true);
        let chans: Vec<u16> = self.channels.keys().copied().collect();
        for ch in chans {
            let st = self.channels.get_mut(&ch).unwrap();
            let mut all = std::mem::take(&mut st.pending);
            all.append(&mut st.tentative);
            let merged = merge_rois(&all, self.config.roi.merge_iou);
            out.extend(self.emit(ch, merged, false));
        }
        out
    }

    fn process(&mut self, ready: Vec<(u16, WaterfallTile)>, trailing: bool) -> Vec<GeoObject> {
        if ready.is_empty() {
            return Vec::new();
        }
        let (fc, db, pad) = (self.features, self.dbscan, self.config.roi.padding);
        let results: Vec<(u16, TileResult)> = self.pool.install(|| {
            ready
                .into_par_iter()
                .map(|(ch, tile)| (ch, analyze_tile(tile, &fc, &db, pad)))
                .collect()
        });
        let mut out = Vec::new();
        for (ch, result) in results {
            if let Some(obs) = self.observer.as_mut() {
                obs(&result);
            }
            out.extend(self.absorb(ch, result, trailing));
        }
        out
    }

    fn absorb(&mut self, ch: u16, result: TileResult, trailing: bool) -> Vec<GeoObject> {
        let iou = self.config.roi.merge_iou;
        let stride = self.config.tile.rows - self.config.tile.overlap;
        let st = self.channels.get_mut(&ch).unwrap();
        let tile = &result.tile;
        let origin = tile.tile_origin_row;
        let half = tile.overlap_rows / 2;
        let core_start = if origin == 0 { 0 } else { origin + half };
        let core_end = if trailing {
            usize::MAX
        } else {
            origin + tile.rows - half
        };

        if st.row_gr.len() < origin + tile.rows {
            st.row_gr.resize(origin + tile.rows, 0.0);
        }
        st.row_gr[origin..origin + tile.rows].fill(tile.ground_range_per_col);

        st.tentative.clear();
        for mut roi in result.rois {
            roi.shift_rows(origin);
            let c = roi.centroid.0;
            if c < core_start as f64 {
                continue;
            }
            if c < core_end as f64 {
                st.pending.push(roi);
            } else {
                st.tentative.push(roi);
            }
        }
        st.pending = merge_rois(&st.pending, iou);
        if trailing {
            return Vec::new();
        }
        // Later tiles only produce regions at or below the next tile origin.
        let limit = st
            .tentative
            .iter()
            .map(|r| r.bbox.row_min)
            .fold((origin + stride) as i64, i64::min);
        let (done, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut st.pending)
            .into_iter()
            .partition(|r| r.bbox.row_max < limit);
        st.pending = keep;
        self.emit(ch, done, true)
    }

    fn emit(&mut self, ch: u16, mut rois: Vec<RegionOfInterest>, live: bool) -> Vec<GeoObject> {
        if rois.is_empty() {
            return Vec::new();
        }
        rois.sort_by_key(|r| (r.bbox.row_min, r.bbox.col_min, r.bbox.row_max, r.bbox.col_max));
        let st = &self.channels[&ch];
        let mut rows = st.rows.clone();
        if let Err(e) = interpolate_nav(&mut rows) {
            tracing::warn!(event = "nav_unavailable", channel = ch, error = %e, "objects keep pixel coordinates only");
        }
        let seen = st.rows.len();
        let mut out = Vec::with_capacity(rois.len());
        for roi in rois {
            let r = (roi.centroid.0.round().max(0.0) as usize).min(st.row_gr.len().saturating_sub(1));
            let ctx = PixelGeoContext {
                rows: &rows,
                ground_range_per_col: st.row_gr.get(r).copied().unwrap_or(0.0),
                channel_side: st.side,
                layback: self.layback,
            };
            let mut obj = roi_to_object(&roi, &ctx, &self.source);
            obj.object_id = self.next_id;
            self.next_id += 1;
            if obj.ungeoreferenced {
                tracing::warn!(event = "ungeoreferenced_object", object_id = obj.object_id, channel = ch, "object has no navigation");
            }
            if live {
                self.lags.push(seen.saturating_sub(roi.bbox.row_max.max(0) as usize + 1));
            }
            out.push(obj);
        }
        self.objects.extend(out.iter().cloned());
        out
    }

    /// Drives the pipeline from a packet reader, calling `on_object` as each
    /// object becomes final. A stream cut inside a packet ends the run with a warning.
    pub fn run_reader<R: Read>(
        &mut self,
        reader: &mut PacketReader<R>,
        mut on_object: impl FnMut(&GeoObject),
    ) -> Result<RunSummary, PipelineError> {
        let mut summary = RunSummary::default();
        loop {
            match reader.next_packet() {
                Ok(Packet::Pings(batch)) => {
                    summary.pings += batch.len() as u64;
                    for o in self.push_batch(&batch) {
                        on_object(&o);
                    }
                }
                Ok(Packet::Attitude(_)) => {}
                Ok(Packet::EndOfStream) => break,
                Err(XtfError::TruncatedPacket { offset }) => {
                    tracing::warn!(event = "xtf_truncated", offset, "stream ended inside a packet");
                    summary.truncated = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        for o in self.finish() {
            on_object(&o);
        }
        summary.reader = reader.stats();
        Ok(summary)
    }
}

/// Runs the pipeline over decoded pings, batching consecutive pings that share a ping number.
pub fn detect_pings(config: &PipelineConfig, source: &str, pings: &[SonarPing]) -> Result<Vec<GeoObject>, PipelineError> {
    let mut p = Pipeline::new(config.clone(), source)?;
    for batch in pings.chunk_by(|a, b| a.ping_number == b.ping_number) {
        p.push_batch(batch);
    }
    p.finish();
    Ok(p.objects().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_survey, Shape, SurveyScenario, TargetSpec};
    use crate::xtf::XtfWriter;

    fn scenario(ping_count: usize, targets: Vec<TargetSpec>) -> SurveyScenario {
        SurveyScenario {
            ping_count,
            targets,
            ..SurveyScenario::default()
        }
    }

    fn target(ping: f64, side: Side) -> TargetSpec {
        TargetSpec {
            shape: Shape::Rect,
            side,
            ping,
            range_m: 80.0,
            along_m: 5.0,
            across_m: 5.0,
            gain: 4.0,
            shadow_m: 8.0,
        }
    }

    #[test]
    fn empty_input_gives_no_objects() {
        let objs = detect_pings(&PipelineConfig::default(), "x", &[]).unwrap();
        assert!(objs.is_empty());
    }

    #[test]
    fn single_target_found_once() {
        let s = gen_survey(&scenario(600, vec![target(300.0, Side::Starboard)])).unwrap();
        let objs = detect_pings(&PipelineConfig::default(), "t", &s.pings).unwrap();
        let truth = &s.truth[0];
        let near: Vec<_> = objs
            .iter()
            .filter(|o| o.channel == Side::Starboard)
            .filter(|o| {
                crate::georef::local_distance((o.latitude.unwrap(), o.longitude.unwrap()), (truth.latitude.unwrap(), truth.longitude.unwrap())) < 5.0
            })
            .collect();
        assert_eq!(near.len(), 1, "{objs:#?}");
    }

    #[test]
    fn stream_and_file_agree() {
        let s = gen_survey(&scenario(700, vec![target(200.0, Side::Port), target(450.0, Side::Starboard)])).unwrap();
        let mut w = XtfWriter::new(Vec::new(), &s.header).unwrap();
        w.write_pings(&s.pings).unwrap();
        let bytes = w.finish().unwrap();

        let file = detect_pings(&PipelineConfig::default(), "src", &s.pings).unwrap();
        let mut reader = PacketReader::new(std::io::Cursor::new(bytes)).unwrap();
        let mut p = Pipeline::new(PipelineConfig::default(), "src").unwrap();
        let mut live = Vec::new();
        p.run_reader(&mut reader, |o| live.push(o.clone())).unwrap();
        assert_eq!(live, file);
    }
}
