//! Waterfall synthesis: slant-range correction, stacking and equalization.

mod equalize;
mod geometry;

pub use equalize::{equalization_lut, equalize_in_place};
pub use geometry::{
    altitude_from_geometry, correct_ping, resample_to_ground, roll_toward_side, slant_from_twtt,
    slant_to_ground, CorrectedPing, GeometryError, SlantGeometry,
};

use crate::xtf::{Side, SonarPing};

/// How a row's altitude was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltitudeSource {
    Sensor,
    /// First bottom return combined with tilt and roll.
    Geometry,
    /// First bottom return taken directly as altitude. Low confidence.
    BottomPick,
    /// Nothing usable; altitude assumed zero.
    Unknown,
}

impl AltitudeSource {
    pub fn is_low_confidence(self) -> bool {
        matches!(self, AltitudeSource::BottomPick | AltitudeSource::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMeta {
    pub altitude: f64,
    pub altitude_source: AltitudeSource,
    pub degenerate: bool,
}

/// A block of corrected pings stacked as image rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallTile {
    pub channel_side: Side,
    pub channel: u16,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols`.
    pub pixels: Vec<u8>,
    /// Ping number of each row.
    pub ping_index_of_row: Vec<u32>,
    pub row_meta: Vec<RowMeta>,
    /// Meters of ground range per column.
    pub ground_range_per_col: f64,
    /// Channel-global row index of row 0.
    pub tile_origin_row: usize,
    pub overlap_rows: usize,
    pub equalized: bool,
}

impl WaterfallTile {
    /// A bare image, for detectors and tests that do not care about provenance.
    pub fn from_pixels(rows: usize, cols: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), rows * cols, "pixel buffer does not match dimensions");
        Self {
            channel_side: Side::Other,
            channel: 0,
            rows,
            cols,
            pixels,
            ping_index_of_row: (0..rows as u32).collect(),
            row_meta: vec![
                RowMeta {
                    altitude: 0.0,
                    altitude_source: AltitudeSource::Unknown,
                    degenerate: false,
                };
                rows
            ],
            ground_range_per_col: 1.0,
            tile_origin_row: 0,
            overlap_rows: 0,
            equalized: false,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.pixels[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// `255 - v` for every pixel.
    pub fn inverted(&self) -> Self {
        let mut t = self.clone();
        t.pixels.iter_mut().for_each(|p| *p = 255 - *p);
        t
    }

    /// Channel-global rows covered by this tile.
    pub fn global_rows(&self) -> std::ops::Range<usize> {
        self.tile_origin_row..self.tile_origin_row + self.rows
    }
}

/// Per-tile histogram equalization.
pub fn equalize(tile: &WaterfallTile) -> WaterfallTile {
    let mut out = tile.clone();
    equalize_in_place(&mut out.pixels);
    out.equalized = true;
    out
}

fn median(v: &mut [u8]) -> u8 {
    v.sort_unstable();
    v[v.len() / 2]
}

/// Slant of the first sample brighter than three times the median of the
/// leading 10% of the ping.
pub fn first_bottom_return(samples: &[u8], slant_max: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let lead = (samples.len() / 10).max(1);
    let mut head = samples[..lead].to_vec();
    let threshold = 3 * median(&mut head) as u32;
    samples
        .iter()
        .position(|&v| v as u32 > threshold)
        .map(|i| i as f64 * slant_max / samples.len() as f64)
}

/// Picks the altitude for a ping: sensor value, then tilt geometry on the first
/// bottom return, then the first bottom return itself.
pub fn resolve_altitude(ping: &SonarPing, samples: &[u8]) -> (f64, AltitudeSource) {
    if let Some(h) = ping.sensor_altitude {
        return (h as f64, AltitudeSource::Sensor);
    }
    let slant_max = ping.slant_range_max as f64;
    let Some(first) = first_bottom_return(samples, slant_max) else {
        return (0.0, AltitudeSource::Unknown);
    };
    if let Some(tilt) = ping.tilt_angle {
        let roll = ping
            .roll_angle
            .and_then(|r| roll_toward_side(ping.side, r as f64));
        if let Ok(h) = altitude_from_geometry(first, tilt as f64, roll) {
            return (h, AltitudeSource::Geometry);
        }
    }
    (first, AltitudeSource::BottomPick)
}

struct PendingRow {
    ping_number: u32,
    samples: Vec<u8>,
    geom: SlantGeometry,
    meta: RowMeta,
}

/// Incremental tiler for one channel. Pings are pushed in stream order and
/// tiles are emitted as soon as they are complete.
pub struct TileBuilder {
    channel: u16,
    side: Side,
    tile_rows: usize,
    overlap_rows: usize,
    equalize: bool,
    pending: Vec<PendingRow>,
    origin: usize,
    emitted_any: bool,
    last_ping: Option<u32>,
}

impl TileBuilder {
    pub fn new(channel: u16, side: Side, tile_rows: usize, overlap_rows: usize, equalize: bool) -> Self {
        assert!(tile_rows > overlap_rows, "tile_rows must exceed overlap_rows");
        Self {
            channel,
            side,
            tile_rows,
            overlap_rows,
            equalize,
            pending: Vec::with_capacity(tile_rows),
            origin: 0,
            emitted_any: false,
            last_ping: None,
        }
    }

    pub fn stride(&self) -> usize {
        self.tile_rows - self.overlap_rows
    }

    /// Rows pushed so far.
    pub fn rows_seen(&self) -> usize {
        self.origin + self.pending.len()
    }

    /// Whether [`push`](Self::push) would keep a ping with this number.
    pub fn accepts(&self, ping_number: u32) -> bool {
        self.last_ping.is_none_or(|last| ping_number > last)
    }

    /// Adds one ping. Pings that do not advance the ping number are dropped.
    pub fn push(&mut self, ping: &SonarPing) -> Option<WaterfallTile> {
        if !self.accepts(ping.ping_number) {
            tracing::warn!(
                event = "ping_out_of_order",
                channel = self.channel,
                ping = ping.ping_number,
                "dropping ping that does not advance the ping number"
            );
            return None;
        }
        self.last_ping = Some(ping.ping_number);
        let samples = ping.samples_u8();
        let (h, source) = resolve_altitude(ping, &samples);
        let geom = SlantGeometry {
            h,
            slant_max: ping.slant_range_max as f64,
            c: ping.sound_velocity as f64,
            n_samples: samples.len(),
        };
        let degenerate = geom.is_degenerate();
        if degenerate {
            tracing::warn!(
                event = "degenerate_ping",
                channel = self.channel,
                ping = ping.ping_number,
                altitude = h,
                slant_range = geom.slant_max,
                "ping lies entirely in the water column"
            );
        }
        self.pending.push(PendingRow {
            ping_number: ping.ping_number,
            samples,
            geom,
            meta: RowMeta {
                altitude: h,
                altitude_source: source,
                degenerate,
            },
        });
        if self.pending.len() == self.tile_rows {
            let tile = self.render();
            self.pending.drain(..self.stride());
            self.origin += self.stride();
            self.emitted_any = true;
            Some(tile)
        } else {
            None
        }
    }

    /// Emits the trailing partial tile, if it holds rows no earlier tile covered.
    pub fn finish(self) -> Option<WaterfallTile> {
        let uncovered = if self.emitted_any {
            self.pending.len() > self.overlap_rows
        } else {
            !self.pending.is_empty()
        };
        uncovered.then(|| self.render())
    }

    fn render(&self) -> WaterfallTile {
        let cols = self.pending.iter().map(|r| r.samples.len()).max().unwrap_or(0);
        let step = self
            .pending
            .iter()
            .filter(|r| !r.meta.degenerate)
            .map(|r| r.geom.ground_range_per_col())
            .fold(0.0f64, f64::max);
        let mut pixels = Vec::with_capacity(cols * self.pending.len());
        for row in &self.pending {
            if row.meta.degenerate || step == 0.0 {
                pixels.resize(pixels.len() + cols, 0);
            } else {
                pixels.extend(resample_to_ground(&row.samples, &row.geom, step, cols));
            }
        }
        if self.equalize {
            equalize_in_place(&mut pixels);
        }
        WaterfallTile {
            channel_side: self.side,
            channel: self.channel,
            rows: self.pending.len(),
            cols,
            pixels,
            ping_index_of_row: self.pending.iter().map(|r| r.ping_number).collect(),
            row_meta: self.pending.iter().map(|r| r.meta).collect(),
            ground_range_per_col: step,
            tile_origin_row: self.origin,
            overlap_rows: self.overlap_rows,
            equalized: self.equalize,
        }
    }
}

/// Lowest channel index carrying `side` in `pings`.
pub fn channel_for_side(pings: &[SonarPing], side: Side) -> Option<u16> {
    pings.iter().filter(|p| p.side == side).map(|p| p.channel).min()
}

/// Corrects, stacks and equalizes every ping of one channel into overlapping tiles.
pub fn build_tiles(
    pings: &[SonarPing],
    side: Side,
    tile_rows: usize,
    overlap_rows: usize,
) -> Vec<WaterfallTile> {
    build_tiles_with(pings, side, tile_rows, overlap_rows, true)
}

pub fn build_tiles_with(
    pings: &[SonarPing],
    side: Side,
    tile_rows: usize,
    overlap_rows: usize,
    equalize: bool,
) -> Vec<WaterfallTile> {
    let Some(channel) = channel_for_side(pings, side) else {
        return Vec::new();
    };
    let mut builder = TileBuilder::new(channel, side, tile_rows, overlap_rows, equalize);
    let mut tiles: Vec<_> = pings
        .iter()
        .filter(|p| p.channel == channel)
        .filter_map(|p| builder.push(p))
        .collect();
    tiles.extend(builder.finish());
    tiles
}
