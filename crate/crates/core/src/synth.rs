//! Synthetic sidescan surveys with planted targets and known ground truth.
//!
//! The seafloor is drawn on a ground-range grid: a floor level, a smooth
//! texture interpolated from a coarse random lattice, and Rayleigh speckle.
//! Targets multiply the background by their gain over their footprint and cast
//! a hard-edged shadow away from nadir. Each ground row is then mapped onto
//! slant-range samples so the pipeline has real slant geometry to undo.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::BBox;
use crate::georef::{offset_position, pixel_to_geo, write_catalog, CatalogFormat, GeoObject, Layback, PixelGeoContext, RowNav};
use crate::xtf::{ChannelInfo, NavFix, Side, SonarPing, XtfError, XtfFileHeader, XtfWriter};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {field} {reason}")]
    Invalid { field: String, reason: String },
    #[error("target {index} lies outside the swath: {reason}")]
    TargetOutsideSwath { index: usize, reason: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Xtf(#[from] XtfError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub start_lat: f64,
    pub start_lon: f64,
    /// Degrees clockwise from north.
    pub heading: f64,
    /// Meters per second.
    pub speed: f64,
    /// Pings per second.
    pub ping_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    /// Rayleigh scale of the speckle.
    pub sigma: f64,
    pub floor: f64,
    /// Extra intensity at nadir, fading linearly to zero at the swath edge.
    #[serde(default)]
    pub range_falloff: f64,
    /// Peak amplitude of the smooth seafloor texture; 0 disables it.
    #[serde(default)]
    pub texture_amplitude: f64,
    /// Lattice spacing of the texture, meters.
    #[serde(default = "default_texture_scale")]
    pub texture_scale_m: f64,
}

fn default_texture_scale() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rect,
    Ellipse,
    /// A thin straight line running diagonally across the size box.
    LineRope,
}

/// Rope width for [`Shape::LineRope`], meters.
const ROPE_WIDTH_M: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub shape: Shape,
    pub side: Side,
    /// Along-track center as a (fractional) ping index.
    pub ping: f64,
    /// Across-track center as ground range from nadir, meters.
    pub range_m: f64,
    pub along_m: f64,
    pub across_m: f64,
    pub gain: f64,
    pub shadow_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyScenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub ping_count: usize,
    pub samples_per_ping: usize,
    #[serde(default = "default_bytes_per_sample")]
    pub bytes_per_sample: u8,
    pub slant_range_max: f64,
    pub altitude: f64,
    pub sound_velocity: f64,
    /// Write the altitude into each ping; otherwise the pipeline must estimate it.
    #[serde(default = "default_true")]
    pub sensor_altitude: bool,
    /// Stored in the channel layout when present.
    #[serde(default)]
    pub tilt_angle: Option<f64>,
    /// A navigation fix is written on every n-th ping.
    #[serde(default = "default_nav_every")]
    pub nav_every: usize,
    #[serde(default = "default_start_time")]
    pub start_time: DateTime<Utc>,
    #[serde(default = "default_first_ping")]
    pub first_ping_number: u32,
    pub track: Track,
    pub background: Background,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
}

fn default_name() -> String {
    "survey".into()
}
fn default_bytes_per_sample() -> u8 {
    1
}
fn default_true() -> bool {
    true
}
fn default_nav_every() -> usize {
    1
}
fn default_start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
}
fn default_first_ping() -> u32 {
    1
}

impl Default for SurveyScenario {
    /// Ten mixed targets over 2000 dual-channel pings of 1024 samples.
    fn default() -> Self {
        let shapes = [Shape::Rect, Shape::Ellipse, Shape::Rect, Shape::LineRope, Shape::Rect];
        let sizes = [(3.0, 3.0), (4.0, 6.0), (5.0, 5.0), (8.0, 3.0), (10.0, 6.0), (6.0, 4.0), (7.0, 7.0), (9.0, 5.0), (3.5, 4.5), (10.0, 10.0)];
        let ranges = [45.0, 120.0, 80.0, 150.0, 60.0, 170.0, 100.0, 35.0, 135.0, 90.0];
        let targets = (0..10)
            .map(|k| TargetSpec {
                shape: shapes[k % shapes.len()],
                side: if k % 2 == 0 { Side::Port } else { Side::Starboard },
                ping: 110.0 + 190.0 * k as f64,
                range_m: ranges[k],
                along_m: sizes[k].0,
                across_m: sizes[k].1,
                gain: 3.0 + (k % 3) as f64,
                shadow_m: 5.0 + (k % 4) as f64,
            })
            .collect();
        Self {
            name: default_name(),
            seed: 1,
            ping_count: 2000,
            samples_per_ping: 1024,
            bytes_per_sample: 1,
            slant_range_max: 210.0,
            altitude: 20.0,
            sound_velocity: 1500.0,
            sensor_altitude: true,
            tilt_angle: None,
            nav_every: 1,
            start_time: default_start_time(),
            first_ping_number: 1,
            track: Track {
                start_lat: 48.4,
                start_lon: -68.5,
                heading: 30.0,
                speed: 1.0,
                ping_rate: 4.0,
            },
            background: Background {
                sigma: 1.5,
                floor: 20.0,
                range_falloff: 100.0,
                texture_amplitude: 10.0,
                texture_scale_m: 30.0,
            },
            targets,
        }
    }
}

/// Planted target footprint in channel-global pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthFootprint {
    pub side: Side,
    /// Target body only.
    pub target: BBox,
    /// Target body plus its shadow.
    pub with_shadow: BBox,
}

#[derive(Debug, Clone)]
pub struct Survey {
    pub header: XtfFileHeader,
    /// Port and starboard pings interleaved, one batch per ping number.
    pub pings: Vec<SonarPing>,
    pub truth: Vec<GeoObject>,
    pub footprints: Vec<TruthFootprint>,
    pub ground_range_per_col: f64,
}

impl SurveyScenario {
    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let sc: SurveyScenario = toml::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Ground range covered by each sample, meters.
    pub fn swath_ground_range(&self) -> f64 {
        ((self.slant_range_max - self.altitude) * (self.slant_range_max + self.altitude)).sqrt()
    }

    pub fn ground_range_per_col(&self) -> f64 {
        self.swath_ground_range() / self.samples_per_ping as f64
    }

    /// Along-track spacing between pings, meters.
    pub fn ping_spacing(&self) -> f64 {
        self.track.speed / self.track.ping_rate
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.samples_per_ping < 2 {
            return Err(invalid("samples_per_ping", "must be >= 2"));
        }
        if !matches!(self.bytes_per_sample, 1 | 2) {
            return Err(invalid("bytes_per_sample", "must be 1 or 2"));
        }
        if !(self.altitude >= 0.0 && self.altitude < self.slant_range_max) {
            return Err(invalid("altitude", "must be in [0, slant_range_max)"));
        }
        if !(self.sound_velocity > 0.0) {
            return Err(invalid("sound_velocity", "must be > 0"));
        }
        if !(self.track.ping_rate > 0.0) {
            return Err(invalid("track.ping_rate", "must be > 0"));
        }
        if !(self.track.speed >= 0.0) {
            return Err(invalid("track.speed", "must be >= 0"));
        }
        let b = &self.background;
        if !(b.sigma >= 0.0 && b.floor >= 0.0 && b.range_falloff >= 0.0 && b.texture_amplitude >= 0.0) {
            return Err(invalid("background", "sigma, floor, range_falloff and texture_amplitude must be >= 0"));
        }
        if !(self.background.texture_scale_m > 0.0) {
            return Err(invalid("background.texture_scale_m", "must be > 0"));
        }
        if self.nav_every < 1 {
            return Err(invalid("nav_every", "must be >= 1"));
        }
        let g = self.swath_ground_range();
        let dx = self.ping_spacing();
        for (index, t) in self.targets.iter().enumerate() {
            if !(t.gain > 1.0) || t.shadow_m < 0.0 || !(t.along_m > 0.0) || !(t.across_m > 0.0) {
                return Err(invalid(&format!("targets[{index}]"), "needs gain > 1, positive size and shadow >= 0"));
            }
            if t.side == Side::Other {
                return Err(invalid(&format!("targets[{index}].side"), "must be port or starboard"));
            }
            let (near, far) = (t.range_m - t.across_m / 2.0, t.range_m + t.across_m / 2.0);
            if near < 0.0 || far > g {
                return Err(ScenarioError::TargetOutsideSwath {
                    index,
                    reason: format!("ground range [{near:.2}, {far:.2}] m outside [0, {g:.2}] m"),
                });
            }
            let half = if dx > 0.0 { t.along_m / 2.0 / dx } else { 0.0 };
            if t.ping - half < 0.0 || t.ping + half > (self.ping_count as f64 - 1.0) {
                return Err(ScenarioError::TargetOutsideSwath {
                    index,
                    reason: format!("ping span outside [0, {})", self.ping_count),
                });
            }
        }
        Ok(())
    }

    fn header(&self) -> XtfFileHeader {
        let info = |side| ChannelInfo {
            side,
            bytes_per_sample: self.bytes_per_sample,
            samples_per_ping_hint: self.samples_per_ping as u32,
            tilt_angle: self.tilt_angle.map(|t| t as f32),
        };
        XtfFileHeader::new(vec![info(Side::Port), info(Side::Starboard)])
    }
}

/// Smooth random field from a coarse lattice, values in `[0, 1)`.
pub struct Texture {
    cols: usize,
    values: Vec<f64>,
    scale: f64,
}

impl Texture {
    pub fn new(rng: &mut ChaCha8Rng, along_m: f64, across_m: f64, scale: f64) -> Self {
        let rows = (along_m / scale).ceil() as usize + 2;
        let cols = (across_m / scale).ceil() as usize + 2;
        let values = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Self { cols, values, scale }
    }

    pub fn at(&self, along: f64, across: f64) -> f64 {
        let (u, v) = (along.max(0.0) / self.scale, across.max(0.0) / self.scale);
        let (i, j) = (u.floor() as usize, v.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (fu, fv) = (smooth(u - i as f64), smooth(v - j as f64));
        let rows = self.values.len() / self.cols;
        let (i, j) = (i.min(rows - 2), j.min(self.cols - 2));
        let g = |r: usize, c: usize| self.values[r * self.cols + c];
        let top = g(i, j) * (1.0 - fv) + g(i, j + 1) * fv;
        let bottom = g(i + 1, j) * (1.0 - fv) + g(i + 1, j + 1) * fv;
        top * (1.0 - fu) + bottom * fu
    }
}

fn rayleigh(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u: f64 = rng.random();
    sigma * (-2.0 * (1.0 - u).ln()).sqrt()
}

/// Along-track footprint test and the far edge of the target on this row.
/// `u` is the along-track offset from the target center; returns the
/// across-track interval `[near, far]` relative to `range_m` covered on this row.
fn row_interval(t: &TargetSpec, u: f64) -> Option<(f64, f64)> {
    let (a, c) = (t.along_m / 2.0, t.across_m / 2.0);
    match t.shape {
        Shape::Rect => (u.abs() <= a).then_some((-c, c)),
        Shape::Ellipse => {
            let q = 1.0 - (u / a).powi(2);
            (q >= 0.0).then(|| {
                let w = c * q.sqrt();
                (-w, w)
            })
        }
        Shape::LineRope => {
            if u.abs() > a {
                return None;
            }
            let v = c * u / a;
            let half = ROPE_WIDTH_M / 2.0;
            Some((v - half, v + half))
        }
    }
}

/// Ground-range intensities for one side of one ping, before quantization.
pub fn ground_row(sc: &SurveyScenario, texture: &Texture, side: Side, ping_index: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = sc.samples_per_ping;
    let gr = sc.ground_range_per_col();
    let dx = sc.ping_spacing();
    let along = ping_index as f64 * dx;
    let bg = &sc.background;
    let swath = n as f64 * gr;
    let mut row: Vec<f64> = (0..n)
        .map(|k| {
            let g = k as f64 * gr;
            bg.floor
                + bg.range_falloff * (1.0 - g / swath)
                + bg.texture_amplitude * texture.at(along, g)
                + rayleigh(rng, bg.sigma)
        })
        .collect();
    for t in sc.targets.iter().filter(|t| t.side == side) {
        let u = (ping_index as f64 - t.ping) * dx;
        let Some((near, far)) = row_interval(t, u) else {
            continue;
        };
        let k0 = ((t.range_m + near) / gr).ceil().max(0.0) as usize;
        let k1 = (((t.range_m + far) / gr).floor().max(0.0) as usize).min(n - 1);
        if k0 <= k1 {
            for v in &mut row[k0..=k1] {
                *v *= t.gain;
            }
        }
        let s1 = (((t.range_m + far + t.shadow_m) / gr).floor() as usize).min(n - 1);
        if t.shadow_m > 0.0 && k1 < s1 {
            for v in &mut row[k1 + 1..=s1] {
                *v = bg.floor;
            }
        }
    }
    row
}

fn quantize(v: f64, bytes_per_sample: u8) -> u16 {
    let v = v.max(0.0);
    if bytes_per_sample == 1 {
        v.round().min(255.0) as u16
    } else {
        (v * 257.0).round().min(65535.0) as u16
    }
}

/// Maps a ground-range row onto slant-range samples.
fn to_slant(sc: &SurveyScenario, ground: &[f64], rng: &mut ChaCha8Rng) -> Vec<u16> {
    let n = ground.len();
    let gr = sc.ground_range_per_col();
    let ds = sc.slant_range_max / n as f64;
    let h = sc.altitude;
    (0..n)
        .map(|j| {
            let s = j as f64 * ds;
            let v = if s + ds <= h {
                rayleigh(rng, sc.background.sigma * 0.5)
            } else if s < h {
                // first bottom return
                ground[0]
            } else {
                let x = ((s - h) * (s + h)).sqrt() / gr;
                let i0 = x.floor() as usize;
                if i0 + 1 >= n {
                    ground[n - 1]
                } else {
                    let f = x - i0 as f64;
                    ground[i0] * (1.0 - f) + ground[i0 + 1] * f
                }
            };
            quantize(v, sc.bytes_per_sample)
        })
        .collect()
}

fn ping_time(sc: &SurveyScenario, i: usize) -> DateTime<Utc> {
    // XTF stores hundredths of a second
    let centis = (i as f64 * 100.0 / sc.track.ping_rate).round() as i64;
    sc.start_time + Duration::milliseconds(centis * 10)
}

fn nav_position(sc: &SurveyScenario, i: usize) -> (f64, f64) {
    offset_position(sc.track.start_lat, sc.track.start_lon, sc.track.heading, i as f64 * sc.ping_spacing())
}

/// Builds the pings and the truth list for a scenario.
pub fn gen_survey(sc: &SurveyScenario) -> Result<Survey, ScenarioError> {
    sc.validate()?;
    let mut lattice_rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let along_extent = sc.ping_count as f64 * sc.ping_spacing();
    let g = sc.swath_ground_range();
    let tex_port = Texture::new(&mut lattice_rng, along_extent, g, sc.background.texture_scale_m);
    let tex_stbd = Texture::new(&mut lattice_rng, along_extent, g, sc.background.texture_scale_m);
    let header = sc.header();
    let heading = sc.track.heading.rem_euclid(360.0) as f32;

    let per_ping: Vec<[SonarPing; 2]> = (0..sc.ping_count)
        .into_par_iter()
        .map(|i| {
            let t = ping_time(sc, i);
            let nav = (i % sc.nav_every == 0).then(|| {
                let (lat, lon) = nav_position(sc, i);
                NavFix::measured(lat, lon, heading, t)
            });
            let make = |channel: u16, side: Side, tex: &Texture| {
                let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
                rng.set_stream(2 * i as u64 + channel as u64 + 1);
                let ground = ground_row(sc, tex, side, i, &mut rng);
                SonarPing {
                    ping_number: sc.first_ping_number + i as u32,
                    timestamp: t,
                    channel,
                    side,
                    bytes_per_sample: sc.bytes_per_sample,
                    samples: to_slant(sc, &ground, &mut rng),
                    slant_range_max: sc.slant_range_max as f32,
                    sensor_altitude: sc.sensor_altitude.then_some(sc.altitude as f32),
                    sound_velocity: sc.sound_velocity as f32,
                    nav: nav.clone(),
                    tilt_angle: sc.tilt_angle.map(|a| a as f32),
                    roll_angle: None,
                }
            };
            [make(0, Side::Port, &tex_port), make(1, Side::Starboard, &tex_stbd)]
        })
        .collect();
    let pings: Vec<SonarPing> = per_ping.into_iter().flatten().collect();

    let rows: Vec<RowNav> = (0..sc.ping_count)
        .map(|i| {
            let (lat, lon) = nav_position(sc, i);
            RowNav {
                ping_number: sc.first_ping_number + i as u32,
                timestamp: ping_time(sc, i),
                nav: Some(NavFix::measured(lat, lon, heading, ping_time(sc, i))),
            }
        })
        .collect();
    let gr = sc.ground_range_per_col();
    let dx = sc.ping_spacing();
    let mut truth = Vec::with_capacity(sc.targets.len());
    let mut footprints = Vec::with_capacity(sc.targets.len());
    for (k, t) in sc.targets.iter().enumerate() {
        let ctx = PixelGeoContext {
            rows: &rows,
            ground_range_per_col: gr,
            channel_side: t.side,
            layback: Layback::default(),
        };
        let (lat, lon) = pixel_to_geo(t.ping, t.range_m / gr, &ctx).expect("truth rows carry nav");
        let half_rows = if dx > 0.0 { t.along_m / 2.0 / dx } else { 0.0 };
        let r0 = (t.ping - half_rows).ceil() as i64;
        let r1 = (t.ping + half_rows).floor() as i64;
        let c0 = ((t.range_m - t.across_m / 2.0) / gr).ceil() as i64;
        let c1 = ((t.range_m + t.across_m / 2.0) / gr).floor() as i64;
        let cs = (((t.range_m + t.across_m / 2.0 + t.shadow_m) / gr).floor() as i64).min(sc.samples_per_ping as i64 - 1);
        let target = BBox {
            row_min: r0,
            col_min: c0,
            row_max: r1,
            col_max: c1,
        };
        footprints.push(TruthFootprint {
            side: t.side,
            target,
            with_shadow: BBox { col_max: cs, ..target },
        });
        let center = t.ping.round() as usize;
        truth.push(GeoObject {
            object_id: k as u64 + 1,
            latitude: Some(lat),
            longitude: Some(lon),
            extent_along_m: t.along_m,
            extent_across_m: t.across_m,
            channel: t.side,
            ping_first: sc.first_ping_number + r0.max(0) as u32,
            ping_last: sc.first_ping_number + r1.max(0) as u32,
            feature_count: 0,
            source: format!("{}.truth", sc.name),
            detected_at: rows[center.min(rows.len() - 1)].timestamp,
            pixel_row: t.ping,
            pixel_col: t.range_m / gr,
            ungeoreferenced: false,
            degenerate_track: false,
        });
    }
    Ok(Survey {
        header,
        pings,
        truth,
        footprints,
        ground_range_per_col: gr,
    })
}

/// Writes pings as an XTF file.
pub fn write_xtf(header: &XtfFileHeader, pings: &[SonarPing], path: &Path) -> Result<(), ScenarioError> {
    let io = |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = XtfWriter::new(BufWriter::new(file), header)?;
    w.write_pings(pings)?;
    let out = w.finish()?;
    out.into_inner().map_err(|e| io(e.into_error()))?.sync_all().map_err(io)?;
    Ok(())
}

/// `{dir}/{stem}.truth.geojson` next to an XTF path.
pub fn truth_path(xtf_path: &Path) -> PathBuf {
    let stem = xtf_path.file_stem().and_then(|s| s.to_str()).unwrap_or("survey");
    xtf_path.with_file_name(format!("{stem}.truth.geojson"))
}

/// Writes the XTF file and its truth sidecar.
pub fn write_survey(survey: &Survey, xtf_path: &Path) -> Result<PathBuf, ScenarioError> {
    write_xtf(&survey.header, &survey.pings, xtf_path)?;
    let tp = truth_path(xtf_path);
    write_catalog(&survey.truth, CatalogFormat::GeoJson, &tp).map_err(|e| ScenarioError::Io {
        path: tp.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(tp)
}
