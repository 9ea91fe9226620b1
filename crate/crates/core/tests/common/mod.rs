//! Reference oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sidescan::features::fast::CIRCLE;
use sidescan::georef::local_distance;
use sidescan::{GeoObject, WaterfallTile};

/// Exhaustive segment test: every pixel, every start of a `len`-arc, every
/// threshold from `t` upward. Returns (row, col, score) in (row, col) order.
pub fn fast_oracle(tile: &WaterfallTile, t: u8, len: usize) -> Vec<(usize, usize, u8)> {
    let passes = |r: usize, c: usize, thr: i32| -> bool {
        let p = tile.get(r, c) as i32;
        let ring: Vec<i32> = CIRCLE
            .iter()
            .map(|&(dr, dc)| tile.get((r as isize + dr) as usize, (c as isize + dc) as usize) as i32)
            .collect();
        (0..16).any(|start| {
            let arc = (0..len).map(|k| ring[(start + k) % 16]);
            arc.clone().all(|v| v > p + thr) || arc.clone().all(|v| v < p - thr)
        })
    };
    let mut out = Vec::new();
    if tile.rows < 7 || tile.cols < 7 {
        return out;
    }
    for r in 3..tile.rows - 3 {
        for c in 3..tile.cols - 3 {
            if !passes(r, c, t as i32) {
                continue;
            }
            let mut score = t as i32;
            while score < 255 && passes(r, c, score + 1) {
                score += 1;
            }
            out.push((r, c, score as u8));
        }
    }
    out
}

/// O(n^2) DBSCAN reference: core flags and, for core points, the id of their
/// connected component in the core graph (smallest member index).
pub fn dbscan_oracle(points: &[(f64, f64)], eps: f64, min_pts: usize) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let (a, b) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
        a * a + b * b <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut comp: Vec<Option<usize>> = vec![None; n];
    for s in 0..n {
        if !core[s] || comp[s].is_some() {
            continue;
        }
        comp[s] = Some(s);
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if core[j] && comp[j].is_none() && near(i, j) {
                    comp[j] = Some(s);
                    stack.push(j);
                }
            }
        }
    }
    (core, comp)
}

/// Piecewise-constant rectangles plus light noise: plenty of corners.
pub fn random_blocky_tile(seed: u64, rows: usize, cols: usize) -> WaterfallTile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![rng.random_range(0..=255u8); rows * cols];
    for _ in 0..rng.random_range(3..12) {
        let (r0, c0) = (rng.random_range(0..rows), rng.random_range(0..cols));
        let (h, w) = (rng.random_range(2..rows / 2), rng.random_range(2..cols / 2));
        let v: u8 = rng.random();
        for r in r0..(r0 + h).min(rows) {
            for c in c0..(c0 + w).min(cols) {
                px[r * cols + c] = v;
            }
        }
    }
    for p in px.iter_mut() {
        let d: i16 = rng.random_range(-6..=6);
        *p = (*p as i16 + d).clamp(0, 255) as u8;
    }
    WaterfallTile::from_pixels(rows, cols, px)
}

pub fn random_tile(seed: u64, rows: usize, cols: usize) -> WaterfallTile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = (0..rows * cols).map(|_| rng.random()).collect();
    WaterfallTile::from_pixels(rows, cols, px)
}

/// Detection quality of one survey against its truth list.
#[derive(Debug, Clone, Default)]
pub struct Score {
    pub truths: usize,
    pub matched: usize,
    pub false_positives: usize,
    /// Distance from each matched truth to its nearest detection, meters.
    pub errors: Vec<f64>,
}

impl Score {
    pub fn recall(&self) -> f64 {
        if self.truths == 0 {
            1.0
        } else {
            self.matched as f64 / self.truths as f64
        }
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

fn position(o: &GeoObject) -> Option<(f64, f64)> {
    Some((o.latitude?, o.longitude?))
}

/// A truth counts as found when a detection on its side lies within
/// `radius_m`; a detection within `radius_m` of no truth is a false positive.
pub fn score(truth: &[GeoObject], detected: &[GeoObject], radius_m: f64) -> Score {
    let dist = |a: &GeoObject, b: &GeoObject| -> f64 {
        match (position(a), position(b)) {
            (Some(p), Some(q)) if a.channel == b.channel => local_distance(p, q),
            _ => f64::INFINITY,
        }
    };
    let mut s = Score {
        truths: truth.len(),
        ..Score::default()
    };
    for t in truth {
        let best = detected.iter().map(|d| dist(t, d)).fold(f64::INFINITY, f64::min);
        if best <= radius_m {
            s.matched += 1;
            s.errors.push(best);
        }
    }
    s.false_positives = detected
        .iter()
        .filter(|d| truth.iter().all(|t| dist(t, d) > radius_m))
        .count();
    s
}

/// A random but encodable ping sequence: 8- or 16-bit samples, optional
/// fields sometimes absent, some pings without navigation, and unknown
/// packet types mixed in. Returns the pings and the encoded stream.
pub fn random_xtf_case(seed: u64) -> (sidescan::XtfFileHeader, Vec<sidescan::SonarPing>, Vec<u8>) {
    use chrono::{Duration, TimeZone, Utc};
    use sidescan::xtf::XtfWriter;
    use sidescan::{ChannelInfo, NavFix, Side, SonarPing, XtfFileHeader};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bytes: u8 = if rng.random_bool(0.5) { 1 } else { 2 };
    let sides = [Side::Port, Side::Starboard, Side::Other];
    let nch = rng.random_range(1..=3usize);
    let infos: Vec<ChannelInfo> = (0..nch)
        .map(|i| ChannelInfo {
            side: sides[i],
            bytes_per_sample: bytes,
            samples_per_ping_hint: 0,
            tilt_angle: rng.random_bool(0.5).then(|| rng.random_range(0.0..60.0f32)),
        })
        .collect();
    let header = XtfFileHeader::new(infos.clone());

    let start = Utc.with_ymd_and_hms(2023, 12, 31, 23, 59, 0).unwrap();
    let n_pings = rng.random_range(0..25u32);
    let mut pings = Vec::new();
    let mut out = XtfWriter::new(Vec::new(), &header).unwrap();
    let mut t = start;
    let mut number = rng.random_range(0..1000u32);
    for _ in 0..n_pings {
        t += Duration::milliseconds(10 * rng.random_range(1..200i64));
        number += rng.random_range(1..4);
        let nav = rng.random_bool(0.7).then(|| {
            let lag = Duration::milliseconds(10 * rng.random_range(0..50i64));
            NavFix::measured(
                rng.random_range(-89.0..89.0),
                rng.random_range(-179.0..179.0),
                rng.random_range(0.0..359.9f32),
                t - lag,
            )
        });
        let altitude = rng.random_bool(0.8).then(|| rng.random_range(1.0..50.0f32));
        let roll = rng.random_bool(0.5).then(|| rng.random_range(-20.0..20.0f32));
        let velocity = rng.random_range(1400.0..1560.0f32);
        let n_samples = rng.random_range(1..300usize);
        let max = if bytes == 1 { 255 } else { u16::MAX };
        let batch: Vec<SonarPing> = infos
            .iter()
            .enumerate()
            .map(|(c, info)| SonarPing {
                ping_number: number,
                timestamp: t,
                channel: c as u16,
                side: info.side,
                bytes_per_sample: bytes,
                samples: (0..n_samples).map(|_| rng.random_range(0..=max)).collect(),
                slant_range_max: rng.random_range(10.0..300.0f32),
                sensor_altitude: altitude,
                sound_velocity: velocity,
                nav: nav.clone(),
                tilt_angle: info.tilt_angle,
                roll_angle: roll,
            })
            .collect();
        if rng.random_bool(0.2) {
            let payload: Vec<u8> = (0..rng.random_range(0..100)).map(|_| rng.random()).collect();
            out.write_raw(rng.random_range(4..200u8), &payload).unwrap();
        }
        out.write_batch(&batch).unwrap();
        pings.extend(batch);
    }
    (header, pings, out.finish().unwrap())
}
