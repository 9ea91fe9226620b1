//! FAST segment-test corner detector with max-threshold scoring.

use rayon::prelude::*;

use super::{Detector, FeaturePoint};
use crate::waterfall::WaterfallTile;

/// Bresenham circle of radius 3, clockwise from 12 o'clock, as (drow, dcol).
pub const CIRCLE: [(isize, isize); 16] = [
    (-3, 0),
    (-3, 1),
    (-2, 2),
    (-1, 3),
    (0, 3),
    (1, 3),
    (2, 2),
    (3, 1),
    (3, 0),
    (3, -1),
    (2, -2),
    (1, -3),
    (0, -3),
    (-1, -3),
    (-2, -2),
    (-3, -1),
];

pub const RADIUS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastParams {
    pub threshold: u8,
    pub arc_len: u8,
}

impl Default for FastParams {
    fn default() -> Self {
        Self {
            threshold: 20,
            arc_len: 9,
        }
    }
}

impl FastParams {
    pub fn is_valid(&self) -> bool {
        self.threshold >= 1 && (9..=16).contains(&self.arc_len)
    }
}

/// True if `mask` (16 circle bits) has a cyclic run of at least `len` ones.
#[inline]
fn has_run(mask: u32, len: u32) -> bool {
    if mask == 0xffff {
        return true;
    }
    let mut m = mask | (mask << 16);
    for _ in 1..len {
        m &= m >> 1;
        if m == 0 {
            return false;
        }
    }
    m != 0
}

/// Largest over all `len`-arcs of the smallest value on the arc.
#[inline]
fn best_arc_min(d: &[i16; 16], len: usize) -> i16 {
    let mut best = i16::MIN;
    for start in 0..16 {
        let mut lo = i16::MAX;
        for k in 0..len {
            lo = lo.min(d[(start + k) & 15]);
            if lo <= best {
                break;
            }
        }
        best = best.max(lo);
    }
    best
}

/// Max-threshold score of a pixel: the largest `t` for which the segment test
/// still passes, or `None` if it fails at threshold `t`.
#[inline]
fn segment_score(tile: &WaterfallTile, offsets: &[isize; 16], idx: usize, t: i16, len: usize) -> Option<u8> {
    let px = &tile.pixels;
    let p = px[idx] as i16;
    let at = |k: usize| px[(idx as isize + offsets[k]) as usize] as i16;

    // compass points 1, 5, 9, 13: any len-arc contains at least len/4 of them
    let need = (len / 4) as u32;
    let (mut nb, mut nd) = (0u32, 0u32);
    for k in [0, 4, 8, 12] {
        let v = at(k);
        nb += (v > p + t) as u32;
        nd += (v < p - t) as u32;
    }
    if nb < need && nd < need {
        return None;
    }

    let mut bright = [0i16; 16];
    let mut dark = [0i16; 16];
    let (mut bm, mut dm) = (0u32, 0u32);
    for k in 0..16 {
        let v = at(k);
        bright[k] = v - p;
        dark[k] = p - v;
        bm |= ((v > p + t) as u32) << k;
        dm |= ((v < p - t) as u32) << k;
    }
    let pass_b = has_run(bm, len as u32);
    let pass_d = has_run(dm, len as u32);
    if !pass_b && !pass_d {
        return None;
    }
    let mut score = 0i16;
    if pass_b {
        score = score.max(best_arc_min(&bright, len) - 1);
    }
    if pass_d {
        score = score.max(best_arc_min(&dark, len) - 1);
    }
    Some(score.clamp(0, 255) as u8)
}

/// All pixels passing the segment test, before non-maximum suppression,
/// sorted by (row, col).
pub fn fast_corners(tile: &WaterfallTile, params: FastParams) -> Vec<FeaturePoint> {
    let (rows, cols) = (tile.rows, tile.cols);
    if rows < 2 * RADIUS + 1 || cols < 2 * RADIUS + 1 {
        return Vec::new();
    }
    let stride = cols as isize;
    let mut offsets = [0isize; 16];
    for (o, (dr, dc)) in offsets.iter_mut().zip(CIRCLE) {
        *o = dr * stride + dc;
    }
    let t = params.threshold as i16;
    let len = params.arc_len as usize;

    (RADIUS..rows - RADIUS)
        .into_par_iter()
        .flat_map_iter(|r| {
            let offsets = &offsets;
            (RADIUS..cols - RADIUS).filter_map(move |c| {
                segment_score(tile, offsets, r * cols + c, t, len).map(|s| FeaturePoint {
                    row: r,
                    col: c,
                    detector: Detector::Fast,
                    score: s as f64,
                })
            })
        })
        .collect()
}

/// 3x3 non-maximum suppression on score. Equal scores go to the earlier
/// point in (row, col) order. Input must be sorted by (row, col).
pub fn non_max_suppression(corners: &[FeaturePoint], rows: usize, cols: usize) -> Vec<FeaturePoint> {
    let mut score = vec![-1.0f64; rows * cols];
    for p in corners {
        score[p.row * cols + p.col] = p.score;
    }
    corners
        .iter()
        .filter(|p| {
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (r, c) = (p.row as isize + dr, p.col as isize + dc);
                    if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
                        continue;
                    }
                    let s = score[r as usize * cols + c as usize];
                    let earlier = (r, c) < (p.row as isize, p.col as isize);
                    if s > p.score || (s == p.score && earlier) {
                        return false;
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}

/// FAST corners after non-maximum suppression.
pub fn fast_detect(tile: &WaterfallTile, params: FastParams) -> Vec<FeaturePoint> {
    let raw = fast_corners(tile, params);
    non_max_suppression(&raw, tile.rows, tile.cols)
}
