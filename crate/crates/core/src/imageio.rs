//! Debug image dumps: PGM tiles and PPM overlays.

use std::path::Path;

use crate::clustering::{Label, RegionOfInterest};
use crate::features::{Detector, FeaturePoint};
use crate::waterfall::WaterfallTile;
use crate::xtf::Side;

pub const RED: [u8; 3] = [255, 0, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];
pub const WHITE: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayKind {
    None,
    /// FAST corners red, MSER centroids green.
    Features,
    /// Region boxes white, clustered features green, noise red.
    Rois,
}

impl std::str::FromStr for OverlayKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(OverlayKind::None),
            "features" => Ok(OverlayKind::Features),
            "rois" => Ok(OverlayKind::Rois),
            _ => Err(format!("unknown overlay `{s}` (expected features, rois or none)")),
        }
    }
}

pub fn tile_file_name(survey: &str, side: Side, origin_row: usize, ext: &str) -> String {
    format!("{survey}_{side}_{origin_row}.{ext}")
}

pub fn overlay_file_name(survey: &str, side: Side, origin_row: usize, kind: OverlayKind) -> Option<String> {
    let tag = match kind {
        OverlayKind::None => return None,
        OverlayKind::Features => "features",
        OverlayKind::Rois => "rois",
    };
    Some(format!("{survey}_{side}_{origin_row}_{tag}.ppm"))
}

/// Binary PGM (P5).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Binary PPM (P6) from packed RGB.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Decodes P5 or P6 with maxval 255. Returns (channels, width, height, data).
pub fn decode_pnm(bytes: &[u8]) -> Option<(usize, usize, usize, &[u8])> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).ok()?);
    }
    i += 1;
    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        _ => return None,
    };
    let w: usize = fields[1].parse().ok()?;
    let h: usize = fields[2].parse().ok()?;
    if fields[3] != "255" {
        return None;
    }
    let data = bytes.get(i..i + w * h * channels)?;
    Some((channels, w, h, data))
}

pub fn write_pgm(path: &Path, tile: &WaterfallTile) -> std::io::Result<()> {
    std::fs::write(path, encode_pgm(tile.cols, tile.rows, &tile.pixels))
}

fn gray_rgb(tile: &WaterfallTile) -> Vec<u8> {
    tile.pixels.iter().flat_map(|&v| [v, v, v]).collect()
}

fn put(rgb: &mut [u8], cols: usize, row: usize, col: usize, color: [u8; 3]) {
    let i = (row * cols + col) * 3;
    rgb[i..i + 3].copy_from_slice(&color);
}

/// One marker pixel per feature.
pub fn render_feature_overlay(tile: &WaterfallTile, features: &[FeaturePoint]) -> Vec<u8> {
    let mut rgb = gray_rgb(tile);
    for f in features {
        let color = match f.detector {
            Detector::Fast => RED,
            Detector::MserPlus | Detector::MserMinus => GREEN,
        };
        put(&mut rgb, tile.cols, f.row, f.col, color);
    }
    rgb
}

/// Boxes first, then one marker pixel per feature so markers stay visible.
/// `rois` are in tile coordinates.
pub fn render_roi_overlay(
    tile: &WaterfallTile,
    features: &[FeaturePoint],
    labels: &[Label],
    rois: &[RegionOfInterest],
) -> Vec<u8> {
    let mut rgb = gray_rgb(tile);
    let (rmax, cmax) = (tile.rows as i64 - 1, tile.cols as i64 - 1);
    for roi in rois {
        let b = roi.bbox;
        for c in b.col_min.max(0)..=b.col_max.min(cmax) {
            for r in [b.row_min, b.row_max] {
                if (0..=rmax).contains(&r) {
                    put(&mut rgb, tile.cols, r as usize, c as usize, WHITE);
                }
            }
        }
        for r in b.row_min.max(0)..=b.row_max.min(rmax) {
            for c in [b.col_min, b.col_max] {
                if (0..=cmax).contains(&c) {
                    put(&mut rgb, tile.cols, r as usize, c as usize, WHITE);
                }
            }
        }
    }
    for (f, l) in features.iter().zip(labels) {
        let color = if matches!(l, Label::Noise) { RED } else { GREEN };
        put(&mut rgb, tile.cols, f.row, f.col, color);
    }
    rgb
}
