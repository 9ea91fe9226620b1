//! Feature cloud generation: FAST corners plus MSER region centroids.

pub mod fast;
pub mod mser;

use serde::{Deserialize, Serialize};

pub use fast::{fast_corners, fast_detect, non_max_suppression, FastParams};
pub use mser::{mser_detect, MserParams, MserRegion, Polarity};

use crate::waterfall::WaterfallTile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    Fast,
    MserPlus,
    MserMinus,
}

/// One point of the feature cloud, in tile pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub row: usize,
    pub col: usize,
    pub detector: Detector,
    /// FAST: max passing threshold. MSER: variation (lower is more stable).
    pub score: f64,
}

/// Unweighted mean of the region's pixels, rounded half up.
pub fn region_centroid(pixels: &[(usize, usize)]) -> (usize, usize) {
    assert!(!pixels.is_empty(), "centroid of an empty region");
    let n = pixels.len() as f64;
    let (sr, sc) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(r, c)| (a + r as f64, b + c as f64));
    ((sr / n + 0.5).floor() as usize, (sc / n + 0.5).floor() as usize)
}

impl MserRegion {
    pub fn to_feature(&self) -> FeaturePoint {
        let (row, col) = region_centroid(&self.pixels);
        FeaturePoint {
            row,
            col,
            detector: match self.polarity {
                Polarity::Minus => Detector::MserMinus,
                Polarity::Plus => Detector::MserPlus,
            },
            score: self.stability,
        }
    }
}

/// MSER settings with the area ceiling expressed as a fraction of the tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MserSettings {
    pub delta: u32,
    pub min_area: usize,
    pub max_area_frac: f64,
    pub max_variation: f64,
}

impl Default for MserSettings {
    fn default() -> Self {
        Self {
            delta: 5,
            min_area: 30,
            max_area_frac: 0.01,
            max_variation: 0.5,
        }
    }
}

impl MserSettings {
    pub fn params_for(&self, tile: &WaterfallTile) -> MserParams {
        MserParams {
            delta: self.delta,
            min_area: self.min_area,
            max_area: ((tile.rows * tile.cols) as f64 * self.max_area_frac).floor() as usize,
            max_variation: self.max_variation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureConfig {
    pub fast: Option<FastParams>,
    pub mser: Option<MserSettings>,
}

impl FeatureConfig {
    pub fn both() -> Self {
        Self {
            fast: Some(FastParams::default()),
            mser: Some(MserSettings::default()),
        }
    }
}

/// Union of FAST corners and MSER centroids, sorted by (row, col, detector).
pub fn detect_features(tile: &WaterfallTile, config: &FeatureConfig) -> Vec<FeaturePoint> {
    let (fast, mser) = rayon::join(
        || config.fast.map(|p| fast_detect(tile, p)).unwrap_or_default(),
        || {
            config
                .mser
                .map(|s| {
                    let params = s.params_for(tile);
                    if !params.is_valid() {
                        return Vec::new();
                    }
                    mser_detect(tile, &params)
                        .iter()
                        .map(MserRegion::to_feature)
                        .collect::<Vec<_>>()
                })
                .unwrap_or_default()
        },
    );
    let mut cloud = fast;
    cloud.extend(mser);
    cloud.sort_by_key(|f| (f.row, f.col, f.detector));
    cloud
}
