//! Pipeline configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::clustering::DbscanParams;
use crate::features::{FastParams, FeatureConfig, MserSettings};
use crate::georef::Layback;
use crate::xtf::Side;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {field} {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastSection {
    pub threshold: u8,
    pub arc_len: u8,
}

impl Default for FastSection {
    fn default() -> Self {
        let p = FastParams::default();
        Self {
            threshold: p.threshold,
            arc_len: p.arc_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MserSection {
    pub delta: u32,
    pub min_area: usize,
    pub max_area_frac: f64,
    pub max_variation: f64,
}

impl Default for MserSection {
    fn default() -> Self {
        let s = MserSettings::default();
        Self {
            delta: s.delta,
            min_area: s.min_area,
            max_area_frac: s.max_area_frac,
            max_variation: s.max_variation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbscanSection {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanSection {
    fn default() -> Self {
        let p = DbscanParams::default();
        Self {
            eps: p.eps,
            min_pts: p.min_pts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoiSection {
    pub padding: i64,
    pub merge_iou: f64,
}

impl Default for RoiSection {
    fn default() -> Self {
        Self {
            padding: 20,
            merge_iou: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileSection {
    pub rows: usize,
    pub overlap: usize,
    pub equalize: bool,
}

impl Default for TileSection {
    fn default() -> Self {
        Self {
            rows: 512,
            overlap: 128,
            equalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeorefSection {
    pub layback: LaybackSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaybackSection {
    pub along: f64,
    pub across: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Fast,
    Mser,
}

/// Which sonar channels to process.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ChannelSelection {
    #[default]
    All,
    Sides(Vec<Side>),
}

impl ChannelSelection {
    pub fn includes(&self, side: Side) -> bool {
        match self {
            ChannelSelection::All => true,
            ChannelSelection::Sides(s) => s.contains(&side),
        }
    }

    /// Parses `all` or a comma-separated side list.
    pub fn parse_list(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(ChannelSelection::All);
        }
        s.split(',')
            .map(|p| p.trim().parse::<Side>())
            .collect::<Result<Vec<_>, _>>()
            .map(ChannelSelection::Sides)
    }
}

impl Serialize for ChannelSelection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ChannelSelection::All => s.serialize_str("all"),
            ChannelSelection::Sides(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ChannelSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<Side>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "all" => Ok(ChannelSelection::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected \"all\" or a list of sides, got \"{w}\""
            ))),
            Raw::List(v) => Ok(ChannelSelection::Sides(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub channels: ChannelSelection,
    pub detectors: Vec<DetectorKind>,
    /// Upper bound on worker threads for tile processing.
    pub workers: usize,
    pub fast: FastSection,
    pub mser: MserSection,
    pub dbscan: DbscanSection,
    pub roi: RoiSection,
    pub tile: TileSection,
    pub georef: GeorefSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            channels: ChannelSelection::All,
            detectors: vec![DetectorKind::Fast, DetectorKind::Mser],
            workers: 4,
            fast: FastSection::default(),
            mser: MserSection::default(),
            dbscan: DbscanSection::default(),
            roi: RoiSection::default(),
            tile: TileSection::default(),
            georef: GeorefSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.fast;
        if f.threshold < 1 {
            return Err(invalid("fast.threshold", "must be >= 1"));
        }
        if !(9..=16).contains(&f.arc_len) {
            return Err(invalid("fast.arc_len", format!("must be in [9, 16] (got {})", f.arc_len)));
        }
        let m = &self.mser;
        if m.delta < 1 {
            return Err(invalid("mser.delta", "must be >= 1"));
        }
        if m.min_area < 1 {
            return Err(invalid("mser.min_area", "must be >= 1"));
        }
        if !(m.max_area_frac > 0.0 && m.max_area_frac <= 1.0) {
            return Err(invalid("mser.max_area_frac", format!("must be in (0, 1] (got {})", m.max_area_frac)));
        }
        if !(m.max_variation >= 0.0 && m.max_variation.is_finite()) {
            return Err(invalid("mser.max_variation", "must be a finite value >= 0"));
        }
        let d = &self.dbscan;
        if !(d.eps > 0.0 && d.eps.is_finite()) {
            return Err(invalid("dbscan.eps", format!("must be > 0 (got {})", d.eps)));
        }
        if d.min_pts < 1 {
            return Err(invalid("dbscan.min_pts", "must be >= 1"));
        }
        if self.roi.padding < 0 {
            return Err(invalid("roi.padding", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.roi.merge_iou) {
            return Err(invalid("roi.merge_iou", "must be in [0, 1]"));
        }
        if self.tile.rows < 8 {
            return Err(invalid("tile.rows", "must be >= 8"));
        }
        if self.tile.overlap >= self.tile.rows {
            return Err(invalid("tile.overlap", "must be smaller than tile.rows"));
        }
        let l = &self.georef.layback;
        if !(l.along.is_finite() && l.across.is_finite()) {
            return Err(invalid("georef.layback", "offsets must be finite"));
        }
        if self.detectors.is_empty() {
            return Err(invalid("detectors", "must name at least one detector"));
        }
        if matches!(&self.channels, ChannelSelection::Sides(s) if s.is_empty()) {
            return Err(invalid("channels", "must name at least one side"));
        }
        if self.workers < 1 {
            return Err(invalid("workers", "must be >= 1"));
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            fast: self.detectors.contains(&DetectorKind::Fast).then_some(FastParams {
                threshold: self.fast.threshold,
                arc_len: self.fast.arc_len,
            }),
            mser: self.detectors.contains(&DetectorKind::Mser).then_some(MserSettings {
                delta: self.mser.delta,
                min_area: self.mser.min_area,
                max_area_frac: self.mser.max_area_frac,
                max_variation: self.mser.max_variation,
            }),
        }
    }

    pub fn dbscan_params(&self) -> DbscanParams {
        DbscanParams {
            eps: self.dbscan.eps,
            min_pts: self.dbscan.min_pts,
        }
    }

    pub fn layback(&self) -> Layback {
        Layback {
            along: self.georef.layback.along,
            across: self.georef.layback.across,
        }
    }
}
