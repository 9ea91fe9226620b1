//! Sidescan sonar object detection without prior training.
//!
//! Raw XTF data goes through three stages:
//!
//! 1. **Image synthesis** ([`xtf`], [`waterfall`]): pings are decoded, slant-range
//!    corrected, stacked into waterfall tiles and histogram equalized.
//! 2. **Feature cloud** ([`features`]): FAST corners and MSER regions are detected
//!    on each tile and merged into one point cloud.
//! 3. **Clustering** ([`clustering`], [`georef`]): DBSCAN groups the cloud into
//!    padded regions of interest, which are georeferenced into an object catalog.
//!
//! [`synth`] generates synthetic surveys with known ground truth, and
//! [`pipeline`] wires the stages together for files and live streams.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod config;
pub mod features;
pub mod georef;
pub mod imageio;
pub mod pipeline;
pub mod synth;
pub mod waterfall;
pub mod xtf;

pub use clustering::{DbscanParams, Label, RegionOfInterest};
pub use config::PipelineConfig;
pub use features::{Detector, FeaturePoint, MserParams};
pub use georef::{GeoObject, PixelGeoContext};
pub use pipeline::{Pipeline, PipelineError};
pub use synth::{SurveyScenario, TargetSpec};
pub use waterfall::{SlantGeometry, WaterfallTile};
pub use xtf::{ChannelInfo, NavFix, Side, SonarPing, XtfFileHeader};
