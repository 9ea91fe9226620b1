//! Pixel-to-geographic mapping and object catalog construction.

mod catalog;

pub use catalog::{
    object_properties, read_csv, read_geojson, to_csv_string, to_geojson_string, write_catalog, CatalogError,
    CatalogFormat, CSV_HEADER,
};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::RegionOfInterest;
use crate::xtf::{NavFix, NavTrack, Side};

/// Mean earth radius for the local tangent-plane projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GeorefError {
    #[error("row {row} has no navigation fix")]
    UngeoreferencedRow { row: usize },
    #[error("row {row} is outside the navigation record")]
    RowOutOfRange { row: usize },
}

/// Fixed offset of the sonar from the navigation reference, meters.
/// `along` is positive forward, `across` positive to starboard.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Layback {
    pub along: f64,
    pub across: f64,
}

/// Navigation and timing of one waterfall row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNav {
    pub ping_number: u32,
    pub timestamp: DateTime<Utc>,
    pub nav: Option<NavFix>,
}

impl NavTrack for RowNav {
    fn time(&self) -> DateTime<Utc> {
        self.timestamp
    }
    fn nav(&self) -> Option<&NavFix> {
        self.nav.as_ref()
    }
    fn set_nav(&mut self, fix: NavFix) {
        self.nav = Some(fix);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PixelGeoContext<'a> {
    /// Indexed by channel-global row.
    pub rows: &'a [RowNav],
    pub ground_range_per_col: f64,
    pub channel_side: Side,
    pub layback: Layback,
}

/// Moves `(lat, lon)` by `d` meters toward `bearing` degrees on a local tangent plane.
pub fn offset_position(lat: f64, lon: f64, bearing_deg: f64, d: f64) -> (f64, f64) {
    if d == 0.0 {
        return (lat, lon);
    }
    let b = bearing_deg.to_radians();
    let dlat = (d * b.cos()) / EARTH_RADIUS_M * (180.0 / std::f64::consts::PI);
    let dlon = (d * b.sin()) / (EARTH_RADIUS_M * lat.to_radians().cos()) * (180.0 / std::f64::consts::PI);
    (lat + dlat, lon + dlon)
}

/// Flat-earth distance between two positions, meters.
pub fn local_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let mean_lat = ((a.0 + b.0) / 2.0).to_radians();
    let dn = (b.0 - a.0).to_radians() * EARTH_RADIUS_M;
    let de = (b.1 - a.1).to_radians() * EARTH_RADIUS_M * mean_lat.cos();
    dn.hypot(de)
}

fn across_bearing(heading: f64, side: Side) -> f64 {
    match side {
        Side::Port => heading - 90.0,
        Side::Starboard | Side::Other => heading + 90.0,
    }
}

/// Geographic position of a waterfall pixel. `row` is rounded to the nearest ping.
pub fn pixel_to_geo(row: f64, col: f64, ctx: &PixelGeoContext<'_>) -> Result<(f64, f64), GeorefError> {
    let r = row.round().max(0.0) as usize;
    let rn = ctx.rows.get(r).ok_or(GeorefError::RowOutOfRange { row: r })?;
    let nav = rn.nav.as_ref().ok_or(GeorefError::UngeoreferencedRow { row: r })?;
    let heading = nav.heading as f64;
    let (mut lat, mut lon) = (nav.latitude, nav.longitude);
    if ctx.layback.along != 0.0 {
        (lat, lon) = offset_position(lat, lon, heading, ctx.layback.along);
    }
    if ctx.layback.across != 0.0 {
        (lat, lon) = offset_position(lat, lon, heading + 90.0, ctx.layback.across);
    }
    let d = col * ctx.ground_range_per_col;
    Ok(offset_position(lat, lon, across_bearing(heading, ctx.channel_side), d))
}

/// One catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoObject {
    pub object_id: u64,
    /// Absent when the centroid row has no navigation.
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub extent_along_m: f64,
    pub extent_across_m: f64,
    pub channel: Side,
    pub ping_first: u32,
    pub ping_last: u32,
    pub feature_count: usize,
    pub source: String,
    pub detected_at: DateTime<Utc>,
    /// Channel-global pixel centroid (row, col).
    pub pixel_row: f64,
    pub pixel_col: f64,
    pub ungeoreferenced: bool,
    pub degenerate_track: bool,
}

/// Georeferences one region given in channel-global row coordinates.
pub fn roi_to_object(roi: &RegionOfInterest, ctx: &PixelGeoContext<'_>, source: &str) -> GeoObject {
    let last_row = ctx.rows.len().saturating_sub(1) as i64;
    let r0 = roi.bbox.row_min.clamp(0, last_row) as usize;
    let r1 = roi.bbox.row_max.clamp(0, last_row) as usize;
    let center_row = (roi.centroid.0.round().max(0.0) as usize).min(last_row as usize);

    let position = pixel_to_geo(roi.centroid.0, roi.centroid.1, ctx).ok();
    let mut extent_along = 0.0;
    let mut track_complete = true;
    for r in r0..r1 {
        match (&ctx.rows[r].nav, &ctx.rows[r + 1].nav) {
            (Some(a), Some(b)) => {
                extent_along += local_distance((a.latitude, a.longitude), (b.latitude, b.longitude))
            }
            _ => track_complete = false,
        }
    }
    let ungeoreferenced = position.is_none() || !track_complete;

    GeoObject {
        object_id: 0,
        latitude: position.map(|p| p.0),
        longitude: position.map(|p| p.1),
        extent_along_m: extent_along,
        extent_across_m: roi.bbox.width() as f64 * ctx.ground_range_per_col,
        channel: ctx.channel_side,
        ping_first: ctx.rows[r0].ping_number,
        ping_last: ctx.rows[r1].ping_number,
        feature_count: roi.member_points.len(),
        source: source.to_string(),
        detected_at: ctx.rows[center_row].timestamp,
        pixel_row: roi.centroid.0,
        pixel_col: roi.centroid.1,
        ungeoreferenced,
        degenerate_track: !ungeoreferenced && extent_along == 0.0,
    }
}
