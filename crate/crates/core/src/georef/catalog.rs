//! GeoJSON and CSV catalog serialization.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::GeoObject;
use crate::xtf::Side;

pub const CSV_HEADER: [&str; 11] = [
    "object_id",
    "latitude",
    "longitude",
    "extent_along_m",
    "extent_across_m",
    "channel",
    "ping_first",
    "ping_last",
    "feature_count",
    "source",
    "detected_at",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogFormat {
    GeoJson,
    Csv,
}

impl CatalogFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CatalogFormat::GeoJson => "geojson",
            CatalogFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Malformed(String),
}

fn sorted(objects: &[GeoObject]) -> Vec<&GeoObject> {
    let mut v: Vec<&GeoObject> = objects.iter().collect();
    v.sort_by(|a, b| {
        (a.ping_first, a.ping_last, a.channel, a.object_id).cmp(&(b.ping_first, b.ping_last, b.channel, b.object_id))
    });
    v
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Properties of one object as a JSON map; also the live event payload.
pub fn object_properties(o: &GeoObject) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("object_id".into(), json!(o.object_id));
    m.insert("latitude".into(), json!(o.latitude));
    m.insert("longitude".into(), json!(o.longitude));
    m.insert("extent_along_m".into(), json!(o.extent_along_m));
    m.insert("extent_across_m".into(), json!(o.extent_across_m));
    m.insert("channel".into(), json!(o.channel.as_str()));
    m.insert("ping_first".into(), json!(o.ping_first));
    m.insert("ping_last".into(), json!(o.ping_last));
    m.insert("feature_count".into(), json!(o.feature_count));
    m.insert("source".into(), json!(o.source));
    m.insert("detected_at".into(), json!(timestamp(&o.detected_at)));
    m.insert("pixel_row".into(), json!(o.pixel_row));
    m.insert("pixel_col".into(), json!(o.pixel_col));
    m.insert("ungeoreferenced".into(), json!(o.ungeoreferenced));
    m.insert("degenerate_track".into(), json!(o.degenerate_track));
    m
}

/// RFC 7946 FeatureCollection of centroid points.
pub fn to_geojson_string(objects: &[GeoObject]) -> String {
    let features: Vec<Value> = sorted(objects)
        .into_iter()
        .map(|o| {
            let geometry = match (o.longitude, o.latitude) {
                (Some(lon), Some(lat)) => json!({"type": "Point", "coordinates": [lon, lat]}),
                _ => Value::Null,
            };
            json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": Value::Object(object_properties(o)),
            })
        })
        .collect();
    let fc = json!({"type": "FeatureCollection", "features": features});
    let mut s = serde_json::to_string_pretty(&fc).expect("catalog serializes");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv_string(objects: &[GeoObject]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for o in sorted(objects) {
        w.write_record([
            o.object_id.to_string(),
            fmt_opt(o.latitude),
            fmt_opt(o.longitude),
            o.extent_along_m.to_string(),
            o.extent_across_m.to_string(),
            o.channel.as_str().to_string(),
            o.ping_first.to_string(),
            o.ping_last.to_string(),
            o.feature_count.to_string(),
            o.source.clone(),
            timestamp(&o.detected_at),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Writes the catalog to `path`, sorted by ping order.
pub fn write_catalog(objects: &[GeoObject], format: CatalogFormat, path: &Path) -> Result<(), CatalogError> {
    let body = match format {
        CatalogFormat::GeoJson => to_geojson_string(objects),
        CatalogFormat::Csv => to_csv_string(objects),
    };
    std::fs::write(path, body).map_err(|source| CatalogError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn bad(msg: impl Into<String>) -> CatalogError {
    CatalogError::Malformed(msg.into())
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, CatalogError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| bad(format!("bad timestamp `{s}`: {e}")))
}

fn parse_side(s: &str) -> Result<Side, CatalogError> {
    s.parse().map_err(bad)
}

pub fn read_geojson(text: &str) -> Result<Vec<GeoObject>, CatalogError> {
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let features = v["features"].as_array().ok_or_else(|| bad("missing features"))?;
    features
        .iter()
        .map(|f| {
            let p = &f["properties"];
            let num = |k: &str| p[k].as_f64().ok_or_else(|| bad(format!("missing {k}")));
            let int = |k: &str| p[k].as_u64().ok_or_else(|| bad(format!("missing {k}")));
            let (lon, lat) = match f["geometry"]["coordinates"].as_array() {
                Some(c) if c.len() == 2 => (c[0].as_f64(), c[1].as_f64()),
                _ => (None, None),
            };
            Ok(GeoObject {
                object_id: int("object_id")?,
                latitude: lat,
                longitude: lon,
                extent_along_m: num("extent_along_m")?,
                extent_across_m: num("extent_across_m")?,
                channel: parse_side(p["channel"].as_str().unwrap_or_default())?,
                ping_first: int("ping_first")? as u32,
                ping_last: int("ping_last")? as u32,
                feature_count: int("feature_count")? as usize,
                source: p["source"].as_str().unwrap_or_default().to_string(),
                detected_at: parse_time(p["detected_at"].as_str().unwrap_or_default())?,
                pixel_row: num("pixel_row")?,
                pixel_col: num("pixel_col")?,
                ungeoreferenced: p["ungeoreferenced"].as_bool().unwrap_or(false),
                degenerate_track: p["degenerate_track"].as_bool().unwrap_or(false),
            })
        })
        .collect()
}

/// Reads a CSV catalog. Pixel coordinates are not part of the CSV layout and
/// come back as NaN; the flags are re-derived from the columns.
pub fn read_csv(text: &str) -> Result<Vec<GeoObject>, CatalogError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad("unexpected CSV header"));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |i: usize| -> Result<f64, CatalogError> {
                rec[i].parse().map_err(|_| bad(format!("bad number in column {}", CSV_HEADER[i])))
            };
            let opt = |i: usize| -> Result<Option<f64>, CatalogError> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    f(i).map(Some)
                }
            };
            let u = |i: usize| -> Result<u64, CatalogError> {
                rec[i].parse().map_err(|_| bad(format!("bad integer in column {}", CSV_HEADER[i])))
            };
            let latitude = opt(1)?;
            let extent_along_m = f(3)?;
            Ok(GeoObject {
                object_id: u(0)?,
                latitude,
                longitude: opt(2)?,
                extent_along_m,
                extent_across_m: f(4)?,
                channel: parse_side(&rec[5])?,
                ping_first: u(6)? as u32,
                ping_last: u(7)? as u32,
                feature_count: u(8)? as usize,
                source: rec[9].to_string(),
                detected_at: parse_time(&rec[10])?,
                pixel_row: f64::NAN,
                pixel_col: f64::NAN,
                ungeoreferenced: latitude.is_none(),
                degenerate_track: latitude.is_some() && extent_along_m == 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn obj(id: u64, ping: u32) -> GeoObject {
        GeoObject {
            object_id: id,
            latitude: Some(48.123456789),
            longitude: Some(-68.5),
            extent_along_m: 4.5,
            extent_across_m: 3.25,
            channel: Side::Port,
            ping_first: ping,
            ping_last: ping + 10,
            feature_count: 12,
            source: "survey, \"a\".xtf".into(),
            detected_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            pixel_row: 10.5,
            pixel_col: 200.25,
            ungeoreferenced: false,
            degenerate_track: false,
        }
    }

    #[test]
    fn empty_catalogs() {
        let g: Value = serde_json::from_str(&to_geojson_string(&[])).unwrap();
        assert_eq!(g["type"], "FeatureCollection");
        assert_eq!(g["features"].as_array().unwrap().len(), 0);
        assert_eq!(to_csv_string(&[]).trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn geojson_coordinate_order() {
        let g: Value = serde_json::from_str(&to_geojson_string(&[obj(1, 5)])).unwrap();
        let f = &g["features"][0];
        assert_eq!(f["geometry"]["coordinates"][0], -68.5);
        assert_eq!(f["geometry"]["coordinates"][1], 48.123456789);
    }

    #[test]
    fn sorted_by_ping_order() {
        let text = to_csv_string(&[obj(2, 50), obj(1, 5)]);
        let back = read_csv(&text).unwrap();
        assert_eq!(back.iter().map(|o| o.ping_first).collect::<Vec<_>>(), vec![5, 50]);
        assert_eq!(back[0].source, "survey, \"a\".xtf");
    }

    #[test]
    fn ungeoreferenced_has_null_geometry() {
        let mut o = obj(1, 1);
        o.latitude = None;
        o.longitude = None;
        o.ungeoreferenced = true;
        let text = to_geojson_string(&[o.clone()]);
        let g: Value = serde_json::from_str(&text).unwrap();
        assert!(g["features"][0]["geometry"].is_null());
        assert_eq!(read_geojson(&text).unwrap(), vec![o]);
    }

    #[test]
    fn unwritable_path_names_path() {
        let err = write_catalog(&[], CatalogFormat::Csv, Path::new("/nonexistent-dir/x/cat.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/cat.csv"));
    }
}
