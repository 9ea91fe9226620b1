//! Feature-cloud clustering and region-of-interest extraction.

mod dbscan;

pub use dbscan::{dbscan, dbscan_with_core, DbscanParams, Label};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::features::{Detector, FeaturePoint};

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub row_min: i64,
    pub col_min: i64,
    pub row_max: i64,
    pub col_max: i64,
}

impl BBox {
    pub fn area(&self) -> i64 {
        (self.row_max - self.row_min + 1).max(0) * (self.col_max - self.col_min + 1).max(0)
    }

    pub fn width(&self) -> i64 {
        self.col_max - self.col_min
    }

    pub fn height(&self) -> i64 {
        self.row_max - self.row_min
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }

    pub fn intersection(&self, o: &BBox) -> Option<BBox> {
        let b = BBox {
            row_min: self.row_min.max(o.row_min),
            col_min: self.col_min.max(o.col_min),
            row_max: self.row_max.min(o.row_max),
            col_max: self.col_max.min(o.col_max),
        };
        (b.row_min <= b.row_max && b.col_min <= b.col_max).then_some(b)
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox {
            row_min: self.row_min.min(o.row_min),
            col_min: self.col_min.min(o.col_min),
            row_max: self.row_max.max(o.row_max),
            col_max: self.col_max.max(o.col_max),
        }
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        let inter = self.intersection(o).map_or(0, |b| b.area());
        let union = self.area() + o.area() - inter;
        if union <= 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn clamp_to(&self, bounds: &BBox) -> BBox {
        BBox {
            row_min: self.row_min.clamp(bounds.row_min, bounds.row_max),
            col_min: self.col_min.clamp(bounds.col_min, bounds.col_max),
            row_max: self.row_max.clamp(bounds.row_min, bounds.row_max),
            col_max: self.col_max.clamp(bounds.col_min, bounds.col_max),
        }
    }

    pub fn shifted(&self, drow: i64, dcol: i64) -> BBox {
        BBox {
            row_min: self.row_min + drow,
            col_min: self.col_min + dcol,
            row_max: self.row_max + drow,
            col_max: self.col_max + dcol,
        }
    }
}

/// A cluster's padded bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub cluster_id: usize,
    pub member_points: Vec<FeaturePoint>,
    /// (row, col), unweighted member mean.
    pub centroid: (f64, f64),
    pub bbox: BBox,
    pub padding_applied: i64,
}

impl RegionOfInterest {
    fn from_members(cluster_id: usize, members: Vec<FeaturePoint>, padding: i64, bounds: &BBox) -> Self {
        let n = members.len() as f64;
        let (sr, sc) = members
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.row as f64, b + p.col as f64));
        let extent = members.iter().fold(
            BBox {
                row_min: i64::MAX,
                col_min: i64::MAX,
                row_max: i64::MIN,
                col_max: i64::MIN,
            },
            |b, p| {
                let (r, c) = (p.row as i64, p.col as i64);
                BBox {
                    row_min: b.row_min.min(r),
                    col_min: b.col_min.min(c),
                    row_max: b.row_max.max(r),
                    col_max: b.col_max.max(c),
                }
            },
        );
        let padded = BBox {
            row_min: extent.row_min - padding,
            col_min: extent.col_min - padding,
            row_max: extent.row_max + padding,
            col_max: extent.col_max + padding,
        };
        Self {
            cluster_id,
            member_points: members,
            centroid: (sr / n, sc / n),
            bbox: padded.clamp_to(bounds),
            padding_applied: padding,
        }
    }

    /// Unpadded extent of the members.
    pub fn member_extent(&self) -> BBox {
        let mut b = BBox {
            row_min: i64::MAX,
            col_min: i64::MAX,
            row_max: i64::MIN,
            col_max: i64::MIN,
        };
        for p in &self.member_points {
            b.row_min = b.row_min.min(p.row as i64);
            b.col_min = b.col_min.min(p.col as i64);
            b.row_max = b.row_max.max(p.row as i64);
            b.col_max = b.col_max.max(p.col as i64);
        }
        b
    }

    /// Moves the region into a frame offset by `drow` rows.
    pub fn shift_rows(&mut self, drow: usize) {
        for p in &mut self.member_points {
            p.row += drow;
        }
        self.centroid.0 += drow as f64;
        self.bbox = self.bbox.shifted(drow as i64, 0);
    }
}

/// One region per non-noise cluster, ordered by cluster id.
pub fn clusters_to_rois(
    points: &[FeaturePoint],
    labels: &[Label],
    padding: i64,
    rows: usize,
    cols: usize,
) -> Vec<RegionOfInterest> {
    assert_eq!(points.len(), labels.len(), "labels do not match points");
    let mut groups: BTreeMap<usize, Vec<FeaturePoint>> = BTreeMap::new();
    for (p, l) in points.iter().zip(labels) {
        if let Label::Cluster(id) = l {
            groups.entry(*id).or_default().push(*p);
        }
    }
    let bounds = BBox {
        row_min: 0,
        col_min: 0,
        row_max: rows as i64 - 1,
        col_max: cols as i64 - 1,
    };
    groups
        .into_iter()
        .map(|(id, members)| RegionOfInterest::from_members(id, members, padding, &bounds))
        .collect()
}

fn uf_find(p: &mut [usize], mut x: usize) -> usize {
    while p[x] != x {
        p[x] = p[p[x]];
        x = p[x];
    }
    x
}

/// Transitively merges regions whose boxes overlap with IoU above
/// `iou_threshold`, repeating until no pair qualifies. Cluster ids are
/// renumbered in (row, col) order of the resulting boxes.
pub fn merge_rois(rois: &[RegionOfInterest], iou_threshold: f64) -> Vec<RegionOfInterest> {
    let mut current: Vec<RegionOfInterest> = rois.to_vec();
    loop {
        let n = current.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut merged_any = false;
        for i in 0..n {
            for j in i + 1..n {
                if current[i].bbox.iou(&current[j].bbox) > iou_threshold {
                    let (a, b) = (uf_find(&mut parent, i), uf_find(&mut parent, j));
                    if a != b {
                        parent[b.max(a)] = a.min(b);
                        merged_any = true;
                    }
                }
            }
        }
        if !merged_any {
            break;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = uf_find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        current = groups
            .into_values()
            .map(|idx| {
                if idx.len() == 1 {
                    return current[idx[0]].clone();
                }
                let mut seen: HashSet<(usize, usize, Detector)> = HashSet::new();
                let mut members = Vec::new();
                let mut bounds = current[idx[0]].bbox;
                let mut padding = 0;
                for &i in &idx {
                    bounds = bounds.union(&current[i].bbox);
                    padding = padding.max(current[i].padding_applied);
                    for p in &current[i].member_points {
                        if seen.insert((p.row, p.col, p.detector)) {
                            members.push(*p);
                        }
                    }
                }
                members.sort_by_key(|f| (f.row, f.col, f.detector));
                RegionOfInterest::from_members(current[idx[0]].cluster_id, members, padding, &bounds)
            })
            .collect();
    }
    current.sort_by_key(|r| (r.bbox.row_min, r.bbox.col_min, r.bbox.row_max, r.bbox.col_max));
    for (i, r) in current.iter_mut().enumerate() {
        r.cluster_id = i;
    }
    current
}
