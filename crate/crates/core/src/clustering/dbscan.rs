use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in pixels.
    pub eps: f64,
    /// Neighbors within `eps`, the point itself included, needed to be a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 40.0,
            min_pts: 5,
        }
    }
}

impl DbscanParams {
    pub fn is_valid(&self) -> bool {
        self.eps > 0.0 && self.eps.is_finite() && self.min_pts >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

/// Uniform grid with cell size `eps` for radius queries.
struct GridIndex<'a> {
    points: &'a [(f64, f64)],
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn new(points: &'a [(f64, f64)], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            cells.entry(Self::key(p, eps)).or_default().push(i);
        }
        Self { points, eps, cells }
    }

    fn key((r, c): (f64, f64), eps: f64) -> (i64, i64) {
        ((r / eps).floor() as i64, (c / eps).floor() as i64)
    }

    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        let (kr, kc) = Self::key(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dr in -1..=1 {
            for dc in -1..=1 {
                if let Some(cell) = self.cells.get(&(kr + dr, kc + dc)) {
                    for &j in cell {
                        let q = self.points[j];
                        let (a, b) = (p.0 - q.0, p.1 - q.1);
                        if a * a + b * b <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// Labels and core flags.
pub fn dbscan_with_core(points: &[(f64, f64)], params: &DbscanParams) -> (Vec<Label>, Vec<bool>) {
    let n = points.len();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut core = vec![false; n];
    if n == 0 {
        return (Vec::new(), core);
    }
    let index = GridIndex::new(points, params.eps);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut nbrs = Vec::new();
    let mut next_id = 0usize;
    let mut queue: Vec<usize> = Vec::new();
    for &i in &order {
        if labels[i].is_some() {
            continue;
        }
        index.neighbors(i, &mut nbrs);
        if nbrs.len() < params.min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let id = next_id;
        next_id += 1;
        core[i] = true;
        labels[i] = Some(Label::Cluster(id));
        queue.clear();
        queue.extend(nbrs.iter().copied().filter(|&j| j != i));
        while let Some(j) = queue.pop() {
            match labels[j] {
                Some(Label::Cluster(_)) => continue,
                Some(Label::Noise) => {
                    // rejected seeds are never core; they become border points
                    labels[j] = Some(Label::Cluster(id));
                    continue;
                }
                None => labels[j] = Some(Label::Cluster(id)),
            }
            index.neighbors(j, &mut nbrs);
            if nbrs.len() >= params.min_pts {
                core[j] = true;
                queue.extend(nbrs.iter().copied().filter(|&k| !matches!(labels[k], Some(Label::Cluster(_)))));
            }
        }
    }
    (labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect(), core)
}

/// Density-based clustering with Euclidean pixel distance.
///
/// Points are scanned in (row, col) order; a border point joins the first
/// cluster that reaches it.
pub fn dbscan(points: &[(f64, f64)], params: &DbscanParams) -> Vec<Label> {
    dbscan_with_core(points, params).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_point_is_noise() {
        let labels = dbscan(&[(3.0, 4.0)], &DbscanParams { eps: 10.0, min_pts: 2 });
        assert_eq!(labels, vec![Label::Noise]);
    }

    #[test]
    fn single_point_core_with_min_pts_one() {
        let labels = dbscan(&[(3.0, 4.0)], &DbscanParams { eps: 1.0, min_pts: 1 });
        assert_eq!(labels, vec![Label::Cluster(0)]);
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // two dense groups on a line sharing one border point in the middle
        let mut pts = vec![];
        for k in 0..5 {
            pts.push((0.0, k as f64 * 0.5));
        }
        pts.push((0.0, 5.0));
        for k in 0..5 {
            pts.push((0.0, 8.0 + k as f64 * 0.5));
        }
        let p = DbscanParams { eps: 3.0, min_pts: 4 };
        let (labels, core) = dbscan_with_core(&pts, &p);
        assert!(!core[5]);
        assert_eq!(labels[5], Label::Cluster(0));
        assert_eq!(labels[6], Label::Cluster(1));
    }

    #[test]
    fn boundary_distance_counts_as_neighbor() {
        let pts = [(0.0, 0.0), (0.0, 40.0)];
        let labels = dbscan(&pts, &DbscanParams { eps: 40.0, min_pts: 2 });
        assert_eq!(labels, vec![Label::Cluster(0), Label::Cluster(0)]);
    }
}
