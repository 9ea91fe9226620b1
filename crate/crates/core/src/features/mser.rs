//! Maximally stable extremal regions from a union-find component tree.
//!
//! Pixels are added in increasing intensity. Every time a connected component
//! of `{I <= level}` grows, a tree node is created at that level. Stability of
//! a node is the smallest variation `(|R(l+delta)| - |R(l-delta)|) / |R(l)|`
//! over the levels it lives through, where the region below is followed along
//! the largest child.

use rayon::join;

use crate::waterfall::WaterfallTile;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MserParams {
    pub delta: u32,
    pub min_area: usize,
    pub max_area: usize,
    pub max_variation: f64,
}

impl MserParams {
    /// Defaults with `max_area` at `max_area_frac` of the tile.
    pub fn for_tile(rows: usize, cols: usize, max_area_frac: f64) -> Self {
        Self {
            delta: 5,
            min_area: 30,
            max_area: ((rows * cols) as f64 * max_area_frac).floor() as usize,
            max_variation: 0.5,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.delta >= 1 && self.min_area > 0 && self.min_area < self.max_area && self.max_variation >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Dark region on brighter surroundings.
    Minus,
    /// Bright region on darker surroundings.
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MserRegion {
    /// (row, col), sorted.
    pub pixels: Vec<(usize, usize)>,
    pub polarity: Polarity,
    /// Variation at the most stable level; lower is more stable.
    pub stability: f64,
}

struct ComponentTree {
    level: Vec<u8>,
    area: Vec<u32>,
    parent: Vec<u32>,
    main_child: Vec<u32>,
    /// Live (non-merged) node ids.
    live: Vec<u32>,
    /// Children in CSR form, indexed by node id.
    child_start: Vec<u32>,
    children: Vec<u32>,
    /// Pixels owned directly by each node, CSR.
    pix_start: Vec<u32>,
    pixels: Vec<u32>,
}

fn find(uf: &mut [u32], mut x: u32) -> u32 {
    let mut root = x;
    while uf[root as usize] != root {
        root = uf[root as usize];
    }
    while uf[x as usize] != root {
        let next = uf[x as usize];
        uf[x as usize] = root;
        x = next;
    }
    root
}

fn resolve(alias: &mut [u32], n: u32) -> u32 {
    let mut root = n;
    while alias[root as usize] != NONE {
        root = alias[root as usize];
    }
    let mut x = n;
    while alias[x as usize] != NONE && alias[x as usize] != root {
        let next = alias[x as usize];
        alias[x as usize] = root;
        x = next;
    }
    root
}

impl ComponentTree {
    fn build(px: &[u8], rows: usize, cols: usize) -> Self {
        let n = px.len();
        // counting sort by intensity, stable in index order
        let mut count = [0usize; 257];
        for &v in px {
            count[v as usize + 1] += 1;
        }
        for i in 0..256 {
            count[i + 1] += count[i];
        }
        let mut order = vec![0u32; n];
        let mut next = count;
        for (i, &v) in px.iter().enumerate() {
            order[next[v as usize]] = i as u32;
            next[v as usize] += 1;
        }

        let mut uf: Vec<u32> = vec![NONE; n];
        let mut rank = vec![0u8; n];
        let mut node_of_root = vec![NONE; n];
        let mut owner = vec![NONE; n];
        let mut level = Vec::with_capacity(n);
        let mut area: Vec<u32> = Vec::with_capacity(n);
        let mut parent: Vec<u32> = Vec::with_capacity(n);
        let mut alias: Vec<u32> = Vec::with_capacity(n);

        for &p in &order {
            let pu = p as usize;
            let lv = px[pu];
            uf[pu] = p;
            let node = level.len() as u32;
            level.push(lv);
            area.push(1);
            parent.push(NONE);
            alias.push(NONE);
            node_of_root[pu] = node;
            owner[pu] = node;

            let (r, c) = (pu / cols, pu % cols);
            let mut neigh = [NONE; 4];
            if r > 0 {
                neigh[0] = (pu - cols) as u32;
            }
            if r + 1 < rows {
                neigh[1] = (pu + cols) as u32;
            }
            if c > 0 {
                neigh[2] = (pu - 1) as u32;
            }
            if c + 1 < cols {
                neigh[3] = (pu + 1) as u32;
            }
            for q in neigh {
                if q == NONE || uf[q as usize] == NONE {
                    continue;
                }
                let rp = find(&mut uf, p);
                let rq = find(&mut uf, q);
                if rp == rq {
                    continue;
                }
                let na = node_of_root[rp as usize];
                let nb = node_of_root[rq as usize];
                // na always belongs to the current level
                let merged = if level[nb as usize] == lv {
                    area[na as usize] += area[nb as usize];
                    alias[nb as usize] = na;
                    na
                } else {
                    parent[nb as usize] = na;
                    area[na as usize] += area[nb as usize];
                    na
                };
                let root = if rank[rp as usize] < rank[rq as usize] {
                    uf[rp as usize] = rq;
                    rq
                } else {
                    if rank[rp as usize] == rank[rq as usize] {
                        rank[rp as usize] += 1;
                    }
                    uf[rq as usize] = rp;
                    rp
                };
                node_of_root[root as usize] = merged;
            }
        }

        let nodes = level.len();
        for i in 0..nodes {
            if parent[i] != NONE {
                parent[i] = resolve(&mut alias, parent[i]);
            }
        }
        let live: Vec<u32> = (0..nodes as u32).filter(|&i| alias[i as usize] == NONE).collect();

        let mut main_child = vec![NONE; nodes];
        let mut child_count = vec![0u32; nodes + 1];
        for &c in &live {
            let p = parent[c as usize];
            if p == NONE {
                continue;
            }
            child_count[p as usize + 1] += 1;
            let m = main_child[p as usize];
            if m == NONE || area[c as usize] > area[m as usize] {
                main_child[p as usize] = c;
            }
        }
        for i in 0..nodes {
            child_count[i + 1] += child_count[i];
        }
        let child_start = child_count.clone();
        let mut fill = child_count;
        let mut children = vec![0u32; child_start[nodes] as usize];
        for &c in &live {
            let p = parent[c as usize];
            if p != NONE {
                children[fill[p as usize] as usize] = c;
                fill[p as usize] += 1;
            }
        }

        let mut pix_count = vec![0u32; nodes + 1];
        for o in owner.iter_mut() {
            *o = resolve(&mut alias, *o);
            pix_count[*o as usize + 1] += 1;
        }
        for i in 0..nodes {
            pix_count[i + 1] += pix_count[i];
        }
        let pix_start = pix_count.clone();
        let mut fill = pix_count;
        let mut pixels = vec![0u32; n];
        for (i, &o) in owner.iter().enumerate() {
            pixels[fill[o as usize] as usize] = i as u32;
            fill[o as usize] += 1;
        }

        Self {
            level,
            area,
            parent,
            main_child,
            live,
            child_start,
            children,
            pix_start,
            pixels,
        }
    }

    /// Last level (exclusive) at which `n` is its own region.
    fn death(&self, n: u32) -> u32 {
        match self.parent[n as usize] {
            NONE => 256,
            p => self.level[p as usize] as u32,
        }
    }

    /// Area of the region containing `n` at level `x >= level(n)`.
    fn area_above(&self, mut n: u32, x: i64) -> u32 {
        loop {
            let p = self.parent[n as usize];
            if p == NONE || self.level[p as usize] as i64 > x {
                return self.area[n as usize];
            }
            n = p;
        }
    }

    /// Area along the main branch at level `x`, 0 if the branch did not exist yet.
    fn area_below(&self, mut n: u32, x: i64) -> u32 {
        loop {
            if self.level[n as usize] as i64 <= x {
                return self.area[n as usize];
            }
            n = self.main_child[n as usize];
            if n == NONE {
                return 0;
            }
        }
    }

    fn variation_at(&self, n: u32, i: i64, delta: i64) -> f64 {
        let up = self.area_above(n, i + delta) as f64;
        let down = self.area_below(n, i - delta) as f64;
        (up - down) / self.area[n as usize] as f64
    }

    /// Smallest variation over the node's lifetime. Both area terms are step
    /// functions of the level, so only their breakpoints need evaluating.
    fn stability(&self, n: u32, delta: i64) -> f64 {
        let birth = self.level[n as usize] as i64;
        let death = self.death(n) as i64;
        let mut candidates = vec![birth, birth + delta];
        let mut a = self.parent[n as usize];
        while a != NONE && (self.level[a as usize] as i64) < death + delta {
            candidates.push(self.level[a as usize] as i64 - delta);
            a = self.parent[a as usize];
        }
        let mut d = self.main_child[n as usize];
        while d != NONE && (self.level[d as usize] as i64) > birth - delta {
            candidates.push(self.level[d as usize] as i64 + delta);
            d = self.main_child[d as usize];
        }
        if d != NONE {
            candidates.push(self.level[d as usize] as i64 + delta);
        }
        candidates
            .into_iter()
            .filter(|&i| i >= birth && i < death)
            .map(|i| self.variation_at(n, i, delta))
            .fold(f64::INFINITY, f64::min)
    }

    fn collect_pixels(&self, n: u32, cols: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.area[n as usize] as usize);
        let mut stack = vec![n];
        while let Some(m) = stack.pop() {
            let m = m as usize;
            for &p in &self.pixels[self.pix_start[m] as usize..self.pix_start[m + 1] as usize] {
                out.push((p as usize / cols, p as usize % cols));
            }
            stack.extend_from_slice(&self.children[self.child_start[m] as usize..self.child_start[m + 1] as usize]);
        }
        out.sort_unstable();
        out
    }
}

/// Dark maximally stable regions of a raw image.
fn dark_regions(px: &[u8], rows: usize, cols: usize, params: &MserParams) -> Vec<(Vec<(usize, usize)>, f64)> {
    if px.is_empty() {
        return Vec::new();
    }
    let tree = ComponentTree::build(px, rows, cols);
    let delta = params.delta as i64;
    let mut q = vec![f64::INFINITY; tree.level.len()];
    for &n in &tree.live {
        // the root spans the whole image and is never reported
        if tree.parent[n as usize] != NONE {
            q[n as usize] = tree.stability(n, delta);
        }
    }

    let mut out = Vec::new();
    for &n in &tree.live {
        let nu = n as usize;
        let area = tree.area[nu] as usize;
        if area < params.min_area || area > params.max_area || !(q[nu] <= params.max_variation) {
            continue;
        }
        let p = tree.parent[nu];
        if p != NONE && !(q[nu] < q[p as usize]) {
            continue;
        }
        let c = tree.main_child[nu];
        if c != NONE && q[nu] > q[c as usize] {
            continue;
        }
        out.push((tree.collect_pixels(n, cols), q[nu]));
    }
    out.sort_by(|a, b| a.0[0].cmp(&b.0[0]).then(a.0.len().cmp(&b.0.len())));
    out
}

/// MSER- (dark) regions on the tile and MSER+ (bright) regions on its inversion.
pub fn mser_detect(tile: &WaterfallTile, params: &MserParams) -> Vec<MserRegion> {
    let inverted: Vec<u8> = tile.pixels.iter().map(|v| 255 - v).collect();
    let (minus, plus) = join(
        || dark_regions(&tile.pixels, tile.rows, tile.cols, params),
        || dark_regions(&inverted, tile.rows, tile.cols, params),
    );
    let wrap = |pol: Polarity| {
        move |(pixels, stability): (Vec<(usize, usize)>, f64)| MserRegion {
            pixels,
            polarity: pol,
            stability,
        }
    };
    minus
        .into_iter()
        .map(wrap(Polarity::Minus))
        .chain(plus.into_iter().map(wrap(Polarity::Plus)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_tile(size: usize, top: usize, side: usize, inside: u8, outside: u8) -> WaterfallTile {
        let mut px = vec![outside; size * size];
        for r in top..top + side {
            for c in top..top + side {
                px[r * size + c] = inside;
            }
        }
        WaterfallTile::from_pixels(size, size, px)
    }

    fn params(min_area: usize) -> MserParams {
        MserParams {
            delta: 5,
            min_area,
            max_area: 5000,
            max_variation: 0.5,
        }
    }

    #[test]
    fn uniform_has_no_regions() {
        let tile = WaterfallTile::from_pixels(32, 32, vec![90; 1024]);
        assert!(mser_detect(&tile, &params(30)).is_empty());
    }

    #[test]
    fn dark_square_is_single_region() {
        let tile = square_tile(100, 30, 20, 0, 255);
        let regions = mser_detect(&tile, &params(30));
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        assert_eq!(r.polarity, Polarity::Minus);
        let expected: Vec<_> = (30..50).flat_map(|r| (30..50).map(move |c| (r, c))).collect();
        assert_eq!(r.pixels, expected);
        assert_eq!(r.stability, 0.0);
    }

    #[test]
    fn area_filter_removes_square() {
        let tile = square_tile(100, 30, 20, 0, 255);
        assert!(mser_detect(&tile, &params(500)).is_empty());
    }

    #[test]
    fn bright_square_is_plus_region() {
        let tile = square_tile(100, 10, 10, 250, 20);
        let regions = mser_detect(&tile, &params(30));
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].polarity, Polarity::Plus);
        assert_eq!(regions[0].pixels.len(), 100);
    }

    #[test]
    fn short_lived_blob_is_unstable() {
        // a 6x6 blob only 3 levels darker than its surroundings
        let tile = square_tile(40, 10, 6, 100, 103);
        let mut p = params(30);
        p.max_area = 1000;
        assert!(mser_detect(&tile, &p).is_empty());
    }

    #[test]
    fn stability_handles_nested_levels() {
        // 0-valued core inside a 100-valued ring on 255 ground
        let mut px = vec![255u8; 60 * 60];
        for r in 10..40 {
            for c in 10..40 {
                px[r * 60 + c] = 100;
            }
        }
        for r in 20..30 {
            for c in 20..30 {
                px[r * 60 + c] = 0;
            }
        }
        let tile = WaterfallTile::from_pixels(60, 60, px);
        let p = MserParams {
            delta: 5,
            min_area: 30,
            max_area: 3000,
            max_variation: 0.5,
        };
        let regions = mser_detect(&tile, &p);
        // both nested regions have zero variation; the plateau keeps the outer one
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].pixels.len(), 900);
    }
}
