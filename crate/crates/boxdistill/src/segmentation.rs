//! Graph-based superpixel segmentation.
//!
//! Builds an 8-connected grid graph over the smoothed image with Euclidean
//! color distances as edge weights, then merges components in ascending edge
//! order whenever the joining edge is no heavier than the internal difference
//! of either component plus its size credit `k / |C|`. A post pass absorbs
//! components smaller than `min_size` into the neighbor behind their
//! lightest boundary edge.

use crate::error::{Error, Result};
use crate::raster::{gaussian_smooth, ImageRaster};

/// Minimum image side accepted by [`segment`].
pub const MIN_SEGMENT_SIDE: usize = 8;

/// Default minimum segment size in pixels.
pub const DEFAULT_MIN_SIZE: usize = 20;

/// A dense per-pixel labeling. Labels are `0..count`, every segment nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl SuperpixelMap {
    pub fn from_labels(width: usize, height: usize, raw: &[usize]) -> Self {
        assert_eq!(raw.len(), width * height);
        let mut remap: Vec<Option<u32>> = vec![None; raw.len()];
        let mut labels = Vec::with_capacity(raw.len());
        let mut count = 0u32;
        for &r in raw {
            let l = *remap[r].get_or_insert_with(|| {
                let l = count;
                count += 1;
                l
            });
            labels.push(l);
        }
        Self {
            width,
            height,
            labels,
            count: count as usize,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn segment_count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel count per segment; sums to `width * height`.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
    /// max weight of an edge merged inside the component
    internal: Vec<f64>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (mut a, mut b) = (a, b);
        if self.rank[a as usize] < self.rank[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        if self.rank[a as usize] == self.rank[b as usize] {
            self.rank[a as usize] += 1;
        }
        self.size[a as usize] += self.size[b as usize];
        self.internal[a as usize] = self.internal[a as usize]
            .max(self.internal[b as usize])
            .max(weight);
        a
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: u32,
    b: u32,
    weight: f64,
}

/// Grid edges in deterministic order: for each pixel in row-major order, the
/// E, S, SE and NE neighbors (in that order). Color distances use the 8-bit
/// scale the usual `k` values are calibrated against.
fn grid_edges(img: &ImageRaster) -> Vec<Edge> {
    let (w, h) = (img.width(), img.height());
    let dist = |ax: usize, ay: usize, bx: usize, by: usize| -> f64 {
        let mut acc = 0.0;
        for c in 0..3 {
            let d = (img.get(c, ax, ay) - img.get(c, bx, by)) * 255.0;
            acc += d * d;
        }
        acc.sqrt()
    };
    let mut edges = Vec::with_capacity(4 * w * h);
    for y in 0..h {
        for x in 0..w {
            let a = (y * w + x) as u32;
            if x + 1 < w {
                edges.push(Edge { a, b: a + 1, weight: dist(x, y, x + 1, y) });
            }
            if y + 1 < h {
                edges.push(Edge { a, b: a + w as u32, weight: dist(x, y, x, y + 1) });
            }
            if x + 1 < w && y + 1 < h {
                edges.push(Edge { a, b: a + w as u32 + 1, weight: dist(x, y, x + 1, y + 1) });
            }
            if x + 1 < w && y > 0 {
                edges.push(Edge { a, b: a - w as u32 + 1, weight: dist(x, y, x + 1, y - 1) });
            }
        }
    }
    edges
}

/// Segments an image into superpixels.
///
/// `k` controls the merge threshold (larger k, larger segments), `sigma` the
/// pre-smoothing, `min_size` the post-pass floor on segment size. The edge
/// sort breaks weight ties by construction order, so the result is identical
/// across runs and platforms.
pub fn segment(img: &ImageRaster, k: f64, sigma: f64, min_size: usize) -> Result<SuperpixelMap> {
    if img.width() < MIN_SEGMENT_SIDE || img.height() < MIN_SEGMENT_SIDE {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: MIN_SEGMENT_SIDE,
        });
    }
    if k <= 0.0 {
        return Err(Error::InvalidParam {
            name: "k",
            value: k,
            requirement: "k > 0",
        });
    }
    if min_size < 1 {
        return Err(Error::InvalidParam {
            name: "min_size",
            value: min_size as f64,
            requirement: "min_size >= 1",
        });
    }

    let smoothed = gaussian_smooth(img, sigma);
    let mut edges = grid_edges(&smoothed);
    // stable: ties keep construction order (source index, then direction)
    edges.sort_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap());

    let n = img.width() * img.height();
    let mut uf = UnionFind::new(n);
    for e in &edges {
        let ra = uf.find(e.a);
        let rb = uf.find(e.b);
        if ra == rb {
            continue;
        }
        let ta = uf.internal[ra as usize] + k / uf.size[ra as usize] as f64;
        let tb = uf.internal[rb as usize] + k / uf.size[rb as usize] as f64;
        if e.weight <= ta.min(tb) {
            uf.union(ra, rb, e.weight);
        }
    }

    // absorb undersized components along their lightest boundary edges
    for e in &edges {
        let ra = uf.find(e.a);
        let rb = uf.find(e.b);
        if ra != rb
            && ((uf.size[ra as usize] as usize) < min_size
                || (uf.size[rb as usize] as usize) < min_size)
        {
            uf.union(ra, rb, e.weight);
        }
    }

    let roots: Vec<usize> = (0..n as u32).map(|i| uf.find(i) as usize).collect();
    Ok(SuperpixelMap::from_labels(img.width(), img.height(), &roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::noise_image;

    fn two_halves(w: usize, h: usize) -> ImageRaster {
        let mut img = ImageRaster::filled(w, h, [0.1, 0.1, 0.1]);
        for y in 0..h {
            for x in w / 2..w {
                img.set(0, x, y, 0.9);
                img.set(1, x, y, 0.9);
                img.set(2, x, y, 0.9);
            }
        }
        img
    }

    #[test]
    fn uniform_image_is_one_segment() {
        let img = ImageRaster::filled(16, 16, [0.3, 0.5, 0.7]);
        let map = segment(&img, 300.0, 0.8, 20).unwrap();
        assert_eq!(map.segment_count(), 1);
    }

    #[test]
    fn two_high_contrast_halves_give_two_segments() {
        // 16 px tall so the thin bands the smoothed step leaves at the
        // boundary fall under min_size and get absorbed into the halves
        let img = two_halves(32, 16);
        let map = segment(&img, 300.0, 0.8, 20).unwrap();
        assert_eq!(map.segment_count(), 2);
        assert_ne!(map.label(2, 8), map.label(29, 8));
        assert_eq!(map.label(2, 2), map.label(3, 13));
        assert_eq!(map.label(28, 2), map.label(30, 13));
    }

    #[test]
    fn rejects_tiny_images() {
        let img = ImageRaster::filled(4, 4, [0.5; 3]);
        assert!(matches!(
            segment(&img, 300.0, 0.8, 20),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn no_segment_below_min_size() {
        let img = noise_image(24, 24, 7);
        for &min_size in &[1usize, 5, 20, 50] {
            let map = segment(&img, 50.0, 0.8, min_size).unwrap();
            let sizes = map.segment_sizes();
            assert!(sizes.iter().all(|&s| s >= min_size || sizes.len() == 1));
            assert_eq!(sizes.iter().sum::<usize>(), 24 * 24);
        }
    }

    #[test]
    fn labels_are_dense_and_deterministic() {
        let img = noise_image(20, 20, 3);
        let a = segment(&img, 100.0, 0.8, 10).unwrap();
        let b = segment(&img, 100.0, 0.8, 10).unwrap();
        assert_eq!(a, b);
        let sizes = a.segment_sizes();
        assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn segments_are_connected_components() {
        let img = noise_image(24, 24, 11);
        let map = segment(&img, 80.0, 0.8, 8).unwrap();
        // flood fill per segment with 8-connectivity must reach every pixel
        let (w, h) = (map.width(), map.height());
        let mut seen = vec![false; w * h];
        let mut components = 0usize;
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            components += 1;
            let label = map.labels()[start];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(p) = stack.pop() {
                let (x, y) = (p % w, p / w);
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                            continue;
                        }
                        let q = ny as usize * w + nx as usize;
                        if !seen[q] && map.labels()[q] == label {
                            seen[q] = true;
                            stack.push(q);
                        }
                    }
                }
            }
        }
        assert_eq!(
            components,
            map.segment_count(),
            "every label must form a single 8-connected component"
        );
    }
}
