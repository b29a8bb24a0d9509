//! Handcrafted region descriptors standing in for CNN features: a coarse
//! color histogram, edge-density statistics and normalized geometry, 76
//! values per proposal.

use crate::evidence::edge_mask;
use crate::evidence::integral::Integral;
use crate::geometry::BoundingBox;
use crate::mat::Mat;
use crate::raster::{pixel_rect, ImageRaster};

/// Descriptor length: 64 color bins + 8 edge stats + 4 geometry values.
pub const FEATURE_DIM: usize = 64 + 8 + 4;

const F_BINS_PER_CHANNEL: usize = 4;

/// Per-image structures the extractor reads from.
pub struct FeatureContext {
    width: usize,
    height: usize,
    color_bins: Vec<u8>,
    edges: Integral<u32>,
}

impl FeatureContext {
    pub fn new(img: &ImageRaster) -> Self {
        let (w, h) = (img.width(), img.height());
        let bin =
            |v: f64| ((v * F_BINS_PER_CHANNEL as f64) as usize).min(F_BINS_PER_CHANNEL - 1);
        let color_bins = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let idx = (bin(img.get(0, x, y)) * F_BINS_PER_CHANNEL + bin(img.get(1, x, y)))
                    * F_BINS_PER_CHANNEL
                    + bin(img.get(2, x, y));
                idx as u8
            })
            .collect();
        let mask = edge_mask(img);
        let edges = Integral::build(w, h, |x, y| mask[y * w + x] as u32);
        Self {
            width: w,
            height: h,
            color_bins,
            edges,
        }
    }

    fn edge_density(&self, rect: Option<(usize, usize, usize, usize)>) -> f64 {
        match rect {
            Some((x1, y1, x2, y2)) if x2 > x1 && y2 > y1 => {
                let area = ((x2 - x1) * (y2 - y1)) as f64;
                self.edges.sum(x1, y1, x2, y2) as f64 / area
            }
            _ => 0.0,
        }
    }

    /// Descriptor for one box.
    pub fn extract(&self, b: &BoundingBox) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        let Some((x1, y1, x2, y2)) = pixel_rect(b, self.width, self.height) else {
            // sub-pixel box: flat histogram, zero edges, raw geometry
            for v in out.iter_mut().take(64) {
                *v = 1.0 / 64.0;
            }
            self.write_geometry(b, &mut out);
            return out;
        };

        // color histogram, L1-normalized
        let area = ((x2 - x1) * (y2 - y1)) as f64;
        for y in y1..y2 {
            for x in x1..x2 {
                out[self.color_bins[y * self.width + x] as usize] += 1.0;
            }
        }
        for v in out.iter_mut().take(64) {
            *v /= area;
        }

        // edge statistics: whole box, shrunken core, the ring between them,
        // ring edges per perimeter, and the four half-boxes
        let outer = (x1, y1, x2, y2);
        let (cx, cy) = b.center();
        let core = BoundingBox::from_center(
            cx,
            cy,
            b.width() / std::f64::consts::SQRT_2,
            b.height() / std::f64::consts::SQRT_2,
        )
        .ok()
        .and_then(|inner| pixel_rect(&inner, self.width, self.height));

        out[64] = self.edge_density(Some(outer));
        out[65] = self.edge_density(core);
        let outer_edges = self.edges.sum(x1, y1, x2, y2);
        let core_edges = match core {
            Some((ix1, iy1, ix2, iy2)) => self.edges.sum(ix1, iy1, ix2, iy2),
            None => 0,
        };
        let core_area = core.map_or(0, |(ix1, iy1, ix2, iy2)| (ix2 - ix1) * (iy2 - iy1));
        let ring_area = (x2 - x1) * (y2 - y1) - core_area;
        out[66] = if ring_area > 0 {
            (outer_edges - core_edges) as f64 / ring_area as f64
        } else {
            0.0
        };
        out[67] = (outer_edges - core_edges) as f64 / (2 * ((x2 - x1) + (y2 - y1))) as f64;
        let xm = (x1 + x2) / 2;
        let ym = (y1 + y2) / 2;
        out[68] = self.edge_density(Some((x1, y1, xm.max(x1 + 1), y2)));
        out[69] = self.edge_density(Some((xm.min(x2 - 1), y1, x2, y2)));
        out[70] = self.edge_density(Some((x1, y1, x2, ym.max(y1 + 1))));
        out[71] = self.edge_density(Some((x1, ym.min(y2 - 1), x2, y2)));

        self.write_geometry(b, &mut out);
        out
    }

    fn write_geometry(&self, b: &BoundingBox, out: &mut [f64; FEATURE_DIM]) {
        let (cx, cy) = b.center();
        out[72] = cx / self.width as f64;
        out[73] = cy / self.height as f64;
        out[74] = b.width() / self.width as f64;
        out[75] = b.height() / self.height as f64;
    }

    /// Feature matrix for a list of boxes, one row per box.
    pub fn extract_all(&self, boxes: &[BoundingBox]) -> Mat {
        Mat::from_rows(boxes.iter().map(|b| self.extract(b).to_vec()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::noise_image;

    #[test]
    fn histogram_part_sums_to_one() {
        let img = noise_image(48, 48, 13);
        let ctx = FeatureContext::new(&img);
        for b in [
            BoundingBox::new(0.0, 0.0, 48.0, 48.0).unwrap(),
            BoundingBox::new(3.0, 5.0, 20.0, 31.0).unwrap(),
            BoundingBox::new(40.0, 40.0, 47.0, 47.0).unwrap(),
        ] {
            let f = ctx.extract(&b);
            let sum: f64 = f[..64].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(f.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn geometry_features_are_normalized() {
        let img = noise_image(96, 96, 1);
        let ctx = FeatureContext::new(&img);
        let f = ctx.extract(&BoundingBox::new(24.0, 48.0, 48.0, 96.0).unwrap());
        assert!((f[72] - 0.375).abs() < 1e-12);
        assert!((f[73] - 0.75).abs() < 1e-12);
        assert!((f[74] - 0.25).abs() < 1e-12);
        assert!((f[75] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solid_color_box_concentrates_one_bin() {
        let mut img = ImageRaster::filled(32, 32, [0.1, 0.1, 0.1]);
        for y in 8..24 {
            for x in 8..24 {
                img.set(0, x, y, 0.9);
            }
        }
        let ctx = FeatureContext::new(&img);
        let f = ctx.extract(&BoundingBox::new(9.0, 9.0, 23.0, 23.0).unwrap());
        // (0.9, 0.1, 0.1) -> bins (3, 0, 0) -> index 48
        assert_eq!(f[48], 1.0);
    }
}
