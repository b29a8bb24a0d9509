//! Bottom-up object evidence.
//!
//! Four per-box cues computed from the image alone, each normalized to
//! `[0, 1]` per image: superpixel straddling (SS), color contrast (CC), edge
//! density (ED) and multi-scale saliency (MS). Per-image structures (run
//! tables, integral images, saliency pyramids) are built once and are
//! immutable; scoring a box against them is pure and cheap.

pub mod integral;
pub mod saliency;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ProposalSet};
use crate::raster::{pixel_rect, ImageRaster, Plane};
use crate::segmentation::{segment, SuperpixelMap, DEFAULT_MIN_SIZE};

use integral::Integral;

/// Saliency pyramid scales: the image is resized so its longer side matches
/// each scale before the spectral residual is taken.
pub const MS_SCALES: [usize; 5] = [16, 24, 32, 48, 64];

/// Which evidence a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    Ss,
    Cc,
    Ed,
    Ms,
    Mean,
}

impl std::fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EvidenceKind::Ss => "ss",
            EvidenceKind::Cc => "cc",
            EvidenceKind::Ed => "ed",
            EvidenceKind::Ms => "ms",
            EvidenceKind::Mean => "mean",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EvidenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ss" => Ok(EvidenceKind::Ss),
            "cc" => Ok(EvidenceKind::Cc),
            "ed" => Ok(EvidenceKind::Ed),
            "ms" => Ok(EvidenceKind::Ms),
            "mean" => Ok(EvidenceKind::Mean),
            _ => Err(Error::InvalidParam {
                name: "kind",
                value: f64::NAN,
                requirement: "one of ss, cc, ed, ms, mean",
            }),
        }
    }
}

/// Evidence parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvidenceConfig {
    pub kind: EvidenceKind,
    pub theta_ms: f64,
    pub theta_cc: f64,
    pub theta_ed: f64,
    pub ss_sigma: f64,
    pub ss_k: f64,
    pub ss_min_size: usize,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            kind: EvidenceKind::Ss,
            theta_ms: 0.2,
            theta_cc: 2.0,
            theta_ed: 2.0,
            ss_sigma: 0.8,
            ss_k: 300.0,
            ss_min_size: DEFAULT_MIN_SIZE,
        }
    }
}

impl EvidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_cc > 1.0) {
            return Err(Error::InvalidParam {
                name: "theta_cc",
                value: self.theta_cc,
                requirement: "> 1",
            });
        }
        if !(self.theta_ed > 1.0) {
            return Err(Error::InvalidParam {
                name: "theta_ed",
                value: self.theta_ed,
                requirement: "> 1",
            });
        }
        if !(self.theta_ms > 0.0 && self.theta_ms < 1.0) {
            return Err(Error::InvalidParam {
                name: "theta_ms",
                value: self.theta_ms,
                requirement: "in (0, 1)",
            });
        }
        if !(self.ss_sigma > 0.0) {
            return Err(Error::InvalidParam {
                name: "ss_sigma",
                value: self.ss_sigma,
                requirement: "> 0",
            });
        }
        if !(self.ss_k > 0.0) {
            return Err(Error::InvalidParam {
                name: "ss_k",
                value: self.ss_k,
                requirement: "> 0",
            });
        }
        Ok(())
    }
}

/// Per-proposal evidence values for one image. `raw` keeps the
/// pre-normalization values, `normalized` is in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceReport {
    pub image_id: String,
    pub kind: EvidenceKind,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Frozen per-image min-max normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    lo: f64,
    hi: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }

    /// Rescales into `[0, 1]`; a degenerate range maps everything to 0.
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        let range = self.hi - self.lo;
        if range > 0.0 {
            ((v - self.lo) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

fn normalize(values: &[f64]) -> Vec<f64> {
    let mm = MinMax::fit(values);
    values.iter().map(|&v| mm.apply(v)).collect()
}

// ---------------------------------------------------------------------------
// Superpixel straddling
// ---------------------------------------------------------------------------

/// Run-length table of a superpixel map: per row, the maximal label runs in
/// column order. Counting label overlap with a window costs one scan of the
/// runs crossing it instead of a pass over its pixels.
#[derive(Debug, Clone)]
pub struct SsMaps {
    width: usize,
    height: usize,
    sizes: Vec<u32>,
    rows: Vec<Vec<(u32, u32, u32)>>,
}

impl SsMaps {
    pub fn from_superpixels(map: &SuperpixelMap) -> Self {
        let (w, h) = (map.width(), map.height());
        let mut rows = Vec::with_capacity(h);
        for y in 0..h {
            let mut runs: Vec<(u32, u32, u32)> = Vec::new();
            let mut x = 0;
            while x < w {
                let label = map.label(x, y);
                let start = x as u32;
                while x < w && map.label(x, y) == label {
                    x += 1;
                }
                runs.push((label, start, x as u32));
            }
            rows.push(runs);
        }
        let sizes = map.segment_sizes().iter().map(|&s| s as u32).collect();
        Self {
            width: w,
            height: h,
            sizes,
            rows,
        }
    }

    /// `SS(w) = 1 - sum_s min(|s \ w|, |s ∩ w|) / |w|`, in `[0, 1]`.
    /// A box with no pixels after clipping scores 0.
    pub fn raw(&self, b: &BoundingBox) -> f64 {
        let Some((x1, y1, x2, y2)) = pixel_rect(b, self.width, self.height) else {
            return 0.0;
        };
        let window = ((x2 - x1) * (y2 - y1)) as f64;

        // tally |s ∩ w| per touched label
        let mut touched: Vec<(u32, u32)> = Vec::with_capacity(8);
        for runs in &self.rows[y1..y2] {
            let first = runs.partition_point(|&(_, _, end)| end as usize <= x1);
            for &(label, start, end) in &runs[first..] {
                if start as usize >= x2 {
                    break;
                }
                let overlap = (end.min(x2 as u32) - start.max(x1 as u32)) as u32;
                match touched.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, count)) => *count += overlap,
                    None => touched.push((label, overlap)),
                }
            }
        }

        let mut straddle = 0.0;
        for &(label, inside) in &touched {
            let outside = self.sizes[label as usize] - inside;
            straddle += inside.min(outside) as f64;
        }
        let ss = 1.0 - straddle / window;
        assert!(
            (0.0..=1.0).contains(&ss),
            "superpixel straddling out of bounds: {ss}"
        );
        ss
    }
}

/// Superpixel-straddling evidence for every proposal. SS is in `[0, 1]` by
/// construction, so `raw` and `normalized` coincide.
pub fn evidence_ss(map: &SuperpixelMap, boxes: &ProposalSet) -> EvidenceReport {
    let maps = SsMaps::from_superpixels(map);
    let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
    EvidenceReport {
        image_id: boxes.image_id.clone(),
        kind: EvidenceKind::Ss,
        normalized: raw.clone(),
        raw,
    }
}

// ---------------------------------------------------------------------------
// Color contrast
// ---------------------------------------------------------------------------

const CC_BINS_PER_CHANNEL: usize = 8;
const CC_BINS: usize = CC_BINS_PER_CHANNEL * CC_BINS_PER_CHANNEL * CC_BINS_PER_CHANNEL;

/// Per-pixel color bin indices for 8x8x8 histogramming.
#[derive(Debug, Clone)]
pub struct CcMaps {
    width: usize,
    height: usize,
    theta: f64,
    bins: Vec<u16>,
}

impl CcMaps {
    pub fn from_image(img: &ImageRaster, theta_cc: f64) -> Self {
        let (w, h) = (img.width(), img.height());
        let bin = |v: f64| ((v * CC_BINS_PER_CHANNEL as f64) as usize).min(CC_BINS_PER_CHANNEL - 1);
        let bins = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let idx = (bin(img.get(0, x, y)) * CC_BINS_PER_CHANNEL + bin(img.get(1, x, y)))
                    * CC_BINS_PER_CHANNEL
                    + bin(img.get(2, x, y));
                idx as u16
            })
            .collect();
        Self {
            width: w,
            height: h,
            theta: theta_cc,
            bins,
        }
    }

    fn count_rect(&self, rect: (usize, usize, usize, usize), hist: &mut [u32; CC_BINS]) -> u32 {
        let (x1, y1, x2, y2) = rect;
        for y in y1..y2 {
            for x in x1..x2 {
                hist[self.bins[y * self.width + x] as usize] += 1;
            }
        }
        ((x2 - x1) * (y2 - y1)) as u32
    }

    /// Chi-squared distance between the window's color histogram and its
    /// surrounding ring's, both L1-normalized. The surround is the window
    /// enlarged by `sqrt(theta_cc)` per side and clipped; if it is empty the
    /// raw value is 0.
    pub fn raw(&self, b: &BoundingBox) -> f64 {
        let Some(clipped) = b.clip(self.width as f64, self.height as f64) else {
            return 0.0;
        };
        let Some(wrect) = pixel_rect(&clipped, self.width, self.height) else {
            return 0.0;
        };
        let scale = self.theta.sqrt();
        let (cx, cy) = clipped.center();
        let enlarged =
            BoundingBox::from_center(cx, cy, clipped.width() * scale, clipped.height() * scale)
                .expect("enlarged box is valid")
                .clip(self.width as f64, self.height as f64)
                .expect("enlarged box contains the clipped window");
        let erect = pixel_rect(&enlarged, self.width, self.height)
            .expect("enlarged rect contains the window rect");

        let mut hist_w = [0u32; CC_BINS];
        let n_w = self.count_rect(wrect, &mut hist_w);
        let mut hist_e = [0u32; CC_BINS];
        let n_e = self.count_rect(erect, &mut hist_e);
        debug_assert!(n_e >= n_w);
        let n_s = n_e - n_w;
        if n_s == 0 || n_w == 0 {
            return 0.0;
        }

        let mut chi2 = 0.0;
        for i in 0..CC_BINS {
            let a = hist_w[i] as f64 / n_w as f64;
            let s = hist_e[i] - hist_w[i];
            let b = s as f64 / n_s as f64;
            if a + b > 0.0 {
                chi2 += (a - b) * (a - b) / (a + b);
            }
        }
        0.5 * chi2
    }
}

/// Color-contrast evidence, min-max normalized over the proposal set.
pub fn evidence_cc(
    img: &ImageRaster,
    boxes: &ProposalSet,
    theta_cc: f64,
) -> Result<EvidenceReport> {
    if !(theta_cc > 1.0) {
        return Err(Error::InvalidParam {
            name: "theta_cc",
            value: theta_cc,
            requirement: "> 1",
        });
    }
    let maps = CcMaps::from_image(img, theta_cc);
    let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
    Ok(EvidenceReport {
        image_id: boxes.image_id.clone(),
        kind: EvidenceKind::Cc,
        normalized: normalize(&raw),
        raw,
    })
}

// ---------------------------------------------------------------------------
// Edge density
// ---------------------------------------------------------------------------

/// Sobel gradient magnitudes of the grayscale image, reflect padded.
pub fn sobel_magnitudes(img: &ImageRaster) -> Plane {
    let gray = img.to_gray();
    let (w, h) = (gray.width, gray.height);
    let reflect = crate::raster::reflect;
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let px = |dx: isize, dy: isize| {
                gray.get(reflect(x as isize + dx, w), reflect(y as isize + dy, h))
            };
            let gx = px(1, -1) + 2.0 * px(1, 0) + px(1, 1)
                - px(-1, -1)
                - 2.0 * px(-1, 0)
                - px(-1, 1);
            let gy = px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)
                - px(-1, -1)
                - 2.0 * px(0, -1)
                - px(1, -1);
            out.set(x, y, (gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Binary edge map: magnitude strictly above the 90th percentile
/// (nearest-rank) of the per-image magnitudes. A flat image has no edges.
pub fn edge_mask(img: &ImageRaster) -> Vec<bool> {
    let mags = sobel_magnitudes(img);
    let mut sorted = mags.data.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.9 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let threshold = sorted[rank - 1];
    mags.data.iter().map(|&m| m > threshold).collect()
}

/// Edge integral for O(1) ring counts.
#[derive(Debug, Clone)]
pub struct EdMaps {
    width: usize,
    height: usize,
    theta: f64,
    integral: Integral<u32>,
}

impl EdMaps {
    pub fn from_image(img: &ImageRaster, theta_ed: f64) -> Self {
        let (w, h) = (img.width(), img.height());
        let mask = edge_mask(img);
        let integral = Integral::build(w, h, |x, y| mask[y * w + x] as u32);
        Self {
            width: w,
            height: h,
            theta: theta_ed,
            integral,
        }
    }

    /// Edge count in the inner ring (window minus the window shrunk by
    /// `sqrt(theta_ed)` per side) divided by the window's pixel perimeter.
    /// An empty ring scores 0.
    pub fn raw(&self, b: &BoundingBox) -> f64 {
        let Some(clipped) = b.clip(self.width as f64, self.height as f64) else {
            return 0.0;
        };
        let Some((x1, y1, x2, y2)) = pixel_rect(&clipped, self.width, self.height) else {
            return 0.0;
        };
        let outer = self.integral.sum(x1, y1, x2, y2);

        let shrink = self.theta.sqrt();
        let (cx, cy) = clipped.center();
        let inner_box = BoundingBox::from_center(
            cx,
            cy,
            clipped.width() / shrink,
            clipped.height() / shrink,
        )
        .expect("shrunk box is valid");
        let inner = match pixel_rect(&inner_box, self.width, self.height) {
            Some((ix1, iy1, ix2, iy2)) => {
                if (ix1, iy1, ix2, iy2) == (x1, y1, x2, y2) {
                    // ring has no pixels
                    return 0.0;
                }
                self.integral.sum(ix1, iy1, ix2, iy2)
            }
            None => 0,
        };
        let ring_edges = outer - inner;
        let perimeter = 2 * ((x2 - x1) + (y2 - y1));
        ring_edges as f64 / perimeter as f64
    }
}

/// Edge-density evidence, min-max normalized over the proposal set.
pub fn evidence_ed(
    img: &ImageRaster,
    boxes: &ProposalSet,
    theta_ed: f64,
) -> Result<EvidenceReport> {
    if !(theta_ed > 1.0) {
        return Err(Error::InvalidParam {
            name: "theta_ed",
            value: theta_ed,
            requirement: "> 1",
        });
    }
    let maps = EdMaps::from_image(img, theta_ed);
    let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
    Ok(EvidenceReport {
        image_id: boxes.image_id.clone(),
        kind: EvidenceKind::Ed,
        normalized: normalize(&raw),
        raw,
    })
}

// ---------------------------------------------------------------------------
// Multi-scale saliency
// ---------------------------------------------------------------------------

/// Per-scale thresholded saliency integrals: a sum table over saliency values
/// at or above the threshold and a count table of those pixels.
#[derive(Debug, Clone)]
pub struct MsMaps {
    width: usize,
    height: usize,
    scales: Vec<(Integral<f64>, Integral<u32>)>,
}

impl MsMaps {
    pub fn from_image(img: &ImageRaster, theta_ms: f64) -> Self {
        let (w, h) = (img.width(), img.height());
        let scales = MS_SCALES
            .iter()
            .map(|&scale| {
                let plane = Self::scale_plane(img, scale);
                let sums = Integral::build(w, h, |x, y| {
                    let v = plane.get(x, y);
                    if v >= theta_ms {
                        v
                    } else {
                        0.0
                    }
                });
                let counts = Integral::build(w, h, |x, y| (plane.get(x, y) >= theta_ms) as u32);
                (sums, counts)
            })
            .collect();
        Self {
            width: w,
            height: h,
            scales,
        }
    }

    #[cfg(test)]
    pub(crate) fn from_planes(width: usize, height: usize, planes: &[Plane], theta: f64) -> Self {
        let scales = planes
            .iter()
            .map(|p| {
                let sums = Integral::build(width, height, |x, y| {
                    let v = p.get(x, y);
                    if v >= theta {
                        v
                    } else {
                        0.0
                    }
                });
                let counts = Integral::build(width, height, |x, y| (p.get(x, y) >= theta) as u32);
                (sums, counts)
            })
            .collect();
        Self {
            width,
            height,
            scales,
        }
    }

    /// Full-resolution, min-max normalized saliency at one pyramid scale.
    pub fn scale_plane(img: &ImageRaster, scale: usize) -> Plane {
        let small = img.resize_max_side(scale);
        let sal = saliency::spectral_residual(&small.to_gray());
        let mut full = sal.resize(img.width(), img.height());
        full.normalize_min_max();
        full
    }

    /// `MS(w) = sum_scales sum_sal(w) * count(w) / |w|` over the thresholded
    /// saliency planes.
    pub fn raw(&self, b: &BoundingBox) -> f64 {
        let Some((x1, y1, x2, y2)) = pixel_rect(b, self.width, self.height) else {
            return 0.0;
        };
        let window = ((x2 - x1) * (y2 - y1)) as f64;
        self.scales
            .iter()
            .map(|(sums, counts)| {
                let s = sums.sum(x1, y1, x2, y2);
                let c = counts.sum(x1, y1, x2, y2);
                s * c as f64 / window
            })
            .sum()
    }
}

/// Multi-scale saliency evidence, min-max normalized over the proposal set.
pub fn evidence_ms(
    img: &ImageRaster,
    boxes: &ProposalSet,
    theta_ms: f64,
) -> Result<EvidenceReport> {
    if !(theta_ms > 0.0 && theta_ms < 1.0) {
        return Err(Error::InvalidParam {
            name: "theta_ms",
            value: theta_ms,
            requirement: "in (0, 1)",
        });
    }
    let maps = MsMaps::from_image(img, theta_ms);
    let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
    Ok(EvidenceReport {
        image_id: boxes.image_id.clone(),
        kind: EvidenceKind::Ms,
        normalized: normalize(&raw),
        raw,
    })
}

// ---------------------------------------------------------------------------
// Combination and the per-image cache
// ---------------------------------------------------------------------------

/// Elementwise mean of the four evidences' normalized values.
pub fn evidence_mean(reports: &[EvidenceReport]) -> Result<EvidenceReport> {
    if reports.len() != 4 {
        return Err(Error::LengthMismatch {
            expected: 4,
            got: reports.len(),
        });
    }
    let n = reports[0].normalized.len();
    let image_id = &reports[0].image_id;
    for r in reports {
        if r.normalized.len() != n || &r.image_id != image_id {
            return Err(Error::MismatchedProposals(format!(
                "{} ({} values) vs {} ({} values)",
                image_id, n, r.image_id, r.normalized.len(),
            )));
        }
    }
    let values: Vec<f64> = (0..n)
        .map(|i| reports.iter().map(|r| r.normalized[i]).sum::<f64>() / 4.0)
        .collect();
    Ok(EvidenceReport {
        image_id: image_id.clone(),
        kind: EvidenceKind::Mean,
        raw: values.clone(),
        normalized: values,
    })
}

/// Immutable per-image evidence cache: the structures needed by the
/// configured kind plus normalizers frozen on the original proposal set, so
/// that arbitrary (e.g. regressed) boxes can be scored consistently later.
pub struct BoxEvidence {
    kind: EvidenceKind,
    ss: Option<SsMaps>,
    cc: Option<(CcMaps, MinMax)>,
    ed: Option<(EdMaps, MinMax)>,
    ms: Option<(MsMaps, MinMax)>,
    at_proposals: Vec<f64>,
}

impl BoxEvidence {
    pub fn build(
        img: &ImageRaster,
        boxes: &ProposalSet,
        config: &EvidenceConfig,
    ) -> Result<Self> {
        config.validate()?;
        let kind = config.kind;
        let want = |k: EvidenceKind| kind == k || kind == EvidenceKind::Mean;

        let ss = if want(EvidenceKind::Ss) {
            let map = segment(img, config.ss_k, config.ss_sigma, config.ss_min_size)?;
            Some(SsMaps::from_superpixels(&map))
        } else {
            None
        };
        let fit = |maps_raw: Vec<f64>| MinMax::fit(&maps_raw);
        let cc = if want(EvidenceKind::Cc) {
            let maps = CcMaps::from_image(img, config.theta_cc);
            let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
            Some((maps, fit(raw)))
        } else {
            None
        };
        let ed = if want(EvidenceKind::Ed) {
            let maps = EdMaps::from_image(img, config.theta_ed);
            let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
            Some((maps, fit(raw)))
        } else {
            None
        };
        let ms = if want(EvidenceKind::Ms) {
            let maps = MsMaps::from_image(img, config.theta_ms);
            let raw: Vec<f64> = boxes.boxes.iter().map(|b| maps.raw(b)).collect();
            Some((maps, fit(raw)))
        } else {
            None
        };

        let mut cache = Self {
            kind,
            ss,
            cc,
            ed,
            ms,
            at_proposals: Vec::new(),
        };
        cache.at_proposals = boxes.boxes.iter().map(|b| cache.at(b)).collect();
        Ok(cache)
    }

    /// Normalized evidence for an arbitrary box, using the frozen
    /// per-image normalizers.
    pub fn at(&self, b: &BoundingBox) -> f64 {
        let mut parts = Vec::with_capacity(4);
        if let Some(ss) = &self.ss {
            parts.push(ss.raw(b));
        }
        if let Some((cc, mm)) = &self.cc {
            parts.push(mm.apply(cc.raw(b)));
        }
        if let Some((ed, mm)) = &self.ed {
            parts.push(mm.apply(ed.raw(b)));
        }
        if let Some((ms, mm)) = &self.ms {
            parts.push(mm.apply(ms.raw(b)));
        }
        match self.kind {
            EvidenceKind::Mean => parts.iter().sum::<f64>() / parts.len() as f64,
            _ => parts[0],
        }
    }

    /// Cached values at the original proposals.
    pub fn at_proposals(&self) -> &[f64] {
        &self.at_proposals
    }

    pub fn kind(&self) -> EvidenceKind {
        self.kind
    }
}

#[cfg(test)]
mod tests;
