//! Dense pixel rasters: the 3-channel image type all bottom-up evidence is
//! computed from, plus single-channel planes for edge and saliency maps.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// A 3-channel image with values in `[0, 1]`, stored planar.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Self {
        for c in &channels {
            assert_eq!(c.len(), width * height, "channel length mismatch");
            debug_assert!(c.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
        Self {
            width,
            height,
            channels,
        }
    }

    /// A raster filled with a single color.
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        let channels = [
            vec![color[0]; width * height],
            vec![color[1]; width * height],
            vec![color[2]; width * height],
        ];
        Self::new(width, height, channels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, channel: usize, x: usize, y: usize) -> f64 {
        self.channels[channel][y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, x: usize, y: usize, value: f64) {
        self.channels[channel][y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.channels[channel]
    }

    /// Channel-mean grayscale plane.
    pub fn to_gray(&self) -> Plane {
        let data = (0..self.width * self.height)
            .map(|i| (self.channels[0][i] + self.channels[1][i] + self.channels[2][i]) / 3.0)
            .collect();
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Loads a PNG or binary PPM file, mapping 8/16-bit samples to `[0, 1]`.
    pub fn load(path: &Path) -> Result<ImageRaster> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if !matches!(ext.as_str(), "png" | "ppm" | "pnm") {
            return Err(Error::UnsupportedImage(ext));
        }
        let img = image::open(path)
            .map_err(|e| Error::ImageDecode(e.to_string()))?
            .into_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut channels = [
            vec![0.0; w * h],
            vec![0.0; w * h],
            vec![0.0; w * h],
        ];
        for (x, y, px) in img.enumerate_pixels() {
            let i = y as usize * w + x as usize;
            for c in 0..3 {
                channels[c][i] = px.0[c] as f64 / 255.0;
            }
        }
        Ok(ImageRaster::new(w, h, channels))
    }

    /// Writes the raster as an 8-bit PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut img = image::RgbImage::new(self.width as u32, self.height as u32);
        for (x, y, px) in img.enumerate_pixels_mut() {
            let i = y as usize * self.width + x as usize;
            for c in 0..3 {
                px.0[c] = (self.channels[c][i] * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        img.save(path).map_err(|e| Error::ImageDecode(e.to_string()))
    }

    /// Resizes with bilinear interpolation so that the longer side equals
    /// `max_side` (aspect preserved, at least 1 pixel each side).
    pub fn resize_max_side(&self, max_side: usize) -> ImageRaster {
        let scale = max_side as f64 / self.width.max(self.height) as f64;
        let nw = ((self.width as f64 * scale).round() as usize).max(1);
        let nh = ((self.height as f64 * scale).round() as usize).max(1);
        let mut channels = [
            vec![0.0; nw * nh],
            vec![0.0; nw * nh],
            vec![0.0; nw * nh],
        ];
        for c in 0..3 {
            bilinear_resize(
                &self.channels[c],
                self.width,
                self.height,
                &mut channels[c],
                nw,
                nh,
            );
        }
        ImageRaster {
            width: nw,
            height: nh,
            channels,
        }
    }
}

/// A single-channel float plane (saliency maps, edge magnitudes).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn resize(&self, nw: usize, nh: usize) -> Plane {
        let mut out = Plane::zeros(nw, nh);
        bilinear_resize(&self.data, self.width, self.height, &mut out.data, nw, nh);
        out
    }

    /// Min-max rescales to `[0, 1]` in place; a flat plane becomes all zeros.
    pub fn normalize_min_max(&mut self) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        if range <= 0.0 {
            self.data.fill(0.0);
        } else {
            for v in &mut self.data {
                *v = (*v - lo) / range;
            }
        }
    }
}

fn bilinear_resize(src: &[f64], sw: usize, sh: usize, dst: &mut [f64], dw: usize, dh: usize) {
    // pixel centers at i + 0.5 in both grids
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    for y in 0..dh {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for x in 0..dw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            let bot = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            dst[y * dw + x] = top * (1.0 - wy) + bot * wy;
        }
    }
}

/// Reflects an out-of-range index back into `0..len` (edge pixel included, so
/// -1 maps to 0 and `len` maps to `len - 1`).
#[inline]
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Normalized 1D Gaussian kernel truncated at radius `ceil(4 * sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (4.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for i in -(radius as isize)..=(radius as isize) {
        let d = i as f64;
        kernel.push((-d * d / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

fn smooth_plane_separable(data: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut tmp = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius as isize, width);
                acc += data[y * width + sx] * kv;
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius as isize, height);
                acc += tmp[sy * width + x] * kv;
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Per-channel Gaussian smoothing with reflect padding; output values are
/// clamped back to `[0, 1]`.
pub fn gaussian_smooth(img: &ImageRaster, sigma: f64) -> ImageRaster {
    let kernel = gaussian_kernel(sigma);
    let channels = [
        smooth_plane_separable(img.channel(0), img.width, img.height, &kernel),
        smooth_plane_separable(img.channel(1), img.width, img.height, &kernel),
        smooth_plane_separable(img.channel(2), img.width, img.height, &kernel),
    ];
    let channels = channels.map(|mut c| {
        for v in &mut c {
            *v = v.clamp(0.0, 1.0);
        }
        c
    });
    ImageRaster {
        width: img.width,
        height: img.height,
        channels,
    }
}

/// Gaussian smoothing of a single plane (no clamping).
pub fn gaussian_smooth_plane(plane: &Plane, sigma: f64) -> Plane {
    let kernel = gaussian_kernel(sigma);
    Plane {
        width: plane.width,
        height: plane.height,
        data: smooth_plane_separable(&plane.data, plane.width, plane.height, &kernel),
    }
}

/// Integer pixel rectangle `[x1, x2) x [y1, y2)` selected by a continuous box:
/// pixel `(i, j)` belongs to the box iff `x1 <= i < x2` and `y1 <= j < y2`.
/// Returns `None` when no pixel is selected after clipping to the raster.
pub fn pixel_rect(
    b: &BoundingBox,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let x1 = b.x1.ceil().max(0.0) as usize;
    let y1 = b.y1.ceil().max(0.0) as usize;
    let x2 = (b.x2.ceil().min(width as f64) as usize).min(width);
    let y2 = (b.y2.ceil().min(height as f64) as usize).min(height);
    if x1 < x2 && y1 < y2 {
        Some((x1, y1, x2, y2))
    } else {
        None
    }
}
