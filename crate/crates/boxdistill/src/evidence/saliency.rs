//! Spectral-residual saliency.
//!
//! The saliency of a small grayscale image is the squared magnitude of the
//! inverse transform of `exp(residual) * phase`, where the residual is the
//! log-amplitude spectrum minus its 3x3 local mean. A flat input has no
//! saliency by definition and short-circuits to a zero map.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::raster::{gaussian_smooth_plane, Plane};

/// Amplitudes are floored at this fraction of the spectral maximum before the
/// logarithm. Spectra of clean synthetic images contain near-exact nulls;
/// unfloored, their log spikes dominate the local mean and the residual
/// amplifies the null's neighbors into grid artifacts.
const AMP_FLOOR_REL: f64 = 1e-3;
const POST_SMOOTH_SIGMA: f64 = 2.5;

fn fft_2d(data: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut column = vec![Complex::default(); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// 3x3 mean filter with reflect padding.
fn box_filter_3x3(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let reflect = crate::raster::reflect;
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let sx = reflect(x as isize + dx, width);
                    let sy = reflect(y as isize + dy, height);
                    acc += src[sy * width + sx];
                }
            }
            out[y * width + x] = acc / 9.0;
        }
    }
    out
}

/// Computes the spectral-residual saliency map of a grayscale plane.
/// The output is unnormalized; callers rescale as needed.
pub fn spectral_residual(gray: &Plane) -> Plane {
    let (w, h) = (gray.width, gray.height);

    let lo = gray.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gray.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 {
        return Plane::zeros(w, h);
    }

    let mut spectrum: Vec<Complex<f64>> = gray
        .data
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft_2d(&mut spectrum, w, h, false);

    let amplitude: Vec<f64> = spectrum.iter().map(|c| c.norm()).collect();
    let amp_max = amplitude.iter().copied().fold(0.0, f64::max);
    let floor = AMP_FLOOR_REL * amp_max;
    let log_amp: Vec<f64> = amplitude.iter().map(|&a| a.max(floor).ln()).collect();
    let local_mean = box_filter_3x3(&log_amp, w, h);

    for (i, c) in spectrum.iter_mut().enumerate() {
        let residual = log_amp[i] - local_mean[i];
        // keep the phase, swap in the residual amplitude
        *c = if amplitude[i] > 0.0 {
            (*c / amplitude[i]) * residual.exp()
        } else {
            Complex::new(0.0, 0.0)
        };
    }
    fft_2d(&mut spectrum, w, h, true);

    let raw = Plane {
        width: w,
        height: h,
        data: spectrum.iter().map(|c| c.norm_sqr()).collect(),
    };
    gaussian_smooth_plane(&raw, POST_SMOOTH_SIGMA)
}
