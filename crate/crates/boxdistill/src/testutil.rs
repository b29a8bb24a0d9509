//! Helpers shared by unit tests across modules.

use crate::raster::ImageRaster;

/// Deterministic noise image from a tiny xorshift stream.
pub(crate) fn noise_image(w: usize, h: usize, seed: u64) -> ImageRaster {
    let mut next = xorshift(seed);
    let mut img = ImageRaster::filled(w, h, [0.0; 3]);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                img.set(c, x, y, next());
            }
        }
    }
    img
}

/// Uniform `[0, 1)` stream, dependency-free.
pub(crate) fn xorshift(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).max(1);
    move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}
