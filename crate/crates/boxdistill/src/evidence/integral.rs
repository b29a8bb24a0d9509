//! Summed-area tables for O(1) rectangle aggregation.

use std::ops::{Add, Sub};

/// Integral image over a `width x height` grid; `sum` queries use the same
/// `[x1, x2) x [y1, y2)` convention as pixel rectangles.
#[derive(Debug, Clone)]
pub struct Integral<T> {
    width: usize,
    data: Vec<T>,
}

impl<T> Integral<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    pub fn build(width: usize, height: usize, value: impl Fn(usize, usize) -> T) -> Self {
        let w1 = width + 1;
        let mut data = vec![T::default(); w1 * (height + 1)];
        for y in 0..height {
            for x in 0..width {
                let v = value(x, y);
                data[(y + 1) * w1 + (x + 1)] =
                    v + data[y * w1 + (x + 1)] + data[(y + 1) * w1 + x] - data[y * w1 + x];
            }
        }
        Self { width, data }
    }

    #[inline]
    pub fn sum(&self, x1: usize, y1: usize, x2: usize, y2: usize) -> T {
        let w1 = self.width + 1;
        self.data[y2 * w1 + x2] + self.data[y1 * w1 + x1]
            - self.data[y1 * w1 + x2]
            - self.data[y2 * w1 + x1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::xorshift;

    #[test]
    fn counts_match_direct_loops_exactly() {
        let mut next = xorshift(3);
        let (w, h) = (23, 17);
        let mask: Vec<u32> = (0..w * h).map(|_| (next() > 0.5) as u32).collect();
        let integral = Integral::build(w, h, |x, y| mask[y * w + x]);
        for _ in 0..500 {
            let x1 = (next() * w as f64) as usize;
            let y1 = (next() * h as f64) as usize;
            let x2 = x1 + (next() * (w - x1) as f64) as usize;
            let y2 = y1 + (next() * (h - y1) as f64) as usize;
            let mut direct = 0u32;
            for y in y1..y2 {
                for x in x1..x2 {
                    direct += mask[y * w + x];
                }
            }
            assert_eq!(integral.sum(x1, y1, x2, y2), direct);
        }
    }

    #[test]
    fn float_sums_match_direct_loops() {
        let mut next = xorshift(9);
        let (w, h) = (19, 21);
        let vals: Vec<f64> = (0..w * h).map(|_| next()).collect();
        let integral = Integral::build(w, h, |x, y| vals[y * w + x]);
        for _ in 0..200 {
            let x1 = (next() * w as f64) as usize;
            let y1 = (next() * h as f64) as usize;
            let x2 = x1 + (next() * (w - x1) as f64) as usize;
            let y2 = y1 + (next() * (h - y1) as f64) as usize;
            let mut direct = 0.0;
            for y in y1..y2 {
                for x in x1..x2 {
                    direct += vals[y * w + x];
                }
            }
            assert!((integral.sum(x1, y1, x2, y2) - direct).abs() < 1e-9);
        }
    }
}
