//! Minimal row-column 2D FFT on top of rustfft, unnormalized in both
//! directions (`inverse(forward(x)) = h*w * x`).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    h: usize,
    w: usize,
    fwd_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("h", &self.h).field("w", &self.w).finish()
    }
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            h,
            w,
            fwd_row: planner.plan_fft_forward(w),
            fwd_col: planner.plan_fft_forward(h),
            inv_row: planner.plan_fft_inverse(w),
            inv_col: planner.plan_fft_inverse(h),
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.fwd_row, &self.fwd_col);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv_row, &self.inv_col);
    }

    fn transform(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(buf.len(), self.h * self.w, "fft2 buffer size");
        for r in buf.chunks_exact_mut(self.w) {
            row.process(r);
        }
        let mut scratch = vec![Complex64::default(); self.h];
        for c in 0..self.w {
            for r in 0..self.h {
                scratch[r] = buf[r * self.w + c];
            }
            col.process(&mut scratch);
            for r in 0..self.h {
                buf[r * self.w + c] = scratch[r];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_scales_by_numel() {
        let fft = Fft2::new(4, 6);
        let orig: Vec<Complex64> =
            (0..24).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        let mut buf = orig.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a / 24.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn impulse_transforms_to_ones() {
        let fft = Fft2::new(3, 5);
        let mut buf = vec![Complex64::default(); 15];
        buf[0] = Complex64::new(1.0, 0.0);
        fft.forward(&mut buf);
        for v in &buf {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }
}
