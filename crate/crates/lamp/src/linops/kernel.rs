//! Blur kernels: normalized 2D tap arrays with odd side length.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Normalized convolution kernel (taps sum to 1, odd square side).
#[derive(Debug, Clone)]
pub struct Kernel {
    taps: Array2<f64>,
}

impl Kernel {
    pub fn from_taps(taps: Array2<f64>) -> Result<Self> {
        let (h, w) = taps.dim();
        if h != w || h % 2 == 0 {
            return Err(Error::config("kernel_size", format!("must be odd square, got {h}x{w}")));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config("taps", format!("must sum to 1, got {sum}")));
        }
        Ok(Kernel { taps })
    }

    /// Isotropic Gaussian taps on a centered grid, normalized.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        check_size(size)?;
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::config("sigma", "must be strictly positive"));
        }
        let c = (size / 2) as f64;
        let mut taps = Array2::from_shape_fn((size, size), |(y, x)| {
            let (dy, dx) = (y as f64 - c, x as f64 - c);
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        });
        normalize(&mut taps);
        Ok(Kernel { taps })
    }

    /// Procedural motion-blur kernel: a random walk of unit steps whose
    /// heading is perturbed per step by `intensity`-scaled Gaussian noise,
    /// recentered on its centroid, bilinearly rasterized, box-blurred, and
    /// normalized. Deterministic given `seed`. `intensity = 0` degenerates to
    /// a straight horizontal path.
    pub fn motion(size: usize, intensity: f64, seed: u64) -> Result<Self> {
        check_size(size)?;
        if !(0.0..=1.0).contains(&intensity) {
            return Err(Error::config("intensity", "must be in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_points = size;
        let mut theta = 0.0f64;
        let mut pos = (0.0f64, 0.0f64);
        let mut path = Vec::with_capacity(n_points);
        path.push(pos);
        for _ in 1..n_points {
            let g: f64 = StandardNormal.sample(&mut rng);
            theta += 0.5 * intensity * g;
            pos = (pos.0 + theta.cos(), pos.1 + theta.sin());
            path.push(pos);
        }
        let cx = path.iter().map(|p| p.0).sum::<f64>() / n_points as f64;
        let cy = path.iter().map(|p| p.1).sum::<f64>() / n_points as f64;
        let center = (size / 2) as f64;

        let mut raster = Array2::<f64>::zeros((size, size));
        for p in &path {
            let x = p.0 - cx + center;
            let y = p.1 - cy + center;
            splat_bilinear(&mut raster, y, x, 1.0);
        }
        let mut taps = box_blur3(&raster);
        let sum: f64 = taps.iter().sum();
        if sum <= 1e-12 {
            // Whole path rasterized out of bounds (pathological); keep a delta.
            taps.fill(0.0);
            taps[(size / 2, size / 2)] = 1.0;
        } else {
            normalize(&mut taps);
        }
        Ok(Kernel { taps })
    }

    /// Single-tap identity kernel.
    pub fn delta() -> Self {
        Kernel { taps: Array2::from_elem((1, 1), 1.0) }
    }

    pub fn size(&self) -> usize {
        self.taps.dim().0
    }

    pub fn taps(&self) -> &Array2<f64> {
        &self.taps
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::config("kernel_size", format!("must be odd and positive, got {size}")));
    }
    Ok(())
}

fn normalize(taps: &mut Array2<f64>) {
    let sum: f64 = taps.iter().sum();
    taps.mapv_inplace(|v| v / sum);
}

fn splat_bilinear(grid: &mut Array2<f64>, y: f64, x: f64, weight: f64) {
    let (h, w) = grid.dim();
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let contributions = [
        (y0 as i64, x0 as i64, (1.0 - fy) * (1.0 - fx)),
        (y0 as i64, x0 as i64 + 1, (1.0 - fy) * fx),
        (y0 as i64 + 1, x0 as i64, fy * (1.0 - fx)),
        (y0 as i64 + 1, x0 as i64 + 1, fy * fx),
    ];
    for (iy, ix, wgt) in contributions {
        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
            grid[(iy as usize, ix as usize)] += weight * wgt;
        }
    }
}

fn box_blur3(grid: &Array2<f64>) -> Array2<f64> {
    let (h, w) = grid.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let mut acc = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (iy, ix) = (y as i64 + dy, x as i64 + dx);
                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                    acc += grid[(iy as usize, ix as usize)];
                }
            }
        }
        acc / 9.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_taps_sum_to_one() {
        let k = Kernel::gaussian(5, 1.0).unwrap();
        assert!((k.taps().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(k.size(), 5);
    }

    #[test]
    fn gaussian_rejects_bad_params() {
        assert!(Kernel::gaussian(4, 1.0).is_err());
        assert!(Kernel::gaussian(5, 0.0).is_err());
    }

    #[test]
    fn motion_zero_intensity_is_horizontal_band() {
        let k = Kernel::motion(7, 0.0, 3).unwrap();
        let c = 3usize;
        // all mass in the box-blurred band around the center row
        let mut band_mass = 0.0;
        for y in 0..7 {
            let row_mass: f64 = (0..7).map(|x| k.taps()[(y, x)]).sum();
            if (c - 1..=c + 1).contains(&y) {
                band_mass += row_mass;
            } else {
                assert!(row_mass.abs() <= 1e-15, "row {y} carries mass {row_mass}");
            }
        }
        assert!((band_mass - 1.0).abs() <= 1e-12);
        // the path spans the full width
        for x in 0..7 {
            assert!(k.taps()[(c, x)] > 0.0, "column {x} empty");
        }
    }

    #[test]
    fn motion_is_deterministic_per_seed() {
        let a = Kernel::motion(9, 0.5, 42).unwrap();
        let b = Kernel::motion(9, 0.5, 42).unwrap();
        let c = Kernel::motion(9, 0.5, 43).unwrap();
        assert!(a.taps().iter().zip(b.taps()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.taps().iter().zip(c.taps()).any(|(x, y)| x != y));
    }

    #[test]
    fn motion_taps_sum_to_one() {
        for seed in 0..5 {
            let k = Kernel::motion(9, 0.5, seed).unwrap();
            assert!((k.taps().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
