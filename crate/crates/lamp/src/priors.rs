//! Noise-predictor interface and analytic priors whose posterior means are
//! exact, giving closed-form ground truth for end-to-end tests.
//!
//! Analytic priors have covariance diagonal in the right-singular basis of a
//! chosen operator, so their conditional means are componentwise in spectral
//! coordinates.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{Image, ImageShape};
use crate::linops::SpectralOperator;
use crate::schedule::Schedule;

/// Noise predictor `eps(x_t, t)`; pure in its inputs.
pub trait Denoiser {
    fn predict_eps(&self, x: &Image, t: usize, schedule: &Schedule) -> Result<Image>;
}

/// Clean-image estimate induced by a noise predictor:
/// `x0_hat = (x_t - sigma_t * eps) / alpha_t`.
pub fn tweedie(denoiser: &dyn Denoiser, x: &Image, t: usize, schedule: &Schedule) -> Result<Image> {
    let eps = denoiser.predict_eps(x, t, schedule)?;
    Ok(x0_hat_from_eps(x, &eps, schedule.alpha(t), schedule.sigma(t)))
}

pub fn x0_hat_from_eps(x: &Image, eps: &Image, alpha: f64, sigma: f64) -> Image {
    Image::from_array((x.data() - &(eps.data() * sigma)) / alpha)
}

/// Inverts the Tweedie relation; returns zeros when `sigma = 0` (where the
/// noise component is undefined and unused).
pub fn eps_from_x0_hat(x: &Image, x0_hat: &Image, alpha: f64, sigma: f64) -> Image {
    if sigma == 0.0 {
        return Image::zeros(x.shape());
    }
    Image::from_array((x.data() - &(x0_hat.data() * alpha)) / sigma)
}

/// Gaussian prior `N(mean, V diag(var) V^T)` with `V` the right-singular
/// basis of `basis`.
///
/// For convolution bases the variance vector should be symmetric under
/// frequency negation (true of any radial profile), so that the covariance
/// is a real operator.
pub struct GaussianPrior {
    mean: Image,
    mean_spectral: Vec<Complex64>,
    spectral_var: Vec<f64>,
    basis: Arc<SpectralOperator>,
}

impl GaussianPrior {
    pub fn new(mean: Image, spectral_var: Vec<f64>, basis: Arc<SpectralOperator>) -> Result<Self> {
        if mean.shape() != basis.in_shape() {
            return Err(Error::shape(format!("{}", basis.in_shape()), format!("{}", mean.shape())));
        }
        if spectral_var.len() != basis.in_shape().numel() {
            return Err(Error::config(
                "spectral_var",
                format!("expected {} entries, got {}", basis.in_shape().numel(), spectral_var.len()),
            ));
        }
        if spectral_var.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::config("spectral_var", "entries must be finite and >= 0"));
        }
        let mean_spectral = basis.to_spectral(&mean)?;
        Ok(GaussianPrior { mean, mean_spectral, spectral_var, basis })
    }

    pub fn mean(&self) -> &Image {
        &self.mean
    }

    pub fn spectral_var(&self) -> &[f64] {
        &self.spectral_var
    }

    pub fn basis(&self) -> &Arc<SpectralOperator> {
        &self.basis
    }

    /// Exact conditional mean `E[x0 | x_t]` under `x_t = alpha x0 + sigma eps`.
    pub fn posterior_x0(&self, x: &Image, alpha: f64, sigma: f64) -> Result<Image> {
        if sigma == 0.0 {
            return Ok(Image::from_array(x.data() / alpha));
        }
        let xbar = self.basis.to_spectral(x)?;
        let mut post = Vec::with_capacity(xbar.len());
        for ((&xb, &c), &m) in xbar.iter().zip(&self.spectral_var).zip(&self.mean_spectral) {
            let gain = alpha * c / (alpha * alpha * c + sigma * sigma);
            post.push(m + (xb - m * alpha) * gain);
        }
        self.basis.from_spectral(&post)
    }

    /// Draw from the prior: `mean + V diag(sqrt(var)) V^T w` with white `w`.
    pub fn sample(&self, seed: u64) -> Result<Image> {
        let white = Image::standard_normal(self.mean.shape(), seed);
        let mut wbar = self.basis.to_spectral(&white)?;
        for (w, &c) in wbar.iter_mut().zip(&self.spectral_var) {
            *w *= c.sqrt();
        }
        let colored = self.basis.from_spectral(&wbar)?;
        Ok(Image::from_array(self.mean.data() + colored.data()))
    }
}

impl Denoiser for GaussianPrior {
    fn predict_eps(&self, x: &Image, t: usize, schedule: &Schedule) -> Result<Image> {
        let (alpha, sigma) = (schedule.alpha(t), schedule.sigma(t));
        let x0 = self.posterior_x0(x, alpha, sigma)?;
        Ok(eps_from_x0_hat(x, &x0, alpha, sigma))
    }
}

/// Gaussian mixture prior with shared spectral covariance across components.
pub struct GmmPrior {
    weights: Vec<f64>,
    means: Vec<Image>,
    means_spectral: Vec<Vec<Complex64>>,
    spectral_var: Vec<f64>,
    basis: Arc<SpectralOperator>,
}

impl GmmPrior {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Image>,
        spectral_var: Vec<f64>,
        basis: Arc<SpectralOperator>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() {
            return Err(Error::config("weights", "must be non-empty and match means"));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::config("weights", "must be strictly positive"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config("weights", format!("must sum to 1, got {sum}")));
        }
        let mut means_spectral = Vec::with_capacity(means.len());
        for m in &means {
            if m.shape() != basis.in_shape() {
                return Err(Error::shape(format!("{}", basis.in_shape()), format!("{}", m.shape())));
            }
            means_spectral.push(basis.to_spectral(m)?);
        }
        if spectral_var.len() != basis.in_shape().numel()
            || spectral_var.iter().any(|&c| c < 0.0 || !c.is_finite())
        {
            return Err(Error::config("spectral_var", "must be finite, >= 0, and full length"));
        }
        Ok(GmmPrior { weights, means, means_spectral, spectral_var, basis })
    }

    /// Posterior component responsibilities at `x_t`, log-domain stabilized.
    /// Components share the covariance, so the normalizers cancel and only
    /// the quadratic forms matter.
    pub fn responsibilities(&self, x: &Image, alpha: f64, sigma: f64) -> Result<Vec<f64>> {
        let xbar = self.basis.to_spectral(x)?;
        let mut logs = Vec::with_capacity(self.weights.len());
        for (w, mbar) in self.weights.iter().zip(&self.means_spectral) {
            let mut quad = 0.0;
            for i in 0..xbar.len() {
                let denom = alpha * alpha * self.spectral_var[i] + sigma * sigma;
                quad += (xbar[i] - mbar[i] * alpha).norm_sqr() / denom;
            }
            logs.push(w.ln() - 0.5 * quad);
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut resp: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = resp.iter().sum();
        for r in &mut resp {
            *r /= z;
        }
        Ok(resp)
    }

    /// Exact mixture conditional mean: responsibility-weighted sum of the
    /// per-component Gaussian posterior means.
    pub fn posterior_x0(&self, x: &Image, alpha: f64, sigma: f64) -> Result<Image> {
        if sigma == 0.0 {
            return Ok(Image::from_array(x.data() / alpha));
        }
        let xbar = self.basis.to_spectral(x)?;
        let resp = self.responsibilities(x, alpha, sigma)?;
        let n = xbar.len();
        let mut post = vec![Complex64::default(); n];
        for (r, mbar) in resp.iter().zip(&self.means_spectral) {
            for i in 0..n {
                let c = self.spectral_var[i];
                let gain = alpha * c / (alpha * alpha * c + sigma * sigma);
                let comp = mbar[i] + (xbar[i] - mbar[i] * alpha) * gain;
                post[i] += comp * *r;
            }
        }
        self.basis.from_spectral(&post)
    }

    pub fn sample(&self, seed: u64) -> Result<Image> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = k;
                break;
            }
        }
        let white = Image::standard_normal(self.means[pick].shape(), rng.random());
        let mut wbar = self.basis.to_spectral(&white)?;
        for (w, &c) in wbar.iter_mut().zip(&self.spectral_var) {
            *w *= c.sqrt();
        }
        let colored = self.basis.from_spectral(&wbar)?;
        Ok(Image::from_array(self.means[pick].data() + colored.data()))
    }
}

impl Denoiser for GmmPrior {
    fn predict_eps(&self, x: &Image, t: usize, schedule: &Schedule) -> Result<Image> {
        let (alpha, sigma) = (schedule.alpha(t), schedule.sigma(t));
        let x0 = self.posterior_x0(x, alpha, sigma)?;
        Ok(eps_from_x0_hat(x, &x0, alpha, sigma))
    }
}

/// Noise predictions read from precomputed tables, keyed by timestep.
pub struct TabulatedDenoiser {
    table: BTreeMap<usize, Image>,
}

impl TabulatedDenoiser {
    pub fn from_map(table: BTreeMap<usize, Image>) -> Self {
        TabulatedDenoiser { table }
    }

    /// Load per-timestep predictions from tensor files.
    pub fn from_files(entries: &[(usize, std::path::PathBuf)]) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (t, path) in entries {
            table.insert(*t, crate::io::read_image_tensor(path)?);
        }
        Ok(TabulatedDenoiser { table })
    }
}

impl Denoiser for TabulatedDenoiser {
    fn predict_eps(&self, _x: &Image, t: usize, _schedule: &Schedule) -> Result<Image> {
        self.table
            .get(&t)
            .cloned()
            .ok_or_else(|| Error::config("tabulated", format!("no entry for timestep {t}")))
    }
}

/// Wrapper counting evaluations; used to audit the one-eval-per-step budget.
pub struct CountingDenoiser<'a> {
    inner: &'a dyn Denoiser,
    calls: AtomicUsize,
}

impl<'a> CountingDenoiser<'a> {
    pub fn new(inner: &'a dyn Denoiser) -> Self {
        CountingDenoiser { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Denoiser for CountingDenoiser<'_> {
    fn predict_eps(&self, x: &Image, t: usize, schedule: &Schedule) -> Result<Image> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict_eps(x, t, schedule)
    }
}

/// Per-component variance from a radial frequency profile, matching the
/// spectral ordering of convolution operators. `profile` receives the
/// normalized frequency radius in [0, ~0.71].
pub fn radial_spectral_var(shape: ImageShape, profile: impl Fn(f64) -> f64) -> Vec<f64> {
    let (h, w) = (shape.height, shape.width);
    let mut var = Vec::with_capacity(shape.numel());
    for _ in 0..shape.channels {
        for u in 0..h {
            for v in 0..w {
                let fu = u.min(h - u) as f64 / h as f64;
                let fv = v.min(w - v) as f64 / w as f64;
                var.push(profile((fu * fu + fv * fv).sqrt()));
            }
        }
    }
    var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::max_abs_diff;
    use crate::linops::make_identity;
    use approx::assert_abs_diff_eq;

    fn scalar_schedule(alpha: f64, sigma: f64) -> Schedule {
        // two-entry hand schedule whose index 0 holds the requested pair
        let a2 = alpha * 0.7;
        let s2 = (1.0 - a2 * a2).sqrt();
        Schedule::from_alpha_sigma(vec![alpha, a2], vec![sigma, s2]).unwrap()
    }

    fn scalar_prior(mean: f64, var: f64) -> GaussianPrior {
        let shape = ImageShape::new(1, 1, 1);
        let basis = Arc::new(make_identity(shape).unwrap());
        GaussianPrior::new(Image::scalar(mean), vec![var], basis).unwrap()
    }

    #[test]
    fn tweedie_scalar_posterior_mean() {
        // m = 0, c = 1, alpha = sigma = 1/sqrt(2), x_t = 1: x0_hat = 1/sqrt(2)
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let schedule = scalar_schedule(r, r);
        let prior = scalar_prior(0.0, 1.0);
        let x0 = tweedie(&prior, &Image::scalar(1.0), 0, &schedule).unwrap();
        assert_abs_diff_eq!(x0.as_flat()[0], r, epsilon = 1e-12);
    }

    #[test]
    fn tweedie_at_zero_noise_returns_iterate() {
        // t = 0 extension with alpha = 1, sigma = 0
        let schedule = Schedule::from_alpha_sigma(vec![1.0, 0.8], vec![0.0, 0.6]).unwrap();
        let prior = scalar_prior(0.3, 1.0);
        let x0 = tweedie(&prior, &Image::scalar(0.9), 0, &schedule).unwrap();
        assert_abs_diff_eq!(x0.as_flat()[0], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_prior_returns_mean() {
        let schedule = scalar_schedule(0.8, 0.6);
        let prior = scalar_prior(0.37, 0.0);
        for xt in [-2.0, 0.0, 5.0] {
            let x0 = tweedie(&prior, &Image::scalar(xt), 0, &schedule).unwrap();
            assert_abs_diff_eq!(x0.as_flat()[0], 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn flat_prior_limit_returns_rescaled_iterate() {
        let schedule = scalar_schedule(0.8, 0.6);
        let prior = scalar_prior(0.0, 1e12);
        let x0 = tweedie(&prior, &Image::scalar(2.0), 0, &schedule).unwrap();
        assert_abs_diff_eq!(x0.as_flat()[0], 2.0 / 0.8, epsilon = 1e-9);
    }

    #[test]
    fn eps_vanishes_at_prior_mean() {
        let schedule = scalar_schedule(0.8, 0.6);
        let prior = scalar_prior(0.5, 2.0);
        // x_t = alpha * m
        let eps = prior.predict_eps(&Image::scalar(0.4), 0, &schedule).unwrap();
        assert_abs_diff_eq!(eps.as_flat()[0], 0.0, epsilon = 1e-12);
    }

    /// 1D quadrature of the posterior mean, refined trapezoid; independent of
    /// the closed-form path.
    fn posterior_mean_quadrature(
        log_prior: impl Fn(f64) -> f64,
        xt: f64,
        alpha: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    ) -> f64 {
        let n = 20001;
        let step = (hi - lo) / (n - 1) as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let x0 = lo + i as f64 * step;
            let ll = -(xt - alpha * x0).powi(2) / (2.0 * sigma * sigma);
            let w = (log_prior(x0) + ll).exp()
                * if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            num += w * x0;
            den += w;
        }
        num / den
    }

    #[test]
    fn gaussian_posterior_matches_quadrature_componentwise() {
        let shape = ImageShape::new(1, 4, 4);
        let basis = Arc::new(make_identity(shape).unwrap());
        let var = radial_spectral_var(shape, |r| 0.3 + r);
        let mean = Image::filled(shape, 0.2);
        let prior = GaussianPrior::new(mean, var.clone(), basis.clone()).unwrap();
        let x = Image::standard_normal(shape, 5);

        let x0 = prior.posterior_x0(&x, 0.6, 0.8).unwrap();
        let x0bar = basis.to_spectral(&x0).unwrap();
        let xbar = basis.to_spectral(&x).unwrap();
        let mbar = basis.to_spectral(prior.mean()).unwrap();
        // DC coordinate is real; integrate it directly
        let i = 0;
        let (m, c) = (mbar[i].re, var[i]);
        let oracle = posterior_mean_quadrature(
            |x0c| -(x0c - m).powi(2) / (2.0 * c),
            xbar[i].re,
            0.6,
            0.8,
            m - 30.0 * c.sqrt(),
            m + 30.0 * c.sqrt(),
        );
        assert_abs_diff_eq!(x0bar[i].re, oracle, epsilon = 1e-6);
    }

    #[test]
    fn gmm_single_component_reduces_to_gaussian() {
        let shape = ImageShape::new(1, 2, 2);
        let basis = Arc::new(make_identity(shape).unwrap());
        let var = vec![0.7; 4];
        let mean = Image::filled(shape, 0.3);
        let gauss = GaussianPrior::new(mean.clone(), var.clone(), basis.clone()).unwrap();
        let gmm = GmmPrior::new(vec![1.0], vec![mean], var, basis).unwrap();
        let schedule = scalar_schedule(0.7, (1.0f64 - 0.49).sqrt());
        let x = Image::standard_normal(shape, 9);
        let a = gauss.predict_eps(&x, 0, &schedule).unwrap();
        let b = gmm.predict_eps(&x, 0, &schedule).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-12);
    }

    #[test]
    fn gmm_symmetric_components_cancel_at_origin() {
        let shape = ImageShape::new(1, 2, 2);
        let basis = Arc::new(make_identity(shape).unwrap());
        let m = Image::filled(shape, 0.8);
        let neg = Image::from_array(m.data() * -1.0);
        let gmm = GmmPrior::new(vec![0.5, 0.5], vec![m, neg], vec![0.4; 4], basis).unwrap();
        let x0 = gmm.posterior_x0(&Image::zeros(shape), 0.8, 0.6).unwrap();
        assert!(x0.l2_norm() <= 1e-12);
    }

    #[test]
    fn gmm_responsibilities_sum_to_one() {
        let shape = ImageShape::new(1, 2, 2);
        let basis = Arc::new(make_identity(shape).unwrap());
        let m1 = Image::filled(shape, 1.0);
        let m2 = Image::filled(shape, -0.5);
        let gmm =
            GmmPrior::new(vec![0.3, 0.7], vec![m1, m2], vec![0.2; 4], basis).unwrap();
        for seed in 0..10 {
            let x = Image::standard_normal(shape, seed);
            let r = gmm.responsibilities(&x, 0.9, (1.0f64 - 0.81).sqrt()).unwrap();
            assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gmm_matches_quadrature_in_one_dimension() {
        let shape = ImageShape::new(1, 1, 1);
        let basis = Arc::new(make_identity(shape).unwrap());
        let gmm = GmmPrior::new(
            vec![0.4, 0.6],
            vec![Image::scalar(-1.0), Image::scalar(1.5)],
            vec![0.5],
            basis,
        )
        .unwrap();
        let (alpha, sigma) = (0.8, 0.6);
        let schedule = scalar_schedule(alpha, sigma);
        for &xt in &[-1.0, 0.0, 0.9] {
            let ours =
                tweedie(&gmm, &Image::scalar(xt), 0, &schedule).unwrap().as_flat()[0];
            let oracle = posterior_mean_quadrature(
                |x0| {
                    let c = 0.5f64;
                    let g1 = 0.4 * (-(x0 + 1.0_f64).powi(2) / (2.0 * c)).exp();
                    let g2 = 0.6 * (-(x0 - 1.5_f64).powi(2) / (2.0 * c)).exp();
                    (g1 + g2).ln()
                },
                xt,
                alpha,
                sigma,
                -12.0,
                12.0,
            );
            assert_abs_diff_eq!(ours, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn tweedie_gain_matches_finite_differences() {
        let shape = ImageShape::new(1, 4, 4);
        let basis = Arc::new(make_identity(shape).unwrap());
        let var = radial_spectral_var(shape, |r| 0.5 + 2.0 * r);
        let prior =
            GaussianPrior::new(Image::zeros(shape), var.clone(), basis.clone()).unwrap();
        let (alpha, sigma) = (0.6, 0.8);
        let x = Image::standard_normal(shape, 3);
        let eps_step = 1e-5;
        for i in [0usize, 3, 7] {
            let mut dir = vec![Complex64::default(); 16];
            dir[i] = Complex64::new(1.0, 0.0);
            // the real projection splits energy between conjugate
            // frequencies; normalize by the direction's own coordinate
            let dir_img = basis.from_spectral(&dir).unwrap();
            let dir_coord = basis.to_spectral(&dir_img).unwrap()[i].re;
            let xp = Image::from_array(x.data() + &(dir_img.data() * eps_step));
            let f0 = prior.posterior_x0(&x, alpha, sigma).unwrap();
            let f1 = prior.posterior_x0(&xp, alpha, sigma).unwrap();
            let diff = Image::from_array((f1.data() - f0.data()) / eps_step);
            let slope = basis.to_spectral(&diff).unwrap()[i].re / dir_coord;
            let gain = alpha * var[i] / (alpha * alpha * var[i] + sigma * sigma);
            assert_abs_diff_eq!(slope, gain, epsilon = 1e-6);
        }
    }

    #[test]
    fn tabulated_denoiser_returns_stored_entries() {
        let shape = ImageShape::new(1, 2, 2);
        let mut map = BTreeMap::new();
        map.insert(5usize, Image::filled(shape, 0.25));
        let d = TabulatedDenoiser::from_map(map);
        let schedule = Schedule::linear(10, 1e-4, 0.02).unwrap();
        let x = Image::zeros(shape);
        assert!(d.predict_eps(&x, 5, &schedule).is_ok());
        assert!(d.predict_eps(&x, 6, &schedule).is_err());
    }

    #[test]
    fn tabulated_denoiser_loads_from_files() {
        let shape = ImageShape::new(1, 2, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eps_t3.ltnsr");
        crate::io::write_image_tensor(&path, &Image::filled(shape, 0.5)).unwrap();
        let d = TabulatedDenoiser::from_files(&[(3, path)]).unwrap();
        let schedule = Schedule::linear(10, 1e-4, 0.02).unwrap();
        let eps = d.predict_eps(&Image::zeros(shape), 3, &schedule).unwrap();
        assert_eq!(eps.as_flat()[0], 0.5);
    }
}
