//! Variance-preserving diffusion schedule, respaced reverse grid, and the
//! exponential-integrator step coefficients.
//!
//! The schedule owns the per-timestep signal/noise coefficients `alpha_t`,
//! `sigma_t` (with `alpha_t^2 + sigma_t^2 = 1`) and their log-SNR
//! reparameterization `lambda_t = ln(alpha_t / sigma_t)`. A [`StepPlan`] is a
//! strictly decreasing subset of timestep indices traversed in reverse, from
//! which each step derives `h = lambda_dst - lambda_src > 0` and the
//! coefficients `A0(h) = 1 - e^{-h}` and `A1(h) = 1 - (1 - e^{-h})/h`.

use crate::error::{Error, Result};

/// Variance-preserving schedule over the training timesteps.
///
/// Index 0 is the least-noisy timestep; index `n_train_steps - 1` the noisiest.
#[derive(Debug, Clone)]
pub struct Schedule {
    n_train_steps: usize,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    sigmas: Vec<f64>,
    lambdas: Vec<f64>,
}

impl Schedule {
    /// Linear beta schedule: `beta_t` interpolates `beta_start..=beta_end`,
    /// `alpha_t = sqrt(prod_{s<=t} (1 - beta_s))`, `sigma_t = sqrt(1 - alpha_t^2)`.
    pub fn linear(n_train_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if n_train_steps < 2 {
            return Err(Error::config("n_train_steps", "must be at least 2"));
        }
        if beta_start <= 0.0 || !beta_start.is_finite() {
            return Err(Error::config("beta_start", "must be strictly positive"));
        }
        if beta_end < beta_start {
            return Err(Error::config("beta_end", "must be >= beta_start"));
        }
        if beta_end >= 1.0 {
            return Err(Error::config("beta_end", "must be < 1"));
        }
        let n = n_train_steps;
        let betas: Vec<f64> = (0..n)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (n - 1) as f64)
            .collect();
        let mut alphas = Vec::with_capacity(n);
        let mut cum = 1.0_f64;
        for &b in &betas {
            cum *= 1.0 - b;
            alphas.push(cum.sqrt());
        }
        let sigmas: Vec<f64> = alphas.iter().map(|a| (1.0 - a * a).sqrt()).collect();
        Self::from_parts(betas, alphas, sigmas)
    }

    /// Build from explicit coefficient arrays. Intended for hand schedules;
    /// validates the variance-preserving invariants. Betas are recovered from
    /// the cumulative products.
    pub fn from_alpha_sigma(alphas: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if alphas.len() != sigmas.len() {
            return Err(Error::shape(
                format!("{} sigmas", alphas.len()),
                format!("{}", sigmas.len()),
            ));
        }
        if alphas.len() < 2 {
            return Err(Error::config("alphas", "need at least 2 entries"));
        }
        let mut betas = Vec::with_capacity(alphas.len());
        let mut prev = 1.0_f64;
        for &a in &alphas {
            betas.push(1.0 - (a * a) / (prev * prev));
            prev = a;
        }
        Self::from_parts(betas, alphas, sigmas)
    }

    fn from_parts(betas: Vec<f64>, alphas: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let n = alphas.len();
        for t in 0..n {
            let (a, s) = (alphas[t], sigmas[t]);
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::config("alphas", format!("alpha[{t}] = {a} must be > 0")));
            }
            if !(0.0..1.0).contains(&s) {
                return Err(Error::config("sigmas", format!("sigma[{t}] = {s} out of [0,1)")));
            }
            if (a * a + s * s - 1.0).abs() > 1e-12 {
                return Err(Error::config(
                    "alphas/sigmas",
                    format!("alpha^2 + sigma^2 = {} at t = {t}, not 1", a * a + s * s),
                ));
            }
            if t > 0 && alphas[t] >= alphas[t - 1] {
                return Err(Error::config("alphas", "must be strictly decreasing"));
            }
            if t > 0 && sigmas[t] <= sigmas[t - 1] {
                return Err(Error::config("sigmas", "must be strictly increasing"));
            }
        }
        let lambdas = alphas
            .iter()
            .zip(&sigmas)
            .map(|(&a, &s)| if s == 0.0 { f64::INFINITY } else { (a / s).ln() })
            .collect();
        Ok(Schedule { n_train_steps: n, betas, alphas, sigmas, lambdas })
    }

    pub fn n_train_steps(&self) -> usize {
        self.n_train_steps
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    /// Log-SNR `lambda_t = ln(alpha_t / sigma_t)`.
    pub fn lambda(&self, t: usize) -> f64 {
        self.lambdas[t]
    }

    /// Effective diffusion noise level `n_t = sigma_t / alpha_t`.
    pub fn noise_level(&self, t: usize) -> f64 {
        self.sigmas[t] / self.alphas[t]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Respace to `nfe` reverse timesteps.
    ///
    /// Timesteps are floor-strided from the noisiest index downward:
    /// `t_k = (n-1) - k * floor(n / nfe)`. The reverse trajectory makes one
    /// step per entry; the final transition targets schedule index 0.
    pub fn respace(&self, nfe: usize) -> Result<StepPlan> {
        if nfe < 2 || nfe > self.n_train_steps {
            return Err(Error::config(
                "nfe",
                format!("must be in [2, {}], got {nfe}", self.n_train_steps),
            ));
        }
        let stride = self.n_train_steps / nfe;
        let timesteps: Vec<usize> =
            (0..nfe).map(|k| (self.n_train_steps - 1) - k * stride).collect();
        let lambdas: Vec<f64> = timesteps.iter().map(|&t| self.lambdas[t]).collect();
        for w in lambdas.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::config("nfe", "lambda not strictly increasing along reverse"));
            }
        }
        Ok(StepPlan {
            timesteps,
            lambdas,
            lambda_end: self.lambdas[0],
            alpha_end: self.alphas[0],
            sigma_end: self.sigmas[0],
        })
    }
}

/// Respaced reverse-time grid with per-entry log-SNR values.
#[derive(Debug, Clone)]
pub struct StepPlan {
    timesteps: Vec<usize>,
    lambdas: Vec<f64>,
    lambda_end: f64,
    alpha_end: f64,
    sigma_end: f64,
}

/// Everything a stepper needs for one reverse transition.
#[derive(Debug, Clone, Copy)]
pub struct StepCoeffs {
    /// Log-SNR increment `lambda_dst - lambda_src`; positive except for the
    /// degenerate final transition of an identity respacing (where it is 0).
    pub h: f64,
    /// Previous increment `lambda_src - lambda_prev`, absent at the first step.
    pub h_prev: Option<f64>,
    /// `e^{-h}`.
    pub e_mh: f64,
    /// First-order coefficient `A0(h) = 1 - e^{-h}`.
    pub a0: f64,
    /// Second-order coefficient `A1(h) = 1 - (1 - e^{-h})/h`.
    pub a1: f64,
}

/// `A0(h) = 1 - e^{-h}`.
pub fn coeff_a0(h: f64) -> f64 {
    1.0 - (-h).exp()
}

/// `A1(h) = 1 - (1 - e^{-h})/h`, with a series fallback near 0 where the
/// direct expression cancels catastrophically.
pub fn coeff_a1(h: f64) -> f64 {
    if h.abs() < 1e-8 {
        h / 2.0 - h * h / 6.0
    } else {
        1.0 - (1.0 - (-h).exp()) / h
    }
}

impl StepPlan {
    /// Number of reverse steps (equals the number of denoiser evaluations).
    pub fn len(&self) -> usize {
        self.timesteps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timesteps.is_empty()
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Source timestep of step `i`.
    pub fn t_src(&self, i: usize) -> usize {
        self.timesteps[i]
    }

    /// Destination timestep of step `i`; schedule index 0 for the final step.
    pub fn t_dst(&self, i: usize) -> usize {
        if i + 1 < self.timesteps.len() { self.timesteps[i + 1] } else { 0 }
    }

    /// Step coefficients for reverse step `i`.
    pub fn step_coeffs(&self, i: usize) -> StepCoeffs {
        let lam_src = self.lambdas[i];
        let lam_dst = if i + 1 < self.lambdas.len() { self.lambdas[i + 1] } else { self.lambda_end };
        let h = lam_dst - lam_src;
        let h_prev = if i > 0 { Some(lam_src - self.lambdas[i - 1]) } else { None };
        StepCoeffs { h, h_prev, e_mh: (-h).exp(), a0: coeff_a0(h), a1: coeff_a1(h) }
    }

    /// Signal/noise coefficients at the destination of step `i`.
    pub fn dst_alpha_sigma(&self, i: usize, schedule: &Schedule) -> (f64, f64) {
        if i + 1 < self.timesteps.len() {
            let t = self.timesteps[i + 1];
            (schedule.alpha(t), schedule.sigma(t))
        } else {
            (self.alpha_end, self.sigma_end)
        }
    }
}

/// Residual of the identity `e^{-h} = alpha_src * sigma_dst / (alpha_dst * sigma_src)`
/// for a reverse transition from timestep `t_src` to `t_dst < t_src`.
pub fn exp_mh_identity_check(schedule: &Schedule, t_src: usize, t_dst: usize) -> f64 {
    let h = schedule.lambda(t_dst) - schedule.lambda(t_src);
    let lhs = (-h).exp();
    let rhs = schedule.alpha(t_src) * schedule.sigma(t_dst)
        / (schedule.alpha(t_dst) * schedule.sigma(t_src));
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn linear_schedule_matches_hand_computation() {
        // n=2, beta = {0.5, 0.5}: alpha = {sqrt(0.5), 0.5}, sigma = {sqrt(0.5), sqrt(0.75)}
        let s = Schedule::linear(2, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(s.alpha(0), 0.5_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.alpha(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sigma(0), 0.5_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.sigma(1), 0.75_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_beta_rejected() {
        assert!(Schedule::linear(2, 0.0, 0.0).is_err());
        assert!(Schedule::linear(1, 1e-4, 0.02).is_err());
        assert!(Schedule::linear(10, 1e-4, 1.0).is_err());
    }

    #[test]
    fn standard_schedule_is_monotone_and_vp() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        for t in 0..1000 {
            let (a, sg) = (s.alpha(t), s.sigma(t));
            assert!((a * a + sg * sg - 1.0).abs() <= 1e-12);
            if t > 0 {
                assert!(a < s.alpha(t - 1));
                assert!(sg > s.sigma(t - 1));
            }
        }
    }

    #[test]
    fn respace_identity_is_all_indices_reversed() {
        let s = Schedule::linear(16, 1e-3, 0.02).unwrap();
        let plan = s.respace(16).unwrap();
        let expect: Vec<usize> = (0..16).rev().collect();
        assert_eq!(plan.timesteps(), &expect[..]);
    }

    #[test]
    fn respace_1000_to_100_has_stride_10() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        let plan = s.respace(100).unwrap();
        assert_eq!(plan.len(), 100);
        assert_eq!(plan.t_src(0), 999);
        for w in plan.timesteps().windows(2) {
            assert_eq!(w[0] - w[1], 10);
        }
    }

    #[test]
    fn respace_lambda_increases_along_reverse() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        for nfe in [2usize, 3, 20, 99, 100, 1000] {
            let plan = s.respace(nfe).unwrap();
            for i in 0..plan.len() {
                let c = plan.step_coeffs(i);
                if i + 1 < plan.len() {
                    assert!(c.h > 0.0, "nfe={nfe} step={i}");
                } else {
                    assert!(c.h >= 0.0);
                }
            }
        }
        assert!(s.respace(1).is_err());
        assert!(s.respace(1001).is_err());
    }

    #[test]
    fn coefficient_values() {
        assert_abs_diff_eq!(coeff_a0(std::f64::consts::LN_2), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(coeff_a1(1.0), (-1.0_f64).exp(), epsilon = 1e-15);
        // h -> 0 limits
        assert_abs_diff_eq!(coeff_a0(1e-12), 0.0, epsilon = 1e-11);
        assert_abs_diff_eq!(coeff_a1(1e-12), 0.0, epsilon = 1e-11);
        assert_eq!(coeff_a1(0.0), 0.0);
        // series and direct expressions agree at the switchover scale
        for &h in &[1e-8f64, 2e-8, 5e-8] {
            let direct = 1.0 - (1.0 - (-h).exp()) / h;
            assert_abs_diff_eq!(coeff_a1(h), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_mh_identity_on_hand_schedule() {
        // alpha = {0.9, 0.6}, sigma = {sqrt(0.19), 0.8}
        let s = Schedule::from_alpha_sigma(vec![0.9, 0.6], vec![0.19_f64.sqrt(), 0.8]).unwrap();
        assert!(exp_mh_identity_check(&s, 1, 0) <= 1e-12);
        // h = 0 when src == dst, both sides 1
        assert_eq!(exp_mh_identity_check(&s, 1, 1), 0.0);
    }

    #[test]
    fn exp_mh_identity_on_linear_schedule() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        let mut max_dev = 0.0_f64;
        for t in 1..1000 {
            max_dev = max_dev.max(exp_mh_identity_check(&s, t, t - 1));
        }
        assert!(max_dev <= 1e-12, "max deviation {max_dev}");
    }

    #[test]
    fn noise_level_matches_exp_neg_lambda() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        for t in (0..1000).step_by(37) {
            assert_abs_diff_eq!(s.noise_level(t), (-s.lambda(t)).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn a0_plus_e_mh_is_one_exactly() {
        let s = Schedule::linear(1000, 1e-4, 0.02).unwrap();
        let plan = s.respace(20).unwrap();
        for i in 0..plan.len() {
            let c = plan.step_coeffs(i);
            assert!((c.a0 + c.e_mh - 1.0).abs() <= 1e-15);
        }
    }

    proptest! {
        #[test]
        fn respace_monotone_for_any_nfe(nfe in 2usize..=200) {
            let s = Schedule::linear(200, 1e-4, 0.02).unwrap();
            let plan = s.respace(nfe).unwrap();
            prop_assert_eq!(plan.len(), nfe);
            for w in plan.lambdas().windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn vp_invariant_for_random_linear_schedules(
            n in 2usize..400,
            b0 in 1e-6f64..0.01,
            spread in 0.0f64..0.05,
        ) {
            let s = Schedule::linear(n, b0, b0 + spread).unwrap();
            for t in 0..n {
                let (a, sg) = (s.alpha(t), s.sigma(t));
                prop_assert!((a * a + sg * sg - 1.0).abs() <= 1e-12);
            }
        }
    }
}
