//! Monte Carlo verification of the one-step risk analysis: the bias-variance
//! trade-off of the lagged target, its closed forms, and the improvement
//! condition, in both the equal-variance and the generalized unequal-variance
//! settings.
//!
//! Risks are reported at the estimator level; state-level risks are
//! `alpha_dst^2` times these, so the improvement condition is unaffected.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Second-moment model of the paired estimation errors
/// `(eta_t, eta_next)` around the local targets, plus the target drift `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorModel {
    pub dim: usize,
    /// Per-component variance of `eta_t`.
    pub sigma_diag: Vec<f64>,
    /// Correlation between paired errors in the equal-variance model.
    pub rho: f64,
    /// Target drift `r = mu_next - mu_t`.
    pub r: Vec<f64>,
    /// Per-component variance of `eta_next` (generalized model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_diag_next: Option<Vec<f64>>,
    /// Per-component cross-covariance diagonal (generalized model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_cross_diag: Option<Vec<f64>>,
}

impl ErrorModel {
    /// Equal-variance model with isotropic `sigma^2` and drift `r`.
    pub fn isotropic(dim: usize, sigma_sq: f64, rho: f64, r: Vec<f64>) -> Result<Self> {
        let m = ErrorModel {
            dim,
            sigma_diag: vec![sigma_sq; dim],
            rho,
            r,
            sigma_diag_next: None,
            cov_cross_diag: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if self.sigma_diag.len() != self.dim || self.r.len() != self.dim {
            return Err(Error::config("sigma_diag/r", "length must equal dim"));
        }
        if self.sigma_diag.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::config("sigma_diag", "entries must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho", "must be in [0, 1]"));
        }
        match (&self.sigma_diag_next, &self.cov_cross_diag) {
            (None, None) => {}
            (Some(next), Some(cross)) => {
                if next.len() != self.dim || cross.len() != self.dim {
                    return Err(Error::config("sigma_diag_next/cov_cross_diag", "length must equal dim"));
                }
                for i in 0..self.dim {
                    if next[i] <= 0.0 || !next[i].is_finite() {
                        return Err(Error::config("sigma_diag_next", "entries must be > 0"));
                    }
                    // 2x2 per-component covariance block must be PSD
                    if cross[i] * cross[i] > self.sigma_diag[i] * next[i] + 1e-15 {
                        return Err(Error::config(
                            "cov_cross_diag",
                            format!("component {i} block not positive semidefinite"),
                        ));
                    }
                }
            }
            _ => {
                return Err(Error::config(
                    "sigma_diag_next",
                    "generalized model needs both sigma_diag_next and cov_cross_diag",
                ));
            }
        }
        Ok(())
    }

    fn is_generalized(&self) -> bool {
        self.sigma_diag_next.is_some()
    }

    /// Per-component (var_t, var_next, cross) triples.
    fn component_moments(&self, i: usize) -> (f64, f64, f64) {
        let s = self.sigma_diag[i];
        match (&self.sigma_diag_next, &self.cov_cross_diag) {
            (Some(next), Some(cross)) => (s, next[i], cross[i]),
            _ => (s, s, self.rho * s),
        }
    }

    pub fn trace_sigma(&self) -> f64 {
        self.sigma_diag.iter().sum()
    }

    pub fn r_norm_sq(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum()
    }

    fn draw_pair(&self, rng: &mut ChaCha8Rng, eta_t: &mut [f64], eta_next: &mut [f64]) {
        for i in 0..self.dim {
            let (s, s_next, c) = self.component_moments(i);
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            eta_t[i] = s.sqrt() * z1;
            let load = c / s.sqrt();
            let resid = (s_next - c * c / s).max(0.0).sqrt();
            eta_next[i] = load * z1 + resid * z2;
        }
    }
}

/// Paired error draws, one row per trial.
pub struct ErrorDraws {
    pub eta_t: Array2<f64>,
    pub eta_next: Array2<f64>,
}

/// Draw `n_trials` paired errors; deterministic given the seed.
pub fn sample_errors(model: &ErrorModel, n_trials: usize, seed: u64) -> Result<ErrorDraws> {
    model.validate()?;
    if n_trials == 0 {
        return Err(Error::config("n_trials", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eta_t = Array2::zeros((n_trials, model.dim));
    let mut eta_next = Array2::zeros((n_trials, model.dim));
    let mut a = vec![0.0; model.dim];
    let mut b = vec![0.0; model.dim];
    for trial in 0..n_trials {
        model.draw_pair(&mut rng, &mut a, &mut b);
        for i in 0..model.dim {
            eta_t[(trial, i)] = a[i];
            eta_next[(trial, i)] = b[i];
        }
    }
    Ok(ErrorDraws { eta_t, eta_next })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalRisks {
    pub risk_ps: Estimate,
    pub risk_lamp: Estimate,
}

/// Monte Carlo estimator-level risks:
/// `risk_ps = E||eta_t||^2`, `risk_lamp = E||(1-b) eta_t + b eta_next + b r||^2`.
pub fn empirical_risks(model: &ErrorModel, beta: f64, n_trials: usize, seed: u64) -> Result<EmpiricalRisks> {
    model.validate()?;
    if n_trials == 0 {
        return Err(Error::config("n_trials", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eta_t = vec![0.0; model.dim];
    let mut eta_next = vec![0.0; model.dim];
    let mut acc_ps = Welford::new();
    let mut acc_lamp = Welford::new();
    for _ in 0..n_trials {
        model.draw_pair(&mut rng, &mut eta_t, &mut eta_next);
        let mut sq_ps = 0.0;
        let mut sq_lamp = 0.0;
        for i in 0..model.dim {
            sq_ps += eta_t[i] * eta_t[i];
            let e = (1.0 - beta) * eta_t[i] + beta * eta_next[i] + beta * model.r[i];
            sq_lamp += e * e;
        }
        acc_ps.push(sq_ps);
        acc_lamp.push(sq_lamp);
    }
    Ok(EmpiricalRisks { risk_ps: acc_ps.estimate(), risk_lamp: acc_lamp.estimate() })
}

struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate { mean: self.mean, se: (var / self.n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClosedFormRisks {
    pub risk_ps: f64,
    pub risk_lamp: f64,
}

/// Closed-form estimator-level risks. Equal-variance path:
/// `[1 - 2b(1-b)(1-rho)] tr(S) + b^2 ||r||^2`; generalized path:
/// `b^2 ||r||^2 + (1-b)^2 tr(S) + b^2 tr(S') + 2b(1-b) tr(C)`.
pub fn closed_form_risks(model: &ErrorModel, beta: f64) -> Result<ClosedFormRisks> {
    model.validate()?;
    let tr = model.trace_sigma();
    let r2 = model.r_norm_sq();
    let risk_lamp = if model.is_generalized() {
        let tr_next: f64 = model.sigma_diag_next.as_ref().unwrap().iter().sum();
        let tr_cross: f64 = model.cov_cross_diag.as_ref().unwrap().iter().sum();
        beta * beta * r2
            + (1.0 - beta) * (1.0 - beta) * tr
            + beta * beta * tr_next
            + 2.0 * beta * (1.0 - beta) * tr_cross
    } else {
        (1.0 - 2.0 * beta * (1.0 - beta) * (1.0 - model.rho)) * tr + beta * beta * r2
    };
    Ok(ClosedFormRisks { risk_ps: tr, risk_lamp })
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// The strict-improvement condition. Equal-variance:
/// `b ||r||^2 < 2 (1-b)(1-rho) tr(S)`; generalized:
/// `b (||r||^2 + tr(S) + tr(S')) < 2 (tr(S) - (1-b) tr(C))`.
pub fn improvement_condition(model: &ErrorModel, beta: f64) -> Result<ConditionReport> {
    model.validate()?;
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::config("beta", "condition requires beta > 0"));
    }
    let (lhs, rhs) = if model.is_generalized() {
        let tr = model.trace_sigma();
        let tr_next: f64 = model.sigma_diag_next.as_ref().unwrap().iter().sum();
        let tr_cross: f64 = model.cov_cross_diag.as_ref().unwrap().iter().sum();
        (beta * (model.r_norm_sq() + tr + tr_next), 2.0 * (tr - (1.0 - beta) * tr_cross))
    } else {
        (
            beta * model.r_norm_sq(),
            2.0 * (1.0 - beta) * (1.0 - model.rho) * model.trace_sigma(),
        )
    };
    Ok(ConditionReport { holds: lhs < rhs, lhs, rhs })
}

/// One row of a lag-weight sweep.
#[derive(Debug, Clone)]
pub struct RiskRow {
    pub beta: f64,
    pub risk_ps_cf: f64,
    pub risk_lamp_cf: f64,
    pub risk_lamp_mc: f64,
    pub se: f64,
    pub condition_holds: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<RiskRow>,
    /// Grid index minimizing the closed-form lagged risk.
    pub argmin: usize,
}

/// Evaluate closed-form and Monte Carlo risks over a grid of lag weights.
/// All rows share the same draws (common random numbers).
pub fn sweep_beta(model: &ErrorModel, betas: &[f64], n_trials: usize, seed: u64) -> Result<SweepResult> {
    if betas.is_empty() {
        return Err(Error::config("betas", "grid must be non-empty"));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let cf = closed_form_risks(model, beta)?;
        let mc = empirical_risks(model, beta, n_trials, seed)?;
        let condition_holds = if beta > 0.0 {
            Some(improvement_condition(model, beta)?.holds)
        } else {
            None
        };
        rows.push(RiskRow {
            beta,
            risk_ps_cf: cf.risk_ps,
            risk_lamp_cf: cf.risk_lamp,
            risk_lamp_mc: mc.risk_lamp.mean,
            se: mc.risk_lamp.se,
            condition_holds,
        });
    }
    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.risk_lamp_cf.total_cmp(&b.risk_lamp_cf))
        .map(|(i, _)| i)
        .unwrap();
    Ok(SweepResult { rows, argmin })
}
