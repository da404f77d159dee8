//! Measurement-aware estimates `D_t = C_t(x0_hat, y, K)`.
//!
//! Three correction operators: the identity (reducing posterior sampling to
//! plain deterministic sampling), the proximal solve used by DiffPIR, and the
//! spectral three-regime rule used by DDRM. All are deterministic and act
//! componentwise in the operator's spectral coordinates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::linops::SpectralOperator;
use crate::schedule::Schedule;

/// Correction selector and hyperparameters as they appear in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub kind: CorrectionKind,
    /// Measurement noise level `n_0`; defaults to the degradation's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    /// DiffPIR regularization weight, constant over the trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// DDRM stochasticity parameter; enters only through `n_t sqrt(1 - eta^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// DDRM replacement strength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_b: Option<f64>,
    /// DiffPIR stochastic mixing weight. Accepted and recorded for config
    /// fidelity; the deterministic sampler ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionKind {
    Identity,
    Diffpir,
    Ddrm,
}

impl CorrectionConfig {
    pub fn identity() -> Self {
        CorrectionConfig { kind: CorrectionKind::Identity, sigma_y: None, mu: None, eta: None, eta_b: None, zeta: None }
    }

    pub fn diffpir(mu: f64) -> Self {
        CorrectionConfig { kind: CorrectionKind::Diffpir, sigma_y: None, mu: Some(mu), eta: None, eta_b: None, zeta: None }
    }

    pub fn ddrm(sigma_y: f64, eta: f64, eta_b: f64) -> Self {
        CorrectionConfig {
            kind: CorrectionKind::Ddrm,
            sigma_y: Some(sigma_y),
            mu: None,
            eta: Some(eta),
            eta_b: Some(eta_b),
            zeta: None,
        }
    }

    /// Resolve into a runnable correction. `default_sigma_y` comes from the
    /// degradation spec when the config leaves `sigma_y` unset.
    pub fn build(&self, default_sigma_y: f64) -> Result<Correction> {
        match self.kind {
            CorrectionKind::Identity => Ok(Correction::Identity),
            CorrectionKind::Diffpir => {
                let mu = self.mu.ok_or_else(|| Error::config("mu", "required for diffpir"))?;
                if !mu.is_finite() || mu < 0.0 {
                    return Err(Error::config("mu", "must be finite and >= 0"));
                }
                Ok(Correction::DiffPir { mu })
            }
            CorrectionKind::Ddrm => {
                let sigma_y = self.sigma_y.unwrap_or(default_sigma_y);
                let eta = self.eta.unwrap_or(0.85);
                let eta_b = self.eta_b.unwrap_or(1.0);
                if sigma_y < 0.0 {
                    return Err(Error::config("sigma_y", "must be >= 0"));
                }
                if !(0.0..=1.0).contains(&eta) {
                    return Err(Error::config("eta", "must be in [0, 1]"));
                }
                if !(0.0..=1.0).contains(&eta_b) {
                    return Err(Error::config("eta_b", "must be in [0, 1]"));
                }
                Ok(Correction::Ddrm { sigma_y, eta, eta_b })
            }
        }
    }
}

/// Runnable correction operator.
#[derive(Debug, Clone, Copy)]
pub enum Correction {
    Identity,
    DiffPir { mu: f64 },
    Ddrm { sigma_y: f64, eta: f64, eta_b: f64 },
}

impl Correction {
    /// `D_t` from the denoised estimate, the measurement, and the operator.
    pub fn apply(
        &self,
        x0_hat: &Image,
        y: &Image,
        op: &SpectralOperator,
        t: usize,
        schedule: &Schedule,
    ) -> Result<Image> {
        match *self {
            Correction::Identity => Ok(x0_hat.clone()),
            Correction::DiffPir { mu } => correct_diffpir(x0_hat, y, op, mu),
            Correction::Ddrm { sigma_y, eta, eta_b } => {
                correct_ddrm(x0_hat, y, op, schedule.noise_level(t), sigma_y, eta, eta_b)
            }
        }
    }
}

/// Proximal correction: the minimizer of
/// `1/2 ||y - K d||^2 + mu/2 ||d - x0_hat||^2`, solved componentwise in
/// spectral coordinates as `(a y + mu x) / (a^2 + mu)`.
pub fn correct_diffpir(x0_hat: &Image, y: &Image, op: &SpectralOperator, mu: f64) -> Result<Image> {
    if mu <= 0.0 {
        let tol = op.a_tol();
        let full_rank = op.paired_len() == op.in_shape().numel()
            && op.spectrum().iter().all(|&a| a > tol);
        if !full_rank {
            return Err(Error::Singular(
                "diffpir with mu = 0 requires a full-column-rank operator".into(),
            ));
        }
    }
    let mut xbar = op.to_spectral(x0_hat)?;
    let ybar = op.to_spectral_out(y)?;
    let paired = op.paired_len();
    for i in 0..paired {
        xbar[i] = diffpir_component(op.spectrum()[i], mu, xbar[i], ybar[i]);
    }
    // null-space components (i >= paired) keep the prior value
    op.from_spectral(&xbar)
}

/// One spectral component of the DiffPIR proximal solve.
pub fn diffpir_component(a: f64, mu: f64, xbar: Complex64, ybar: Complex64) -> Complex64 {
    if a == 0.0 && mu == 0.0 {
        return xbar;
    }
    (ybar * a + xbar * mu) / (a * a + mu)
}

/// The three DDRM regimes, classified from the singular value `a`, the
/// effective diffusion noise level `n_t`, and the measurement noise `n_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrmRegime {
    /// `a = 0` (or `n_0 = 0` with `a n_t = 0`): keep the prior estimate.
    Unobserved,
    /// `a n_t > n_0`: blend toward the pseudo-inverse value.
    PinvMix,
    /// `a n_t <= n_0`, `a > 0`, `n_0 > 0`: residual correction.
    Residual,
}

pub fn ddrm_regime(a: f64, n_t: f64, n_0: f64) -> DdrmRegime {
    if a == 0.0 {
        DdrmRegime::Unobserved
    } else if a * n_t > n_0 {
        DdrmRegime::PinvMix
    } else if n_0 == 0.0 {
        // a > 0 and a * n_t <= 0 forces n_t = 0: no division is possible,
        // keep the prior.
        DdrmRegime::Unobserved
    } else {
        DdrmRegime::Residual
    }
}

/// One spectral component of the deterministic DDRM target.
pub fn ddrm_component(
    a: f64,
    n_t: f64,
    n_0: f64,
    eta: f64,
    eta_b: f64,
    xbar: Complex64,
    ybar: Complex64,
) -> Complex64 {
    match ddrm_regime(a, n_t, n_0) {
        DdrmRegime::Unobserved => xbar,
        DdrmRegime::PinvMix => ybar / a * eta_b + xbar * (1.0 - eta_b),
        DdrmRegime::Residual => {
            let n_tilde = n_t * (1.0 - eta * eta).sqrt();
            xbar + (ybar - xbar * a) * (n_tilde / n_0)
        }
    }
}

/// Spectral DDRM correction applied across all components.
pub fn correct_ddrm(
    x0_hat: &Image,
    y: &Image,
    op: &SpectralOperator,
    n_t: f64,
    sigma_y: f64,
    eta: f64,
    eta_b: f64,
) -> Result<Image> {
    let mut xbar = op.to_spectral(x0_hat)?;
    let ybar = op.to_spectral_out(y)?;
    let paired = op.paired_len();
    for i in 0..paired {
        xbar[i] = ddrm_component(op.spectrum()[i], n_t, sigma_y, eta, eta_b, xbar[i], ybar[i]);
    }
    op.from_spectral(&xbar)
}

/// Lagged target `(1 - beta) D_t + beta D_prev`. Affine, no clipping.
pub fn lag_filter(d: &Image, d_prev: &Image, beta: f64) -> Image {
    if beta == 0.0 {
        return d.clone();
    }
    Image::from_array(d.data() * (1.0 - beta) + &(d_prev.data() * beta))
}
