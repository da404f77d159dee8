//! Reverse-time steppers: the posterior-sampling baseline, first- and
//! second-order exponential steps, and the lagged multistep update, each
//! available in its defining form and its algebraically equal alternatives
//! for identity testing.
//!
//! Notation per step: the state moves from timestep `t_src` to `t_dst` with
//! `h = lambda(t_dst) - lambda(t_src)`, `A0(h) = 1 - e^{-h}`,
//! `A1(h) = 1 - (1 - e^{-h})/h`, and `h_prev` the previous step's increment.

use serde::{Deserialize, Serialize};

use crate::corrections::{lag_filter, Correction};
use crate::error::{Error, Result};
use crate::imaging::{max_abs_diff, Image};
use crate::linops::SpectralOperator;
use crate::priors::{x0_hat_from_eps, Denoiser};
use crate::schedule::{Schedule, StepCoeffs, StepPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ps,
    OneM,
    TwoM,
    Lamp,
}

/// How the lag weight `beta_t` is produced each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `beta_t = -gamma A1(h) / h_prev`, recomputed per step.
    #[default]
    FromGamma,
    /// Constant `beta_t` taken from `beta_const`.
    Constant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    /// Temporal-correction coefficient; negative values lag, zero reduces the
    /// lagged method to the plain posterior step.
    #[serde(default)]
    pub gamma: f64,
    /// Reverse steps that run as plain posterior sampling before the lagged
    /// correction activates.
    #[serde(default)]
    pub n_warm: usize,
    #[serde(default)]
    pub beta_mode: BetaMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_const: Option<f64>,
}

impl SamplerConfig {
    pub fn new(method: Method) -> Self {
        SamplerConfig { method, gamma: 0.0, n_warm: 0, beta_mode: BetaMode::FromGamma, beta_const: None }
    }

    pub fn lamp(gamma: f64, n_warm: usize) -> Self {
        SamplerConfig { method: Method::Lamp, gamma, n_warm, beta_mode: BetaMode::FromGamma, beta_const: None }
    }
}

/// Scalar quantities of one reverse transition.
#[derive(Debug, Clone, Copy)]
pub struct StepQuantities {
    pub t_src: usize,
    pub t_dst: usize,
    pub alpha_src: f64,
    pub sigma_src: f64,
    pub alpha_dst: f64,
    pub sigma_dst: f64,
    pub coeffs: StepCoeffs,
}

impl StepQuantities {
    pub fn from_plan(schedule: &Schedule, plan: &StepPlan, i: usize) -> Self {
        let t_src = plan.t_src(i);
        let (alpha_dst, sigma_dst) = plan.dst_alpha_sigma(i, schedule);
        StepQuantities {
            t_src,
            t_dst: plan.t_dst(i),
            alpha_src: schedule.alpha(t_src),
            sigma_src: schedule.sigma(t_src),
            alpha_dst,
            sigma_dst,
            coeffs: plan.step_coeffs(i),
        }
    }
}

/// Posterior step in its defining form: `alpha_dst D + sigma_dst eps`.
/// With `D = x0_hat` this is exactly the deterministic DDIM update.
pub fn ps_update(q: &StepQuantities, d: &Image, eps: &Image) -> Image {
    Image::from_array(d.data() * q.alpha_dst + &(eps.data() * q.sigma_dst))
}

/// Posterior step decomposed into the first-order exponential step plus the
/// residual forcing term:
/// `(sigma_dst/sigma_src) x + alpha_dst A0(h) D + alpha_dst e^{-h} (D - x0_hat)`.
pub fn ps_update_decomposed(q: &StepQuantities, x: &Image, d: &Image, x0_hat: &Image) -> Image {
    let c = &q.coeffs;
    Image::from_array(
        x.data() * (q.sigma_dst / q.sigma_src)
            + &(d.data() * (q.alpha_dst * c.a0))
            + &((d.data() - x0_hat.data()) * (q.alpha_dst * c.e_mh)),
    )
}

/// First-order exponential step:
/// `(sigma_dst/sigma_src) x + alpha_dst A0(h) D`.
pub fn one_m_update(q: &StepQuantities, x: &Image, d: &Image) -> Image {
    Image::from_array(x.data() * (q.sigma_dst / q.sigma_src) + &(d.data() * (q.alpha_dst * q.coeffs.a0)))
}

/// Second-order multistep: the first-order step plus the discrete-derivative
/// term `alpha_dst A1(h) gamma (D - D_prev) / h_prev`. Falls back to the
/// first-order step when no previous estimate exists.
pub fn two_m_update(
    q: &StepQuantities,
    x: &Image,
    d: &Image,
    d_prev: Option<&Image>,
    gamma: f64,
) -> Image {
    let base = one_m_update(q, x, d);
    match (d_prev, q.coeffs.h_prev) {
        (Some(prev), Some(h_prev)) => {
            let scale = q.alpha_dst * q.coeffs.a1 * gamma / h_prev;
            Image::from_array(base.data() + &((d.data() - prev.data()) * scale))
        }
        _ => base,
    }
}

/// Lagged update, residual form: the second-order step boosted by the
/// residual forcing `alpha_dst e^{-h} (D - x0_hat)`.
pub fn lamp_update_via_2m(
    q: &StepQuantities,
    x: &Image,
    d: &Image,
    d_prev: &Image,
    x0_hat: &Image,
    gamma: f64,
) -> Image {
    let two_m = two_m_update(q, x, d, Some(d_prev), gamma);
    Image::from_array(two_m.data() + &((d.data() - x0_hat.data()) * (q.alpha_dst * q.coeffs.e_mh)))
}

/// Lagged update, plug-in form: the posterior step plus the temporal
/// correction `alpha_dst A1(h) gamma (D - D_prev) / h_prev`.
pub fn lamp_update_via_ps(
    q: &StepQuantities,
    d: &Image,
    d_prev: &Image,
    eps: &Image,
    gamma: f64,
) -> Image {
    let ps = ps_update(q, d, eps);
    let h_prev = q.coeffs.h_prev.expect("lagged update requires h_prev");
    let scale = q.alpha_dst * q.coeffs.a1 * gamma / h_prev;
    Image::from_array(ps.data() + &((d.data() - d_prev.data()) * scale))
}

/// Lagged update, filtered-target form: the posterior step applied to
/// `(1 - beta_t) D + beta_t D_prev`.
pub fn lamp_update_filtered(
    q: &StepQuantities,
    d: &Image,
    d_prev: &Image,
    eps: &Image,
    beta_t: f64,
) -> Image {
    let filtered = lag_filter(d, d_prev, beta_t);
    ps_update(q, &filtered, eps)
}

/// Effective lag weight `beta_t = -gamma A1(h) / h_prev`.
pub fn beta_from_gamma(gamma: f64, q: &StepQuantities) -> Option<f64> {
    q.coeffs.h_prev.map(|h_prev| -gamma * q.coeffs.a1 / h_prev)
}

/// Everything a trajectory needs besides the sampler configuration.
pub struct TrajectoryInputs<'a> {
    pub schedule: &'a Schedule,
    pub plan: &'a StepPlan,
    pub denoiser: &'a dyn Denoiser,
    pub correction: &'a Correction,
    pub operator: &'a SpectralOperator,
    pub measurement: &'a Image,
}

/// Trajectory initialization.
pub enum Init {
    /// `x_T ~ N(0, I)` from the seeded generator.
    Noise(u64),
    /// Explicit starting state.
    State(Image),
}

/// One row of the per-step log.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub t: usize,
    pub h: f64,
    pub h_prev: Option<f64>,
    pub beta_t: f64,
    /// `||D_t - x0_hat||`
    pub res_norm: f64,
    /// `||D_t - D_prev||`, absent at the first step
    pub temporal_norm: Option<f64>,
}

#[derive(Debug)]
pub struct TrajectoryResult {
    pub x0: Image,
    /// State after each reverse step.
    pub states: Vec<Image>,
    pub records: Vec<StepRecord>,
    pub denoiser_evals: usize,
    /// Largest per-step deviation between the direct posterior form and its
    /// residual decomposition.
    pub max_ps_decomp_dev: f64,
    /// Mean of the per-step lag weights (0 outside the lagged branch).
    pub beta_bar: f64,
}

/// Iterate the configured stepper over the full plan. Exactly one denoiser
/// evaluation per reverse step; aborts on non-finite state.
pub fn run_trajectory(
    cfg: &SamplerConfig,
    inputs: &TrajectoryInputs,
    init: Init,
) -> Result<TrajectoryResult> {
    let plan = inputs.plan;
    let nfe = plan.len();
    if cfg.n_warm >= nfe {
        return Err(Error::config("n_warm", format!("must be < nfe = {nfe}")));
    }
    if cfg.beta_mode == BetaMode::Constant && cfg.beta_const.is_none() {
        return Err(Error::config("beta_const", "required when beta_mode = constant"));
    }
    let mut x = match init {
        Init::Noise(seed) => Image::standard_normal(inputs.operator.in_shape(), seed),
        Init::State(s) => s,
    };
    if x.shape() != inputs.operator.in_shape() {
        return Err(Error::shape(
            format!("{}", inputs.operator.in_shape()),
            format!("{}", x.shape()),
        ));
    }

    let mut d_prev: Option<Image> = None;
    let mut states = Vec::with_capacity(nfe);
    let mut records = Vec::with_capacity(nfe);
    let mut evals = 0usize;
    let mut max_dev = 0.0f64;
    let mut beta_sum = 0.0f64;

    for k in 0..nfe {
        let q = StepQuantities::from_plan(inputs.schedule, plan, k);
        let eps = inputs.denoiser.predict_eps(&x, q.t_src, inputs.schedule)?;
        evals += 1;
        let x0_hat = x0_hat_from_eps(&x, &eps, q.alpha_src, q.sigma_src);
        let d = inputs.correction.apply(&x0_hat, inputs.measurement, inputs.operator, q.t_src, inputs.schedule)?;

        let (x_next, beta_t, d_eff) = match cfg.method {
            Method::Ps => (ps_update(&q, &d, &eps), 0.0, d.clone()),
            Method::OneM => (one_m_update(&q, &x, &d), 0.0, d.clone()),
            Method::TwoM => (two_m_update(&q, &x, &d, d_prev.as_ref(), cfg.gamma), 0.0, d.clone()),
            Method::Lamp => {
                let lag_active = k >= cfg.n_warm && d_prev.is_some();
                if !lag_active {
                    (ps_update(&q, &d, &eps), 0.0, d.clone())
                } else {
                    let beta = match cfg.beta_mode {
                        BetaMode::FromGamma => beta_from_gamma(cfg.gamma, &q)
                            .expect("h_prev present when d_prev is"),
                        BetaMode::Constant => cfg.beta_const.unwrap(),
                    };
                    let filtered = lag_filter(&d, d_prev.as_ref().unwrap(), beta);
                    (ps_update(&q, &filtered, &eps), beta, filtered)
                }
            }
        };

        // The posterior step and its residual decomposition must agree at
        // every step, whatever target actually drove the update.
        let direct = ps_update(&q, &d_eff, &eps);
        let decomposed = ps_update_decomposed(&q, &x, &d_eff, &x0_hat);
        max_dev = max_dev.max(max_abs_diff(&direct, &decomposed));

        if !x_next.is_finite() {
            return Err(Error::NonFinite { step: k, t: q.t_src });
        }

        let res_norm = Image::from_array(d.data() - x0_hat.data()).l2_norm();
        let temporal_norm =
            d_prev.as_ref().map(|p| Image::from_array(d.data() - p.data()).l2_norm());
        records.push(StepRecord {
            step: k,
            t: q.t_src,
            h: q.coeffs.h,
            h_prev: q.coeffs.h_prev,
            beta_t,
            res_norm,
            temporal_norm,
        });
        beta_sum += beta_t;

        d_prev = Some(d);
        x = x_next;
        states.push(x.clone());
    }

    Ok(TrajectoryResult {
        x0: x,
        states,
        records,
        denoiser_evals: evals,
        max_ps_decomp_dev: max_dev,
        beta_bar: beta_sum / nfe as f64,
    })
}
