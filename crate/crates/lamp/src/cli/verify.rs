//! Executable identity, oracle, and statistical suites covering every module
//! invariant. `verify_all` runs the lot and reports per-suite maxima; the
//! acceptance tests reuse the same suite functions.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corrections::{
    correct_ddrm, correct_diffpir, ddrm_component, ddrm_regime, lag_filter, Correction,
    CorrectionConfig, DdrmRegime,
};
use crate::error::Result;
use crate::imaging::{
    degrade, exact_posterior_mean, max_abs_diff, mse, psnr, ssim, Image, ImageShape,
};
use crate::linops::{
    make_block_sr, make_dense, make_gaussian_blur, make_motion_blur, SpectralOperator,
};
use crate::priors::{
    radial_spectral_var, tweedie, CountingDenoiser, Denoiser, GaussianPrior, GmmPrior,
};
use crate::risk::{
    closed_form_risks, empirical_risks, improvement_condition, ErrorModel,
};
use crate::samplers::{
    beta_from_gamma, lamp_update_filtered, lamp_update_via_2m, lamp_update_via_ps, one_m_update,
    ps_update, ps_update_decomposed, run_trajectory, Init, Method, SamplerConfig, StepQuantities,
    TrajectoryInputs,
};
use crate::schedule::{exp_mh_identity_check, Schedule};

/// One named deviation against its tolerance.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub dev: f64,
    pub tol: f64,
}

impl CheckLine {
    fn new(label: impl Into<String>, dev: f64, tol: f64) -> Self {
        CheckLine { label: label.into(), dev, tol }
    }

    pub fn passed(&self) -> bool {
        self.dev.is_finite() && self.dev <= self.tol
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: Vec<CheckLine>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckLine::passed)
    }

    pub fn max_dev(&self) -> f64 {
        self.checks.iter().map(|c| c.dev).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    /// Human-readable summary, one line per suite plus failing checks.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let status = if s.passed() { "pass" } else { "FAIL" };
            out.push_str(&format!(
                "[{status}] {:<12} max deviation {:.3e} over {} checks\n",
                s.name,
                s.max_dev(),
                s.checks.len()
            ));
            for c in &s.checks {
                if !c.passed() {
                    out.push_str(&format!(
                        "       failed: {} (dev {:.3e} > tol {:.3e})\n",
                        c.label, c.dev, c.tol
                    ));
                }
            }
        }
        out
    }
}

/// Run every suite. `risk_trials` controls the Monte Carlo sample count.
pub fn verify_all(risk_trials: usize) -> Result<VerifyReport> {
    Ok(VerifyReport {
        suites: vec![
            suite_schedule()?,
            suite_linops()?,
            suite_priors()?,
            suite_corrections()?,
            suite_samplers()?,
            suite_risk(risk_trials)?,
            suite_imaging()?,
        ],
    })
}

pub fn suite_schedule() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let s = Schedule::linear(1000, 1e-4, 0.02)?;

    let vp = (0..1000)
        .map(|t| (s.alpha(t).powi(2) + s.sigma(t).powi(2) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::new("alpha^2 + sigma^2 = 1", vp, 1e-12));

    let mut a0_dev = 0.0f64;
    for nfe in [20usize, 100] {
        let plan = s.respace(nfe)?;
        for i in 0..plan.len() {
            let c = plan.step_coeffs(i);
            a0_dev = a0_dev.max((c.a0 + c.e_mh - 1.0).abs());
        }
    }
    checks.push(CheckLine::new("A0(h) + e^{-h} = 1", a0_dev, 1e-15));

    let nl = (0..1000)
        .map(|t| (s.noise_level(t) - (-s.lambda(t)).exp()).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::new("sigma/alpha = e^{-lambda}", nl, 1e-12));

    let mh = (1..1000).map(|t| exp_mh_identity_check(&s, t, t - 1)).fold(0.0, f64::max);
    checks.push(CheckLine::new("e^{-h} coefficient identity", mh, 1e-12));

    let mut monotone_failures = 0usize;
    for nfe in [2usize, 3, 5, 20, 100, 500, 999, 1000] {
        let plan = s.respace(nfe)?;
        for w in plan.lambdas().windows(2) {
            if w[1] <= w[0] {
                monotone_failures += 1;
            }
        }
    }
    checks.push(CheckLine::new("lambda strictly increasing along reverse", monotone_failures as f64, 0.0));

    Ok(SuiteResult { name: "schedule", checks })
}

fn audit_operators() -> Result<Vec<(String, SpectralOperator)>> {
    let shape = ImageShape::new(1, 8, 8);
    Ok(vec![
        ("gaussian_blur 3x3 s=1".into(), make_gaussian_blur(shape, 3, 1.0)?),
        ("motion_blur 5x5 i=0.5".into(), make_motion_blur(shape, 5, 0.5, 7)?),
        ("block_sr r=2".into(), make_block_sr(shape, 2)?),
        ("block_sr r=4".into(), make_block_sr(shape, 4)?),
    ])
}

/// Audit one operator against its dense oracle; reused by the op-check
/// front-end for user-supplied operators.
pub fn audit_operator(name: &str, op: &SpectralOperator) -> Result<Vec<CheckLine>> {
    let mut checks = Vec::new();
    let n = op.in_shape().numel();
    let m = op.out_shape().numel();
    let oracle = op.dense_oracle()?;
    let dense = DMatrix::from_row_iterator(m, n, oracle.iter().cloned());

    // spectrum against dense SVD
    let svd = dense.clone().svd(false, false);
    let mut svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
    svals.resize(n, 0.0);
    svals.sort_by(|a, b| b.total_cmp(a));
    let mut ours: Vec<f64> = op.spectrum().to_vec();
    ours.sort_by(|a, b| b.total_cmp(a));
    let sv_dev = ours.iter().zip(&svals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(CheckLine::new(format!("{name}: spectrum vs dense svd"), sv_dev, 1e-8));

    // apply / adjoint / pinv against dense linear algebra
    let x = Image::standard_normal(op.in_shape(), 101);
    let y = Image::standard_normal(op.out_shape(), 102);
    let xv = nalgebra::DVector::from_column_slice(x.as_flat());
    let yv = nalgebra::DVector::from_column_slice(y.as_flat());

    let apply_dev = op
        .apply(&x)?
        .as_flat()
        .iter()
        .zip((&dense * &xv).iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::new(format!("{name}: apply vs dense"), apply_dev, 1e-10));

    let adj_dev = op
        .adjoint(&y)?
        .as_flat()
        .iter()
        .zip((dense.transpose() * &yv).iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::new(format!("{name}: adjoint vs dense"), adj_dev, 1e-10));

    let svd_full = dense.clone().svd(true, true);
    let pinv = svd_full.pseudo_inverse(op.a_tol()).expect("pinv");
    let pinv_dev = op
        .pinv_apply(&y)?
        .as_flat()
        .iter()
        .zip((&pinv * &yv).iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::new(format!("{name}: pinv vs dense"), pinv_dev, 1e-10));

    // adjoint inner-product identity, relative
    let kx = op.apply(&x)?;
    let kty = op.adjoint(&y)?;
    let lhs: f64 = kx.as_flat().iter().zip(y.as_flat()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.as_flat().iter().zip(kty.as_flat()).map(|(a, b)| a * b).sum();
    checks.push(CheckLine::new(
        format!("{name}: <Kx,y> = <x,K^T y>"),
        (lhs - rhs).abs() / (x.l2_norm() * y.l2_norm()),
        1e-10,
    ));

    // spectral rotations: round trip and isometry
    let xbar = op.to_spectral(&x)?;
    let norm = xbar.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    checks.push(CheckLine::new(format!("{name}: isometry"), (norm - x.l2_norm()).abs(), 1e-10));
    let back = op.from_spectral(&xbar)?;
    checks.push(CheckLine::new(format!("{name}: spectral round trip"), max_abs_diff(&back, &x), 1e-10));

    Ok(checks)
}

pub fn suite_linops() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    for (name, op) in audit_operators()? {
        checks.extend(audit_operator(&name, &op)?);
    }

    // block singular values are exactly 1/r
    for r in [2usize, 4] {
        let op = make_block_sr(ImageShape::new(1, 8, 8), r)?;
        let dev = (0..op.paired_len())
            .map(|i| (op.spectrum()[i] - 1.0 / r as f64).abs())
            .fold(0.0, f64::max);
        checks.push(CheckLine::new(format!("block r={r}: singular values exactly 1/r"), dev, 0.0));
        // apply o adjoint = I / r^2
        let y = Image::standard_normal(op.out_shape(), 103);
        let gram = op.apply(&op.adjoint(&y)?)?;
        let dev = gram
            .as_flat()
            .iter()
            .zip(y.as_flat())
            .map(|(g, v)| (g - v / (r * r) as f64).abs())
            .fold(0.0, f64::max);
        checks.push(CheckLine::new(format!("block r={r}: K K^T = I/r^2"), dev, 1e-12));
    }

    // circular shift equivariance for convolutions
    let shape = ImageShape::new(1, 8, 8);
    let op = make_gaussian_blur(shape, 3, 1.0)?;
    let x = Image::standard_normal(shape, 104);
    let shift = |im: &Image| {
        let mut out = Image::zeros(shape);
        for yy in 0..8 {
            for xx in 0..8 {
                out.data_mut()[(0, (yy + 2) % 8, (xx + 3) % 8)] = im.data()[(0, yy, xx)];
            }
        }
        out
    };
    let dev = max_abs_diff(&op.apply(&shift(&x))?, &shift(&op.apply(&x)?));
    checks.push(CheckLine::new("convolution shift equivariance", dev, 1e-10));

    // range projection property of the pseudo-inverse
    for (name, op) in audit_operators()? {
        let x = Image::standard_normal(op.in_shape(), 105);
        let kx = op.apply(&x)?;
        let dev = max_abs_diff(&op.apply(&op.pinv_apply(&kx)?)?, &kx);
        checks.push(CheckLine::new(format!("{name}: K pinv(Kx) = Kx"), dev, 1e-8));
    }

    Ok(SuiteResult { name: "linops", checks })
}

pub fn suite_priors() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let shape = ImageShape::new(1, 8, 8);
    let basis = Arc::new(make_gaussian_blur(shape, 3, 1.0)?);
    let var = radial_spectral_var(shape, |r| 0.4 / (1.0 + 10.0 * r * r));
    let schedule = Schedule::linear(1000, 1e-4, 0.02)?;

    // GMM responsibilities sum to 1
    let m1 = Image::filled(shape, 0.8);
    let m2 = Image::filled(shape, 0.1);
    let gmm = GmmPrior::new(vec![0.5, 0.5], vec![m1, m2], var.clone(), basis.clone())?;
    let mut resp_dev = 0.0f64;
    for t in [0usize, 400, 999] {
        let x = Image::standard_normal(shape, t as u64 + 1);
        let r = gmm.responsibilities(&x, schedule.alpha(t), schedule.sigma(t))?;
        resp_dev = resp_dev.max((r.iter().sum::<f64>() - 1.0).abs());
    }
    checks.push(CheckLine::new("gmm responsibilities sum to 1", resp_dev, 1e-12));

    // Tweedie gain by finite differences, per spectral component
    let prior = GaussianPrior::new(Image::zeros(shape), var.clone(), basis.clone())?;
    let t = 400;
    let (alpha, sigma) = (schedule.alpha(t), schedule.sigma(t));
    let x = Image::standard_normal(shape, 9);
    let h = 1e-5;
    let mut fd_dev = 0.0f64;
    for i in [0usize, 5, 17, 40] {
        let mut e = vec![Complex64::default(); shape.numel()];
        e[i] = Complex64::new(1.0, 0.0);
        // taking the real projection splits energy between conjugate
        // frequencies; normalize by the direction's own coordinate
        let dir = basis.from_spectral(&e)?;
        let dir_coord = basis.to_spectral(&dir)?[i].re;
        let xp = Image::from_array(x.data() + &(dir.data() * h));
        let f0 = prior.posterior_x0(&x, alpha, sigma)?;
        let f1 = prior.posterior_x0(&xp, alpha, sigma)?;
        let slope =
            basis.to_spectral(&Image::from_array((f1.data() - f0.data()) / h))?[i].re / dir_coord;
        let gain = alpha * var[i] / (alpha * alpha * var[i] + sigma * sigma);
        fd_dev = fd_dev.max((slope - gain).abs());
    }
    checks.push(CheckLine::new("tweedie gain vs finite differences", fd_dev, 1e-6));

    // degenerate priors
    let point = GaussianPrior::new(Image::filled(shape, 0.3), vec![0.0; 64], basis.clone())?;
    let x0 = tweedie(&point, &Image::standard_normal(shape, 11), t, &schedule)?;
    checks.push(CheckLine::new(
        "point-mass prior returns its mean",
        max_abs_diff(&x0, &Image::filled(shape, 0.3)),
        1e-9,
    ));

    Ok(SuiteResult { name: "priors", checks })
}

/// Independent scalar transcription of the spectral correction rules;
/// regime ids: 0 keep-prior, 1 pinv blend, 2 residual.
fn ddrm_reference(a: f64, n_t: f64, n_0: f64, eta: f64, eta_b: f64, x: f64, y: f64) -> (u8, f64) {
    if a == 0.0 {
        (0, x)
    } else if a * n_t > n_0 {
        (1, eta_b * (y / a) + (1.0 - eta_b) * x)
    } else if n_0 == 0.0 {
        (0, x)
    } else {
        (2, x + n_t * (1.0 - eta * eta).sqrt() * (y - a * x) / n_0)
    }
}

pub fn suite_corrections() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let shape = ImageShape::new(1, 8, 8);

    // proximal optimality: normal-equation residual, all kinds
    for (name, op) in audit_operators()? {
        let mu = 7.0;
        let x_hat = Image::standard_normal(shape, 31);
        let y = Image::standard_normal(op.out_shape(), 32);
        let d = correct_diffpir(&x_hat, &y, &op, mu)?;
        let resid = Image::from_array(op.apply(&d)?.data() - y.data());
        let grad = Image::from_array(
            op.adjoint(&resid)?.data() + &((d.data() - x_hat.data()) * mu),
        );
        let rel = grad.l2_norm() / (y.l2_norm() + x_hat.l2_norm());
        checks.push(CheckLine::new(format!("diffpir optimality: {name}"), rel, 1e-8));
    }

    // proximal closed form against a dense solve
    {
        let op = make_gaussian_blur(shape, 3, 1.0)?;
        let mu = 7.0;
        let x_hat = Image::standard_normal(shape, 33);
        let y = Image::standard_normal(op.out_shape(), 34);
        let d = correct_diffpir(&x_hat, &y, &op, mu)?;
        let oracle = op.dense_oracle()?;
        let n = shape.numel();
        let km = DMatrix::from_row_iterator(n, n, oracle.iter().cloned());
        let a = km.transpose() * &km + DMatrix::identity(n, n) * mu;
        let b = km.transpose() * nalgebra::DVector::from_column_slice(y.as_flat())
            + nalgebra::DVector::from_column_slice(x_hat.as_flat()) * mu;
        let solved = a.lu().solve(&b).expect("spd system");
        let dev = d
            .as_flat()
            .iter()
            .zip(solved.iter())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        checks.push(CheckLine::new("diffpir closed form vs dense solve", dev, 1e-8));
    }

    // spectral rule against the scalar reference over a randomized sweep
    {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut value_dev = 0.0f64;
        let mut regime_mismatches = 0usize;
        for case in 0..10_000 {
            let a = match case % 5 {
                0 => 0.0,
                _ => rng.random::<f64>() * 2.0,
            };
            let n_t = match case % 7 {
                0 => 0.0,
                _ => rng.random::<f64>(),
            };
            let n_0 = match case % 3 {
                0 => 0.0,
                1 => a * n_t, // boundary: regime test is a strict inequality
                _ => rng.random::<f64>() * 0.2,
            };
            let eta = rng.random::<f64>();
            let eta_b = rng.random::<f64>();
            let x = 2.0 * rng.random::<f64>() - 1.0;
            let y = 2.0 * rng.random::<f64>() - 1.0;
            let (ref_regime, ref_value) = ddrm_reference(a, n_t, n_0, eta, eta_b, x, y);
            let ours = ddrm_component(
                a,
                n_t,
                n_0,
                eta,
                eta_b,
                Complex64::new(x, 0.0),
                Complex64::new(y, 0.0),
            );
            let our_regime = match ddrm_regime(a, n_t, n_0) {
                DdrmRegime::Unobserved => 0u8,
                DdrmRegime::PinvMix => 1,
                DdrmRegime::Residual => 2,
            };
            if our_regime != ref_regime {
                regime_mismatches += 1;
            }
            value_dev = value_dev.max((ours.re - ref_value).abs().max(ours.im.abs()));
        }
        checks.push(CheckLine::new("ddrm regime classification (10^4 cases)", regime_mismatches as f64, 0.0));
        checks.push(CheckLine::new("ddrm componentwise values (10^4 cases)", value_dev, 1e-12));
    }

    // noiseless full replacement is data-consistent on the range
    {
        let schedule = Schedule::linear(1000, 1e-4, 0.02)?;
        for (name, op) in audit_operators()? {
            let x0 = Image::standard_normal(shape, 35);
            let y = op.apply(&x0)?;
            let x_hat = Image::standard_normal(shape, 36);
            let d = correct_ddrm(&x_hat, &y, &op, schedule.noise_level(500), 0.0, 0.85, 1.0)?;
            let dev = max_abs_diff(&op.apply(&d)?, &y);
            checks.push(CheckLine::new(format!("ddrm noiseless consistency: {name}"), dev, 1e-8));
        }
    }

    // lag filter linearity by superposition
    {
        let beta = 0.37;
        let (a1, a2) = (Image::standard_normal(shape, 41), Image::standard_normal(shape, 42));
        let (b1, b2) = (Image::standard_normal(shape, 43), Image::standard_normal(shape, 44));
        let joint = lag_filter(
            &Image::from_array(a1.data() + a2.data()),
            &Image::from_array(b1.data() + b2.data()),
            beta,
        );
        let split = Image::from_array(
            lag_filter(&a1, &b1, beta).data() + lag_filter(&a2, &b2, beta).data(),
        );
        checks.push(CheckLine::new("lag filter linearity", max_abs_diff(&joint, &split), 1e-12));
    }

    Ok(SuiteResult { name: "corrections", checks })
}

/// Shared 16x16 test problem: two-component mixture prior in the Fourier
/// basis, observed through a small Gaussian blur.
pub fn sampler_test_problem() -> Result<(Schedule, Arc<SpectralOperator>, GmmPrior, Image)> {
    let shape = ImageShape::new(1, 16, 16);
    let schedule = Schedule::linear(1000, 1e-4, 0.02)?;
    let op = Arc::new(make_gaussian_blur(shape, 3, 1.0)?);
    let var = radial_spectral_var(shape, |r| 0.25 / (1.0 + 40.0 * r * r));
    let mut bump = Image::filled(shape, 0.55);
    for yy in 4..12 {
        for xx in 4..12 {
            bump.data_mut()[(0, yy, xx)] = 0.8;
        }
    }
    let flat = Image::filled(shape, 0.35);
    let prior = GmmPrior::new(vec![0.6, 0.4], vec![bump, flat], var, op.clone())?;
    let x0 = prior.sample(2024)?;
    let y = degrade(&x0, &op, 0.05, 2025)?;
    Ok((schedule, op, prior, y))
}

pub fn suite_samplers() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let (schedule, op, prior, y) = sampler_test_problem()?;

    // DDIM and the first-order exponential step coincide under the identity
    // correction, across a full 100-step respaced trajectory
    {
        let plan = schedule.respace(100)?;
        let correction = Correction::Identity;
        let inputs = TrajectoryInputs {
            schedule: &schedule,
            plan: &plan,
            denoiser: &prior,
            correction: &correction,
            operator: &op,
            measurement: &y,
        };
        let ddim = run_trajectory(&SamplerConfig::new(Method::Ps), &inputs, Init::Noise(51))?;
        let one_m = run_trajectory(&SamplerConfig::new(Method::OneM), &inputs, Init::Noise(51))?;
        let dev = ddim
            .states
            .iter()
            .zip(&one_m.states)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max);
        checks.push(CheckLine::new("ddim = 1m under identity correction (100 steps)", dev, 1e-10));
    }

    // posterior-step decomposition holds at every step of every method
    {
        let plan = schedule.respace(20)?;
        let correction = CorrectionConfig::ddrm(0.05, 0.85, 1.0).build(0.05)?;
        let mut dev = 0.0f64;
        for method in [Method::Ps, Method::OneM, Method::TwoM, Method::Lamp] {
            let inputs = TrajectoryInputs {
                schedule: &schedule,
                plan: &plan,
                denoiser: &prior,
                correction: &correction,
                operator: &op,
                measurement: &y,
            };
            let mut cfg = SamplerConfig::new(method);
            cfg.gamma = -0.15;
            cfg.n_warm = 3;
            let out = run_trajectory(&cfg, &inputs, Init::Noise(52))?;
            dev = dev.max(out.max_ps_decomp_dev);
        }
        checks.push(CheckLine::new("posterior-step decomposition per step", dev, 1e-12));
    }

    // the three lagged-update forms agree along a live trajectory
    {
        let plan = schedule.respace(20)?;
        let gamma = -0.15;
        let correction = CorrectionConfig::ddrm(0.05, 0.85, 1.0).build(0.05)?;
        let mut x = Image::standard_normal(op.in_shape(), 53);
        let mut d_prev: Option<Image> = None;
        let mut dev = 0.0f64;
        for k in 0..plan.len() {
            let q = StepQuantities::from_plan(&schedule, &plan, k);
            let eps = prior.predict_eps(&x, q.t_src, &schedule)?;
            let x0_hat = crate::priors::x0_hat_from_eps(&x, &eps, q.alpha_src, q.sigma_src);
            let d = correction.apply(&x0_hat, &y, &op, q.t_src, &schedule)?;
            if let Some(prev) = &d_prev {
                let a = lamp_update_via_2m(&q, &x, &d, prev, &x0_hat, gamma);
                let b = lamp_update_via_ps(&q, &d, prev, &eps, gamma);
                let beta = beta_from_gamma(gamma, &q).unwrap();
                let c = lamp_update_filtered(&q, &d, prev, &eps, beta);
                dev = dev.max(max_abs_diff(&a, &b)).max(max_abs_diff(&b, &c));
                x = c;
            } else {
                x = ps_update(&q, &d, &eps);
            }
            d_prev = Some(d);
        }
        checks.push(CheckLine::new("lagged update triple-form agreement", dev, 1e-12));
    }

    // gamma = 0 collapse and warm-up prefix, bitwise
    {
        let plan = schedule.respace(20)?;
        let correction = CorrectionConfig::ddrm(0.05, 0.85, 1.0).build(0.05)?;
        let inputs = TrajectoryInputs {
            schedule: &schedule,
            plan: &plan,
            denoiser: &prior,
            correction: &correction,
            operator: &op,
            measurement: &y,
        };
        let ps = run_trajectory(&SamplerConfig::new(Method::Ps), &inputs, Init::Noise(54))?;
        let lamp0 = run_trajectory(&SamplerConfig::lamp(0.0, 3), &inputs, Init::Noise(54))?;
        let collapse_fail = ps
            .states
            .iter()
            .zip(&lamp0.states)
            .filter(|(a, b)| !a.bit_identical(b))
            .count();
        checks.push(CheckLine::new("gamma = 0 collapses to ps (bitwise)", collapse_fail as f64, 0.0));

        let n_warm = 4;
        let mut warm_fail = 0usize;
        for gamma in [-3.0, -0.15, 0.15] {
            let lamp = run_trajectory(&SamplerConfig::lamp(gamma, n_warm), &inputs, Init::Noise(54))?;
            warm_fail += (0..n_warm)
                .filter(|&k| !ps.states[k].bit_identical(&lamp.states[k]))
                .count();
        }
        checks.push(CheckLine::new("warm-up prefix bitwise equal to ps", warm_fail as f64, 0.0));
    }

    // one denoiser evaluation per reverse step, all methods
    {
        let plan = schedule.respace(20)?;
        let correction = CorrectionConfig::diffpir(7.0).build(0.05)?;
        let mut miscount = 0usize;
        for method in [Method::Ps, Method::OneM, Method::TwoM, Method::Lamp] {
            let counting = CountingDenoiser::new(&prior);
            let inputs = TrajectoryInputs {
                schedule: &schedule,
                plan: &plan,
                denoiser: &counting,
                correction: &correction,
                operator: &op,
                measurement: &y,
            };
            let mut cfg = SamplerConfig::new(method);
            cfg.gamma = 1.0;
            cfg.n_warm = 2;
            let out = run_trajectory(&cfg, &inputs, Init::Noise(55))?;
            if counting.calls() != plan.len() || out.denoiser_evals != plan.len() {
                miscount += 1;
            }
        }
        checks.push(CheckLine::new("one denoiser evaluation per step", miscount as f64, 0.0));
    }

    // random-input identities for the pure step functions
    {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let mut dev = 0.0f64;
        for case in 0..1000u64 {
            let h = 0.02 + rng.random::<f64>();
            let h_prev = 0.02 + rng.random::<f64>();
            let gamma = 4.0 * rng.random::<f64>() - 2.0;
            let lam_src: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let e2s = (2.0 * lam_src).exp();
            let e2d = (2.0f64 * (lam_src + h)).exp();
            let q = StepQuantities {
                t_src: 1,
                t_dst: 0,
                alpha_src: (e2s / (1.0 + e2s)).sqrt(),
                sigma_src: (1.0 / (1.0 + e2s)).sqrt(),
                alpha_dst: (e2d / (1.0 + e2d)).sqrt(),
                sigma_dst: (1.0 / (1.0 + e2d)).sqrt(),
                coeffs: crate::schedule::StepCoeffs {
                    h,
                    h_prev: Some(h_prev),
                    e_mh: (-h).exp(),
                    a0: crate::schedule::coeff_a0(h),
                    a1: crate::schedule::coeff_a1(h),
                },
            };
            let shape = if case % 2 == 0 { ImageShape::new(1, 1, 1) } else { ImageShape::new(1, 4, 4) };
            let x = Image::standard_normal(shape, case);
            let eps = Image::standard_normal(shape, case + 10_000);
            let x0_hat = crate::priors::x0_hat_from_eps(&x, &eps, q.alpha_src, q.sigma_src);
            let d = Image::standard_normal(shape, case + 20_000);
            let d_prev = Image::standard_normal(shape, case + 30_000);
            let a = lamp_update_via_2m(&q, &x, &d, &d_prev, &x0_hat, gamma);
            let b = lamp_update_via_ps(&q, &d, &d_prev, &eps, gamma);
            let c = lamp_update_filtered(&q, &d, &d_prev, &eps, beta_from_gamma(gamma, &q).unwrap());
            dev = dev.max(max_abs_diff(&a, &b)).max(max_abs_diff(&b, &c));
            // decomposition and 1m/ddim identities on the same draws
            let ddim = ps_update(&q, &x0_hat, &eps);
            let one_m = one_m_update(&q, &x, &x0_hat);
            dev = dev.max(max_abs_diff(&ddim, &one_m));
            let direct = ps_update(&q, &d, &eps);
            let decomp = ps_update_decomposed(&q, &x, &d, &x0_hat);
            dev = dev.max(max_abs_diff(&direct, &decomp));
        }
        checks.push(CheckLine::new("step-form identities on 1000 random inputs", dev, 1e-12));
    }

    Ok(SuiteResult { name: "samplers", checks })
}

pub fn suite_risk(trials: usize) -> Result<SuiteResult> {
    let mut checks = Vec::new();

    // Monte Carlo vs closed form across the lag/correlation grid
    let mut worst_ratio = 0.0f64;
    for &beta in &[0.03, 0.1, 0.5, 0.9] {
        for &rho in &[0.0, 0.5, 0.9] {
            let model = ErrorModel::isotropic(8, 1.0, rho, vec![0.0; 8])?;
            let cf = closed_form_risks(&model, beta)?;
            let mc = empirical_risks(&model, beta, trials, 61)?;
            let ratio = (mc.risk_lamp.mean - cf.risk_lamp).abs() / (3.0 * mc.risk_lamp.se);
            worst_ratio = worst_ratio.max(ratio);
            let ratio_ps = (mc.risk_ps.mean - cf.risk_ps).abs() / (3.0 * mc.risk_ps.se);
            worst_ratio = worst_ratio.max(ratio_ps);
        }
    }
    checks.push(CheckLine::new("mc risks within 3 se of closed forms", worst_ratio, 1.0));

    // beta = 0 collapses to tr(Sigma) exactly
    let m = ErrorModel::isotropic(5, 0.8, 0.4, vec![0.1; 5])?;
    let cf0 = closed_form_risks(&m, 0.0)?;
    checks.push(CheckLine::new("beta = 0 closed form equals tr(Sigma)", (cf0.risk_lamp - 4.0).abs(), 1e-12));

    // improvement condition agrees with the closed-form risk ordering
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let mut disagreements = 0usize;
    for _ in 0..1000 {
        let dim = 1 + (rng.random::<u32>() % 6) as usize;
        let model = ErrorModel::isotropic(
            dim,
            0.05 + 2.0 * rng.random::<f64>(),
            0.999 * rng.random::<f64>(),
            (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
        )?;
        let beta = 0.01 + 0.98 * rng.random::<f64>();
        let cf = closed_form_risks(&model, beta)?;
        let cond = improvement_condition(&model, beta)?;
        if cond.holds != (cf.risk_ps > cf.risk_lamp) {
            disagreements += 1;
        }
    }
    checks.push(CheckLine::new("condition sign agreement (1000 models)", disagreements as f64, 0.0));

    // generalized risk reduces to the equal-variance form
    let mut reduce_dev = 0.0f64;
    for _ in 0..1000 {
        let dim = 1 + (rng.random::<u32>() % 6) as usize;
        let sigma: Vec<f64> = (0..dim).map(|_| 0.1 + rng.random::<f64>()).collect();
        let rho = rng.random::<f64>();
        let r: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let beta = rng.random::<f64>();
        let equal = ErrorModel {
            dim,
            sigma_diag: sigma.clone(),
            rho,
            r: r.clone(),
            sigma_diag_next: None,
            cov_cross_diag: None,
        };
        let general = ErrorModel {
            dim,
            sigma_diag: sigma.clone(),
            rho,
            r,
            sigma_diag_next: Some(sigma.clone()),
            cov_cross_diag: Some(sigma.iter().map(|s| rho * s).collect()),
        };
        let a = closed_form_risks(&equal, beta)?;
        let b = closed_form_risks(&general, beta)?;
        reduce_dev = reduce_dev.max((a.risk_lamp - b.risk_lamp).abs());
    }
    checks.push(CheckLine::new("generalized form reduces under equal variances", reduce_dev, 1e-12));

    Ok(SuiteResult { name: "risk", checks })
}

pub fn suite_imaging() -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let shape = ImageShape::new(1, 16, 16);

    // metric reference points and symmetry
    let a = Image::filled(shape, 0.5);
    let mut b = a.clone();
    for v in b.data_mut().iter_mut() {
        *v += 0.05;
    }
    checks.push(CheckLine::new(
        "psnr at mse 0.0025",
        (psnr(&a, &b) - 10.0 * 400.0f64.log10()).abs(),
        1e-9,
    ));
    let (x, yimg) = (Image::standard_normal(shape, 71), Image::standard_normal(shape, 72));
    checks.push(CheckLine::new("psnr symmetry", (psnr(&x, &yimg) - psnr(&yimg, &x)).abs(), 0.0));
    checks.push(CheckLine::new("ssim identity", (ssim(&x, &x)? - 1.0).abs(), 1e-12));
    checks.push(CheckLine::new("ssim symmetry", (ssim(&x, &yimg)? - ssim(&yimg, &x)?).abs(), 1e-12));

    // degradation determinism
    let op = make_gaussian_blur(shape, 3, 1.0)?;
    let x0 = Image::standard_normal(shape, 73);
    let y1 = degrade(&x0, &op, 0.05, 74)?;
    let y2 = degrade(&x0, &op, 0.05, 74)?;
    checks.push(CheckLine::new(
        "degrade determinism",
        if y1.bit_identical(&y2) { 0.0 } else { 1.0 },
        0.0,
    ));

    // exact posterior mean minimizes the regularized objective
    {
        let basis = Arc::new(make_gaussian_blur(shape, 3, 1.0)?);
        let var = radial_spectral_var(shape, |r| 0.3 / (1.0 + 5.0 * r));
        let mean = Image::filled(shape, 0.4);
        let prior = GaussianPrior::new(mean.clone(), var.clone(), basis.clone())?;
        let sigma_y = 0.05;
        let y = degrade(&x0, &basis, sigma_y, 75)?;
        let post = exact_posterior_mean(&prior, &basis, &y, sigma_y)?;
        // gradient: K^T (K x - y)/sigma^2 + C^{-1} (x - m)
        let resid = Image::from_array(basis.apply(&post)?.data() - y.data());
        let data_grad = Image::from_array(basis.adjoint(&resid)?.data() / (sigma_y * sigma_y));
        let mut diffbar = basis.to_spectral(&Image::from_array(post.data() - mean.data()))?;
        for (v, &c) in diffbar.iter_mut().zip(&var) {
            *v /= c;
        }
        let prior_grad = basis.from_spectral(&diffbar)?;
        let grad = Image::from_array(data_grad.data() + prior_grad.data());
        let scale = y.l2_norm() / (sigma_y * sigma_y) + post.l2_norm();
        checks.push(CheckLine::new("posterior mean gradient norm", grad.l2_norm() / scale, 1e-8));
    }

    // exact posterior against a dense Bayesian solve on a 16-dim problem
    {
        let small = ImageShape::new(1, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        let mat = ndarray::Array2::from_shape_fn((16, 16), |_| rng.random::<f64>() - 0.5);
        let op = Arc::new(make_dense(small, small, mat.clone())?);
        let var: Vec<f64> = (0..16).map(|i| 0.2 + 0.05 * i as f64).collect();
        let mean = Image::filled(small, 0.1);
        let prior = GaussianPrior::new(mean.clone(), var.clone(), op.clone())?;
        let sigma_y = 0.3;
        let x_true = prior.sample(77)?;
        let y = degrade(&x_true, &op, sigma_y, 78)?;
        let ours = exact_posterior_mean(&prior, &op, &y, sigma_y)?;

        // dense: m + (C^{-1} + K^T K / s^2)^{-1} K^T (y - K m) / s^2
        let k = DMatrix::from_row_iterator(16, 16, mat.iter().cloned());
        let mut v_basis = DMatrix::zeros(16, 16);
        for j in 0..16 {
            let mut e = vec![Complex64::default(); 16];
            e[j] = Complex64::new(1.0, 0.0);
            let col = op.from_spectral(&e)?;
            for (i, val) in col.as_flat().iter().enumerate() {
                v_basis[(i, j)] = *val;
            }
        }
        let c_mat = &v_basis
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(var.clone()))
            * v_basis.transpose();
        let c_inv = c_mat.clone().try_inverse().expect("positive definite");
        let a = c_inv + k.transpose() * &k / (sigma_y * sigma_y);
        let rhs = k.transpose()
            * (nalgebra::DVector::from_column_slice(y.as_flat())
                - &k * nalgebra::DVector::from_column_slice(mean.as_flat()))
            / (sigma_y * sigma_y);
        let delta = a.lu().solve(&rhs).expect("solvable");
        let mut dev = 0.0f64;
        for i in 0..16 {
            dev = dev.max((ours.as_flat()[i] - (mean.as_flat()[i] + delta[i])).abs());
        }
        checks.push(CheckLine::new("exact posterior vs dense bayes solve", dev, 1e-10));
    }

    // gaussian-prior mse sanity: the posterior mean beats the pinv estimate
    {
        let basis = Arc::new(make_gaussian_blur(shape, 3, 1.0)?);
        let var = radial_spectral_var(shape, |r| 0.3 / (1.0 + 5.0 * r));
        let prior = GaussianPrior::new(Image::filled(shape, 0.4), var, basis.clone())?;
        let x_true = prior.sample(79)?;
        let y = degrade(&x_true, &basis, 0.05, 80)?;
        let post = exact_posterior_mean(&prior, &basis, &y, 0.05)?;
        let pinv = basis.pinv_apply(&y)?;
        let better = mse(&post, &x_true) < mse(&pinv, &x_true);
        checks.push(CheckLine::new("posterior mean beats pinv", if better { 0.0 } else { 1.0 }, 0.0));
    }

    Ok(SuiteResult { name: "imaging", checks })
}
