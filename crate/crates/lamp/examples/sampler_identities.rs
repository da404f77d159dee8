//! The structural identities behind the samplers, evaluated numerically:
//! the deterministic sampler as a first-order exponential step, the posterior
//! step as that step plus a residual forcing term, and the lagged update in
//! its three algebraically equal forms.
//!
//! ```bash
//! cargo run --example sampler_identities
//! ```

use std::sync::Arc;

use lamp::corrections::CorrectionConfig;
use lamp::imaging::{degrade, max_abs_diff, Image, ImageShape};
use lamp::linops::make_gaussian_blur;
use lamp::priors::{radial_spectral_var, x0_hat_from_eps, Denoiser, GaussianPrior};
use lamp::samplers::{
    beta_from_gamma, lamp_update_filtered, lamp_update_via_2m, lamp_update_via_ps, ps_update,
    ps_update_decomposed, run_trajectory, Init, Method, SamplerConfig, StepQuantities,
    TrajectoryInputs,
};
use lamp::schedule::Schedule;

fn main() -> lamp::Result<()> {
    let shape = ImageShape::new(1, 16, 16);
    let schedule = Schedule::linear(1000, 1e-4, 0.02)?;
    let op = Arc::new(make_gaussian_blur(shape, 3, 1.0)?);
    let var = radial_spectral_var(shape, |r| 0.25 / (1.0 + 40.0 * r * r));
    let prior = GaussianPrior::new(Image::filled(shape, 0.5), var, op.clone())?;
    let x0 = prior.sample(500)?;
    let y = degrade(&x0, &op, 0.05, 501)?;

    // 1. the deterministic sampler is the first-order exponential step
    let plan = schedule.respace(100)?;
    let identity = lamp::corrections::Correction::Identity;
    let inputs = TrajectoryInputs {
        schedule: &schedule,
        plan: &plan,
        denoiser: &prior,
        correction: &identity,
        operator: &op,
        measurement: &y,
    };
    let ddim = run_trajectory(&SamplerConfig::new(Method::Ps), &inputs, Init::Noise(502))?;
    let one_m = run_trajectory(&SamplerConfig::new(Method::OneM), &inputs, Init::Noise(502))?;
    let dev = ddim
        .states
        .iter()
        .zip(&one_m.states)
        .map(|(a, b)| max_abs_diff(a, b))
        .fold(0.0, f64::max);
    println!("ddim vs first-order exponential step over 100 steps: max dev {dev:.2e}");

    // 2. posterior step = first-order step + residual forcing, per step
    let correction = CorrectionConfig::ddrm(0.05, 0.85, 1.0).build(0.05)?;
    let plan20 = schedule.respace(20)?;
    let gamma = -0.15;
    let mut x = Image::standard_normal(shape, 503);
    let mut d_prev: Option<Image> = None;
    let mut decomp_dev = 0.0f64;
    let mut triple_dev = 0.0f64;
    for k in 0..plan20.len() {
        let q = StepQuantities::from_plan(&schedule, &plan20, k);
        let eps = prior.predict_eps(&x, q.t_src, &schedule)?;
        let x0_hat = x0_hat_from_eps(&x, &eps, q.alpha_src, q.sigma_src);
        let d = correction.apply(&x0_hat, &y, &op, q.t_src, &schedule)?;
        decomp_dev = decomp_dev.max(max_abs_diff(
            &ps_update(&q, &d, &eps),
            &ps_update_decomposed(&q, &x, &d, &x0_hat),
        ));
        x = if let Some(prev) = &d_prev {
            // 3. the lagged update in its three equal forms
            let a = lamp_update_via_2m(&q, &x, &d, prev, &x0_hat, gamma);
            let b = lamp_update_via_ps(&q, &d, prev, &eps, gamma);
            let beta = beta_from_gamma(gamma, &q).expect("h_prev exists");
            let c = lamp_update_filtered(&q, &d, prev, &eps, beta);
            triple_dev = triple_dev.max(max_abs_diff(&a, &b)).max(max_abs_diff(&b, &c));
            c
        } else {
            ps_update(&q, &d, &eps)
        };
        d_prev = Some(d);
    }
    println!("posterior step vs residual decomposition, 20 steps: max dev {decomp_dev:.2e}");
    println!("lagged update, three forms along the trajectory:     max dev {triple_dev:.2e}");

    // 4. per-step lag weights from gamma
    println!("\nper-step lag weight beta_t at gamma = {gamma}:");
    for k in [1usize, 5, 10, 19] {
        let q = StepQuantities::from_plan(&schedule, &plan20, k);
        let beta = beta_from_gamma(gamma, &q).unwrap();
        println!("  step {k:>2}: h = {:.4}, beta_t = {:.5}", q.coeffs.h, beta);
    }
    Ok(())
}
