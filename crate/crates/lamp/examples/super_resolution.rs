//! Block-averaging super-resolution: recover a 32x32 image from its 8x8
//! block means. The operator's null space (within-block detail) is filled in
//! by the prior; the spectral correction replaces only the observed
//! block-average components.
//!
//! ```bash
//! cargo run --example super_resolution
//! ```

use std::sync::Arc;

use lamp::corrections::CorrectionConfig;
use lamp::imaging::{degrade, exact_posterior_mean, mse, psnr, ssim, Image, ImageShape};
use lamp::linops::make_block_sr;
use lamp::priors::GaussianPrior;
use lamp::samplers::{run_trajectory, Init, Method, SamplerConfig, TrajectoryInputs};
use lamp::schedule::Schedule;

fn main() -> lamp::Result<()> {
    let shape = ImageShape::new(1, 32, 32);
    let factor = 4;
    let schedule = Schedule::linear(1000, 1e-4, 0.02)?;
    let op = Arc::new(make_block_sr(shape, factor)?);
    println!(
        "block-averaging x{factor}: {} -> {}, nonzero singular values all {}",
        op.in_shape(),
        op.out_shape(),
        op.spectrum()[0]
    );

    // prior variance: strong on block averages, weaker on within-block detail
    let m = op.out_shape().numel();
    let mut var = vec![0.3; shape.numel()];
    for v in var.iter_mut().skip(m) {
        *v = 0.02;
    }
    let prior = GaussianPrior::new(Image::filled(shape, 0.5), var, op.clone())?;

    let sigma_y = 0.05;
    let x0 = prior.sample(300)?;
    let y = degrade(&x0, &op, sigma_y, 301)?;
    let oracle = exact_posterior_mean(&prior, &op, &y, sigma_y)?;

    // nearest-neighbor upsampling of the measurement as a naive baseline
    let mut upsampled = Image::zeros(shape);
    for yy in 0..32 {
        for xx in 0..32 {
            upsampled.data_mut()[(0, yy, xx)] = y.data()[(0, yy / factor, xx / factor)];
        }
    }
    println!("naive upsampling: psnr {:.2} dB\n", psnr(&upsampled.clamp01(), &x0));

    for (name, method, gamma) in
        [("ddrm", Method::Ps, 0.0), ("ddrm-lamp", Method::Lamp, -0.15)]
    {
        let plan = schedule.respace(20)?;
        let correction = CorrectionConfig::ddrm(sigma_y, 0.85, 1.0).build(sigma_y)?;
        let inputs = TrajectoryInputs {
            schedule: &schedule,
            plan: &plan,
            denoiser: &prior,
            correction: &correction,
            operator: &op,
            measurement: &y,
        };
        let mut cfg = SamplerConfig::new(method);
        cfg.gamma = gamma;
        cfg.n_warm = 3;
        let out = run_trajectory(&cfg, &inputs, Init::Noise(302))?;
        let est = out.x0.clamp01();
        println!(
            "{name:<10} nfe {:>3}: psnr {:.2} dB, ssim {:.4}, mse->oracle {:.4e}",
            out.denoiser_evals,
            psnr(&est, &x0),
            ssim(&est, &x0)?,
            mse(&out.x0, &oracle)
        );
    }
    Ok(())
}
