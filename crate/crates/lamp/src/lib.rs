//! Diffusion posterior sampling for linear imaging inverse problems, built
//! around a lagged multistep correction that plugs into standard posterior
//! samplers without extra denoiser evaluations.
//!
//! The crate pairs the sampling machinery with analytic Gaussian/mixture
//! priors and structured spectral operators, so every update rule, identity,
//! and risk formula is verifiable in closed form at desk scale:
//!
//! - [`schedule`]: variance-preserving coefficients, respaced reverse grids,
//!   log-SNR step quantities `h`, `A0(h)`, `A1(h)`.
//! - [`linops`]: circular-convolution and block-averaging operators with full
//!   SVD access, plus dense operators for verification.
//! - [`priors`]: noise predictors with exact Tweedie posterior means.
//! - [`corrections`]: identity, proximal, and spectral three-regime
//!   measurement corrections, and the lag filter.
//! - [`samplers`]: PS/1M/2M/lagged reverse steppers in all their
//!   algebraically equivalent forms, plus the trajectory runner.
//! - [`risk`]: Monte Carlo and closed-form one-step risk comparison.
//! - [`imaging`]: degradation pipeline, PSNR/SSIM, and the exact
//!   linear-Gaussian posterior oracle.
//! - [`cli`]: JSON experiment configs, artifact runner, sweeps, and the
//!   verification suites.
//!
//! See the `examples/` directory for one runnable example per capability;
//! the `lamp` binary exposes the same machinery as subcommands
//! (`run`, `sweep`, `verify`, `risk`, `op-check`).

pub mod cli;
pub mod corrections;
pub mod error;
pub mod imaging;
pub mod io;
pub mod linops;
pub mod priors;
pub mod risk;
pub mod samplers;
pub mod schedule;

pub use error::{Error, Result};
