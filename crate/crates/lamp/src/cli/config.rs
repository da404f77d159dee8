//! JSON experiment configuration and its resolution into runnable pieces.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corrections::CorrectionConfig;
use crate::error::{Error, Result};
use crate::imaging::{Image, ImageShape};
use crate::io;
use crate::linops::{self, SpectralOperator};
use crate::priors::{radial_spectral_var, Denoiser, GaussianPrior, GmmPrior};
use crate::samplers::SamplerConfig;
use crate::schedule::{Schedule, StepPlan};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schedule: ScheduleSpec,
    /// (channels, height, width) of the unknown image.
    pub image_shape: [usize; 3],
    pub operator: OperatorSpec,
    pub prior: PriorSpec,
    /// Ground-truth source.
    #[serde(default)]
    pub x0: SourceSpec,
    pub degradation: DegradationSpec,
    pub correction: CorrectionConfig,
    pub sampler: SamplerConfig,
    /// Master seed; every stochastic component derives its own sub-seed.
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
}

fn default_metrics() -> Vec<String> {
    vec!["psnr".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(default = "default_n_train")]
    pub n_train_steps: usize,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default = "default_nfe")]
    pub nfe: usize,
}

fn default_n_train() -> usize {
    1000
}
fn default_beta_start() -> f64 {
    1e-4
}
fn default_beta_end() -> f64 {
    0.02
}
fn default_nfe() -> usize {
    100
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            n_train_steps: default_n_train(),
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
            nfe: default_nfe(),
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<(Schedule, StepPlan)> {
        let schedule = Schedule::linear(self.n_train_steps, self.beta_start, self.beta_end)?;
        let plan = schedule.respace(self.nfe)?;
        Ok((schedule, plan))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    GaussianBlur {
        kernel_size: usize,
        sigma: f64,
    },
    MotionBlur {
        kernel_size: usize,
        intensity: f64,
        #[serde(default)]
        seed: u64,
    },
    BlockSr {
        factor: usize,
    },
    Dense {
        /// Rank-2 tensor file holding the matrix.
        matrix: PathBuf,
        out_shape: [usize; 3],
    },
}

impl OperatorSpec {
    pub fn build(&self, shape: ImageShape) -> Result<SpectralOperator> {
        match self {
            OperatorSpec::GaussianBlur { kernel_size, sigma } => {
                linops::make_gaussian_blur(shape, *kernel_size, *sigma)
            }
            OperatorSpec::MotionBlur { kernel_size, intensity, seed } => {
                linops::make_motion_blur(shape, *kernel_size, *intensity, *seed)
            }
            OperatorSpec::BlockSr { factor } => linops::make_block_sr(shape, *factor),
            OperatorSpec::Dense { matrix, out_shape } => {
                let (dims, data) = io::read_tensor(matrix)?;
                if dims.len() != 2 {
                    return Err(Error::config("matrix", "must be a rank-2 tensor"));
                }
                let arr = ndarray::Array2::from_shape_vec((dims[0], dims[1]), data)
                    .map_err(|e| Error::config("matrix", e.to_string()))?;
                linops::make_dense(shape, ImageShape::new(out_shape[0], out_shape[1], out_shape[2]), arr)
            }
        }
    }
}

/// A per-pixel field: a constant or a tensor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant { constant: f64 },
    Tensor { tensor: PathBuf },
}

impl FieldSpec {
    pub fn load(&self, shape: ImageShape) -> Result<Image> {
        match self {
            FieldSpec::Constant { constant } => Ok(Image::filled(shape, *constant)),
            FieldSpec::Tensor { tensor } => {
                let img = io::read_image_tensor(tensor)?;
                if img.shape() != shape {
                    return Err(Error::shape(format!("{shape}"), format!("{}", img.shape())));
                }
                Ok(img)
            }
        }
    }
}

/// A per-component variance vector in the operator's spectral ordering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarSpec {
    Constant {
        constant: f64,
    },
    Tensor {
        tensor: PathBuf,
    },
    /// Smooth radial profile `amplitude / (1 + (scale * r)^2)`, matching the
    /// frequency ordering of convolution operators.
    Radial {
        amplitude: f64,
        scale: f64,
    },
}

impl VarSpec {
    pub fn load(&self, shape: ImageShape) -> Result<Vec<f64>> {
        match self {
            VarSpec::Constant { constant } => {
                if *constant < 0.0 {
                    return Err(Error::config("spectral_var", "must be >= 0"));
                }
                Ok(vec![*constant; shape.numel()])
            }
            VarSpec::Tensor { tensor } => {
                let (dims, data) = io::read_tensor(tensor)?;
                if dims.len() != 1 || data.len() != shape.numel() {
                    return Err(Error::config(
                        "spectral_var",
                        format!("need a rank-1 tensor of {} entries", shape.numel()),
                    ));
                }
                Ok(data)
            }
            VarSpec::Radial { amplitude, scale } => {
                if *amplitude < 0.0 {
                    return Err(Error::config("spectral_var", "amplitude must be >= 0"));
                }
                Ok(radial_spectral_var(shape, |r| amplitude / (1.0 + (scale * r).powi(2))))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian {
        mean: FieldSpec,
        spectral_var: VarSpec,
    },
    Gmm {
        weights: Vec<f64>,
        means: Vec<FieldSpec>,
        spectral_var: VarSpec,
    },
}

/// Analytic prior instance retaining access to its exact-oracle structure.
pub enum AnalyticPrior {
    Gaussian(GaussianPrior),
    Gmm(GmmPrior),
}

impl AnalyticPrior {
    pub fn sample(&self, seed: u64) -> Result<Image> {
        match self {
            AnalyticPrior::Gaussian(p) => p.sample(seed),
            AnalyticPrior::Gmm(p) => p.sample(seed),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianPrior> {
        match self {
            AnalyticPrior::Gaussian(p) => Some(p),
            AnalyticPrior::Gmm(_) => None,
        }
    }
}

impl Denoiser for AnalyticPrior {
    fn predict_eps(&self, x: &Image, t: usize, schedule: &Schedule) -> Result<Image> {
        match self {
            AnalyticPrior::Gaussian(p) => p.predict_eps(x, t, schedule),
            AnalyticPrior::Gmm(p) => p.predict_eps(x, t, schedule),
        }
    }
}

impl PriorSpec {
    pub fn build(&self, shape: ImageShape, basis: Arc<SpectralOperator>) -> Result<AnalyticPrior> {
        match self {
            PriorSpec::Gaussian { mean, spectral_var } => Ok(AnalyticPrior::Gaussian(
                GaussianPrior::new(mean.load(shape)?, spectral_var.load(shape)?, basis)?,
            )),
            PriorSpec::Gmm { weights, means, spectral_var } => {
                let imgs = means.iter().map(|m| m.load(shape)).collect::<Result<Vec<_>>>()?;
                Ok(AnalyticPrior::Gmm(GmmPrior::new(
                    weights.clone(),
                    imgs,
                    spectral_var.load(shape)?,
                    basis,
                )?))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSpec {
    Constant { constant: f64 },
    Tensor { tensor: PathBuf },
    PriorSample { prior_sample: bool },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::PriorSample { prior_sample: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub sigma_y: f64,
    /// Noise sub-seed override; derived from the master seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(&path.display().to_string(), e.to_string()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(&path.display().to_string(), e.to_string()))?;
        cfg.validate().map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field: format!("{} -> {field}", path.display()),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_shape.contains(&0) {
            return Err(Error::config("image_shape", "dimensions must be positive"));
        }
        if self.degradation.sigma_y < 0.0 {
            return Err(Error::config("sigma_y", "must be >= 0"));
        }
        if self.sampler.n_warm >= self.schedule.nfe {
            return Err(Error::config("n_warm", "must be < nfe"));
        }
        for m in &self.metrics {
            match m.as_str() {
                "psnr" | "ssim" | "mse_to_oracle" => {}
                other => {
                    return Err(Error::config(
                        "metrics",
                        format!("unknown metric `{other}` (expected psnr, ssim, mse_to_oracle)"),
                    ));
                }
            }
        }
        if self.metrics.iter().any(|m| m == "ssim")
            && (self.image_shape[1] < 11 || self.image_shape[2] < 11)
        {
            return Err(Error::config("metrics", "ssim requires min image side >= 11"));
        }
        Ok(())
    }

    pub fn image_shape(&self) -> ImageShape {
        ImageShape::new(self.image_shape[0], self.image_shape[1], self.image_shape[2])
    }
}
