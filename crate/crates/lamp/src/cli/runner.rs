//! Batch experiment execution: configs in, reconstructions, logs, metric
//! tables, and ablation sweeps out.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::config::{ExperimentConfig, SourceSpec};
use super::seeds::{derive, stream};
use crate::error::{Error, Result};
use crate::imaging::{degrade, exact_posterior_mean, mse, psnr, ssim, Image};
use crate::io;
use crate::samplers::{run_trajectory, Init, StepRecord, TrajectoryInputs};

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_to_oracle: Option<f64>,
}

pub struct RunOutcome {
    pub estimate: Image,
    pub x0: Image,
    pub measurement: Image,
    pub metrics: MetricsReport,
    pub records: Vec<StepRecord>,
    pub beta_bar: f64,
    pub denoiser_evals: usize,
    /// Seeds actually used, in (x0, degrade, init) order.
    pub seeds: (u64, u64, u64),
}

/// Execute a configuration in memory.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let shape = config.image_shape();
    let (schedule, plan) = config.schedule.build()?;
    let operator = Arc::new(config.operator.build(shape)?);
    let prior = config.prior.build(shape, operator.clone())?;

    let x0_seed = derive(config.seed, stream::X0);
    let x0 = match &config.x0 {
        SourceSpec::Constant { constant } => Image::filled(shape, *constant),
        SourceSpec::Tensor { tensor } => {
            let img = io::read_image_tensor(tensor)?;
            if img.shape() != shape {
                return Err(Error::shape(format!("{shape}"), format!("{}", img.shape())));
            }
            img
        }
        SourceSpec::PriorSample { .. } => prior.sample(x0_seed)?,
    };

    let degrade_seed = config.degradation.seed.unwrap_or_else(|| derive(config.seed, stream::DEGRADE));
    let measurement = degrade(&x0, &operator, config.degradation.sigma_y, degrade_seed)?;
    let correction = config.correction.build(config.degradation.sigma_y)?;

    let init_seed = derive(config.seed, stream::INIT);
    let inputs = TrajectoryInputs {
        schedule: &schedule,
        plan: &plan,
        denoiser: &prior,
        correction: &correction,
        operator: &operator,
        measurement: &measurement,
    };
    let result = run_trajectory(&config.sampler, &inputs, Init::Noise(init_seed))?;
    if result.max_ps_decomp_dev > 1e-12 {
        return Err(Error::Verification(format!(
            "posterior-step decomposition deviated by {} (> 1e-12)",
            result.max_ps_decomp_dev
        )));
    }

    let clamped = result.x0.clamp01();
    let mut metrics =
        MetricsReport { psnr: None, ssim: None, mse_to_oracle: None };
    for m in &config.metrics {
        match m.as_str() {
            "psnr" => metrics.psnr = Some(psnr(&clamped, &x0)),
            "ssim" => metrics.ssim = Some(ssim(&clamped, &x0)?),
            "mse_to_oracle" => {
                let gaussian = prior.as_gaussian().ok_or_else(|| {
                    Error::config("metrics", "mse_to_oracle needs a gaussian prior")
                })?;
                let oracle = exact_posterior_mean(
                    gaussian,
                    &operator,
                    &measurement,
                    config.degradation.sigma_y,
                )?;
                metrics.mse_to_oracle = Some(mse(&result.x0, &oracle));
            }
            _ => unreachable!("validated"),
        }
    }

    Ok(RunOutcome {
        estimate: result.x0,
        x0,
        measurement,
        metrics,
        records: result.records,
        beta_bar: result.beta_bar,
        denoiser_evals: result.denoiser_evals,
        seeds: (x0_seed, degrade_seed, init_seed),
    })
}

/// Execute and write the artifact set into `out_dir`:
/// the estimate tensor, the per-step CSV log, `metrics.json`, and a
/// resolved-config snapshot that reruns byte-identically.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    fs::create_dir_all(out_dir)?;

    io::write_image_tensor(&out_dir.join("estimate.ltnsr"), &outcome.estimate)?;
    io::write_image_tensor(&out_dir.join("x0.ltnsr"), &outcome.x0)?;
    io::write_image_tensor(&out_dir.join("measurement.ltnsr"), &outcome.measurement)?;
    let channels = outcome.estimate.shape().channels;
    if channels == 1 || channels == 3 {
        let ext = if channels == 1 { "pgm" } else { "ppm" };
        io::export_8bit(&out_dir.join(format!("estimate.{ext}")), &outcome.estimate)?;
    }

    fs::write(out_dir.join("log.csv"), step_log_csv(&outcome.records))?;
    fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&outcome.metrics)? + "\n",
    )?;
    fs::write(out_dir.join("resolved_config.json"), resolved_snapshot(config, &outcome)?)?;
    Ok(outcome)
}

fn step_log_csv(records: &[StepRecord]) -> String {
    let mut out = String::from("step,t,h,h_prev,beta_t,res_norm,temporal_norm\n");
    for r in records {
        let h_prev = r.h_prev.map(|v| v.to_string()).unwrap_or_default();
        let temporal = r.temporal_norm.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step, r.t, r.h, h_prev, r.beta_t, r.res_norm, temporal
        ));
    }
    out
}

/// The input config with seeds materialized, plus provenance fields. The
/// snapshot itself parses as an `ExperimentConfig`.
fn resolved_snapshot(config: &ExperimentConfig, outcome: &RunOutcome) -> Result<String> {
    let mut snapshot = config.clone();
    snapshot.degradation.seed = Some(outcome.seeds.1);
    let mut value = serde_json::to_value(&snapshot)?;
    let map = value.as_object_mut().expect("config serializes to an object");
    map.insert("tool_version".into(), serde_json::json!(env!("CARGO_PKG_VERSION")));
    map.insert(
        "derived_seeds".into(),
        serde_json::json!({
            "x0": outcome.seeds.0,
            "degrade": outcome.seeds.1,
            "init": outcome.seeds.2,
        }),
    );
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub const SWEEP_PARAMS: &[&str] =
    &["gamma", "beta", "mu", "eta", "eta_b", "nfe", "sigma_y", "n_warm"];

fn apply_param(config: &ExperimentConfig, param: &str, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = config.clone();
    let as_count = |field: &str| -> Result<usize> {
        if value < 0.0 || value.fract() != 0.0 {
            return Err(Error::config(field, format!("needs a nonnegative integer, got {value}")));
        }
        Ok(value as usize)
    };
    match param {
        "gamma" => cfg.sampler.gamma = value,
        "beta" => {
            cfg.sampler.beta_mode = crate::samplers::BetaMode::Constant;
            cfg.sampler.beta_const = Some(value);
        }
        "mu" => cfg.correction.mu = Some(value),
        "eta" => cfg.correction.eta = Some(value),
        "eta_b" => cfg.correction.eta_b = Some(value),
        "nfe" => cfg.schedule.nfe = as_count("nfe")?,
        "sigma_y" => {
            cfg.degradation.sigma_y = value;
            if cfg.correction.sigma_y.is_some() {
                cfg.correction.sigma_y = Some(value);
            }
        }
        "n_warm" => cfg.sampler.n_warm = as_count("n_warm")?,
        other => {
            return Err(Error::config(
                "param",
                format!("unknown sweep parameter `{other}`; valid: {}", SWEEP_PARAMS.join(", ")),
            ));
        }
    }
    Ok(cfg)
}

pub struct SweepRow {
    pub value: f64,
    pub metrics: MetricsReport,
    pub beta_bar: f64,
    pub nfe: usize,
}

/// One run per parameter value, each in its own subdirectory, aggregated
/// into `sweep.csv` (metrics plus the mean per-step lag weight).
pub fn sweep(
    config: &ExperimentConfig,
    param: &str,
    values: &[f64],
    out_dir: &Path,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::with_capacity(values.len());
    let mut csv = String::from("param,value,psnr,ssim,mse_to_oracle,beta_bar,nfe\n");
    for (i, &value) in values.iter().enumerate() {
        let cfg = apply_param(config, param, value)?;
        let sub = out_dir.join(format!("run_{i:03}"));
        let outcome = run(&cfg, &sub)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            param,
            value,
            fmt(outcome.metrics.psnr),
            fmt(outcome.metrics.ssim),
            fmt(outcome.metrics.mse_to_oracle),
            outcome.beta_bar,
            outcome.denoiser_evals,
        ));
        rows.push(SweepRow {
            value,
            metrics: outcome.metrics.clone(),
            beta_bar: outcome.beta_bar,
            nfe: outcome.denoiser_evals,
        });
    }
    fs::write(out_dir.join("sweep.csv"), csv)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Method;

    fn test_config() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
            "schedule": {"n_train_steps": 100, "beta_start": 1e-3, "beta_end": 0.02, "nfe": 10},
            "image_shape": [1, 8, 8],
            "operator": {"kind": "gaussian_blur", "kernel_size": 3, "sigma": 1.0},
            "prior": {"kind": "gaussian", "mean": {"constant": 0.5}, "spectral_var": {"amplitude": 0.3, "scale": 4.0}},
            "degradation": {"sigma_y": 0.05},
            "correction": {"kind": "diffpir", "mu": 7.0},
            "sampler": {"method": "lamp", "gamma": -0.15, "n_warm": 2},
            "seed": 7,
            "metrics": ["psnr", "mse_to_oracle"]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&test_config(), dir.path()).unwrap();
        assert_eq!(out.denoiser_evals, 10);
        for f in ["estimate.ltnsr", "log.csv", "metrics.json", "resolved_config.json", "estimate.pgm"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
        assert_eq!(log.lines().count(), 11); // header + one row per step
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = test_config();
        run(&cfg, dir_a.path()).unwrap();
        run(&cfg, dir_b.path()).unwrap();
        for f in ["estimate.ltnsr", "log.csv", "metrics.json", "resolved_config.json"] {
            let a = fs::read(dir_a.path().join(f)).unwrap();
            let b = fs::read(dir_b.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs");
        }
    }

    #[test]
    fn snapshot_reproduces_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = test_config();
        run(&cfg, dir.path()).unwrap();
        let snap = ExperimentConfig::from_path(&dir.path().join("resolved_config.json")).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        run(&snap, dir2.path()).unwrap();
        let a = fs::read(dir.path().join("estimate.ltnsr")).unwrap();
        let b = fs::read(dir2.path().join("estimate.ltnsr")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_zero_matches_ps_baseline_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut lamp_cfg = test_config();
        lamp_cfg.sampler.gamma = 0.0;
        let mut ps_cfg = test_config();
        ps_cfg.sampler.method = Method::Ps;
        run(&lamp_cfg, dir_a.path()).unwrap();
        run(&ps_cfg, dir_b.path()).unwrap();
        let a = fs::read(dir_a.path().join("estimate.ltnsr")).unwrap();
        let b = fs::read(dir_b.path().join("estimate.ltnsr")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_produces_rows_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sweep(&test_config(), "gamma", &[-0.15, 0.0, 0.15], dir.path()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(dir.path().join("sweep.csv").exists());
        assert!(dir.path().join("run_001").join("estimate.ltnsr").exists());
        // gamma = 0 row has zero mean lag weight
        assert_eq!(rows[1].beta_bar, 0.0);
        assert!(sweep(&test_config(), "zeta", &[0.1], dir.path()).is_err());
    }

    #[test]
    fn identity_correction_gives_unconditional_run() {
        let mut cfg = test_config();
        cfg.correction = serde_json::from_str(r#"{"kind": "identity"}"#).unwrap();
        cfg.metrics = vec!["psnr".into()];
        let out = execute(&cfg).unwrap();
        assert_eq!(out.denoiser_evals, 10);
        // no measurement information is used; every step keeps beta_t = 0
        // during warm-up and the residual norm is exactly zero
        assert!(out.records.iter().all(|r| r.res_norm == 0.0));
    }

    #[test]
    fn three_channel_run_writes_ppm() {
        let mut cfg = test_config();
        cfg.image_shape = [3, 8, 8];
        let dir = tempfile::tempdir().unwrap();
        let out = run(&cfg, dir.path()).unwrap();
        assert_eq!(out.estimate.shape().channels, 3);
        assert!(dir.path().join("estimate.ppm").exists());
        assert!(out.metrics.psnr.unwrap().is_finite());
    }

    #[test]
    fn nfe_sweep_reflects_requested_counts() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sweep(&test_config(), "nfe", &[5.0, 20.0], dir.path()).unwrap();
        assert_eq!(rows[0].nfe, 5);
        assert_eq!(rows[1].nfe, 20);
    }
}
