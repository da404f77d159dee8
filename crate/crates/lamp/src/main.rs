//! Thin command-line front-end over the library.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use lamp::cli::config::ExperimentConfig;
use lamp::cli::verify::{audit_operator, suite_linops, verify_all};
use lamp::cli::{runner, seeds};
use lamp::error::Error;
use lamp::imaging::ImageShape;
use lamp::io;
use lamp::risk::{sweep_beta, ErrorModel};

#[derive(Parser)]
#[command(name = "lamp", version, about = "Diffusion posterior sampling with lagged multistep correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one config across a parameter grid and aggregate a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One of: gamma, beta, mu, eta, eta_b, nfe, sigma_y, n_warm.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full identity/oracle/statistical verification suite.
    Verify {
        /// Monte Carlo trials for the risk suite.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
    /// One-step risk lab: closed-form and Monte Carlo risks over a lag grid.
    Risk {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit operators against their dense oracles.
    OpCheck {
        /// Optional operator spec JSON: {"operator": {...}, "image_shape": [c,h,w]}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Export the audited operator's kernel taps as a tensor.
        #[arg(long)]
        export_kernel: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
struct RiskJob {
    model: ErrorModel,
    betas: Vec<f64>,
    #[serde(default = "default_trials")]
    n_trials: usize,
    #[serde(default)]
    seed: u64,
}

fn default_trials() -> usize {
    100_000
}

#[derive(Deserialize)]
struct OpCheckJob {
    operator: lamp::cli::config::OperatorSpec,
    image_shape: [usize; 3],
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. }
                | Error::Json(_)
                | Error::Shape { .. }
                | Error::TensorFormat(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> lamp::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = runner::run(&cfg, &out)?;
            print!("{}", metrics_summary(&outcome));
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out, param, values, seed } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rows = runner::sweep(&cfg, &param, &values, &out)?;
            for r in &rows {
                println!(
                    "{param} = {:<10} psnr {:<10} beta_bar {:.5}",
                    r.value,
                    r.metrics.psnr.map(|v| format!("{v:.3}")).unwrap_or_default(),
                    r.beta_bar
                );
            }
            println!("wrote {}", out.join("sweep.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { trials } => {
            let report = verify_all(trials)?;
            print!("{}", report.render());
            if report.passed() {
                println!("verification passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verification FAILED");
                Ok(ExitCode::from(1))
            }
        }
        Command::Risk { config, out, trials, seed } => {
            let text = std::fs::read_to_string(&config)?;
            let mut job: RiskJob = serde_json::from_str(&text)?;
            if let Some(t) = trials {
                job.n_trials = t;
            }
            if let Some(s) = seed {
                job.seed = s;
            }
            let mc_seed = seeds::derive(job.seed, seeds::stream::RISK);
            let sweep = sweep_beta(&job.model, &job.betas, job.n_trials, mc_seed)?;
            let mut csv = String::from("beta,risk_ps_cf,risk_lamp_cf,risk_lamp_mc,se,condition_holds\n");
            for row in &sweep.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.beta,
                    row.risk_ps_cf,
                    row.risk_lamp_cf,
                    row.risk_lamp_mc,
                    row.se,
                    row.condition_holds.map(|b| b.to_string()).unwrap_or_default(),
                ));
            }
            if let Some(dir) = out.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(&out, csv)?;
            println!(
                "best beta on grid: {} (closed-form risk {:.6})",
                sweep.rows[sweep.argmin].beta, sweep.rows[sweep.argmin].risk_lamp_cf
            );
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::OpCheck { config, export_kernel } => {
            let (checks, kernel) = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    let job: OpCheckJob = serde_json::from_str(&text)?;
                    let shape =
                        ImageShape::new(job.image_shape[0], job.image_shape[1], job.image_shape[2]);
                    let op = job.operator.build(shape)?;
                    let checks = audit_operator("operator", &op)?;
                    let taps = op.kernel().map(|k| k.taps().clone());
                    (checks, taps)
                }
                None => {
                    let suite = suite_linops()?;
                    (suite.checks, None)
                }
            };
            let mut failed = false;
            for c in &checks {
                let status = if c.passed() { "pass" } else { "FAIL" };
                println!("[{status}] {:<45} dev {:.3e} (tol {:.1e})", c.label, c.dev, c.tol);
                failed |= !c.passed();
            }
            if let Some(path) = export_kernel {
                match kernel {
                    Some(taps) => {
                        let (h, w) = taps.dim();
                        io::write_tensor(&path, &[h, w], taps.as_slice().unwrap())?;
                        println!("kernel taps written to {}", path.display());
                    }
                    None => {
                        return Err(Error::config("export_kernel", "operator has no kernel"));
                    }
                }
            }
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
    }
}

fn metrics_summary(outcome: &runner::RunOutcome) -> String {
    let mut s = String::new();
    if let Some(v) = outcome.metrics.psnr {
        s.push_str(&format!("psnr {v:.4} dB\n"));
    }
    if let Some(v) = outcome.metrics.ssim {
        s.push_str(&format!("ssim {v:.5}\n"));
    }
    if let Some(v) = outcome.metrics.mse_to_oracle {
        s.push_str(&format!("mse to oracle {v:.6e}\n"));
    }
    s.push_str(&format!(
        "denoiser evals {}, mean lag weight {:.5}\n",
        outcome.denoiser_evals, outcome.beta_bar
    ));
    s
}
