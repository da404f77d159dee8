//! One-step risk lab: the bias-variance trade-off of lagging the
//! measurement-aware target. Closed forms against Monte Carlo, the strict
//! improvement condition, and the behavior as error correlation and target
//! drift vary.
//!
//! ```bash
//! cargo run --example risk_tradeoff
//! ```

use lamp::risk::{closed_form_risks, improvement_condition, sweep_beta, ErrorModel};

fn main() -> lamp::Result<()> {
    let trials = 100_000;

    // moderately correlated errors with a mild target drift
    let model = ErrorModel::isotropic(16, 1.0, 0.6, vec![0.25; 16])?;
    println!(
        "error model: dim 16, tr(Sigma) = {}, rho = 0.6, ||r||^2 = {}\n",
        model.trace_sigma(),
        model.r_norm_sq()
    );

    let betas = [0.0, 0.01, 0.03, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
    let sweep = sweep_beta(&model, &betas, trials, 7)?;
    println!(
        "{:>6} {:>12} {:>12} {:>10} {:>10}",
        "beta", "lamp (cf)", "lamp (mc)", "3 se", "improves"
    );
    for row in &sweep.rows {
        println!(
            "{:>6} {:>12.4} {:>12.4} {:>10.4} {:>10}",
            row.beta,
            row.risk_lamp_cf,
            row.risk_lamp_mc,
            3.0 * row.se,
            row.condition_holds.map(|b| b.to_string()).unwrap_or_else(|| "-".into())
        );
    }
    println!(
        "\nbaseline risk tr(Sigma) = {}, best grid beta = {}\n",
        sweep.rows[0].risk_ps_cf, sweep.rows[sweep.argmin].beta
    );

    // the condition flips as drift grows
    println!("improvement condition at beta = 0.1 while the drift grows:");
    for r in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let m = ErrorModel::isotropic(16, 1.0, 0.6, vec![r; 16])?;
        let rep = improvement_condition(&m, 0.1)?;
        let cf = closed_form_risks(&m, 0.1)?;
        println!(
            "  ||r||^2 = {:>6.1}: lhs {:>8.3} vs rhs {:>8.3} -> improves {} (risk {:.3} vs {:.3})",
            m.r_norm_sq(),
            rep.lhs,
            rep.rhs,
            rep.holds,
            cf.risk_lamp,
            cf.risk_ps
        );
    }

    // perfectly correlated errors leave no variance to reduce
    let stuck = ErrorModel::isotropic(16, 1.0, 1.0, vec![0.0; 16])?;
    let cf = closed_form_risks(&stuck, 0.5)?;
    println!("\nrho = 1: lagged risk {} equals baseline {} for any beta", cf.risk_lamp, cf.risk_ps);
    Ok(())
}
