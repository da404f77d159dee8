//! Build the standard linear schedule, respace it, and inspect the
//! exponential-integrator step quantities.
//!
//! ```bash
//! cargo run --example schedule_coefficients
//! ```

use lamp::schedule::{exp_mh_identity_check, Schedule};

fn main() -> lamp::Result<()> {
    let schedule = Schedule::linear(1000, 1e-4, 0.02)?;
    println!("linear schedule: 1000 training steps, beta in [1e-4, 0.02]");
    println!(
        "alpha range [{:.6}, {:.6}], sigma range [{:.6}, {:.6}]",
        schedule.alpha(999),
        schedule.alpha(0),
        schedule.sigma(0),
        schedule.sigma(999)
    );
    println!(
        "log-SNR lambda spans [{:.3}, {:.3}]\n",
        schedule.lambda(999),
        schedule.lambda(0)
    );

    for nfe in [20usize, 100] {
        let plan = schedule.respace(nfe)?;
        println!("respaced to {nfe} reverse steps (first source t = {})", plan.t_src(0));
        println!("{:>5} {:>5} {:>9} {:>9} {:>9} {:>9}", "step", "t", "h", "e^-h", "A0", "A1");
        let show: Vec<usize> = [0, 1, nfe / 2, nfe - 2, nfe - 1].to_vec();
        for i in show {
            let c = plan.step_coeffs(i);
            println!(
                "{:>5} {:>5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
                i,
                plan.t_src(i),
                c.h,
                c.e_mh,
                c.a0,
                c.a1
            );
        }
        println!();
    }

    // the coefficient identity behind the first-order step
    let mut max_dev = 0.0f64;
    for t in 1..1000 {
        max_dev = max_dev.max(exp_mh_identity_check(&schedule, t, t - 1));
    }
    println!("max |e^(-h) - alpha_src sigma_dst / (alpha_dst sigma_src)| = {max_dev:.3e}");
    Ok(())
}
