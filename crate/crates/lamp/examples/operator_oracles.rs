//! Build each structured operator kind and audit it against its explicit
//! dense matrix: singular values, apply/adjoint/pinv, and the spectral
//! rotations.
//!
//! ```bash
//! cargo run --example operator_oracles
//! ```

use lamp::cli::verify::audit_operator;
use lamp::imaging::ImageShape;
use lamp::linops::{make_block_sr, make_gaussian_blur, make_motion_blur};

fn main() -> lamp::Result<()> {
    let shape = ImageShape::new(1, 8, 8);
    let ops = vec![
        ("gaussian blur 3x3 sigma 1".to_string(), make_gaussian_blur(shape, 3, 1.0)?),
        ("motion blur 5x5 intensity 0.5".to_string(), make_motion_blur(shape, 5, 0.5, 7)?),
        ("block averaging x2".to_string(), make_block_sr(shape, 2)?),
        ("block averaging x4".to_string(), make_block_sr(shape, 4)?),
    ];

    for (name, op) in &ops {
        let mut spectrum = op.spectrum().to_vec();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        println!(
            "{name}: {} -> {}, {} singular values, largest {:.4}, smallest {:.2e}",
            op.in_shape(),
            op.out_shape(),
            spectrum.len(),
            spectrum[0],
            spectrum[spectrum.len() - 1],
        );
        for check in audit_operator(name, op)? {
            let status = if check.passed() { "ok " } else { "FAIL" };
            println!("  [{status}] {:<50} dev {:.2e}", check.label, check.dev);
        }
        println!();
    }

    // the null space of block averaging carries no measurement information
    let sr = make_block_sr(shape, 4)?;
    let nonzero = sr.spectrum().iter().filter(|&&a| a > 0.0).count();
    println!(
        "block x4: {} of {} spectral directions observed, each with singular value {}",
        nonzero,
        shape.numel(),
        sr.spectrum()[0]
    );
    Ok(())
}
