//! Runs the property suite behind `eltrack verify` and prints a summary
//! instead of the JSON report.

use std::path::Path;

use eltrack::cli::{run_verify, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_link_sinusoid.toml");
    let report = run_verify(&ExperimentConfig::load(&path)?)?;

    for p in &report.properties {
        let mark = if p.passed { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<22} {:>10.2e} (tol {:.0e})",
            p.name, p.measured, p.tolerance
        );
    }
    if let Some(c) = &report.composite_certificate {
        println!(
            "composite V: dV/dt / V min {:.3}, max {:.3}, mean {:.3} (informational)",
            c.min.unwrap_or(f64::NAN),
            c.max.unwrap_or(f64::NAN),
            c.mean.unwrap_or(f64::NAN)
        );
    }
    println!("all passed: {}", report.all_passed);
    Ok(())
}
