//! Parallel sweep over λ driven by the bundled two-link TOML config, printed
//! as the same summary CSV the `sweep` subcommand writes.

use std::path::Path;

use eltrack::cli::{run_sweep, ExperimentConfig, SweepParam};
use eltrack::lyapunov::DEFAULT_RATE_WINDOW;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_link_sinusoid.toml");
    let exp = ExperimentConfig::load(&path)?;
    let rows = run_sweep(
        &exp,
        SweepParam::Lambda,
        &[0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
        DEFAULT_RATE_WINDOW,
    );

    let mut out = csv::Writer::from_writer(std::io::stdout());
    for row in &rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
