//! Command-line front end: `simulate`, `verify`, `sweep` and `rate`.
//!
//! Exit codes: 0 success, 1 failed verification property or I/O failure,
//! 2 bad config or arguments, 3 simulation failure, 4 certificate validity
//! (asymmetric `P·M`), 5 insufficient data for a rate fit.

pub mod config;
mod sweep;
mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::error::Error;
use crate::lyapunov::{estimate_rate, RateEstimate, DEFAULT_RATE_FLOOR, DEFAULT_RATE_WINDOW};
use crate::simulate::{simulate, TrajectoryLog};

pub use config::ExperimentConfig;
pub use sweep::{run_sweep, SweepParam, SweepRow, SweepStatus};
pub use verify::{run_verify, CompositeReport, PropertyResult, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{0}")]
    Run(#[from] Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Run(e) => match e {
                Error::Certificate { .. } => 4,
                Error::InsufficientData(_) => 5,
                Error::Divergence { .. } | Error::NotPositiveDefinite { .. } => 3,
                Error::Gains(_)
                | Error::Reference(_)
                | Error::Model(_)
                | Error::Setup(_)
                | Error::Dimension { .. }
                | Error::NonFinite(_) => 2,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eltrack",
    version,
    about = "Manipulator tracking control: simulate, verify, sweep, fit rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop runs over a list of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParamArg,
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
    /// Fit an exponential decay rate to one CSV column.
    Rate {
        csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParamArg {
    Lambda,
    #[value(name = "p_scalar")]
    PScalar,
    Dt,
}

impl From<SweepParamArg> for SweepParam {
    fn from(p: SweepParamArg) -> Self {
        match p {
            SweepParamArg::Lambda => SweepParam::Lambda,
            SweepParamArg::PScalar => SweepParam::PScalar,
            SweepParamArg::Dt => SweepParam::Dt,
        }
    }
}

/// Parses `t0:t1`.
pub fn parse_window(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("--window expects t0:t1, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let t0: f64 = a.trim().parse().map_err(|_| bad())?;
    let t1: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(bad());
    }
    Ok((t0, t1))
}

/// Parses a comma-separated list of numbers; an empty list is an error.
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--values: `{s}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage(
            "--values must list at least one value".into(),
        ));
    }
    Ok(values)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs the configured simulation and writes the CSV to `out`, falling back
/// to `output.path` and then standard output.
pub fn cmd_simulate(config: &Path, out: Option<&Path>) -> Result<TrajectoryLog, CliError> {
    let exp = ExperimentConfig::load(config)?;
    let sim = exp.sim_config()?;
    let log = simulate(&sim)?;
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| exp.output.path.clone());
    let label = target
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<stdout>".into());
    let writer = open_output(target.as_deref())?;
    log.write_csv(writer, exp.output.precision)
        .map_err(|source| CliError::Io {
            path: label,
            source,
        })?;
    Ok(log)
}

pub fn cmd_verify(config: &Path, out: Option<&Path>) -> Result<VerifyReport, CliError> {
    let exp = ExperimentConfig::load(config)?;
    let report = run_verify(&exp)?;
    let mut writer = open_output(out)?;
    let label = out
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<stdout>".into());
    serde_json::to_writer_pretty(&mut writer, &report)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(writer))
        .and_then(|_| writer.flush())
        .map_err(|source| CliError::Io {
            path: label,
            source,
        })?;
    Ok(report)
}

pub fn cmd_sweep(
    config: &Path,
    param: SweepParam,
    values: &[f64],
    window: (f64, f64),
    out: Option<&Path>,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage(
            "--values must list at least one value".into(),
        ));
    }
    let exp = ExperimentConfig::load(config)?;
    exp.sim_config()?;
    let rows = run_sweep(&exp, param, values, window);
    let label = out
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<stdout>".into());
    let mut wtr = csv::Writer::from_writer(open_output(out)?);
    for row in &rows {
        wtr.serialize(row).map_err(|e| CliError::Io {
            path: label.clone(),
            source: io::Error::other(e),
        })?;
    }
    wtr.flush().map_err(|source| CliError::Io {
        path: label,
        source,
    })?;
    Ok(rows)
}

/// Reads a trajectory CSV and fits the decay rate of `column` against `t`.
pub fn cmd_rate(
    csv_path: &Path,
    column: &str,
    window: (f64, f64),
) -> Result<RateEstimate, CliError> {
    let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| CliError::Io {
        path: csv_path.display().to_string(),
        source: io::Error::other(e),
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Usage(format!(
                "column `{name}` not found in {}",
                csv_path.display()
            ))
        })
    };
    let (t_idx, v_idx) = (find("t")?, find(column)?);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
        let parse = |idx: usize| -> Result<f64, CliError> {
            record
                .get(idx)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("row {}: unreadable number", line + 2)))
        };
        times.push(parse(t_idx)?);
        values.push(parse(v_idx)?);
    }
    Ok(estimate_rate(&times, &values, window, DEFAULT_RATE_FLOOR)?)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            cmd_simulate(&config, out.as_deref())?;
            Ok(0)
        }
        Command::Verify { config, out } => {
            let report = cmd_verify(&config, out.as_deref())?;
            Ok(if report.all_passed { 0 } else { 1 })
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            window,
        } => {
            let values = parse_values(&values)?;
            let window = window
                .as_deref()
                .map(parse_window)
                .transpose()?
                .unwrap_or(DEFAULT_RATE_WINDOW);
            let rows = cmd_sweep(&config, param.into(), &values, window, out.as_deref())?;
            Ok(if rows.iter().any(|r| r.status != SweepStatus::RunFailed) {
                0
            } else {
                3
            })
        }
        Command::Rate {
            csv,
            column,
            window,
        } => {
            let window = window
                .as_deref()
                .map(parse_window)
                .transpose()?
                .unwrap_or(DEFAULT_RATE_WINDOW);
            let est = cmd_rate(&csv, &column, window)?;
            let json = serde_json::to_string(&est).map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: io::Error::other(e),
            })?;
            println!("{json}");
            Ok(0)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("eltrack: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("1:5").unwrap(), (1.0, 5.0));
        assert_eq!(parse_window(" 0.5 : 2 ").unwrap(), (0.5, 2.0));
        assert!(parse_window("5:1").is_err());
        assert!(parse_window("1-5").is_err());
    }

    #[test]
    fn values_parsing() {
        assert_eq!(parse_values("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_values("").unwrap_err().exit_code(), 2);
        assert!(parse_values("1,x").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Run(Error::Divergence { t: 1.0 }).exit_code(), 3);
        assert_eq!(
            CliError::Run(Error::InsufficientData(String::new())).exit_code(),
            5
        );
        let cert = Error::Certificate {
            t: 0.0,
            asymmetry: 1.0,
            tolerance: 1e-8,
        };
        assert_eq!(CliError::Run(cert).exit_code(), 4);
    }
}
