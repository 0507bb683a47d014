//! `mgrit`: run solver experiments from a config file.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_override, parse_text, Assignment, Origin, RunConfig};
use runner::RunError;

const TRANSPORT_VAR: &str = "MGRIT_TRANSPORT";

#[derive(Parser)]
#[command(
    name = "mgrit",
    version,
    about = "Multigrid-reduction-in-time experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Run {
        config: PathBuf,
        /// Replace a config value, e.g. `--override tol=1e-9`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write trace.txt with one line per solver operation.
        #[arg(long)]
        trace: bool,
    },
    /// Convert convergence.csv into a two-column file for plotting.
    Plotdata {
        csv: PathBuf,
        /// Output path; defaults to the input with extension `.dat`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, overrides: &[String], trace: bool) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    let mut assignments = parse_text(&text)?;
    for o in overrides {
        assignments.push(parse_override(o)?);
    }
    if let Ok(transport) = std::env::var(TRANSPORT_VAR) {
        assignments.push(Assignment {
            key: "transport".into(),
            value: transport,
            origin: Origin::Env(TRANSPORT_VAR),
        });
    }
    if trace {
        assignments.push(Assignment {
            key: "trace".into(),
            value: "true".into(),
            origin: Origin::Override,
        });
    }
    Ok(RunConfig::from_assignments(&assignments)?)
}

fn run(path: PathBuf, overrides: Vec<String>, trace: bool) -> Result<bool, RunError> {
    let cfg = load_config(&path, &overrides, trace)?;
    let report = runner::run(&cfg)?;
    let info = &report.info;
    println!(
        "{} after {} iterations, residual {:.3e} (levels {:?}, setup {:.3}s, solve {:.3}s)",
        if info.converged {
            "converged"
        } else {
            "not converged"
        },
        info.iterations,
        info.final_residual(),
        report.level_sizes,
        info.setup_seconds,
        info.solve_seconds
    );
    println!("output written to {}", report.output_dir.display());
    Ok(info.converged)
}

fn plotdata(csv: PathBuf, output: Option<PathBuf>) -> Result<PathBuf, String> {
    let text = std::fs::read_to_string(&csv).map_err(|e| format!("{}: {e}", csv.display()))?;
    let data = runner::plot_data(&text).map_err(|e| format!("{}: {e}", csv.display()))?;
    let out = output.unwrap_or_else(|| csv.with_extension("dat"));
    std::fs::write(&out, data).map_err(|e| format!("{}: {e}", out.display()))?;
    Ok(out)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            overrides,
            trace,
        } => match run(config, overrides, trace) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("mgrit: {e}");
                ExitCode::from(e.exit_code())
            }
        },
        Command::Plotdata { csv, output } => match plotdata(csv, output) {
            Ok(out) => {
                println!("{}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("mgrit: {e}");
                ExitCode::from(2)
            }
        },
    }
}
