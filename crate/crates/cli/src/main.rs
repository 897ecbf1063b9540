//! `qpkam`: command-line driver for the quasi-periodic KAM laboratory.
//!
//! Every command reads an optional TOML file (`--config`), applies
//! `--set key=value` overrides, and writes its artifacts together with
//! `config.resolved.toml` and `manifest.json` into the output directory.
//! Exit codes: 0 success, 1 configuration or internal error, 2 a
//! hypothesis or verification check failed.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RawConfig;
use manifest::{read_manifest, Run, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Hypothesis(String),
    Internal(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Hypothesis(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Hypothesis(m) => write!(f, "check failed: {m}"),
            CliError::Internal(e) => write!(f, "error: {e:#}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "qpkam", version, about = "Reducibility experiments for quasi-periodic SL(2,R) cocycles")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set lambda=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory; defaults to `qpkam-out/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run data-parallel loops sequentially.
    #[arg(long, global = true)]
    serial: bool,
    /// Also write two-column `plot_*.dat` files.
    #[arg(long, global = true)]
    emit_plot_data: bool,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the two-frequency vector from a growth parameter chi.
    FreqConstruct {
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Check convergent laws and small-divisor bounds of a frequency.
    ArithVerify,
    /// Fibered rotation number with an error budget.
    Rotnum,
    /// Lyapunov exponent estimate.
    Lyapunov,
    /// Solve one twisted homological equation.
    Homsolve,
    /// Run the KAM iteration on a perturbed rotation cocycle.
    KamRun,
    /// Sweep energies of a Schrodinger cocycle.
    SpectrumScan,
    /// Verify and summarise a previous run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FreqConstruct { .. } => "freq-construct",
            Command::ArithVerify => "arith-verify",
            Command::Rotnum => "rotnum",
            Command::Lyapunov => "lyapunov",
            Command::Homsolve => "homsolve",
            Command::KamRun => "kam-run",
            Command::SpectrumScan => "spectrum-scan",
            Command::Report { .. } => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpkam: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    qpkam::par::set_serial(cli.serial);
    let name = cli.command.name();
    if let Command::Report { run } = &cli.command {
        return report(run);
    }
    let mut overrides = cli.overrides.clone();
    if let Command::FreqConstruct { chi, steps } = &cli.command {
        overrides.extend(chi.map(|c| format!("chi={c:?}")));
        overrides.extend(steps.map(|s| format!("steps={s}")));
    }
    overrides.extend(cli.seed.map(|s| format!("seed={s}")));
    let raw = RawConfig::load(cli.config.as_deref(), &overrides)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("qpkam-out").join(name));
    let mut run = Run::new(dir, cli.emit_plot_data)?;
    let outcome = match &cli.command {
        Command::FreqConstruct { .. } => finish(commands::freq_construct(&raw, &mut run), &mut run),
        Command::ArithVerify => finish(commands::arith_verify(&raw, &mut run), &mut run),
        Command::Rotnum => finish(commands::rotnum(&raw, &mut run), &mut run),
        Command::Lyapunov => finish(commands::lyapunov(&raw, &mut run), &mut run),
        Command::Homsolve => finish(commands::homsolve(&raw, &mut run), &mut run),
        Command::KamRun => finish(commands::kam_run_cmd(&raw, &mut run), &mut run),
        Command::SpectrumScan => finish(commands::spectrum_scan(&raw, &mut run), &mut run),
        Command::Report { .. } => unreachable!(),
    };
    // A failed check still leaves a manifest behind for inspection.
    let (snapshot, result) = outcome;
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        overrides,
        snapshot,
        seed: cli.seed,
        serial: cli.serial,
        artifacts: Vec::new(),
        wall_time_s: 0.0,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let dir = run.dir.clone();
    let path = run.finish(manifest)?;
    if result.is_ok() {
        println!("wrote {} (outputs in {})", path.display(), dir.display());
    }
    result
}

/// Write the resolved configuration; returns its JSON form for the manifest.
fn finish<T: Serialize>(res: Result<T, CliError>, run: &mut Run) -> (serde_json::Value, Result<(), CliError>) {
    match res {
        Ok(cfg) => {
            let snap = match config::snapshot(&cfg).and_then(|t| run.write_text("config.resolved.toml", &t)) {
                Ok(()) => serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null),
                Err(e) => return (serde_json::Value::Null, Err(e)),
            };
            (snap, Ok(()))
        }
        Err(e) => (serde_json::Value::Null, Err(e)),
    }
}

fn report(dir: &std::path::Path) -> Result<(), CliError> {
    let m = read_manifest(dir)?;
    println!("command: {} (version {}, {:.2} s{})", m.command, m.version, m.wall_time_s, if m.serial { ", serial" } else { "" });
    if let Some(p) = &m.config_path {
        println!("config: {p}");
    }
    for o in &m.overrides {
        println!("override: {o}");
    }
    let mut missing = 0;
    for a in &m.artifacts {
        let now = std::fs::metadata(dir.join(&a.path)).map(|md| md.len()).ok();
        let status = match now {
            Some(b) if b == a.bytes => "ok",
            Some(_) => "size changed",
            None => "missing",
        };
        if status != "ok" {
            missing += 1;
        }
        println!("  {:<40} {:>10} bytes  {status}", a.path, a.bytes);
    }
    if m.command == "spectrum-scan" {
        if let Ok(text) = std::fs::read_to_string(dir.join("summary.json")) {
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                for key in ["fraction_in_pi", "fraction_reduced", "fraction_bounded"] {
                    println!("{key}: {}", v[key]);
                }
            }
        }
    }
    if missing > 0 {
        return Err(CliError::Hypothesis(format!("{missing} artifact(s) missing or modified")));
    }
    Ok(())
}
