//! `tcom`: simulate, analyse and calibrate tilt-modulated time-crystal
//! records from the command line.

mod commands;
mod config;
mod output;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{ConfigError, RunConfig};
use output::{Format, Outputs};

#[derive(Parser, Debug)]
#[command(name = "tcom", version, about = "Simulate and analyse tilt-modulated time-crystal records")]
struct Cli {
    /// TOML run configuration; every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set cell.radius=3e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Noise seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Format of tabular outputs (fits, sweeps, ramp).
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,

    /// Report failures as a JSON object on stderr.
    #[arg(long, global = true)]
    error_json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Surface mode frequency and wavenumber.
    Mode,
    /// Synthesize a lock-in record.
    Synth,
    /// Spectrogram and per-window fits of a record (synthesized if no input).
    Analyze {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Resonance sweep through the full signal chain, or a fit of a sweep file.
    Sweep {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Geophone, tilt and heating calibration.
    Calibrate {
        /// CSV of `A_nom,V_gp` pairs.
        #[arg(long)]
        geophone: Option<PathBuf>,
        /// CSV of `A_exc,theta_max_sq` pairs (deg²).
        #[arg(long)]
        tilt: Option<PathBuf>,
    },
    /// Order-of-magnitude free-energy comparison.
    EnergyAudit,
    /// All stages with consistency checks.
    Pipeline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mode => "mode",
            Command::Synth => "synth",
            Command::Analyze { .. } => "analyze",
            Command::Sweep { .. } => "sweep",
            Command::Calibrate { .. } => "calibrate",
            Command::EnergyAudit => "energy-audit",
            Command::Pipeline => "pipeline",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let mut out = Outputs::create(&dir, &cfg, cli.format)?;
    let result = match &cli.command {
        Command::Mode => commands::mode(&cfg, &mut out).map(drop),
        Command::Synth => commands::synth(&cfg, &mut out).map(drop),
        Command::Analyze { input } => commands::analyze(&cfg, &mut out, input.as_deref()).map(drop),
        Command::Sweep { input } => commands::sweep(&cfg, &mut out, input.as_deref()).map(drop),
        Command::Calibrate { geophone, tilt } => {
            commands::calibrate(&cfg, &mut out, geophone.as_deref(), tilt.as_deref()).map(drop)
        }
        Command::EnergyAudit => commands::energy_audit(&cfg, &mut out).map(drop),
        Command::Pipeline => commands::pipeline(&cfg, &mut out).map(drop),
    };
    let files = out.finish(cli.command.name(), cfg.seed)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    result
}

/// Exit status and error class for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    use tc_optomech::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => (2, "config"),
                E::Domain(_) => (2, "domain"),
                E::Input(_) => (2, "input"),
                E::Parse { .. } => (2, "parse"),
                E::Infeasible(_) => (2, "infeasible"),
                E::NonConvergence(_) => (3, "non_convergence"),
                E::Io(_) => (4, "io"),
            };
        }
        if cause.is::<ConfigError>() {
            return (2, "config");
        }
        if cause.is::<std::io::Error>() {
            return (4, "io");
        }
    }
    (1, "internal")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            if cli.error_json {
                let body = serde_json::json!({ "error": kind, "message": format!("{err:#}"), "exit_code": code });
                eprintln!("{body}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
