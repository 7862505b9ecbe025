//! `crossres`: cross-resonance simulations from the command line.

mod commands;
mod error;
mod output;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crossres::benchmarking::FormulaVariant;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "crossres", version, about = "Cross-resonance gate simulations for transmon-dimon devices")]
pub struct Cli {
    /// JSON run configuration; defaults to the exp2_al preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "crossres-out")]
    pub out: PathBuf,
    /// Seed for every random stream (required by `rb`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Levels kept per mode.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Coherence-limit formula.
    #[arg(long, global = true, value_parser = parse_variant, default_value = "completed")]
    pub variant: FormulaVariant,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_variant(s: &str) -> Result<FormulaVariant, String> {
    s.parse().map_err(|e: crossres::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effective Hamiltonian against -Delta_TA/delta_T.
    SweepDetuning,
    /// Effective Hamiltonian against drive amplitude.
    SweepAmplitude,
    /// CR Rabi trajectories and Hamiltonian tomography.
    Ht(NoiseArgs),
    /// Calibrated echoed CR and its evolution against half-pulse length.
    EchoedCr(EchoArgs),
    /// Process tomography of a two-qubit gate.
    Qpt(QptArgs),
    /// Clifford randomized benchmarking.
    Rb(RbArgs),
    /// Coherence-limited fidelity, both formula variants.
    CoherenceLimit(CoherenceArgs),
    /// Device presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetAction {
    /// Print the resolved preset as JSON.
    Show,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    None,
    /// T1 and echo T2 of the preset.
    Preset,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseKind,
}

#[derive(Debug, Args)]
pub struct EchoArgs {
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseKind,
    /// Half-pulse lengths sampled from 0 to twice the calibrated half.
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateKind {
    IdealZx90,
    EchoedCr,
}

#[derive(Debug, Args)]
pub struct QptArgs {
    #[arg(long, value_enum, default_value = "echoed-cr")]
    pub gate: GateKind,
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseKind,
    /// Symmetric assignment error of each qubit's readout.
    #[arg(long, default_value_t = 0.0)]
    pub readout_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RbNoise {
    None,
    Depolarizing(f64),
    Coherence,
}

fn parse_rb_noise(s: &str) -> Result<RbNoise, String> {
    match s {
        "none" => Ok(RbNoise::None),
        "coherence" => Ok(RbNoise::Coherence),
        _ => {
            let p = s
                .strip_prefix("depolarizing:")
                .ok_or_else(|| format!("expected none, coherence or depolarizing:P, got `{s}`"))?;
            let p: f64 = p.parse().map_err(|e| format!("depolarizing strength `{p}`: {e}"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("depolarizing strength {p} outside [0, 1]"));
            }
            Ok(RbNoise::Depolarizing(p))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interleave {
    Zx90,
}

#[derive(Debug, Args)]
pub struct RbArgs {
    /// none, coherence (preset T1/T2 over each Clifford) or depolarizing:P.
    #[arg(long, value_parser = parse_rb_noise, default_value = "coherence")]
    pub noise: RbNoise,
    #[arg(long, value_enum)]
    pub interleave: Option<Interleave>,
    /// Shots per sequence; 0 uses exact populations.
    #[arg(long)]
    pub shots: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    /// Two-qubit gate time; defaults to the configuration or 220 ns.
    #[arg(long)]
    pub gate_time_ns: Option<f64>,
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Command::Preset { action: PresetAction::Show } = cli.command {
        return commands::preset_show(cli);
    }
    let mut out = output::Outputs::new(&cli.out)?;
    match commands::dispatch(cli, &mut out) {
        Ok(()) => {
            let argv: Vec<String> = std::env::args().collect();
            out.finish(argv, cli.config.clone(), cli.seed)?;
            Ok(())
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
