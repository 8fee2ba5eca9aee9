//! `usckd`: deterministic front end for the coupled-interferometer simulator.

mod commands;
mod error;
mod params;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outputs;
use crate::error::CliError;
use crate::params::{Command, Params};

#[derive(Debug, Parser)]
#[command(
    name = "usckd",
    version,
    about = "Coupled Mach-Zehnder key distribution simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Grid of port intensities over both phase settings (CSV).
    Sweep(SweepArgs),
    /// Time-domain detector trace under a drive schedule (CSV + JSON summary).
    Trace(TraceArgs),
    /// Run a key-exchange session (JSON transcript).
    Keygen(KeygenArgs),
    /// Evaluate an eavesdropping strategy (JSON report).
    Eve(EveArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Named parameter set.
    #[arg(long)]
    preset: Option<String>,
    /// Flat TOML file, or a previous JSON output to re-run.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Grid points per axis, endpoints included.
    #[arg(long)]
    resolution: Option<u64>,
    /// Summary JSON path; defaults to `<out>.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Upper-arm detuning on Bob's side, Hz.
    #[arg(long, allow_hyphen_values = true)]
    bob_detune: Option<f64>,
    /// Upper-arm detuning on Alice's side, Hz.
    #[arg(long, allow_hyphen_values = true)]
    alice_detune: Option<f64>,
    /// Static phase on Bob's side, rad.
    #[arg(long, allow_hyphen_values = true)]
    bob_offset: Option<f64>,
    /// Static phase on Alice's side, rad.
    #[arg(long, allow_hyphen_values = true)]
    alice_offset: Option<f64>,
    #[arg(long)]
    toggle_time: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    toggle_bob_detune: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    toggle_alice_detune: Option<f64>,
    #[arg(long)]
    ramp_start: Option<f64>,
    #[arg(long)]
    ramp_duration: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ramp_phase: Option<f64>,
    #[arg(long)]
    ramp_exponent: Option<f64>,
    /// Fraction of Alice's local output mixed into Bob's detectors.
    #[arg(long)]
    leakage: Option<f64>,
    /// none, random-walk or gaussian.
    #[arg(long)]
    noise: Option<String>,
    /// Per-sample noise standard deviation, rad.
    #[arg(long)]
    sigma: Option<f64>,
    /// Calibrate a random walk to this RMS fluctuation of I_A.
    #[arg(long)]
    noise_target: Option<f64>,
    /// Summary JSON path; defaults to `<out>.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KeygenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rounds: Option<u64>,
    /// none, random-walk or gaussian.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    erasure_band: Option<f64>,
    /// Eavesdropper tap ratio; 0 disables the attack.
    #[arg(long)]
    tap_ratio: Option<f64>,
    /// outbound, return or both.
    #[arg(long)]
    placement: Option<String>,
    /// intensity or coherent.
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Debug, Args)]
struct EveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    tap_ratio: Option<f64>,
    /// outbound, return or both.
    #[arg(long)]
    placement: Option<String>,
    /// intensity or coherent.
    #[arg(long)]
    strategy: Option<String>,
    /// exact or monte-carlo.
    #[arg(long)]
    mode: Option<String>,
    /// Monte Carlo round count.
    #[arg(long)]
    n: Option<u64>,
}

struct Invocation {
    command: Command,
    common: Common,
    flags: Params,
    summary: Option<PathBuf>,
}

fn invocation(cmd: Cmd) -> Invocation {
    let mut flags = Params::default();
    let (command, common, summary) = match cmd {
        Cmd::Sweep(a) => {
            flags.set_opt("resolution", a.resolution);
            (Command::Sweep, a.common, a.summary)
        }
        Cmd::Trace(a) => {
            flags.set_opt("sample_rate", a.sample_rate);
            flags.set_opt("duration", a.duration);
            flags.set_opt("bob_detune", a.bob_detune);
            flags.set_opt("alice_detune", a.alice_detune);
            flags.set_opt("bob_offset", a.bob_offset);
            flags.set_opt("alice_offset", a.alice_offset);
            flags.set_opt("toggle_time", a.toggle_time);
            flags.set_opt("toggle_bob_detune", a.toggle_bob_detune);
            flags.set_opt("toggle_alice_detune", a.toggle_alice_detune);
            flags.set_opt("ramp_start", a.ramp_start);
            flags.set_opt("ramp_duration", a.ramp_duration);
            flags.set_opt("ramp_phase", a.ramp_phase);
            flags.set_opt("ramp_exponent", a.ramp_exponent);
            flags.set_opt("leakage", a.leakage);
            flags.set_opt("noise", a.noise);
            flags.set_opt("sigma", a.sigma);
            flags.set_opt("noise_target", a.noise_target);
            (Command::Trace, a.common, a.summary)
        }
        Cmd::Keygen(a) => {
            flags.set_opt("rounds", a.rounds);
            flags.set_opt("noise", a.noise);
            flags.set_opt("sigma", a.sigma);
            flags.set_opt("threshold", a.threshold);
            flags.set_opt("erasure_band", a.erasure_band);
            flags.set_opt("tap_ratio", a.tap_ratio);
            flags.set_opt("placement", a.placement);
            flags.set_opt("strategy", a.strategy);
            (Command::Keygen, a.common, None)
        }
        Cmd::Eve(a) => {
            flags.set_opt("tap_ratio", a.tap_ratio);
            flags.set_opt("placement", a.placement);
            flags.set_opt("strategy", a.strategy);
            flags.set_opt("mode", a.mode);
            flags.set_opt("n", a.n);
            (Command::Eve, a.common, None)
        }
    };
    flags.set_opt("seed", common.seed);
    Invocation {
        command,
        common,
        flags,
        summary,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn emit(inv: &Invocation, outputs: &Outputs) -> Result<(), CliError> {
    match &inv.common.out {
        Some(path) => write_file(path, &outputs.primary)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(outputs.primary.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
    }
    if let Some(summary) = &outputs.summary {
        let target = inv
            .summary
            .clone()
            .or_else(|| inv.common.out.as_deref().map(sidecar_path));
        match target {
            Some(path) => write_file(&path, summary)?,
            None => eprint!("{summary}"),
        }
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<i32, CliError> {
    let inv = invocation(cmd);
    let params = params::resolve(
        inv.command,
        inv.common.preset.as_deref(),
        inv.common.config.as_deref(),
        &inv.flags,
    )?;
    let outputs = commands::run(inv.command, &params)?;
    emit(&inv, &outputs)?;
    Ok(outputs.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("usckd: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
