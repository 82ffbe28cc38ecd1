mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Context;
use config::{Format, RunConfig};
use error::{exit, CliError, Result};
use output::Sink;

/// Default output directory when neither --out nor the config sets one.
const OUT_ENV: &str = "NVP1_OUT";
const DEFAULT_OUT: &str = "nvp1-out";

#[derive(Parser, Debug)]
#[command(name = "nvp1", version, about = "NV–P1 spectroscopy, pulse simulation, spin-bath Monte Carlo and readout analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config and $NVP1_OUT.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Config override, e.g. `--set bath.samples=2000`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// P1 transition table and optional synthetic DEER spectrum.
    Spectrum,
    /// Fit hyperfine, quadrupole and field parameters to assigned dips.
    Fit,
    /// Pulse sequences, entanglement, DEER and synthetic readout records.
    Simulate,
    /// Monte Carlo P1 bath: T2* sweeps, coupling statistics, JT maps.
    Bath,
    /// Histogram mixture, correlations, fidelity and reset policy of a record.
    Analyze,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Bath => "bath",
            Command::Analyze => "analyze",
        }
    }
}

/// Fills in the subcommand's section and makes input paths absolute, so the
/// snapshot reruns from anywhere.
fn resolve_section(cfg: &mut RunConfig, cmd: Command, base: &Path) -> Result<()> {
    let abs = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    match cmd {
        Command::Spectrum => {
            cfg.spectrum.get_or_insert_with(Default::default);
        }
        Command::Fit => {
            let f = cfg.fit.as_mut().ok_or_else(|| CliError::schema("missing [fit] section"))?;
            f.dips.as_mut().map(abs);
            f.spectrum.as_mut().map(abs);
        }
        Command::Simulate => {
            cfg.simulate.get_or_insert_with(Default::default);
        }
        Command::Bath => {
            cfg.bath.get_or_insert_with(Default::default);
        }
        Command::Analyze => {
            let a = cfg.analyze.as_mut().ok_or_else(|| CliError::schema("missing [analyze] section"))?;
            abs(&mut a.record);
        }
    }
    Ok(())
}

fn dispatch(cfg: &RunConfig, cmd: Command, ctx: &mut Context) -> Result<()> {
    match cmd {
        Command::Spectrum => commands::spectrum::run(cfg.spectrum.as_ref().expect("resolved"), ctx),
        Command::Fit => commands::fit::run(cfg.fit.as_ref().expect("resolved"), ctx),
        Command::Simulate => commands::simulate::run(cfg.simulate.as_ref().expect("resolved"), ctx),
        Command::Bath => commands::bath::run(cfg.bath.as_ref().expect("resolved"), ctx),
        Command::Analyze => commands::analyze::run(cfg.analyze.as_ref().expect("resolved"), ctx),
    }
}

struct Settings {
    config: RunConfig,
    seed: u64,
    threads: Option<usize>,
    format: Format,
    out: PathBuf,
    base: PathBuf,
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let cwd = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
    let base = match cli.config.as_deref().and_then(Path::parent) {
        Some(p) if !p.as_os_str().is_empty() => cwd.join(p),
        _ => cwd,
    };
    resolve_section(&mut config, cli.command, &base)?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    config.seed = Some(seed);
    let threads = cli.threads.or(config.threads);
    if threads == Some(0) {
        return Err(CliError::schema("threads must be ≥ 1"));
    }
    let format = cli.format.or(config.format).unwrap_or(Format::Csv);
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    // The snapshot reruns into whatever directory the caller picks.
    config.out = None;
    Ok(Settings { config, seed, threads, format, out, base })
}

fn execute(cli: &Cli, s: &Settings, sink: &mut Sink) -> Result<()> {
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::schema(e.to_string()))?;
    }
    sink.text("config.toml", &s.config.to_toml()?)?;
    let mut ctx = Context { seed: s.seed, base: s.base.clone(), sink };
    dispatch(&s.config, cli.command, &mut ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let s = match settings(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut sink = match Sink::new(&s.out, s.format) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = execute(&cli, &s, &mut sink);
    let code = result.as_ref().map_or_else(|e| e.exit_code(), |_| exit::OK);
    let manifest = json!({
        "tool": "nvp1",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "seed": s.seed,
        "threads": s.threads,
        "format": s.format,
        "config_path": cli.config,
        "overrides": cli.overrides,
        "config": s.config,
        "rerun": format!("nvp1 {} --config config.toml", cli.command.name()),
        "status": if code == exit::OK { "ok" } else { "error" },
        "exit_code": code,
        "error": result.as_ref().err().map(|e| e.to_string()),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": sink.files(),
    });
    let mpath = sink.dir().join("manifest.json");
    if let Err(e) = std::fs::write(&mpath, output::pretty(&manifest)) {
        eprintln!("error: {}: {e}", mpath.display());
        return ExitCode::from(exit::IO as u8);
    }
    match result {
        Ok(()) => {
            println!("{}: wrote {} files to {}", cli.command.name(), sink.files().len() + 1, sink.dir().display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code as u8)
        }
    }
}
