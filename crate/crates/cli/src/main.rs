use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use passive_inverse::config::{ExperimentConfig, Mode};
use passive_inverse::experiment::{run_experiment, selftest};

/// Coefficient and initial-data reconstruction from passive boundary traces.
#[derive(Parser)]
#[command(name = "passive", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment description (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Root for output directories when neither `--out` nor `output_dir` is set.
    #[arg(long, global = true, env = "PASSIVE_OUT_ROOT", default_value = "passive-out")]
    out_root: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Dirichlet trace of the wave equation from `c` and `f`.
    ForwardWave,
    /// Boundary flux of the heat equation from `b` and `g`.
    ForwardHeat,
    /// Spectral data from a trace (zero scan or matrix pencil).
    Extract,
    /// Speed and initial data from a wave trace.
    InvertWave,
    /// Convection and initial data from heat flux samples.
    InvertHeat,
    /// Trace distances between two coefficient/initial-data pairs.
    Compare,
    /// Quick checks of the solver stack.
    Selftest,
}

impl Command {
    fn mode(self) -> Option<Mode> {
        Some(match self {
            Command::ForwardWave => Mode::ForwardWave,
            Command::ForwardHeat => Mode::ForwardHeat,
            Command::Extract => Mode::Extract,
            Command::InvertWave => Mode::InvertWave,
            Command::InvertHeat => Mode::InvertHeat,
            Command::Compare => Mode::ComparePairs,
            Command::Selftest => return None,
        })
    }
}

fn output_dir(cli: &Cli, config: &ExperimentConfig, path: &Path) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    if let Some(dir) = &config.output_dir {
        return config.base_dir.join(dir);
    }
    let stem = path.file_stem().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("run"));
    cli.out_root.join(stem)
}

fn run(cli: &Cli) -> Result<bool, String> {
    let Some(mode) = cli.command.mode() else {
        let checks = selftest().map_err(|e| e.to_string())?;
        for c in &checks {
            println!("{} {} = {:.3e} (< {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
        }
        return Ok(checks.iter().all(|c| c.passed));
    };
    let path = cli.config.as_ref().ok_or("--config is required")?;
    let mut config = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
    match config.mode {
        Some(m) if m != mode => {
            return Err(format!("config mode `{}` does not match subcommand `{}`", m.as_str(), mode.as_str()));
        }
        _ => config.mode = Some(mode),
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = output_dir(cli, &config, path);
    let bundle = run_experiment(&config, &out).map_err(|e| e.to_string())?;
    for (name, value) in &bundle.summary.metrics {
        println!("{name} = {value:.6e}");
    }
    for (name, value) in &bundle.summary.notes {
        println!("{name}: {value}");
    }
    for c in &bundle.summary.checks {
        println!("{} {} = {:.3e} (< {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    log::info!("wrote {} files to {}", bundle.files.len(), bundle.out_dir.display());
    Ok(bundle.summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
