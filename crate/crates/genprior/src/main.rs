//! Command-line front end for the experiment harness.
//!
//! Each subcommand runs one experiment kind from a TOML config (see the
//! harness module docs for the grammar) and writes a CSV or JSON report to
//! `--out`, or stdout when omitted.
//!
//! Exit codes: 0 when every trial succeeded, 2 when the run completed but
//! some trials recorded failures, 1 for configuration or i/o errors.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use genprior::harness::{
    emit_report, load_config, render_report, run_experiment, ExperimentConfig, HarnessError,
    ReportFormat,
};

#[derive(Parser)]
#[command(name = "genprior", version, about = "Seeded experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weight-distribution deviation sweep over output sizes.
    WdcSweep(RunArgs),
    /// Descent recovery sweep over measurement counts and noise levels.
    Recover(RunArgs),
    /// Recovery success rate as the hidden layer expands.
    ExpansionPhase(RunArgs),
    /// Collision construction at the expansivity boundary.
    Collision(RunArgs),
    /// Aspherical net construction and coverage check.
    NetDemo(RunArgs),
    /// Range-restricted isometry deviation sweep.
    Rric(RunArgs),
    /// Multi-start landscape census.
    Landscape(RunArgs),
}

impl Command {
    fn expected_kind(&self) -> &'static str {
        match self {
            Command::WdcSweep(_) => "wdc_sweep",
            Command::Recover(_) => "recovery_sweep",
            Command::ExpansionPhase(_) => "expansion_phase",
            Command::Collision(_) => "collision_demo",
            Command::NetDemo(_) => "net_demo",
            Command::Rric(_) => "rric_sweep",
            Command::Landscape(_) => "landscape",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::WdcSweep(a)
            | Command::Recover(a)
            | Command::ExpansionPhase(a)
            | Command::Collision(a)
            | Command::NetDemo(a)
            | Command::Rric(a)
            | Command::Landscape(a) => a,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Worker thread count; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

fn run(command: &Command) -> Result<bool, HarnessError> {
    let args = command.args();
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(HarnessError::Schema("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| HarnessError::Schema(format!("thread pool setup failed: {e}")))?;
    }
    let mut config: ExperimentConfig = load_config(&args.config)?;
    if config.kind.name() != command.expected_kind() {
        return Err(HarnessError::Schema(format!(
            "config kind `{}` does not match subcommand (expected `{}`)",
            config.kind.name(),
            command.expected_kind()
        )));
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let rows = run_experiment(&config)?;
    match &args.out {
        Some(path) => emit_report(&rows, args.format.into(), path)?,
        None => print!("{}", render_report(&rows, args.format.into())?),
    }
    Ok(rows.iter().all(|row| row.is_ok()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures; genuine usage
            // errors map onto the config-error exit code.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
