use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmra::experiment::{run_experiment, Mode};
use dmra::{output, plot, ExperimentConfig};

/// Mining-resource allocation simulator for proof-of-work networks.
#[derive(Parser)]
#[command(name = "dmra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured policy for every seed.
    Run(RunArgs),
    /// Run fixed-K control for each `sweep.k` value plus the baselines.
    Sweep(RunArgs),
    /// Write cost and backlog bound reports only.
    Verify(RunArgs),
    /// Emit a gnuplot script for the traces listed in a summary CSV.
    Plot { summary: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Defaults to `experiment.output_dir`, then $DMRA_OUTPUT_ROOT, then
    /// `./dmra-out`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, env = "DMRA_OUTPUT_ROOT", hide_env_values = true)]
    output_root: Option<PathBuf>,
}

fn execute(args: RunArgs, mode: Mode) -> Result<bool, String> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed_override {
        cfg.seeds = vec![seed];
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let out_dir = args
        .output_dir
        .or_else(|| cfg.output_dir.clone())
        .or(args.output_root)
        .unwrap_or_else(|| PathBuf::from("dmra-out"));

    let out = run_experiment(&cfg, mode, &out_dir).map_err(|e| e.to_string())?;
    for failure in &out.failures {
        eprintln!(
            "cell {} seed {} failed: {}",
            failure.policy, failure.seed, failure.message
        );
    }
    if mode == Mode::Verify {
        let mut stdout = std::io::stdout().lock();
        for report in &out.reports {
            output::write_report(&mut stdout, &cfg.digest(), report).map_err(|e| e.to_string())?;
            println!();
        }
    }
    println!(
        "{} files written to {} ({} cells ok, {} failed)",
        out.files.len(),
        out_dir.display(),
        out.summaries.len(),
        out.failures.len()
    );
    Ok(out.failures.is_empty())
}

fn emit_plot(summary: &Path) -> Result<bool, String> {
    let text = std::fs::read_to_string(summary)
        .map_err(|e| format!("cannot read {}: {e}", summary.display()))?;
    let script = plot::gnuplot_script(&text).map_err(|e| e.to_string())?;
    let path = summary.with_file_name("plot.gp");
    std::fs::write(&path, script).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("{}", path.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => execute(args, Mode::Run),
        Command::Sweep(args) => execute(args, Mode::Sweep),
        Command::Verify(args) => execute(args, Mode::Verify),
        Command::Plot { summary } => emit_plot(&summary),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
