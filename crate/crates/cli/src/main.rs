use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod records;
mod selftest;

use config::ConfigError;

/// Steady states of dissipative Heisenberg chains: dense oracle and
/// neural-density-operator training.
#[derive(Debug, Parser)]
#[command(name = "ndo", version)]
struct Cli {
    /// Worker threads for row and sample parallelism.
    #[arg(long, global = true, env = "NDO_THREADS")]
    threads: Option<usize>,

    /// Record that the run must be bit-for-bit repeatable. Reductions are
    /// always performed in a fixed order, so this only pins the flag in the
    /// run metadata.
    #[arg(long, global = true)]
    reproducible: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dense Runge-Kutta steady state of a chain.
    Oracle(OracleArgs),
    /// Variational training from a run configuration or a named preset.
    Train(TrainArgs),
    /// Per-site relative deviation of a training run from an oracle result.
    Analyze(AnalyzeArgs),
    /// Runs the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON chain or run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named experiment: fig2, fig3a, fig3b, fig4a or fig4b.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_name = "DIR", default_value = ".")]
    output: PathBuf,
    /// Also write the full density matrix to `rho.bin`.
    #[arg(long)]
    dump: bool,
    /// Time step (default 0.05 / max rate).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    source: Source,
    /// Overrides the parameter seed; sampling uses `seed + 1`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Resolve and write the configuration without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Training CSV (`iter,cost,acc_rate,mz,n1..nN`).
    #[arg(long, value_name = "PATH")]
    records: PathBuf,
    /// Oracle JSON from `ndo oracle`.
    #[arg(long, value_name = "PATH")]
    oracle: PathBuf,
    #[arg(long, value_name = "PATH", default_value = "deviation.csv")]
    output: PathBuf,
    /// Trailing moving-average window for the smoothed columns.
    #[arg(long, default_value_t = 50)]
    window: usize,
}

/// Process exit code for an error chain.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>() || e.is::<serde_json::Error>()) {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ndo_core::Error>() {
            return core_exit_code(e);
        }
    }
    1
}

fn core_exit_code(e: &ndo_core::Error) -> u8 {
    use ndo_core::Error::*;
    match e {
        AtIteration { source, .. } => core_exit_code(source),
        NonConvergence { .. } => 4,
        Divergence { .. } | StuckChain { .. } | NonFiniteGradient { .. } => 3,
        SizeMismatch(_) | Capacity(_) | InvalidArgument(_) | Json(_) => 2,
        Io(_) => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("cannot start {n} threads: {e}")))?;
    }
    let ctx = commands::Context {
        threads: rayon::current_num_threads(),
        reproducible: cli.reproducible,
    };
    match cli.command {
        Command::Oracle(a) => commands::oracle(
            a.source.config.as_deref(),
            a.source.preset.as_deref(),
            &commands::OracleOptions {
                output: a.output,
                dump: a.dump,
                dt: a.dt,
                residual_tol: a.residual_tol,
                max_steps: a.max_steps,
            },
        ),
        Command::Train(a) => commands::train(
            &ctx,
            a.source.config.as_deref(),
            a.source.preset.as_deref(),
            a.seed,
            a.output,
            a.dry_run,
        ),
        Command::Analyze(a) => commands::analyze(&a.records, &a.oracle, &a.output, a.window),
        Command::Selftest => selftest::run(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
