use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context as _;
use ndo_core::model::DENSE_MAX_SITES;
use ndo_core::oracle::{default_dt, write_rho_dump};
use ndo_core::training::run_training_with;
use ndo_core::{
    find_steady_state, ChainParameters64, DenseDensityMatrix, OracleReport, SteadyStateResult,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{self, ConfigError, RunConfig, SCHEMA_VERSION};
use crate::records::{deviation_table, read_records, RecordWriter};

pub struct Context {
    pub threads: usize,
    pub reproducible: bool,
}

pub struct OracleOptions {
    pub output: PathBuf,
    pub dump: bool,
    pub dt: Option<f64>,
    pub residual_tol: f64,
    pub max_steps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            output: PathBuf::from("."),
            dump: false,
            dt: None,
            residual_tol: 1e-9,
            max_steps: 1_000_000,
        }
    }
}

/// `oracle.json` on disk.
#[derive(Debug, Serialize, Deserialize)]
struct OracleFile {
    schema_version: u32,
    #[serde(flatten)]
    report: OracleReport,
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| ConfigError(format!("{e:#}")).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}

fn solve(chain: &ChainParameters64, opts: &OracleOptions) -> anyhow::Result<SteadyStateResult<f64>> {
    let initial = DenseDensityMatrix::maximally_mixed(chain.n_sites)?;
    let dt = opts.dt.unwrap_or_else(|| default_dt(chain));
    let start = Instant::now();
    let r = find_steady_state(chain, initial, dt, opts.residual_tol, opts.max_steps)?;
    log::info!(
        "oracle N={}: {} steps in {:.1}s, residual {:e}",
        chain.n_sites,
        r.steps_taken,
        start.elapsed().as_secs_f64(),
        r.residual
    );
    Ok(r)
}

/// Solves and writes `oracle.json` (and `rho.bin` when asked) into `opts.output`.
fn write_oracle(chain: &ChainParameters64, opts: &OracleOptions) -> anyhow::Result<PathBuf> {
    let result = solve(chain, opts)?;
    fs::create_dir_all(&opts.output)?;
    let path = opts.output.join("oracle.json");
    write_json(
        &path,
        &OracleFile {
            schema_version: SCHEMA_VERSION,
            report: result.report(chain),
        },
    )?;
    if opts.dump {
        let dump = opts.output.join("rho.bin");
        let f = File::create(&dump).with_context(|| format!("cannot create {}", dump.display()))?;
        write_rho_dump(&result.rho, BufWriter::new(f))?;
    }
    Ok(path)
}

pub fn oracle(config: Option<&Path>, preset: Option<&str>, opts: &OracleOptions) -> anyhow::Result<()> {
    let chain = match (config, preset) {
        (Some(path), _) => config::parse_chain(&read_text(path)?)?,
        (None, Some(name)) => config::preset(name)?.remove(0).chain,
        (None, None) => return Err(ConfigError("one of --config or --preset is required".into()).into()),
    };
    let path = write_oracle(&chain, opts)?;
    println!("{}", path.display());
    Ok(())
}

pub fn train(
    ctx: &Context,
    config: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    dry_run: bool,
) -> anyhow::Result<()> {
    if let Some(name) = preset {
        return run_preset(ctx, name, seed, output, dry_run);
    }
    let path = config.ok_or_else(|| ConfigError("one of --config or --preset is required".into()))?;
    let mut cfg = config::parse_config(&read_text(path)?)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    train_run(ctx, &cfg, dry_run)?;
    println!("{}", cfg.output_dir.display());
    Ok(())
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs one training configuration, writing its artifacts under `cfg.output_dir`.
pub fn train_run(ctx: &Context, cfg: &RunConfig, dry_run: bool) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    cfg.write_resolved(dir)?;
    if dry_run {
        return Ok(());
    }
    let n = cfg.chain.n_sites;
    let (m, k) = cfg.training.layer_sizes(n)?;
    let started = unix_seconds();
    let clock = Instant::now();
    let mut writer = RecordWriter::create(&dir.join("records.csv"), n)?;
    let snapshot_every = cfg.training.snapshot_every;
    let snap_dir = dir.join("snapshots");
    if snapshot_every > 0 {
        fs::create_dir_all(&snap_dir)?;
    }
    let seed = cfg.training.seed;
    let mut completed = 0;
    let mut last = None;
    let outcome = run_training_with(&cfg.chain, &cfg.training, |rec, params| {
        writer
            .write(rec)
            .map_err(|e| ndo_core::Error::Io(std::io::Error::other(e)))?;
        completed = rec.iteration + 1;
        last = Some((rec.cost_estimate, rec.magnetization_z));
        if snapshot_every > 0 && completed % snapshot_every == 0 {
            let path = snap_dir.join(format!("checkpoint_{completed:06}.json"));
            let text = serde_json::to_string(&params.checkpoint(Some(seed)))?;
            fs::write(path, text)?;
        }
        if completed % 10 == 0 {
            log::info!(
                "{}: iteration {completed}/{} cost {:.4e} mz {:.5}",
                cfg.label,
                cfg.training.n_iterations,
                rec.cost_estimate,
                rec.magnetization_z
            );
        }
        Ok(())
    });
    let status = match &outcome {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let metadata = json!({
        "schema_version": SCHEMA_VERSION,
        "label": cfg.label,
        "status": status,
        "tool": "ndo",
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": { "parameters": cfg.training.seed, "sampler": cfg.sampler().seed },
        "threads": ctx.threads,
        "reproducible": ctx.reproducible,
        "layers": { "n_visible": n, "n_hidden": m, "n_mixing": k },
        "n_params": ndo_core::ParameterLayout::new(n, m, k).n_params(),
        "iterations_requested": cfg.training.n_iterations,
        "iterations_completed": completed,
        "final_cost": last.map(|l| l.0),
        "final_mz": last.map(|l| l.1),
        "started_unix_seconds": started,
        "wall_time_seconds": clock.elapsed().as_secs_f64(),
    });
    write_json(&dir.join("metadata.json"), &metadata)?;
    let outcome = outcome?;
    write_json(&dir.join("checkpoint.json"), &outcome.params.checkpoint(Some(seed)))?;
    Ok(())
}

fn run_preset(
    ctx: &Context,
    name: &str,
    seed: Option<u64>,
    output: Option<PathBuf>,
    dry_run: bool,
) -> anyhow::Result<()> {
    let runs = config::preset(name)?;
    let root = output.unwrap_or_else(|| PathBuf::from("runs").join(name));
    let n = runs[0].chain.n_sites;
    let oracle_path = root.join("oracle.json");
    let have_oracle = n <= DENSE_MAX_SITES;
    if !have_oracle {
        log::warn!("{name}: no dense benchmark for N = {n}; skipping oracle and analyze");
    } else if !dry_run {
        let opts = OracleOptions {
            output: root.clone(),
            ..Default::default()
        };
        write_oracle(&runs[0].chain, &opts)?;
    }
    for mut run in runs {
        run.output_dir = root.join(&run.output_dir);
        if let Some(s) = seed {
            run.set_seed(s);
        }
        train_run(ctx, &run, dry_run)?;
        if have_oracle && !dry_run {
            let dir = &run.output_dir;
            analyze(
                &dir.join("records.csv"),
                &oracle_path,
                &dir.join("deviation.csv"),
                run.training.smoothing_window,
            )?;
        }
    }
    println!("{}", root.display());
    Ok(())
}

pub fn analyze(records: &Path, oracle: &Path, output: &Path, window: usize) -> anyhow::Result<()> {
    let series = read_records(records)?;
    let text = read_text(oracle)?;
    let report: OracleReport = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", oracle.display())))?;
    let table = deviation_table(&series, &report.site_excited_population, window)?;
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    table.write(output)?;
    log::info!(
        "{}: final smoothed max |relative deviation| {:.3}%",
        output.display(),
        100.0 * table.final_max_abs_smoothed()
    );
    Ok(())
}
