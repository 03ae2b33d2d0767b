//! Run configuration: one JSON document with `chain`, `sampler` and
//! `training` blocks, parsed strictly and resolved against the defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use ndo_core::{ChainParameters64, SamplerConfig, Strategy, TrainingConfig64};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid or inconsistent configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// A rate given either once for every site or per site.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Rates {
    Uniform(f64),
    PerSite(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainBlock {
    n_sites: usize,
    coupling_j: f64,
    gamma_in: Rates,
    gamma_out: Rates,
}

impl ChainBlock {
    fn resolve(self) -> anyhow::Result<ChainParameters64> {
        let n = self.n_sites;
        let expand = |r: Rates, key: &str| -> anyhow::Result<Vec<f64>> {
            match r {
                Rates::Uniform(x) => Ok(vec![x; n]),
                Rates::PerSite(v) if v.len() == n => Ok(v),
                Rates::PerSite(v) => Err(config_err(format!(
                    "chain.{key} has {} entries but chain.n_sites = {n}",
                    v.len()
                ))),
            }
        };
        let gin = expand(self.gamma_in, "gamma_in")?;
        let gout = expand(self.gamma_out, "gamma_out")?;
        ChainParameters64::new(n, self.coupling_j, gin, gout)
            .map_err(|e| config_err(format!("chain: {e}")))
    }
}

/// Training block: [`TrainingConfig64`] minus the sampler, which has its own block.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingBlock {
    learning_rate: f64,
    n_iterations: usize,
    #[serde(default = "one")]
    hidden_density: f64,
    #[serde(default = "one")]
    mixing_density: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    snapshot_every: usize,
    #[serde(default = "fifty")]
    smoothing_window: usize,
}

fn one() -> f64 {
    1.0
}

fn fifty() -> usize {
    50
}

/// Fully resolved run; this is what gets echoed next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub label: String,
    pub output_dir: PathBuf,
    pub chain: ChainParameters64,
    pub training: TrainingConfig64,
}

impl RunConfig {
    pub fn sampler(&self) -> &SamplerConfig {
        &self.training.sampler
    }

    /// Overrides both seeds: parameters use `seed`, sampling streams `seed + 1`.
    pub fn set_seed(&mut self, seed: u64) {
        self.training.seed = seed;
        self.training.sampler.seed = seed.wrapping_add(1);
    }

    /// Fills every defaulted field with its concrete value.
    fn resolve_defaults(&mut self) {
        let n = self.chain.n_sites;
        let s = &mut self.training.sampler;
        s.burn_in = Some(s.resolved_burn_in());
        if s.strategy == Strategy::Hybrid {
            s.exact_sites = Some(s.resolved_exact_sites(n));
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("resolved_config.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

fn take_block(root: &mut serde_json::Map<String, Value>, key: &str) -> anyhow::Result<Value> {
    root.remove(key)
        .ok_or_else(|| config_err(format!("missing `{key}` block")))
}

/// Pulls an optional `n_sites` out of a block so the block itself can be
/// parsed strictly, returning it for the cross-block check.
fn take_n_sites(block: &mut Value, key: &str) -> anyhow::Result<Option<usize>> {
    let Value::Object(map) = block else {
        return Err(config_err(format!("`{key}` must be an object")));
    };
    match map.remove("n_sites") {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| config_err(format!("{key}.n_sites must be a non-negative integer"))),
    }
}

/// Strict parse of a run configuration document.
pub fn parse_config(text: &str) -> anyhow::Result<RunConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
    let Value::Object(mut root) = value else {
        return Err(config_err("run configuration must be a JSON object"));
    };
    let chain_v = take_block(&mut root, "chain")?;
    let mut training_v = take_block(&mut root, "training")?;
    // a resolved config keeps the sampler inside the training block
    let nested = match &mut training_v {
        Value::Object(t) if !root.contains_key("sampler") => t.remove("sampler"),
        _ => None,
    };
    let mut sampler_v = match nested {
        Some(v) => v,
        None => take_block(&mut root, "sampler")?,
    };
    let label = match root.remove("label") {
        None => "run".to_string(),
        Some(Value::String(s)) => s,
        Some(_) => return Err(config_err("label must be a string")),
    };
    let output_dir = match root.remove("output_dir") {
        None => PathBuf::from("runs").join(&label),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => return Err(config_err("output_dir must be a string")),
    };
    if let Some(v) = root.remove("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(config_err(format!(
                "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
    }
    if let Some(key) = root.keys().next() {
        return Err(config_err(format!("unknown key `{key}` at top level")));
    }

    let sampler_n = take_n_sites(&mut sampler_v, "sampler")?;
    let training_n = take_n_sites(&mut training_v, "training")?;
    let chain: ChainBlock = serde_json::from_value(chain_v)
        .map_err(|e| config_err(format!("chain: {e}")))?;
    let chain = chain.resolve()?;
    let n = chain.n_sites;
    for (key, other) in [("sampler.n_sites", sampler_n), ("training.n_sites", training_n)] {
        if let Some(m) = other {
            if m != n {
                return Err(config_err(format!(
                    "chain.n_sites = {n} but {key} = {m}"
                )));
            }
        }
    }
    let sampler: SamplerConfig = serde_json::from_value(sampler_v)
        .map_err(|e| config_err(format!("sampler: {e}")))?;
    let t: TrainingBlock = serde_json::from_value(training_v)
        .map_err(|e| config_err(format!("training: {e}")))?;
    let training = TrainingConfig64 {
        learning_rate: t.learning_rate,
        n_iterations: t.n_iterations,
        sampler,
        hidden_density: t.hidden_density,
        mixing_density: t.mixing_density,
        seed: t.seed,
        snapshot_every: t.snapshot_every,
        smoothing_window: t.smoothing_window,
    };
    training
        .validate(n)
        .map_err(|e| config_err(format!("training: {e}")))?;
    let mut cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        label,
        output_dir,
        chain,
        training,
    };
    cfg.resolve_defaults();
    Ok(cfg)
}

/// Accepts either a bare chain document or a run configuration and returns
/// the chain.
pub fn parse_chain(text: &str) -> anyhow::Result<ChainParameters64> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
    let block = match value {
        Value::Object(mut map) if map.contains_key("chain") => map.remove("chain").unwrap(),
        other => other,
    };
    let chain: ChainBlock =
        serde_json::from_value(block).map_err(|e| config_err(format!("chain: {e}")))?;
    chain.resolve()
}

pub const PRESETS: [&str; 5] = ["fig2", "fig3a", "fig3b", "fig4a", "fig4b"];

pub fn symmetric_chain(n: usize) -> ChainParameters64 {
    ChainParameters64::uniform(n, 0.42, 0.21, 0.20).unwrap()
}

pub fn boundary_driven_chain(n: usize) -> ChainParameters64 {
    ChainParameters64::boundary_driven(n, 0.42, (0.20, 0.20), (0.21, 0.20), (0.20, 0.21)).unwrap()
}

fn run(
    label: &str,
    chain: ChainParameters64,
    strategy: Strategy,
    n_samples: usize,
    learning_rate: f64,
    n_iterations: usize,
) -> RunConfig {
    let mut training =
        TrainingConfig64::new(learning_rate, n_iterations, SamplerConfig::new(strategy, n_samples, 1));
    training.seed = 0;
    let mut cfg = RunConfig {
        schema_version: SCHEMA_VERSION,
        label: label.to_string(),
        output_dir: PathBuf::from(label),
        chain,
        training,
    };
    cfg.resolve_defaults();
    cfg
}

/// Named experiments; each expands to one or more runs whose `output_dir` is
/// relative to the preset's output directory.
pub fn preset(name: &str) -> anyhow::Result<Vec<RunConfig>> {
    let runs = match name {
        "fig2" => vec![
            run("metropolis", symmetric_chain(10), Strategy::Metropolis, 20_000, 0.1, 300),
            run("accept_only", symmetric_chain(10), Strategy::AcceptOnly, 20_000, 0.1, 300),
        ],
        "fig3a" => vec![run("exact", boundary_driven_chain(6), Strategy::Exact, 1, 0.1, 2000)],
        "fig3b" => vec![run(
            "metropolis",
            boundary_driven_chain(6),
            Strategy::Metropolis,
            20_000,
            0.1,
            500,
        )],
        "fig4a" => vec![run("hybrid", boundary_driven_chain(10), Strategy::Hybrid, 40_000, 0.05, 300)],
        "fig4b" => vec![
            run("hybrid_rate_0.05", boundary_driven_chain(16), Strategy::Hybrid, 40_000, 0.05, 500),
            run("hybrid_rate_0.025", boundary_driven_chain(16), Strategy::Hybrid, 40_000, 0.025, 500),
        ],
        other => {
            return Err(config_err(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(runs)
}
