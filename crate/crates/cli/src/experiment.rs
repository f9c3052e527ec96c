//! Experiment files.
//!
//! An experiment file is TOML:
//!
//! ```toml
//! output_dir = "runs"        # optional, default "runs"
//! seeds = [0, 1, 2]          # optional, default [0]
//!
//! [federation]               # shared data block (optional)
//! source = "synthetic"       # or "ingest" with `path = "table.csv"`,
//!                            # resolved relative to this file
//! num_vehicles = 3
//! drivers_per_vehicle = 4
//!
//! [defaults]                 # optional, applied to every run
//! batch_size = 32
//!
//! [[runs]]
//! name = "fedpc"
//! algorithm = "fedpc"
//! loss = { mu = 1.0 }
//! ```
//!
//! Each run is the built-in defaults, then `[defaults]`, then the run's own
//! table, then command-line overrides, merged key by key. Omitted keys keep
//! their defaults. Unless the federation block pins its own `seed`, the
//! sweep seed also seeds the synthetic federation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fedpc::algorithms::{DataSource, RunConfig};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    output_dir: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    federation: Option<Table>,
    defaults: Option<Table>,
    runs: Vec<Table>,
}

/// One fully-resolved (config, seed) pair.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub name: String,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub runs: Vec<ResolvedRun>,
}

/// A `dotted.key=value` assignment applied after the file is merged.
#[derive(Debug, Clone)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

impl Override {
    pub fn parse(text: &str) -> Result<Self> {
        let (key, raw) = text
            .split_once('=')
            .ok_or_else(|| anyhow!("override {text:?} is not of the form key=value"))?;
        Ok(Override::new(key.trim(), parse_scalar(raw.trim())))
    }

    pub fn new(key: &str, value: Value) -> Self {
        Override {
            key: key.to_string(),
            value,
        }
    }
}

fn parse_scalar(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn merge(base: &mut Table, patch: &Table) {
    for (k, v) in patch {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or(key);
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        cur = entry.as_table_mut().unwrap();
    }
    cur.insert(last.to_string(), value);
}

fn to_table<T: serde::Serialize>(value: &T) -> Result<Table> {
    match Value::try_from(value)? {
        Value::Table(t) => Ok(t),
        _ => bail!("expected a table"),
    }
}

/// Relative data paths written in an experiment file are relative to the
/// file, not to the working directory.
fn anchor_path(data: &mut Table, base_dir: &Path) {
    if let Some(Value::String(p)) = data.get("path") {
        let resolved = base_dir.join(p);
        data.insert(
            "path".into(),
            Value::String(resolved.to_string_lossy().into_owned()),
        );
    }
}

/// Resolve one run table into a validated [`RunConfig`].
fn resolve_run(
    name: &str,
    seed: u64,
    federation: Option<&Table>,
    defaults: Option<&Table>,
    run: &Table,
    overrides: &[Override],
) -> Result<RunConfig> {
    let mut merged = to_table(&RunConfig::default())?;
    if let Some(fed) = federation {
        let mut data = match merged.remove("data") {
            Some(Value::Table(t)) => t,
            _ => Table::new(),
        };
        if fed.get("source").and_then(Value::as_str) == Some("ingest") {
            data = Table::new();
        }
        merge(&mut data, fed);
        merged.insert("data".into(), Value::Table(data));
    }
    if let Some(d) = defaults {
        merge(&mut merged, d);
    }
    let mut own = run.clone();
    own.remove("name");
    merge(&mut merged, &own);

    merged.insert("seed".into(), Value::Integer(seed as i64));
    let pins_data_seed = federation.is_some_and(|f| f.contains_key("seed"))
        || defaults
            .and_then(|d| d.get("data"))
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key("seed"))
        || run
            .get("data")
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key("seed"));
    let synthetic = merged
        .get("data")
        .and_then(Value::as_table)
        .and_then(|t| t.get("source"))
        .and_then(Value::as_str)
        == Some("synthetic");
    if synthetic && !pins_data_seed {
        set_path(&mut merged, "data.seed", Value::Integer(seed as i64));
    }
    for o in overrides {
        set_path(&mut merged, &o.key, o.value.clone());
    }

    let config: RunConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("run {name:?}: {}", e.message().trim()))?;
    config
        .validate()
        .map_err(|e| anyhow!("run {name:?}: {e}"))?;
    if let DataSource::Ingest { path } = &config.data {
        if !path.exists() {
            bail!("run {name:?}: data.path {} does not exist", path.display());
        }
    }
    Ok(config)
}

/// Load and fully validate an experiment file. Every (run, seed) is
/// resolved before anything executes; all problems are reported together.
pub fn load_experiment(
    path: &Path,
    seeds_override: &[u64],
    overrides: &[Override],
) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawExperiment = toml::from_str(&text)
        .map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim()))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));

    let mut federation = raw.federation;
    if let Some(fed) = federation.as_mut() {
        anchor_path(fed, base_dir);
    }
    let mut defaults = raw.defaults;
    if let Some(Value::Table(data)) = defaults.as_mut().and_then(|d| d.get_mut("data")) {
        anchor_path(data, base_dir);
    }
    let mut run_tables = raw.runs;
    for run in &mut run_tables {
        if let Some(Value::Table(data)) = run.get_mut("data") {
            anchor_path(data, base_dir);
        }
    }

    let seeds = if seeds_override.is_empty() {
        raw.seeds.unwrap_or_else(|| vec![0])
    } else {
        seeds_override.to_vec()
    };
    if seeds.is_empty() {
        bail!("{}: seeds list is empty", path.display());
    }
    if run_tables.is_empty() {
        bail!("{}: no [[runs]] defined", path.display());
    }

    let mut names = BTreeSet::new();
    let mut problems = Vec::new();
    let mut runs = Vec::new();
    for (i, run) in run_tables.iter().enumerate() {
        let name = match run.get("name").and_then(Value::as_str) {
            Some(n) if !n.is_empty() => n.to_string(),
            _ => {
                problems.push(format!("runs[{i}]: missing string field `name`"));
                continue;
            }
        };
        if !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            problems.push(format!("run {name:?}: names may only use [A-Za-z0-9._-]"));
        }
        if !names.insert(name.clone()) {
            problems.push(format!("run {name:?}: duplicate name"));
            continue;
        }
        for &seed in &seeds {
            match resolve_run(
                &name,
                seed,
                federation.as_ref(),
                defaults.as_ref(),
                run,
                overrides,
            ) {
                Ok(config) => runs.push(ResolvedRun {
                    name: name.clone(),
                    seed,
                    config,
                }),
                Err(e) => {
                    problems.push(e.to_string());
                    break;
                }
            }
        }
    }
    if !problems.is_empty() {
        bail!(
            "invalid experiment {}:\n  {}",
            path.display(),
            problems.join("\n  ")
        );
    }
    Ok(Experiment {
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
        seeds,
        runs,
    })
}
