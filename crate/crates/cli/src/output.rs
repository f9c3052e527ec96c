//! Run execution and on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fedpc::algorithms::{run, RunConfig, RunOutput};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiment::ResolvedRun;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub name: String,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    /// SHA-256 of the metrics.json written next to this manifest.
    pub metrics_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn config_hash(config: &RunConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes()))
}

pub fn run_dir(root: &Path, name: &str, seed: u64) -> PathBuf {
    root.join(name).join(format!("seed-{seed}"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn sessions_csv(out: &RunOutput) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "round",
        "step",
        "client_id",
        "sender",
        "learning_rate",
        "steps",
        "nll",
        "proximal",
    ])?;
    for s in &out.sessions {
        w.write_record([
            s.round.to_string(),
            s.step.to_string(),
            s.client_id.to_string(),
            s.sender.to_string(),
            format!("{:?}", s.learning_rate),
            s.steps.to_string(),
            format!("{:?}", s.nll),
            format!("{:?}", s.proximal),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Write every artifact of a finished run into `dir`.
pub fn write_artifacts(dir: &Path, run: &ResolvedRun, out: &RunOutput) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let metrics = out.report.to_json()?;
    write(&dir.join(METRICS_FILE), metrics.as_bytes())?;

    let mut buf = Vec::new();
    out.report.write_rounds_csv(&mut buf)?;
    write(&dir.join("metrics.csv"), &buf)?;

    buf.clear();
    out.report.ledger.write_csv(&mut buf)?;
    write(&dir.join("ledger.csv"), &buf)?;

    buf.clear();
    match &out.schedule {
        Some(s) => s.write_csv(&mut buf)?,
        None => buf.extend_from_slice(b"round,step,sender,receiver\n"),
    }
    write(&dir.join("schedule.csv"), &buf)?;
    write(&dir.join("sessions.csv"), &sessions_csv(out)?)?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: run.name.clone(),
        seed: run.seed,
        config: run.config.clone(),
        config_hash: config_hash(&run.config)?,
        metrics_hash: sha256_hex(metrics.as_bytes()),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn execute(run_spec: &ResolvedRun, out_root: &Path) -> Result<(PathBuf, Manifest)> {
    let output = run(&run_spec.config)
        .with_context(|| format!("run {:?} seed {}", run_spec.name, run_spec.seed))?;
    let dir = run_dir(out_root, &run_spec.name, run_spec.seed);
    let manifest = write_artifacts(&dir, run_spec, &output)?;
    Ok((dir, manifest))
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a valid manifest", path.display()))?;
    let recomputed = config_hash(&manifest.config)?;
    if recomputed != manifest.config_hash {
        bail!(
            "{}: config hash mismatch (recorded {}, recomputed {recomputed})",
            path.display(),
            manifest.config_hash
        );
    }
    Ok(manifest)
}

/// Re-run a manifest into `out_root` and check the metrics hash.
pub fn replay(manifest: &Manifest, out_root: &Path) -> Result<PathBuf> {
    let spec = ResolvedRun {
        name: manifest.name.clone(),
        seed: manifest.seed,
        config: manifest.config.clone(),
    };
    let (dir, fresh) = execute(&spec, out_root)?;
    if fresh.metrics_hash != manifest.metrics_hash {
        bail!(
            "replay of {:?} seed {} produced different metrics (hash {} vs recorded {})",
            manifest.name,
            manifest.seed,
            fresh.metrics_hash,
            manifest.metrics_hash
        );
    }
    Ok(dir)
}
