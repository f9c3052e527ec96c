use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fedpc::algorithms::{build_federation, Algorithm};
use fedpc::data::write_feature_table;
use fedpc_cli::compare::{load_reports, render_csv, render_text, table_rows};
use fedpc_cli::experiment::{load_experiment, Experiment, Override};
use fedpc_cli::output::{execute, load_manifest, replay};
use rayon::prelude::*;
use toml::Value;

#[derive(Parser)]
#[command(
    name = "fedpc",
    version,
    about = "Peer-to-peer federated continual learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (run, seed) of an experiment file, or replay a manifest.json.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Output root (defaults to the file's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Maximum number of runs executing at once.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check an experiment file without running anything.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Export the federation of one run to the CSV feature-table format.
    GenData {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Run whose data block to export (default: the first run).
        #[arg(long)]
        run: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine metrics reports into one per-round table.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    /// Seed to run (repeatable); replaces the file's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    local_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Per-round learning-rate decay factor.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    personalization_steps: Option<usize>,
    #[arg(long)]
    personalization_lr: Option<f64>,
    /// Any other field, as dotted.key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl OverrideArgs {
    fn collect(&self) -> Result<Vec<Override>> {
        let mut out = Vec::new();
        if let Some(a) = self.algorithm {
            out.push(Override::new("algorithm", Value::String(a.name().into())));
        }
        let ints = [
            ("rounds", self.rounds),
            ("local_epochs", self.local_epochs),
            ("batch_size", self.batch_size),
            ("personalization_steps", self.personalization_steps),
        ];
        for (key, v) in ints {
            if let Some(v) = v {
                out.push(Override::new(key, Value::Integer(v as i64)));
            }
        }
        let floats = [
            ("lr.eta0", self.lr),
            ("lr.decay", self.decay),
            ("loss.mu", self.mu),
            ("loss.weight_decay", self.weight_decay),
            ("personalization_lr", self.personalization_lr),
        ];
        for (key, v) in floats {
            if let Some(v) = v {
                out.push(Override::new(key, Value::Float(v)));
            }
        }
        for s in &self.set {
            out.push(Override::parse(s)?);
        }
        Ok(out)
    }

    fn load(&self, config: &Path) -> Result<Experiment> {
        load_experiment(config, &self.seeds, &self.collect()?)
    }
}

fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn cmd_run(
    config: &Path,
    overrides: &OverrideArgs,
    out: Option<PathBuf>,
    workers: usize,
) -> Result<ExitCode> {
    if is_manifest(config) {
        let manifest = load_manifest(config)?;
        let root = out.unwrap_or_else(|| config.parent().unwrap_or(Path::new(".")).join("replay"));
        let dir = replay(&manifest, &root)?;
        println!(
            "replayed {} seed {} -> {} (metrics identical)",
            manifest.name,
            manifest.seed,
            dir.display()
        );
        return Ok(ExitCode::SUCCESS);
    }

    let experiment = match overrides.load(config) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    };
    let root = out.unwrap_or_else(|| experiment.output_dir.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("cannot start worker pool")?;
    let results: Vec<_> = pool.install(|| {
        experiment
            .runs
            .par_iter()
            .map(|r| (r, execute(r, &root)))
            .collect()
    });

    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok((dir, _)) => println!("ok    {} seed {} -> {}", r.name, r.seed, dir.display()),
            Err(e) => {
                println!("FAIL  {} seed {}: {e:#}", r.name, r.seed);
                failures.push(format!("{} seed {}", r.name, r.seed));
            }
        }
    }
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} run(s) failed: {}", failures.len(), failures.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_validate(config: &Path, overrides: &OverrideArgs) -> Result<ExitCode> {
    match overrides.load(config) {
        Ok(e) => {
            println!(
                "{}: {} run(s) x {} seed(s) valid",
                config.display(),
                e.runs.len() / e.seeds.len().max(1),
                e.seeds.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_gen_data(
    config: &Path,
    overrides: &OverrideArgs,
    run: Option<&str>,
    out: &Path,
) -> Result<ExitCode> {
    let experiment = overrides.load(config)?;
    let chosen = match run {
        Some(name) => experiment
            .runs
            .iter()
            .find(|r| r.name == name)
            .with_context(|| format!("no run named {name:?}"))?,
        None => &experiment.runs[0],
    };
    let federation = build_federation(&chosen.config)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_feature_table(out.join("federation.csv"), &federation.clients)?;

    let mut w = csv::Writer::from_path(out.join("clients.csv"))?;
    w.write_record([
        "client_id",
        "vehicle_id",
        "role",
        "train_samples",
        "test_samples",
    ])?;
    for c in &federation.clients {
        let role = if federation.split.test_clients.contains(&c.client_id) {
            "test"
        } else {
            "training"
        };
        w.write_record([
            c.client_id.to_string(),
            c.vehicle_id.to_string(),
            role.to_string(),
            c.train_len().to_string(),
            c.test_len().to_string(),
        ])?;
    }
    w.flush()?;
    println!(
        "wrote {} clients ({} training, {} test) to {}",
        federation.clients.len(),
        federation.split.training_clients.len(),
        federation.split.test_clients.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(reports: &[PathBuf], csv_out: Option<&Path>) -> Result<ExitCode> {
    let loaded = load_reports(reports)?;
    let rows = table_rows(&loaded);
    print!("{}", render_text(&rows));
    if let Some(path) = csv_out {
        std::fs::write(path, render_csv(&rows)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            overrides,
            out,
            workers,
        } => cmd_run(config, overrides, out.clone(), *workers),
        Command::Validate { config, overrides } => cmd_validate(config, overrides),
        Command::GenData {
            config,
            overrides,
            run,
            out,
        } => cmd_gen_data(config, overrides, run.as_deref(), out),
        Command::Compare { reports, csv } => cmd_compare(reports, csv.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
