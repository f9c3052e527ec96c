use rayon::prelude::*;

use crate::algorithms::{
    evaluate_round, initial_model, train_local, Algorithm, LocalTraining, RunConfig, RunOutput,
    SessionRecord,
};
use crate::data::Federation;
use crate::error::{Error, Result};
use crate::evaluation::{
    build_ledger, metric_iii, CommPattern, MetricsReport, ModelView, SCHEMA_VERSION,
};
use crate::numerics::{LossConfig, ParamVector};
use crate::rng::{rng_for, stream};
use crate::topology::Sender;

/// Weighted component-wise mean, weights normalized to sum to one.
///
/// Accumulated as a running mean so that identical inputs come back
/// bit-for-bit unchanged.
pub fn fedavg_aggregate(models: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = models
        .first()
        .ok_or_else(|| Error::Aggregation("no models to aggregate".into()))?;
    if weights.len() != models.len() {
        return Err(Error::Aggregation(format!(
            "{} weights for {} models",
            weights.len(),
            models.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Aggregation(format!(
            "weights must be finite and >= 0, got {w}"
        )));
    }
    for m in &models[1..] {
        first
            .check_compatible(m)
            .map_err(|e| Error::Aggregation(e.to_string()))?;
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Aggregation("weights sum to zero".into()));
    }

    let mut acc: Vec<f64> = Vec::new();
    let mut seen = 0.0;
    for (m, &w) in models.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        seen += w / total;
        if acc.is_empty() {
            acc = m.values().to_vec();
            continue;
        }
        let frac = (w / total) / seen;
        for (a, &x) in acc.iter_mut().zip(m.values()) {
            *a += frac * (x - *a);
        }
    }
    ParamVector::from_values(first.spec().clone(), acc)
}

pub fn run_fedavg(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    let loss = LossConfig {
        mu: 0.0,
        ..cfg.loss
    };
    run_server(cfg, federation, loss, Algorithm::Fedavg)
}

pub fn run_fedprox(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    run_server(cfg, federation, cfg.loss, Algorithm::Fedprox)
}

fn run_server(
    cfg: &RunConfig,
    federation: &Federation,
    loss: LossConfig,
    algorithm: Algorithm,
) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg
        .model
        .resolve(federation.feature_dim, federation.classes)?;
    let omega0 = initial_model(&spec, cfg.model.init, cfg.seed)?;
    let clients: Vec<_> = federation.training().collect();
    if clients.is_empty() {
        return Err(Error::config("no training clients"));
    }
    let weights: Vec<f64> = clients.iter().map(|c| c.train_len() as f64).collect();

    let mut global = omega0.clone();
    let mut sessions = Vec::new();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let opts = LocalTraining {
            epochs: cfg.local_epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.lr.learning_rate(round),
            loss,
        };
        let results = clients
            .par_iter()
            .map(|c| {
                let mut rng = rng_for(
                    cfg.seed,
                    &[stream::LOCAL_SHUFFLE, round as u64, c.client_id as u64],
                );
                train_local(&global, &global, &c.train, &opts, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        for (step, (c, out)) in clients.iter().zip(&results).enumerate() {
            sessions.push(SessionRecord {
                round,
                step,
                client_id: c.client_id,
                sender: Sender::Source,
                learning_rate: opts.learning_rate,
                steps: out.steps,
                nll: out.nll,
                proximal: out.proximal,
                anchor_digest: global.digest(),
                model_digest: out.model.digest(),
            });
        }
        let locals: Vec<ParamVector> = results.into_iter().map(|o| o.model).collect();
        global = fedavg_aggregate(&locals, &weights)?;
        rounds.push(evaluate_round(
            round,
            ModelView::Global(&global),
            federation,
            cfg,
        )?);
    }

    let new_clients: Vec<_> = federation.test_clients().collect();
    let metric_iii = metric_iii(
        &global,
        &new_clients,
        cfg.personalization_steps,
        cfg.personalization_lr,
    )?;
    let ledger = build_ledger(
        CommPattern::ClientServer {
            rounds: cfg.rounds,
            clients: clients.len(),
        },
        &spec,
    );
    Ok(RunOutput {
        algorithm,
        report: MetricsReport {
            schema_version: SCHEMA_VERSION,
            algorithm: algorithm.name().to_string(),
            rounds,
            metric_iii,
            ledger,
        },
        sessions,
        schedule: None,
        personalized: Default::default(),
        global: Some(global.clone()),
        initial_model: omega0,
        evaluation_model: global,
    })
}
