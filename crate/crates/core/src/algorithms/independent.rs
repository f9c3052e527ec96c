use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::algorithms::{
    evaluate_round, initial_model, train_local, Algorithm, ClientState, LocalTraining, RunConfig,
    RunOutput, SessionRecord,
};
use crate::data::Federation;
use crate::error::{Error, Result};
use crate::evaluation::{
    build_ledger, metric_iii, CommPattern, MetricsReport, ModelView, SCHEMA_VERSION,
};
use crate::numerics::{LossConfig, ParamVector};
use crate::rng::{rng_for, stream};
use crate::topology::Sender;

/// Every training client trains alone from `omega_0`: one session of
/// `local_epochs` per round at that round's learning rate, no proximal
/// pull, no communication. New clients are served the lowest-id training
/// client's final model.
pub fn run_independent(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg
        .model
        .resolve(federation.feature_dim, federation.classes)?;
    let omega0 = initial_model(&spec, cfg.model.init, cfg.seed)?;
    let clients: Vec<_> = federation.training().collect();
    if clients.is_empty() {
        return Err(Error::config("no training clients"));
    }
    let loss = LossConfig {
        mu: 0.0,
        ..cfg.loss
    };

    let mut models: BTreeMap<usize, ParamVector> = clients
        .iter()
        .map(|c| (c.client_id, omega0.clone()))
        .collect();
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
                train_local(&models[&c.client_id], &omega0, &c.train, &opts, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        for (step, (c, out)) in clients.iter().zip(results).enumerate() {
            sessions.push(SessionRecord {
                round,
                step,
                client_id: c.client_id,
                sender: Sender::Source,
                learning_rate: opts.learning_rate,
                steps: out.steps,
                nll: out.nll,
                proximal: out.proximal,
                anchor_digest: omega0.digest(),
                model_digest: out.model.digest(),
            });
            models.insert(c.client_id, out.model);
        }
        rounds.push(evaluate_round(
            round,
            ModelView::Personal(&models),
            federation,
            cfg,
        )?);
    }

    let evaluation_model = models[&clients[0].client_id].clone();
    let new_clients: Vec<_> = federation.test_clients().collect();
    let metric_iii = metric_iii(
        &evaluation_model,
        &new_clients,
        cfg.personalization_steps,
        cfg.personalization_lr,
    )?;
    let ledger = build_ledger(CommPattern::Isolated { rounds: cfg.rounds }, &spec);
    let personalized = models
        .into_iter()
        .map(|(id, model)| {
            (
                id,
                ClientState {
                    client_id: id,
                    model,
                    received_from: Sender::Source,
                    round: cfg.rounds - 1,
                },
            )
        })
        .collect();
    Ok(RunOutput {
        algorithm: Algorithm::Independent,
        report: MetricsReport {
            schema_version: SCHEMA_VERSION,
            algorithm: Algorithm::Independent.name().to_string(),
            rounds,
            metric_iii,
            ledger,
        },
        sessions,
        schedule: None,
        personalized,
        global: None,
        initial_model: omega0,
        evaluation_model,
    })
}
