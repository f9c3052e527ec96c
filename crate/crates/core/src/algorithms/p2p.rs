use std::collections::BTreeMap;

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
use crate::topology::{gossip_schedule, line_schedule, ring_schedule, Schedule, Sender};

/// FedPC: a single model follows a gossip random walk over the training
/// clients and each receiver fine-tunes it against the model it received.
pub fn run_fedpc(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    let schedule = gossip_schedule(&federation.split.training_clients, cfg.rounds, cfg.seed)?;
    run_chain(cfg, federation, schedule, Algorithm::Fedpc)
}

/// Ring P2P: the chain visits clients in ascending id order every round.
pub fn run_ring(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    let schedule = ring_schedule(&federation.split.training_clients, cfg.rounds)?;
    run_chain(cfg, federation, schedule, Algorithm::Ring)
}

/// Line topology: one ring round.
pub fn run_line(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    let schedule = line_schedule(&federation.split.training_clients)?;
    run_chain(cfg, federation, schedule, Algorithm::Line)
}

fn run_chain(
    cfg: &RunConfig,
    federation: &Federation,
    schedule: Schedule,
    algorithm: Algorithm,
) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg
        .model
        .resolve(federation.feature_dim, federation.classes)?;
    let omega0 = initial_model(&spec, cfg.model.init, cfg.seed)?;

    let mut token: ParamVector = omega0.clone();
    let mut personalized: BTreeMap<usize, ClientState> = BTreeMap::new();
    let mut sessions = Vec::with_capacity(schedule.events.len());
    let mut rounds = Vec::with_capacity(schedule.rounds);

    for (k, event) in schedule.events.iter().enumerate() {
        let data = federation.client(event.receiver).ok_or_else(|| {
            Error::config(format!("schedule names unknown client {}", event.receiver))
        })?;
        // The first receiver starts from omega_0 with no prior client to stay close to.
        let loss = match event.sender {
            Sender::Source => LossConfig {
                mu: 0.0,
                ..cfg.loss
            },
            Sender::Client(_) => cfg.loss,
        };
        let opts = LocalTraining {
            epochs: cfg.local_epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.lr.learning_rate(event.round),
            loss,
        };
        let mut rng = rng_for(
            cfg.seed,
            &[stream::LOCAL_SHUFFLE, event.round as u64, event.step as u64],
        );
        let anchor = token;
        let out = train_local(&anchor, &anchor, &data.train, &opts, &mut rng)?;
        sessions.push(SessionRecord {
            round: event.round,
            step: event.step,
            client_id: event.receiver,
            sender: event.sender,
            learning_rate: opts.learning_rate,
            steps: out.steps,
            nll: out.nll,
            proximal: out.proximal,
            anchor_digest: anchor.digest(),
            model_digest: out.model.digest(),
        });
        personalized.insert(
            event.receiver,
            ClientState {
                client_id: event.receiver,
                model: out.model.clone(),
                received_from: event.sender,
                round: event.round,
            },
        );
        token = out.model;

        let round_done = schedule
            .events
            .get(k + 1)
            .is_none_or(|next| next.round != event.round);
        if round_done {
            let models: BTreeMap<usize, ParamVector> = personalized
                .iter()
                .map(|(&id, s)| (id, s.model.clone()))
                .collect();
            rounds.push(evaluate_round(
                event.round,
                ModelView::Personal(&models),
                federation,
                cfg,
            )?);
        }
    }

    let new_clients: Vec<_> = federation.test_clients().collect();
    let metric_iii = metric_iii(
        &token,
        &new_clients,
        cfg.personalization_steps,
        cfg.personalization_lr,
    )?;
    let ledger = build_ledger(CommPattern::PeerToPeer(&schedule), &spec);
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
        schedule: Some(schedule),
        personalized,
        global: None,
        initial_model: omega0,
        evaluation_model: token,
    })
}
