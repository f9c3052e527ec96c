//! The learning schemes: FedPC (gossip chain), ring and line P2P,
//! independent learning, FedAvg, and FedProx.

mod c2s;
mod config;
mod independent;
mod local;
mod p2p;

pub use c2s::{fedavg_aggregate, run_fedavg, run_fedprox};
pub use config::{Algorithm, DataSource, InitMode, ModelConfig, RunConfig};
pub use independent::run_independent;
pub use local::{train_local, LocalOutcome, LocalTraining};
pub use p2p::{run_fedpc, run_line, run_ring};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{
    generate_federation, generate_pools, ingest_feature_table, Federation, FederationConfig,
};
use crate::error::Result;
use crate::evaluation::{metric_i, metric_ii, MetricsReport, ModelView, RoundMetrics};
use crate::numerics::{LossConfig, ModelSpec, ParamVector};
use crate::rng::{derive_seed, rng_for, stream};
use crate::topology::{Schedule, Sender};

/// A client's personalized model and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: usize,
    pub model: ParamVector,
    pub received_from: Sender,
    pub round: usize,
}

/// One local training session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub round: usize,
    pub step: usize,
    pub client_id: usize,
    pub sender: Sender,
    pub learning_rate: f64,
    pub steps: usize,
    pub nll: f64,
    pub proximal: f64,
    pub anchor_digest: u64,
    pub model_digest: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub report: MetricsReport,
    pub sessions: Vec<SessionRecord>,
    /// Present for peer-to-peer runs.
    pub schedule: Option<Schedule>,
    /// Latest model held by each visited training client. C2S runs leave
    /// this empty and report `global` instead.
    pub personalized: BTreeMap<usize, ClientState>,
    pub global: Option<ParamVector>,
    pub initial_model: ParamVector,
    /// Model handed to new clients for personalization.
    pub evaluation_model: ParamVector,
}

pub fn build_federation(cfg: &RunConfig) -> Result<Federation> {
    match &cfg.data {
        DataSource::Synthetic(fed) => generate_federation(fed),
        DataSource::Ingest { path } => {
            Federation::from_datasets(ingest_feature_table(path)?, cfg.seed)
        }
    }
}

const PRETRAIN_EPOCHS: usize = 20;
const PRETRAIN_BATCH: usize = 32;
const PRETRAIN_LR: f64 = 1e-2;
const PRETRAIN_SAMPLES_PER_CLASS: usize = 50;

/// Initial model `omega_0`.
///
/// With [`InitMode::Pretrained`] the whole network is first trained on an
/// unrelated synthetic task (its own class means, one cluster) and then
/// every non-frozen layer is re-drawn, leaving a frozen feature extractor.
pub fn initial_model(spec: &Arc<ModelSpec>, init: InitMode, seed: u64) -> Result<ParamVector> {
    let mut rng = rng_for(seed, &[stream::INIT]);
    let mut model = ParamVector::glorot(Arc::clone(spec), &mut rng);
    if init == InitMode::Random || spec.frozen_layers == 0 {
        return Ok(model);
    }
    let generic = FederationConfig {
        num_vehicles: 1,
        drivers_per_vehicle: 2,
        classes: spec.num_classes().max(2),
        feature_dim: spec.input_dim().max(spec.num_classes().max(2)),
        samples_per_client_per_class: PRETRAIN_SAMPLES_PER_CLASS,
        cluster_separation: 1.0,
        driver_dispersion: 0.0,
        class_separation: 4.0,
        noise_sigma: 1.0,
        seed: derive_seed(seed, &[stream::PRETRAIN_DATA]),
    };
    let mut task = generate_pools(&generic)?.swap_remove(0).samples;
    if task.dim() != spec.input_dim() || generic.classes != spec.num_classes() {
        // Degenerate widths (1 class or fewer inputs than classes): fall back
        // to projecting onto the model's shape.
        let dim = spec.input_dim();
        let classes = spec.num_classes();
        let mut fitted = crate::numerics::Samples::empty(dim);
        for i in 0..task.len() {
            fitted.push(&task.row(i)[..dim.min(task.dim())], task.label(i) % classes);
        }
        task = fitted;
    }
    // A full (unfrozen) copy of the spec for pretraining.
    let open = Arc::new(ModelSpec::new(spec.layer_sizes.clone(), 0)?);
    let start = ParamVector::from_values(Arc::clone(&open), model.values().to_vec())?;
    let opts = LocalTraining {
        epochs: PRETRAIN_EPOCHS,
        batch_size: PRETRAIN_BATCH,
        learning_rate: PRETRAIN_LR,
        loss: LossConfig {
            mu: 0.0,
            weight_decay: 0.0,
        },
    };
    let mut shuffle = rng_for(seed, &[stream::PRETRAIN_SHUFFLE]);
    let trained = train_local(&start, &start, &task, &opts, &mut shuffle)?;
    model = ParamVector::from_values(Arc::clone(spec), trained.model.values().to_vec())?;
    model.reinit_from_layer(spec.frozen_layers, &mut rng);
    Ok(model)
}

/// Round metrics (i) and (ii) for the models as they stand.
pub(crate) fn evaluate_round(
    round: usize,
    view: ModelView<'_>,
    federation: &Federation,
    cfg: &RunConfig,
) -> Result<RoundMetrics> {
    let m1 = metric_i(view, federation)?;
    let m2 = metric_ii(
        view,
        federation,
        cfg.metric_ii_mode,
        derive_seed(cfg.seed, &[stream::METRIC_PICK, round as u64]),
    )?;
    Ok(RoundMetrics {
        round,
        unvisited_count: m1.unvisited.len(),
        metric_i: m1,
        metric_ii: m2,
    })
}

/// Build the federation named by `cfg` and run its algorithm.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let federation = build_federation(cfg)?;
    run_on(cfg, &federation)
}

/// Run `cfg`'s algorithm on an already-built federation.
pub fn run_on(cfg: &RunConfig, federation: &Federation) -> Result<RunOutput> {
    match cfg.algorithm {
        Algorithm::Fedpc => run_fedpc(cfg, federation),
        Algorithm::Ring => run_ring(cfg, federation),
        Algorithm::Line => run_line(cfg, federation),
        Algorithm::Independent => run_independent(cfg, federation),
        Algorithm::Fedavg => run_fedavg(cfg, federation),
        Algorithm::Fedprox => run_fedprox(cfg, federation),
    }
}
