use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::FederationConfig;
use crate::error::{Error, Result};
use crate::evaluation::MetricIIMode;
use crate::numerics::{LearningSchedule, LossConfig, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fedpc,
    Ring,
    Line,
    Independent,
    Fedavg,
    Fedprox,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Fedpc,
        Algorithm::Ring,
        Algorithm::Line,
        Algorithm::Independent,
        Algorithm::Fedavg,
        Algorithm::Fedprox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fedpc => "fedpc",
            Algorithm::Ring => "ring",
            Algorithm::Line => "line",
            Algorithm::Independent => "independent",
            Algorithm::Fedavg => "fedavg",
            Algorithm::Fedprox => "fedprox",
        }
    }

    pub fn is_peer_to_peer(self) -> bool {
        matches!(self, Algorithm::Fedpc | Algorithm::Ring | Algorithm::Line)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown algorithm {s:?}; expected one of fedpc, ring, line, independent, fedavg, fedprox"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Frozen layers come from a short training run on an unrelated
    /// synthetic task; trainable layers are freshly initialized.
    #[default]
    Pretrained,
    /// Plain seeded Glorot initialization for every layer.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden widths; input width and class count come from the data.
    pub hidden: Vec<usize>,
    pub frozen_layers: usize,
    #[serde(default)]
    pub init: InitMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![32, 32],
            frozen_layers: 1,
            init: InitMode::Pretrained,
        }
    }
}

impl ModelConfig {
    pub fn resolve(&self, input_dim: usize, classes: usize) -> Result<Arc<ModelSpec>> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend(&self.hidden);
        sizes.push(classes);
        Ok(Arc::new(ModelSpec::new(sizes, self.frozen_layers)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(FederationConfig),
    Ingest { path: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(FederationConfig::default())
    }
}

fn default_personalization_lr() -> f64 {
    1e-3
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub lr: LearningSchedule,
    pub model: ModelConfig,
    pub data: DataSource,
    pub seed: u64,
    pub personalization_steps: usize,
    #[serde(default = "default_personalization_lr")]
    pub personalization_lr: f64,
    #[serde(default)]
    pub metric_ii_mode: MetricIIMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Fedpc,
            rounds: 5,
            local_epochs: 5,
            batch_size: 128,
            loss: LossConfig::default(),
            lr: LearningSchedule::default(),
            model: ModelConfig::default(),
            data: DataSource::default(),
            seed: 0,
            personalization_steps: 5,
            personalization_lr: default_personalization_lr(),
            metric_ii_mode: MetricIIMode::AllPairs,
        }
    }
}

impl RunConfig {
    /// Rounds actually executed; line topology always runs one.
    pub fn effective_rounds(&self) -> usize {
        match self.algorithm {
            Algorithm::Line => 1,
            _ => self.rounds,
        }
    }

    /// Checks every field that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be positive"));
        }
        if self.local_epochs == 0 {
            return Err(Error::config("local_epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        self.loss.validate()?;
        self.lr.validate()?;
        if !(self.personalization_lr > 0.0 && self.personalization_lr.is_finite()) {
            return Err(Error::config("personalization_lr must be positive"));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if self.model.frozen_layers > self.model.hidden.len() {
            return Err(Error::config(format!(
                "frozen_layers = {} leaves no trainable layer in a {}-layer model",
                self.model.frozen_layers,
                self.model.hidden.len() + 1
            )));
        }
        if let DataSource::Synthetic(fed) = &self.data {
            fed.validate()?;
        }
        Ok(())
    }
}
