//! Synthetic non-IID federations, the two-level train/test split, and the
//! CSV feature-table format.

mod generate;
mod split;
mod table;

pub use generate::{generate_federation, generate_pools, FederationConfig};
pub use split::{double_split, split_clients, split_samples, test_count};
pub use table::{ingest_feature_table, write_feature_table};

use crate::error::{Error, Result};
use crate::numerics::Samples;

/// Samples owned by one client before the local split.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientPool {
    pub client_id: usize,
    pub vehicle_id: usize,
    pub samples: Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub vehicle_id: usize,
    pub train: Samples,
    pub test: Samples,
}

impl ClientDataset {
    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FederationSplit {
    pub training_clients: Vec<usize>,
    pub test_clients: Vec<usize>,
}

/// All client datasets plus the client-level split.
#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    pub clients: Vec<ClientDataset>,
    pub split: FederationSplit,
    pub classes: usize,
    pub feature_dim: usize,
}

impl Federation {
    /// Assemble a federation from already locally-split datasets, drawing the
    /// client-level split from `seed`.
    pub fn from_datasets(clients: Vec<ClientDataset>, seed: u64) -> Result<Self> {
        let first = clients
            .first()
            .ok_or_else(|| Error::config("a federation needs at least two clients"))?;
        let feature_dim = first.train.dim();
        let mut classes = 0;
        for c in &clients {
            if c.train.dim() != feature_dim || c.test.dim() != feature_dim {
                return Err(Error::config(format!(
                    "client {} has feature width {} but expected {feature_dim}",
                    c.client_id,
                    c.train.dim()
                )));
            }
            let top = c.train.labels().iter().chain(c.test.labels()).max();
            classes = classes.max(top.map_or(0, |m| m + 1));
        }
        let ids: Vec<usize> = clients.iter().map(|c| c.client_id).collect();
        let split = split_clients(&ids, seed)?;
        Ok(Federation {
            clients,
            split,
            classes,
            feature_dim,
        })
    }

    pub fn client(&self, id: usize) -> Option<&ClientDataset> {
        self.clients.iter().find(|c| c.client_id == id)
    }

    pub fn training(&self) -> impl Iterator<Item = &ClientDataset> {
        self.split
            .training_clients
            .iter()
            .filter_map(move |&id| self.client(id))
    }

    pub fn test_clients(&self) -> impl Iterator<Item = &ClientDataset> {
        self.split
            .test_clients
            .iter()
            .filter_map(move |&id| self.client(id))
    }
}
