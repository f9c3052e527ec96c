use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ModelSpec;
use crate::topology::Schedule;

/// Transmitted parameters are accounted as 32-bit floats.
pub const WIRE_BYTES_PER_SCALAR: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundComm {
    pub round: usize,
    pub client_uplinks: u64,
    pub server_downlinks: u64,
    pub p2p_transfers: u64,
}

impl RoundComm {
    pub fn transfers(&self) -> u64 {
        self.client_uplinks + self.server_downlinks + self.p2p_transfers
    }
}

/// Per-round model transmissions and their byte cost. Only trainable
/// scalars travel; the frozen prefix is shared by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub payload_bytes_per_model: u64,
    pub full_model_bytes: u64,
    pub rounds: Vec<RoundComm>,
}

impl CommLedger {
    pub fn total_transfers(&self) -> u64 {
        self.rounds.iter().map(RoundComm::transfers).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_transfers() * self.payload_bytes_per_model
    }

    pub fn round_bytes(&self, round: usize) -> u64 {
        self.rounds
            .get(round)
            .map_or(0, |r| r.transfers() * self.payload_bytes_per_model)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "round",
            "client_uplinks",
            "server_downlinks",
            "p2p_transfers",
            "payload_bytes_per_model",
            "bytes",
        ])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.client_uplinks.to_string(),
                r.server_downlinks.to_string(),
                r.p2p_transfers.to_string(),
                self.payload_bytes_per_model.to_string(),
                (r.transfers() * self.payload_bytes_per_model).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<ledger csv>", e))?;
        Ok(())
    }
}

/// Communication pattern of a finished run.
#[derive(Debug, Clone, Copy)]
pub enum CommPattern<'a> {
    /// Every schedule event moves one model between peers.
    PeerToPeer(&'a Schedule),
    /// Each round every client uploads once and the server sends one
    /// model to each client.
    ClientServer { rounds: usize, clients: usize },
    /// No communication at all.
    Isolated { rounds: usize },
}

pub fn build_ledger(pattern: CommPattern<'_>, spec: &ModelSpec) -> CommLedger {
    let payload_bytes_per_model = spec.trainable_len() as u64 * WIRE_BYTES_PER_SCALAR;
    let full_model_bytes = spec.total_params() as u64 * WIRE_BYTES_PER_SCALAR;
    let rounds = match pattern {
        CommPattern::PeerToPeer(schedule) => schedule
            .round_counts()
            .into_iter()
            .enumerate()
            .map(|(round, n)| RoundComm {
                round,
                client_uplinks: 0,
                server_downlinks: 0,
                p2p_transfers: n as u64,
            })
            .collect(),
        CommPattern::ClientServer { rounds, clients } => (0..rounds)
            .map(|round| RoundComm {
                round,
                client_uplinks: clients as u64,
                server_downlinks: clients as u64,
                p2p_transfers: 0,
            })
            .collect(),
        CommPattern::Isolated { rounds } => (0..rounds)
            .map(|round| RoundComm {
                round,
                client_uplinks: 0,
                server_downlinks: 0,
                p2p_transfers: 0,
            })
            .collect(),
    };
    CommLedger {
        payload_bytes_per_model,
        full_model_bytes,
        rounds,
    }
}
