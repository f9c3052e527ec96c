use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{CommLedger, MetricI, MetricII, NewClientCurve};

/// Bumped whenever the JSON layout of [`MetricsReport`] changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub metric_i: MetricI,
    pub metric_ii: MetricII,
    /// Training clients that have not yet received the model.
    pub unvisited_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub algorithm: String,
    pub rounds: Vec<RoundMetrics>,
    pub metric_iii: NewClientCurve,
    pub ledger: CommLedger,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn final_round(&self) -> Option<&RoundMetrics> {
        self.rounds.last()
    }

    /// One row per round: mean metric (i), mean metric (ii), unvisited count.
    pub fn write_rounds_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "round",
            "metric_i_mean",
            "metric_ii_mean",
            "metric_ii_same_vehicle",
            "metric_ii_cross_vehicle",
            "unvisited_count",
        ])?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                fmt(r.metric_i.mean),
                fmt(r.metric_ii.mean),
                fmt(r.metric_ii.same_vehicle_mean),
                fmt(r.metric_ii.cross_vehicle_mean),
                r.unvisited_count.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
        Ok(())
    }
}
