//! The three evaluation metrics, the communication ledger, and the report
//! that carries them.

mod ledger;
mod metrics;
mod report;

pub use ledger::{build_ledger, CommLedger, CommPattern, RoundComm, WIRE_BYTES_PER_SCALAR};
pub use metrics::{
    accuracy, metric_i, metric_ii, metric_iii, ClientAccuracy, ClientCurve, MetricI, MetricII,
    MetricIIMode, ModelView, NewClientCurve,
};
pub use report::{MetricsReport, RoundMetrics, SCHEMA_VERSION};
