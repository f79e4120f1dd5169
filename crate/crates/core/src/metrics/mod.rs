//! Metric extraction from traces, cross-seed statistics and report output.

pub mod ledger;
pub mod report;
pub mod stats;

pub use ledger::{DiscoveryRecord, MetricLedger};
pub use report::{aggregate, write_series, write_table, Metric, Report, ReportError, Row, RunResult};
pub use stats::{summarize, Summary};
