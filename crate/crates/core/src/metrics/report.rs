use super::ledger::MetricLedger;
use super::stats::{summarize, Summary};
use crate::protocol::ProtocolKind;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("protocols disagree on the sweep axis: {protocol} has {got:?}, expected {expected:?}")]
    MismatchedAxes { protocol: ProtocolKind, got: Vec<f64>, expected: Vec<f64> },
    #[error("no runs to report")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// All control transmissions including periodic HELLOs.
    ControlOverhead,
    /// Control transmissions other than periodic HELLOs.
    RoutingOverhead,
    ZoomOut,
    Lifetime,
    SearchSuccessRate,
    DiscoveryLatency,
    DiscoveryMessages,
    DiscoveryFailures,
    Delivered,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::ControlOverhead,
        Metric::RoutingOverhead,
        Metric::ZoomOut,
        Metric::Lifetime,
        Metric::SearchSuccessRate,
        Metric::DiscoveryLatency,
        Metric::DiscoveryMessages,
        Metric::DiscoveryFailures,
        Metric::Delivered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ControlOverhead => "control_overhead",
            Metric::RoutingOverhead => "routing_overhead",
            Metric::ZoomOut => "zoom_out",
            Metric::Lifetime => "lifetime",
            Metric::SearchSuccessRate => "search_success_rate",
            Metric::DiscoveryLatency => "discovery_latency",
            Metric::DiscoveryMessages => "discovery_messages",
            Metric::DiscoveryFailures => "discovery_failures",
            Metric::Delivered => "delivered",
        }
    }

    pub fn extract(self, l: &MetricLedger) -> Option<f64> {
        match self {
            Metric::ControlOverhead => Some(l.control_overhead() as f64),
            Metric::RoutingOverhead => Some(l.routing_overhead() as f64),
            Metric::ZoomOut => Some(l.zoom_out_count() as f64),
            Metric::Lifetime => Some(l.network_lifetime()),
            Metric::SearchSuccessRate => l.search_success_rate(),
            Metric::DiscoveryLatency => l.discovery_latency(),
            Metric::DiscoveryMessages => l.discovery_messages(),
            Metric::DiscoveryFailures => Some(l.failed_discoveries() as f64),
            Metric::Delivered => Some(l.delivered as f64),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// One finished run, placed on the sweep axis.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub protocol: ProtocolKind,
    pub value: f64,
    pub seed: u64,
    pub ledger: MetricLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub metric: Metric,
    pub protocol: ProtocolKind,
    pub value: f64,
    /// `None` when no run at this point produced the metric.
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub axis: String,
    pub rows: Vec<Row>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn rows_for(&self, metric: Metric) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn mean(&self, metric: Metric, protocol: ProtocolKind, value: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.protocol == protocol && r.value == value)
            .and_then(|r| r.summary.map(|s| s.mean))
    }

    pub fn axis_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.value) {
                v.push(r.value);
            }
        }
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn protocols(&self) -> Vec<ProtocolKind> {
        let set: BTreeSet<ProtocolKind> = self.rows.iter().map(|r| r.protocol).collect();
        ProtocolKind::ALL.into_iter().filter(|p| set.contains(p)).collect()
    }
}

/// Groups runs by (protocol, axis value) and summarizes every metric.
pub fn aggregate(axis: &str, results: &[RunResult]) -> Result<Report, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: BTreeMap<ProtocolKind, BTreeMap<u64, Vec<&MetricLedger>>> = BTreeMap::new();
    for r in results {
        groups.entry(r.protocol).or_default().entry(r.value.to_bits()).or_default().push(&r.ledger);
    }
    let axis_of = |g: &BTreeMap<u64, Vec<&MetricLedger>>| {
        let mut v: Vec<f64> = g.keys().map(|b| f64::from_bits(*b)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let expected = axis_of(groups.values().next().expect("non-empty"));
    for (p, g) in &groups {
        let got = axis_of(g);
        if got != expected {
            return Err(ReportError::MismatchedAxes { protocol: *p, got, expected });
        }
    }
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        for p in ProtocolKind::ALL {
            let Some(g) = groups.get(&p) else { continue };
            for &value in &expected {
                let ledgers = &g[&value.to_bits()];
                let vals: Vec<f64> = ledgers.iter().filter_map(|l| metric.extract(l)).collect();
                rows.push(Row { metric, protocol: p, value, summary: summarize(&vals) });
            }
        }
    }
    let min_seeds = groups.values().flat_map(|g| g.values().map(Vec::len)).min().unwrap_or(0);
    if min_seeds < 2 {
        warnings.push(format!(
            "only {min_seeds} seed(s) at some sweep point; confidence intervals need at least two and are omitted"
        ));
    }
    Ok(Report { axis: axis.to_string(), rows, warnings })
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Long-format table for one metric. The interval columns are left out
/// entirely when no row has one.
pub fn write_table<W: Write>(report: &Report, metric: Metric, w: W) -> Result<(), ReportError> {
    let rows: Vec<&Row> = report.rows_for(metric).collect();
    let with_ci = rows.iter().any(|r| r.summary.is_some_and(|s| s.ci95.is_some()));
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["metric".to_string(), "protocol".into(), report.axis.clone(), "n".into(), "mean".into()];
    header.extend(["min".into(), "max".into()]);
    if with_ci {
        header.extend(["ci95_half".into(), "ci95_low".into(), "ci95_high".into()]);
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![metric.as_str().to_string(), r.protocol.as_str().into(), fmt(r.value)];
        match r.summary {
            Some(s) => {
                rec.extend([s.n.to_string(), fmt(s.mean), fmt(s.min), fmt(s.max)]);
                if with_ci {
                    match s.ci95 {
                        Some(h) => rec.extend([fmt(h), fmt(s.mean - h), fmt(s.mean + h)]),
                        None => rec.extend([String::new(), String::new(), String::new()]),
                    }
                }
            }
            None => {
                rec.extend(["0".into(), String::new(), String::new(), String::new()]);
                if with_ci {
                    rec.extend([String::new(), String::new(), String::new()]);
                }
            }
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Wide-format plot series: one line per axis value, mean and interval
/// half-width per protocol.
pub fn write_series<W: Write>(report: &Report, metric: Metric, w: W) -> Result<(), ReportError> {
    let protocols = report.protocols();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![report.axis.clone()];
    for p in &protocols {
        header.push(format!("{}_mean", p.as_str()));
        header.push(format!("{}_ci95", p.as_str()));
    }
    out.write_record(&header)?;
    for value in report.axis_values() {
        let mut rec = vec![fmt(value)];
        for p in &protocols {
            let s = report
                .rows
                .iter()
                .find(|r| r.metric == metric && r.protocol == *p && r.value == value)
                .and_then(|r| r.summary);
            rec.push(s.map(|s| fmt(s.mean)).unwrap_or_default());
            rec.push(s.and_then(|s| s.ci95).map(fmt).unwrap_or_default());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
