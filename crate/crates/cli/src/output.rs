use anyhow::{Context, Result};
use rlpr_sim::metrics::{write_series, write_table, Metric, Report, RunResult};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;

/// Writes `tables/<metric>.csv` (long format) and `series/<metric>.csv`
/// (one column pair per protocol) for every metric.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let tables = dir.join("tables");
    let series = dir.join("series");
    fs::create_dir_all(&tables)?;
    fs::create_dir_all(&series)?;
    for m in Metric::ALL {
        let name = format!("{}.csv", m.as_str());
        let f = File::create(tables.join(&name)).with_context(|| format!("creating {}", tables.join(&name).display()))?;
        write_table(report, m, f)?;
        write_series(report, m, File::create(series.join(&name))?)?;
    }
    Ok(())
}

/// One line per finished run with every metric, for ad hoc analysis.
pub fn write_runs(path: &Path, axis: &str, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["protocol".to_string(), axis.to_string(), "seed".into()];
    header.extend(Metric::ALL.iter().map(|m| m.as_str().to_string()));
    w.write_record(&header)?;
    for r in runs {
        let mut rec = vec![r.protocol.as_str().to_string(), r.value.to_string(), r.seed.to_string()];
        rec.extend(Metric::ALL.iter().map(|m| m.extract(&r.ledger).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Console table: one row per axis value, `mean ± ci` per protocol.
pub fn summary(report: &Report, metrics: &[Metric]) -> String {
    let protocols = report.protocols();
    let mut s = String::new();
    for &m in metrics {
        let _ = writeln!(s, "\n{}", m.as_str());
        let _ = write!(s, "{:>14}", report.axis);
        for p in &protocols {
            let _ = write!(s, " {:>24}", p.as_str());
        }
        s.push('\n');
        for v in report.axis_values() {
            let _ = write!(s, "{v:>14}");
            for p in &protocols {
                let cell = report
                    .rows
                    .iter()
                    .find(|r| r.metric == m && r.protocol == *p && r.value == v)
                    .and_then(|r| r.summary)
                    .map(|x| match x.ci95 {
                        Some(h) => format!("{:.3} ± {:.3}", x.mean, h),
                        None => format!("{:.3}", x.mean),
                    })
                    .unwrap_or_else(|| "-".into());
                let _ = write!(s, " {cell:>24}");
            }
            s.push('\n');
        }
    }
    s
}
