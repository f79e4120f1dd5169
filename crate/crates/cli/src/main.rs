mod output;
mod recipe;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use recipe::Recipe;
use rlpr_sim::config::{ScenarioConfig, SeedList};
use rlpr_sim::engine::Trace;
use rlpr_sim::metrics::{aggregate, Metric, MetricLedger, RunResult};
use rlpr_sim::protocol::ProtocolKind;
use rlpr_sim::scenario::Layout;
use rlpr_sim::sweep::{run_once, run_sweep_each, trace_path};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rlpr", version, about = "Packet-level FANET routing simulator: RLPR, AODV and RARP-lite")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed list overriding the file, e.g. `1..5` or `3,7`.
    #[arg(long)]
    seeds: Option<SeedList>,
    /// Parallel runs; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Root of everything written. Outputs land under `<out-dir>/<name>/`.
    #[arg(long, env = "RLPR_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Restrict to these protocols (comma separated).
    #[arg(long)]
    protocol: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config for each seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a recipe: one config axis swept across protocols and seeds.
    Sweep {
        /// Recipe file, or the name of a bundled recipe.
        #[arg(long)]
        recipe: String,
        #[command(flatten)]
        common: Common,
        /// Also persist every trace under `<out-dir>/<recipe>/traces/`.
        #[arg(long)]
        keep_traces: bool,
    },
    /// Recompute metric tables from persisted traces.
    Report {
        /// Directory searched recursively for `*.ndjson` traces.
        traces: PathBuf,
        /// Where tables go; defaults to the parent of the trace directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a config or recipe and print the effective settings.
    Validate {
        #[arg(long, conflicts_with = "recipe", required_unless_present = "recipe")]
        config: Option<PathBuf>,
        #[arg(long)]
        recipe: Option<String>,
    },
    /// List the bundled recipes.
    Recipes,
}

fn workers(c: &Common) -> usize {
    c.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

fn protocols(c: &Common, fallback: &[ProtocolKind]) -> Result<Vec<ProtocolKind>> {
    match &c.protocol {
        Some(s) => recipe::parse_protocols(s),
        None => Ok(fallback.to_vec()),
    }
}

fn stem(p: &Path) -> Result<String> {
    p.file_stem().and_then(|s| s.to_str()).map(str::to_string).ok_or_else(|| anyhow!("{} has no file name", p.display()))
}

fn cmd_run(config: &Path, common: &Common) -> Result<bool> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = &common.seeds {
        cfg.seeds = s.clone();
    }
    let protos = protocols(common, &[cfg.protocol])?;
    let dir = common.out_dir.join(stem(config)?);
    let traces = dir.join("traces");
    let axis = "node_count";
    let mut results = Vec::new();
    let mut ok = true;
    for p in protos {
        let mut c = cfg.clone();
        c.protocol = p;
        for &seed in &cfg.seeds.0 {
            match run_once(&c, &Layout::Random, seed) {
                Ok(trace) => {
                    trace.save(&trace_path(&traces, p, axis, c.node_count as f64, seed))?;
                    let ledger = MetricLedger::from_trace(&trace);
                    println!(
                        "{p} seed {seed}: control {} routing {} lifetime {:.1} s search rate {} delivered {}",
                        ledger.control_overhead(),
                        ledger.routing_overhead(),
                        ledger.network_lifetime(),
                        ledger.search_success_rate().map_or("-".into(), |v| format!("{v:.2}/s")),
                        ledger.delivered,
                    );
                    results.push(RunResult { protocol: p, value: c.node_count as f64, seed, ledger });
                }
                Err(e) => {
                    eprintln!("{p} seed {seed}: {e}");
                    ok = false;
                }
            }
        }
    }
    finish(&dir, axis, &results, &[Metric::ControlOverhead, Metric::Lifetime, Metric::SearchSuccessRate])?;
    Ok(ok)
}

fn finish(dir: &Path, axis: &str, results: &[RunResult], metrics: &[Metric]) -> Result<()> {
    if results.is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(dir)?;
    output::write_runs(&dir.join("runs.csv"), axis, results)?;
    let report = aggregate(axis, results)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    output::write_report(dir, &report)?;
    print!("{}", output::summary(&report, metrics));
    println!("\nwrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(name: &str, common: &Common, keep_traces: bool) -> Result<bool> {
    let mut r = Recipe::load(&recipe::resolve(name)?)?;
    if let Some(s) = &common.seeds {
        r.spec.seeds = s.0.clone();
    }
    r.spec.protocols = protocols(common, &r.spec.protocols)?;
    let dir = common.out_dir.join(&r.name);
    let traces = dir.join("traces");
    let n = workers(common);
    eprintln!("{}: {} runs on {n} worker(s)", r.name, r.spec.run_count());
    let outcomes = run_sweep_each(&r.base, &r.spec, n, keep_traces.then_some(traces.as_path()))?;
    let mut results = Vec::new();
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(x) => results.push(x),
            Err(e) => {
                eprintln!("run failed: {e}");
                failed += 1;
            }
        }
    }
    finish(&dir, &r.spec.axis, &results, &r.metrics)?;
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; tables cover the rest", r.spec.run_count());
    }
    Ok(failed == 0)
}

/// Recovers `(axis, value)` from a `<axis>=<value>` directory in the path.
fn axis_of(path: &Path) -> Option<(String, f64)> {
    path.ancestors().skip(1).find_map(|a| {
        let (k, v) = a.file_name()?.to_str()?.split_once('=')?;
        Some((k.to_string(), v.parse().ok()?))
    })
}

fn cmd_report(traces: &Path, out_dir: Option<&Path>) -> Result<bool> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(traces)
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .ndjson traces under {}", traces.display());
    }
    let mut axis: Option<String> = None;
    let mut results = Vec::new();
    for f in &files {
        let trace = Trace::load(f).with_context(|| format!("reading {}", f.display()))?;
        let (a, value) = axis_of(f).unwrap_or_else(|| ("node_count".into(), trace.meta.node_count as f64));
        match &axis {
            None => axis = Some(a),
            Some(prev) if *prev != a => bail!("traces mix sweep axes `{prev}` and `{a}`"),
            _ => {}
        }
        results.push(RunResult { protocol: trace.meta.protocol, value, seed: trace.meta.seed, ledger: MetricLedger::from_trace(&trace) });
    }
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => traces.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    eprintln!("{} traces", files.len());
    finish(&dir, axis.as_deref().unwrap_or("node_count"), &results, &[Metric::ControlOverhead, Metric::Lifetime, Metric::SearchSuccessRate])?;
    Ok(true)
}

fn cmd_validate(config: Option<&Path>, recipe: Option<&str>) -> Result<bool> {
    if let Some(c) = config {
        let cfg = ScenarioConfig::load(c)?;
        print!("{}", cfg.to_kv());
        eprintln!("{}: ok", c.display());
    } else if let Some(name) = recipe {
        let r = Recipe::load(&recipe::resolve(name)?)?;
        print!("{}", r.base.to_kv());
        let values: Vec<String> = r.spec.values.iter().map(f64::to_string).collect();
        let protos: Vec<&str> = r.spec.protocols.iter().map(|p| p.as_str()).collect();
        println!("sweep_axis = {}\nsweep_values = {}\nprotocols = {}", r.spec.axis, values.join(", "), protos.join(", "));
        eprintln!("{}: ok, {} runs", r.name, r.spec.run_count());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Run { config, common } => cmd_run(config, common),
        Command::Sweep { recipe, common, keep_traces } => cmd_sweep(recipe, common, *keep_traces),
        Command::Report { traces, out_dir } => cmd_report(traces, out_dir.as_deref()),
        Command::Validate { config, recipe } => cmd_validate(config.as_deref(), recipe.as_deref()),
        Command::Recipes => {
            for n in recipe::bundled_names() {
                println!("{n}");
            }
            Ok(true)
        }
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
