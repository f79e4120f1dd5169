//! Sweep recipes: an ordinary scenario config plus four sweep keys.
//!
//! ```text
//! include = common.conf
//! sweep_axis = node_count
//! sweep_values = 10, 20, 30, 40, 50
//! protocols = rlpr, rarp_lite, aodv
//! metrics = control_overhead, routing_overhead
//! ```
//!
//! `metrics` only picks what the console summary shows; every metric is
//! written to disk regardless.

use anyhow::{anyhow, bail, Context, Result};
use rlpr_sim::config::{load_settings, ScenarioConfig};
use rlpr_sim::metrics::Metric;
use rlpr_sim::protocol::ProtocolKind;
use rlpr_sim::sweep::SweepSpec;
use std::path::{Path, PathBuf};

/// Directory holding the recipes that ship with the crate.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes")
}

/// Names of the bundled recipes, sorted.
pub fn bundled_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(bundled_dir())
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let p = e.path();
            let stem = p.file_stem()?.to_str()?.to_string();
            (p.extension()? == "recipe").then_some(stem)
        })
        .collect();
    names.sort();
    names
}

/// Accepts a path, or the bare name of a bundled recipe.
pub fn resolve(arg: &str) -> Result<PathBuf> {
    let p = PathBuf::from(arg);
    if p.is_file() {
        return Ok(p);
    }
    let bundled = bundled_dir().join(format!("{arg}.recipe"));
    if bundled.is_file() {
        return Ok(bundled);
    }
    bail!("no recipe file `{arg}` and no bundled recipe of that name (bundled: {})", bundled_names().join(", "))
}

#[derive(Debug, Clone)]
pub struct Recipe {
    pub name: String,
    pub base: ScenarioConfig,
    pub spec: SweepSpec,
    pub metrics: Vec<Metric>,
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_protocols(v: &str) -> Result<Vec<ProtocolKind>> {
    let ps: Vec<ProtocolKind> = split_list(v).map(|s| s.parse().map_err(|e: String| anyhow!(e))).collect::<Result<_>>()?;
    if ps.is_empty() {
        bail!("empty protocol list");
    }
    Ok(ps)
}

impl Recipe {
    pub fn load(path: &Path) -> Result<Recipe> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("recipe path {} has no file name", path.display()))?
            .to_string();
        let settings = load_settings(path)?;
        let mut base = ScenarioConfig::default();
        let mut axis = None;
        let mut values = None;
        let mut protocols = ProtocolKind::ALL.to_vec();
        let mut metrics = vec![Metric::ControlOverhead, Metric::Lifetime, Metric::SearchSuccessRate];
        for s in &settings {
            let at = || format!("{}:{}", s.origin, s.line);
            match s.key.as_str() {
                "sweep_axis" => axis = Some(s.value.clone()),
                "sweep_values" => {
                    let v: Vec<f64> = split_list(&s.value)
                        .map(|x| x.parse::<f64>().with_context(|| format!("{}: bad sweep value `{x}`", at())))
                        .collect::<Result<_>>()?;
                    values = Some(v);
                }
                "protocols" => protocols = parse_protocols(&s.value).with_context(at)?,
                "metrics" => {
                    metrics = split_list(&s.value)
                        .map(|x| x.parse::<Metric>().map_err(|e| anyhow!("{}: {e}", at())))
                        .collect::<Result<_>>()?;
                }
                _ => base.set(&s.key, &s.value).with_context(at)?,
            }
        }
        let axis = axis.ok_or_else(|| anyhow!("recipe {name} lacks `sweep_axis`"))?;
        if !ScenarioConfig::KEYS.contains(&axis.as_str()) {
            bail!("recipe {name}: sweep_axis `{axis}` is not a config key");
        }
        let values = values.filter(|v| !v.is_empty()).ok_or_else(|| anyhow!("recipe {name} lacks `sweep_values`"))?;
        base.validate()?;
        let seeds = base.seeds.0.clone();
        let spec = SweepSpec { axis, values, protocols, seeds };
        // Every sweep point must be a valid scenario, not just the base.
        for &v in &spec.values {
            for &p in &spec.protocols {
                rlpr_sim::sweep::point_config(&base, &spec.axis, v, p)
                    .with_context(|| format!("recipe {name}: {}={v}", spec.axis))?;
            }
        }
        Ok(Recipe { name, base, spec, metrics })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn recipe_keys_are_split_from_config() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "base.conf", "seeds = 1..3\nsim_duration = 60\n");
        let p = write(
            d.path(),
            "mini.recipe",
            "include = base.conf\nsweep_axis = pause_time\nsweep_values = 0, 30\nprotocols = rlpr, aodv\nmetrics = lifetime\n",
        );
        let r = Recipe::load(&p).unwrap();
        assert_eq!(r.name, "mini");
        assert_eq!(r.base.sim_duration, 60.0);
        assert_eq!(r.spec.seeds, vec![1, 2, 3]);
        assert_eq!(r.spec.values, vec![0.0, 30.0]);
        assert_eq!(r.spec.protocols, vec![ProtocolKind::Rlpr, ProtocolKind::Aodv]);
        assert_eq!(r.metrics, vec![Metric::Lifetime]);
    }

    #[test]
    fn bad_recipes_are_explained() {
        let d = tempfile::tempdir().unwrap();
        let no_axis = write(d.path(), "a.recipe", "sweep_values = 1\n");
        assert!(Recipe::load(&no_axis).unwrap_err().to_string().contains("sweep_axis"));
        let bad_axis = write(d.path(), "b.recipe", "sweep_axis = nodes\nsweep_values = 1\n");
        assert!(Recipe::load(&bad_axis).unwrap_err().to_string().contains("nodes"));
        let bad_point = write(d.path(), "c.recipe", "node_count = 10\nsweep_axis = source_count\nsweep_values = 1, 10\n");
        assert!(format!("{:#}", Recipe::load(&bad_point).unwrap_err()).contains("source_count"));
        let bad_metric = write(d.path(), "d.recipe", "sweep_axis = node_count\nsweep_values = 10\nmetrics = speed\n");
        assert!(Recipe::load(&bad_metric).unwrap_err().to_string().contains("speed"));
    }
}
