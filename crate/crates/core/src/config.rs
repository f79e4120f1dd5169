//! Flat `key = value` scenario configuration.
//!
//! One setting per line, `#` starts a comment, and `include = path` splices
//! another file (resolved relative to the including file) at that point.
//! Later settings override earlier ones. Every key and its default is listed
//! by [`ScenarioConfig::to_kv`].

use crate::engine::TraceLevel;
use crate::phys::{MobilityParams, RadioModel};
use crate::protocol::{ProtocolKind, ProtocolParams};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: expected `key = value`, found `{text}`")]
    Syntax { origin: String, line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("include cycle through {0}")]
    IncludeCycle(PathBuf),
}

/// One `key = value` line with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: String,
    pub line: usize,
}

/// Parses text into settings, following `include` lines relative to `base`.
pub fn parse_settings(text: &str, origin: &str, base: Option<&Path>) -> Result<Vec<Setting>, ConfigError> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    parse_into(text, origin, base, &mut stack, &mut out)?;
    Ok(out)
}

/// Reads a file and its includes.
pub fn load_settings(path: &Path) -> Result<Vec<Setting>, ConfigError> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    load_into(path, &mut stack, &mut out)?;
    Ok(out)
}

fn load_into(path: &Path, stack: &mut Vec<PathBuf>, out: &mut Vec<Setting>) -> Result<(), ConfigError> {
    let canon = path.canonicalize().map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    if stack.contains(&canon) {
        return Err(ConfigError::IncludeCycle(canon));
    }
    let text = std::fs::read_to_string(&canon).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    stack.push(canon.clone());
    let r = parse_into(&text, &path.display().to_string(), canon.parent(), stack, out);
    stack.pop();
    r
}

fn parse_into(
    text: &str,
    origin: &str,
    base: Option<&Path>,
    stack: &mut Vec<PathBuf>,
    out: &mut Vec<Setting>,
) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { origin: origin.to_string(), line: i + 1, text: raw.to_string() });
        };
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { origin: origin.to_string(), line: i + 1, text: raw.to_string() });
        }
        if key == "include" {
            let target = match base {
                Some(b) => b.join(value),
                None => PathBuf::from(value),
            };
            load_into(&target, stack, out)?;
        } else {
            out.push(Setting { key: key.to_string(), value: value.to_string(), origin: origin.to_string(), line: i + 1 });
        }
    }
    Ok(())
}

/// Seed list written as `1..30` (inclusive) or `1, 5, 9`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((a, b)) = s.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad range start `{a}`"))?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end `{b}`"))?;
            if b < a {
                return Err("empty seed range".into());
            }
            return Ok(SeedList((a..=b).collect()));
        }
        let v: Result<Vec<u64>, _> = s.split(',').map(|x| x.trim().parse::<u64>()).collect();
        match v {
            Ok(v) if !v.is_empty() => Ok(SeedList(v)),
            _ => Err("expected `a..b` or a comma-separated list of integers".into()),
        }
    }
}

impl fmt::Display for SeedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let contiguous = v.len() > 2 && v.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous {
            write!(f, "{}..{}", v[0], v[v.len() - 1])
        } else {
            let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            f.write_str(&parts.join(", "))
        }
    }
}

impl FromStr for TraceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(TraceLevel::Full),
            "summary" => Ok(TraceLevel::Summary),
            other => Err(format!("unknown trace level `{other}` (expected full or summary)")),
        }
    }
}

impl fmt::Display for TraceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceLevel::Full => "full",
            TraceLevel::Summary => "summary",
        })
    }
}

macro_rules! scenario_config {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty = $default:expr ),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct ScenarioConfig {
            $( $(#[$doc])* pub $name: $ty, )*
        }

        impl Default for ScenarioConfig {
            fn default() -> Self {
                Self { $( $name: $default, )* }
            }
        }

        impl ScenarioConfig {
            pub const KEYS: &'static [&'static str] = &[ $( stringify!($name), )* ];

            /// Applies one setting without validating cross-field constraints.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                match key {
                    $( stringify!($name) => {
                        self.$name = value.parse::<$ty>().map_err(|e| ConfigError::InvalidValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            reason: e.to_string(),
                        })?;
                    } )*
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
                Ok(())
            }

            /// Every key with its current value, one per line.
            pub fn to_kv(&self) -> String {
                let mut s = String::new();
                $( s.push_str(&format!("{} = {}\n", stringify!($name), self.$name)); )*
                s
            }
        }
    };
}

scenario_config! {
    protocol: ProtocolKind = ProtocolKind::Rlpr,
    node_count: usize = 30,
    /// Mobile nodes 1..=source_count generate CBR traffic toward node 0.
    source_count: usize = 1,
    area_width: f64 = 1000.0,
    area_height: f64 = 1000.0,
    /// Constant flight altitude; all distances are horizontal.
    altitude: f64 = 100.0,
    /// Fixed position of the destination ground station (node 0).
    dest_x: f64 = 500.0,
    dest_y: f64 = 500.0,
    speed_min_kmh: f64 = 10.0,
    speed_max_kmh: f64 = 25.0,
    pause_time: f64 = 0.0,
    sim_duration: f64 = 900.0,
    seeds: SeedList = SeedList((1..=30).collect()),
    /// Packets per second per source.
    cbr_rate: f64 = 0.2,
    packet_size: u16 = 512,
    traffic_start: f64 = 1.0,
    /// Packets each source sends; 0 means unlimited.
    packets_per_source: u32 = 0,
    carrier_freq_ghz: f64 = 2.4,
    max_range: f64 = 250.0,
    rssi_threshold: f64 = -64.0,
    data_rate: f64 = 2.0e6,
    cw: u32 = 15,
    slot_time_us: f64 = 20.0,
    queue_len: usize = 10,
    energy_threshold: f64 = 10.0,
    initial_energy_min: f64 = 10.0,
    initial_energy_max: f64 = 100.0,
    /// The ground station is mains powered in practice; a large budget keeps it alive.
    dest_energy: f64 = 10_000.0,
    tx_cost_per_bit: f64 = 50.0e-6,
    rx_cost_per_bit: f64 = 5.0e-6,
    /// Watts.
    idle_drain: f64 = 0.001,
    hello_interval: f64 = 1.0,
    staleness_factor: f64 = 2.5,
    zone_half_angle: f64 = 90.0,
    alpha: f64 = 0.5,
    beta: f64 = 0.5,
    contention_slot_ms: f64 = 10.0,
    broadcast_jitter_ms: f64 = 10.0,
    discovery_timeout: f64 = 1.0,
    discovery_retries: u32 = 2,
    discovery_holdoff: f64 = 1.0,
    duplicate_cache: usize = 256,
    rarp_window_ms: f64 = 50.0,
    rarp_ect_weight: f64 = 1.0,
    rarp_ect_cap: f64 = 60.0,
    rarp_hop_penalty: f64 = 0.05,
    rarp_energy_weight: f64 = 1.0,
    rarp_energy_cap: f64 = 100.0,
    mobility_tick: f64 = 1.0,
    trace_level: TraceLevel = TraceLevel::Full,
}

impl ScenarioConfig {
    pub fn apply(&mut self, settings: &[Setting]) -> Result<(), ConfigError> {
        for s in settings {
            self.set(&s.key, &s.value)?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`, then validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply(&parse_settings(text, "<config>", None)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply(&load_settings(path)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.node_count < 2 {
            return bad("node_count must be at least 2".into());
        }
        if self.source_count >= self.node_count {
            return bad(format!(
                "source_count ({}) must be less than node_count ({}); node 0 is the destination",
                self.source_count, self.node_count
            ));
        }
        let positive: [(&str, f64); 15] = [
            ("area_width", self.area_width),
            ("area_height", self.area_height),
            ("speed_min_kmh", self.speed_min_kmh),
            ("sim_duration", self.sim_duration),
            ("carrier_freq_ghz", self.carrier_freq_ghz),
            ("max_range", self.max_range),
            ("data_rate", self.data_rate),
            ("slot_time_us", self.slot_time_us),
            ("hello_interval", self.hello_interval),
            ("contention_slot_ms", self.contention_slot_ms),
            ("discovery_timeout", self.discovery_timeout),
            ("rarp_window_ms", self.rarp_window_ms),
            ("rarp_ect_cap", self.rarp_ect_cap),
            ("rarp_energy_cap", self.rarp_energy_cap),
            ("mobility_tick", self.mobility_tick),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive and finite, got {v}"));
            }
        }
        let non_negative: [(&str, f64); 14] = [
            ("altitude", self.altitude),
            ("pause_time", self.pause_time),
            ("cbr_rate", self.cbr_rate),
            ("traffic_start", self.traffic_start),
            ("energy_threshold", self.energy_threshold),
            ("initial_energy_min", self.initial_energy_min),
            ("dest_energy", self.dest_energy),
            ("tx_cost_per_bit", self.tx_cost_per_bit),
            ("rx_cost_per_bit", self.rx_cost_per_bit),
            ("idle_drain", self.idle_drain),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("broadcast_jitter_ms", self.broadcast_jitter_ms),
            ("discovery_holdoff", self.discovery_holdoff),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be non-negative and finite, got {v}"));
            }
        }
        if self.speed_max_kmh < self.speed_min_kmh {
            return bad("speed_max_kmh must be at least speed_min_kmh".into());
        }
        if self.initial_energy_max < self.initial_energy_min {
            return bad("initial_energy_max must be at least initial_energy_min".into());
        }
        if !(0.0..=self.area_width).contains(&self.dest_x) || !(0.0..=self.area_height).contains(&self.dest_y) {
            return bad("destination position lies outside the area".into());
        }
        if !self.rssi_threshold.is_finite() {
            return bad("rssi_threshold must be finite".into());
        }
        if self.cw < 1 {
            return bad("cw must be at least 1 slot".into());
        }
        if self.queue_len < 1 {
            return bad("queue_len must be at least 1".into());
        }
        if self.packet_size == 0 {
            return bad("packet_size must be positive".into());
        }
        if !(self.zone_half_angle > 0.0 && self.zone_half_angle <= 180.0) {
            return bad("zone_half_angle must lie in (0, 180]".into());
        }
        if self.staleness_factor < 1.0 {
            return bad("staleness_factor must be at least 1".into());
        }
        if self.duplicate_cache < 1 {
            return bad("duplicate_cache must be at least 1".into());
        }
        if self.seeds.0.is_empty() {
            return bad("seeds must not be empty".into());
        }
        Ok(())
    }

    pub fn speed_min(&self) -> f64 {
        self.speed_min_kmh / 3.6
    }

    pub fn speed_max(&self) -> f64 {
        self.speed_max_kmh / 3.6
    }

    pub fn mobility(&self) -> MobilityParams {
        MobilityParams {
            area_width: self.area_width,
            area_height: self.area_height,
            speed_min: self.speed_min(),
            speed_max: self.speed_max(),
            pause_time: self.pause_time,
        }
    }

    pub fn radio(&self) -> Result<RadioModel, ConfigError> {
        RadioModel::calibrated(self.carrier_freq_ghz * 1e9, self.max_range, self.rssi_threshold)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            energy_threshold: self.energy_threshold,
            rssi_threshold: self.rssi_threshold,
            max_range: self.max_range,
            hello_interval: self.hello_interval,
            staleness_factor: self.staleness_factor,
            zone_half_angle_deg: self.zone_half_angle,
            alpha: self.alpha,
            beta: self.beta,
            contention_slot: self.contention_slot_ms / 1e3,
            max_speed: self.speed_max(),
            broadcast_jitter: self.broadcast_jitter_ms / 1e3,
            queue_len: self.queue_len,
            discovery_timeout: self.discovery_timeout,
            discovery_retries: self.discovery_retries,
            discovery_holdoff: self.discovery_holdoff,
            duplicate_cache: self.duplicate_cache,
            rarp_window: self.rarp_window_ms / 1e3,
            rarp_ect_weight: self.rarp_ect_weight,
            rarp_ect_cap: self.rarp_ect_cap,
            rarp_hop_penalty: self.rarp_hop_penalty,
            rarp_energy_weight: self.rarp_energy_weight,
            rarp_energy_cap: self.rarp_energy_cap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.max_range, 250.0);
        assert_eq!(c.rssi_threshold, -64.0);
        assert_eq!(c.energy_threshold, 10.0);
        assert_eq!(c.hello_interval, 1.0);
        assert_eq!((c.area_width, c.area_height), (1000.0, 1000.0));
        assert_eq!(c.cw, 15);
        assert_eq!(c.queue_len, 10);
        assert_eq!(c.packet_size, 512);
        assert!((c.speed_max() - 25.0 / 3.6).abs() < 1e-12);
    }

    #[test]
    fn overrides_and_comments() {
        let c = ScenarioConfig::parse("# scenario\nnode_count = 12 # small\nprotocol = aodv\nseeds = 3, 4\n").unwrap();
        assert_eq!(c.node_count, 12);
        assert_eq!(c.protocol, ProtocolKind::Aodv);
        assert_eq!(c.seeds.0, vec![3, 4]);
    }

    #[test]
    fn source_count_must_be_below_node_count() {
        let e = ScenarioConfig::parse("node_count = 5\nsource_count = 5\n").unwrap_err();
        assert!(e.to_string().contains("source_count"));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ScenarioConfig::parse("antena = 3\n").unwrap_err();
        assert!(matches!(&e, ConfigError::UnknownKey(k) if k == "antena"));
        assert!(e.to_string().contains("antena"));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(ScenarioConfig::parse("max_range = -1\n").is_err());
        assert!(ScenarioConfig::parse("cw = 0\n").is_err());
        assert!(ScenarioConfig::parse("node_count = many\n").is_err());
        assert!(ScenarioConfig::parse("just text\n").is_err());
        assert!(ScenarioConfig::parse("zone_half_angle = 200\n").is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!("1..5".parse::<SeedList>().unwrap().0, vec![1, 2, 3, 4, 5]);
        assert_eq!(SeedList(vec![1, 2, 3]).to_string(), "1..3");
        assert_eq!(SeedList(vec![4, 9]).to_string(), "4, 9");
        assert!("5..1".parse::<SeedList>().is_err());
    }

    #[test]
    fn dump_roundtrips() {
        let mut c = ScenarioConfig::default();
        c.node_count = 17;
        c.seeds = SeedList(vec![2, 8]);
        c.trace_level = TraceLevel::Summary;
        assert_eq!(ScenarioConfig::parse(&c.to_kv()).unwrap(), c);
        assert_eq!(c.to_kv().lines().count(), ScenarioConfig::KEYS.len());
    }

    #[test]
    fn includes_resolve_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.conf"), "node_count = 20\npause_time = 5\n").unwrap();
        std::fs::create_dir(dir.path().join("r")).unwrap();
        std::fs::write(dir.path().join("r/main.conf"), "include = ../base.conf\npause_time = 7\n").unwrap();
        let c = ScenarioConfig::load(&dir.path().join("r/main.conf")).unwrap();
        assert_eq!(c.node_count, 20);
        assert_eq!(c.pause_time, 7.0);
    }

    #[test]
    fn include_cycles_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.conf"), "include = b.conf\n").unwrap();
        std::fs::write(dir.path().join("b.conf"), "include = a.conf\n").unwrap();
        assert!(matches!(ScenarioConfig::load(&dir.path().join("a.conf")), Err(ConfigError::IncludeCycle(_))));
    }
}
