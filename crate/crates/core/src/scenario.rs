//! Experiment config: flat `key = value` lines, `#` comments.
//!
//! The fifteen world keys are required. Optional keys and their defaults:
//!
//! | key             | default         | meaning                                   |
//! |-----------------|-----------------|-------------------------------------------|
//! | `protocol`      | `all`           | `P1`, `P1a`, `P2`, `P3` or `all`          |
//! | `blinded`       | per protocol    | P3 id blinding; P2 cannot be blinded      |
//! | `recent_window` | 14 days         | exposure lookback in ticks                |
//! | `theta`         | `0.5`           | linkage score threshold                   |
//! | `k_anchors`     | `2`             | side-knowledge points per target          |
//! | `stations`      | none            | fixed sniffer cells, `x:y,x:y,...`        |
//! | `n_stations`    | `10`            | random sniffer cells (if no `stations`)   |
//! | `seeds`         | the `seed` key  | comma-separated seed list for `compare`   |
//! | `out_dir`       | none            | output directory                          |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::adversary::{AttackParams, StationSpec};
use crate::protocols::{ProtocolKind, ProtocolOptions};
use crate::textfmt::{fmt_bool, key_values, parse_bool};
use crate::world::{ConfigErrors, ConfigViolation, Location, WorldConfig};
use crate::Tick;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolChoice {
    One(ProtocolKind),
    All,
}

impl ProtocolChoice {
    pub fn kinds(self) -> Vec<ProtocolKind> {
        match self {
            Self::One(k) => vec![k],
            Self::All => ProtocolKind::ALL.to_vec(),
        }
    }
}

impl std::fmt::Display for ProtocolChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::One(k) => write!(f, "{k}"),
            Self::All => f.write_str("all"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub world: WorldConfig,
    pub protocol: ProtocolChoice,
    pub options: ProtocolOptions,
    pub attack: AttackParams,
    /// Never empty.
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

const OPTIONAL_KEYS: [&str; 9] = [
    "protocol",
    "blinded",
    "recent_window",
    "theta",
    "k_anchors",
    "stations",
    "n_stations",
    "seeds",
    "out_dir",
];

fn parse_stations(s: &str) -> Option<Vec<Location>> {
    s.split(',')
        .map(|item| {
            let (x, y) = item.trim().split_once(':')?;
            Some(Location::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
        })
        .collect()
}

fn parse_seeds(s: &str) -> Option<Vec<u64>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

impl Scenario {
    /// A single-seed scenario running all protocols with default attacks.
    pub fn from_world(world: WorldConfig) -> Self {
        Self {
            seeds: vec![world.seed],
            world,
            protocol: ProtocolChoice::All,
            options: ProtocolOptions::default(),
            attack: AttackParams::default(),
            out_dir: None,
        }
    }

    /// Collects every problem in the file: syntax, unknown or repeated
    /// keys, missing world keys, bad values and cross-field conflicts.
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let lines = match key_values(text) {
            Ok(l) => l,
            Err(e) => {
                return Err(ConfigErrors(vec![ConfigViolation::new(
                    format!("line {}", e.line),
                    e.message,
                )]))
            }
        };
        let mut v = Vec::new();
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for kv in &lines {
            if !WorldConfig::KEYS.contains(&kv.key) && !OPTIONAL_KEYS.contains(&kv.key) {
                v.push(ConfigViolation::new(kv.key, format!("unknown key (line {})", kv.line)));
            } else if map.contains_key(kv.key) {
                v.push(ConfigViolation::new(kv.key, format!("repeated key (line {})", kv.line)));
            } else {
                map.insert(kv.key.to_string(), kv.value.to_string());
            }
        }
        let world = match WorldConfig::from_map(&map) {
            Ok(w) => Some(w),
            Err(e) => {
                v.extend(e.0);
                None
            }
        };

        let mut opt = |key: &'static str, what: &str, parse: &dyn Fn(&str) -> bool| {
            if let Some(raw) = map.get(key) {
                if !parse(raw) {
                    v.push(ConfigViolation::new(key, format!("expected {what}, got `{raw}`")));
                }
            }
        };
        opt("protocol", "P1, P1a, P2, P3 or all", &|s| s == "all" || s.parse::<ProtocolKind>().is_ok());
        opt("blinded", "true or false", &|s| parse_bool(s).is_some());
        opt("recent_window", "a tick count of at least 1", &|s| s.parse::<Tick>().is_ok_and(|w| w >= 1));
        opt("theta", "a number within [0, 1]", &|s| s.parse::<f64>().is_ok_and(|t| (0.0..=1.0).contains(&t)));
        opt("k_anchors", "a count", &|s| s.parse::<usize>().is_ok());
        opt("stations", "a list `x:y,x:y,...`", &|s| parse_stations(s).is_some());
        opt("n_stations", "a count", &|s| s.parse::<usize>().is_ok());
        opt("seeds", "a non-empty list of seeds", &|s| parse_seeds(s).is_some());
        opt("out_dir", "a path", &|s| !s.is_empty());

        let protocol = match map.get("protocol").map(String::as_str) {
            None | Some("all") => ProtocolChoice::All,
            Some(s) => s.parse().map(ProtocolChoice::One).unwrap_or(ProtocolChoice::All),
        };
        let blinded = map.get("blinded").and_then(|s| parse_bool(s));
        if blinded == Some(true) && protocol.kinds().contains(&ProtocolKind::P2) {
            v.push(ConfigViolation::new(
                "blinded",
                "P2 resolves identifiers through its registry and cannot run blinded",
            ));
        }
        let stations = map.get("stations").and_then(|s| parse_stations(s));
        if stations.is_some() && map.contains_key("n_stations") {
            v.push(ConfigViolation::new("stations", "give either stations or n_stations, not both"));
        }
        if let (Some(w), Some(st)) = (&world, &stations) {
            if let Some(bad) = st.iter().find(|l| l.x >= w.grid_width || l.y >= w.grid_height) {
                v.push(ConfigViolation::new(
                    "stations",
                    format!("station {}:{} lies outside the {}x{} grid", bad.x, bad.y, w.grid_width, w.grid_height),
                ));
            }
        }
        if !v.is_empty() {
            return Err(ConfigErrors(v));
        }

        let world = world.expect("no violations implies a world");
        let get = |key: &str| map.get(key).map(String::as_str);
        let defaults = AttackParams::default();
        Ok(Self {
            seeds: get("seeds").and_then(parse_seeds).unwrap_or_else(|| vec![world.seed]),
            protocol,
            options: ProtocolOptions {
                blinded,
                recent_window: get("recent_window").and_then(|s| s.parse().ok()),
            },
            attack: AttackParams {
                theta: get("theta").and_then(|s| s.parse().ok()).unwrap_or(defaults.theta),
                k_anchors: get("k_anchors").and_then(|s| s.parse().ok()).unwrap_or(defaults.k_anchors),
                stations: match stations {
                    Some(s) => StationSpec::Fixed(s),
                    None => get("n_stations")
                        .and_then(|s| s.parse().ok())
                        .map_or(defaults.stations, StationSpec::Random),
                },
            },
            out_dir: get("out_dir").map(PathBuf::from),
            world,
        })
    }

    /// Pins a single seed, as `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.world.seed = seed;
        self.seeds = vec![seed];
        self
    }

    /// Canonical text form; [`Scenario::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.world.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "protocol = {}", self.protocol);
        if let Some(b) = self.options.blinded {
            let _ = writeln!(out, "blinded = {}", fmt_bool(b));
        }
        if let Some(w) = self.options.recent_window {
            let _ = writeln!(out, "recent_window = {w}");
        }
        let _ = writeln!(out, "theta = {}", self.attack.theta);
        let _ = writeln!(out, "k_anchors = {}", self.attack.k_anchors);
        match &self.attack.stations {
            StationSpec::Random(n) => {
                let _ = writeln!(out, "n_stations = {n}");
            }
            StationSpec::Fixed(s) if !s.is_empty() => {
                let list: Vec<String> = s.iter().map(|l| format!("{}:{}", l.x, l.y)).collect();
                let _ = writeln!(out, "stations = {}", list.join(","));
            }
            StationSpec::Fixed(_) => {
                let _ = writeln!(out, "n_stations = 0");
            }
        }
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        if let Some(d) = &self.out_dir {
            let _ = writeln!(out, "out_dir = {}", d.display());
        }
        out
    }
}
