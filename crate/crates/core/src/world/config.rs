use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::Tick;

/// Parameters of the ground-truth world.
///
/// Ticks are abstract; with the default `ticks_per_hour = 60` one tick is a
/// simulated minute and an identifier epoch is an hour.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub grid_width: u32,
    pub grid_height: u32,
    pub n_agents: u32,
    /// Identifier rotation epoch length.
    pub ticks_per_hour: Tick,
    pub sim_ticks: Tick,
    /// Chebyshev distance, in cells, at which two agents are in contact.
    pub proximity_radius: u32,
    pub move_prob: f64,
    pub anchor_return_prob: f64,
    /// Per infectious contact-tick.
    pub p_transmit: f64,
    pub incubation_ticks: Tick,
    pub infectious_ticks: Tick,
    /// Delay between becoming infectious and reporting.
    pub report_delay_ticks: Tick,
    pub n_initial_infected: u32,
    /// Chance that a user remembers who was behind one encounter tick.
    pub p_recognize: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: String,
    pub message: String,
}

impl ConfigViolation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violation found in one config, in key order.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl WorldConfig {
    pub const KEYS: [&'static str; 15] = [
        "grid_width",
        "grid_height",
        "n_agents",
        "ticks_per_hour",
        "sim_ticks",
        "proximity_radius",
        "move_prob",
        "anchor_return_prob",
        "p_transmit",
        "incubation_ticks",
        "infectious_ticks",
        "report_delay_ticks",
        "n_initial_infected",
        "p_recognize",
        "seed",
    ];

    /// Desk-scale reference scenario: 50x50 grid, 200 agents, one
    /// simulated week at one tick per minute.
    pub fn desk() -> Self {
        Self {
            grid_width: 50,
            grid_height: 50,
            n_agents: 200,
            ticks_per_hour: 60,
            sim_ticks: 7 * 24 * 60,
            proximity_radius: 1,
            move_prob: 0.5,
            anchor_return_prob: 0.2,
            p_transmit: 0.002,
            incubation_ticks: 24 * 60,
            infectious_ticks: 5 * 24 * 60,
            report_delay_ticks: 2 * 24 * 60,
            n_initial_infected: 5,
            p_recognize: 0.3,
            seed: 1,
        }
    }

    /// Returns every violated invariant, or `Ok` when none are.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut v = Vec::new();
        if self.grid_width < 1 {
            v.push(ConfigViolation::new("grid_width", "must be at least 1"));
        }
        if self.grid_height < 1 {
            v.push(ConfigViolation::new("grid_height", "must be at least 1"));
        }
        if self.ticks_per_hour < 1 {
            v.push(ConfigViolation::new("ticks_per_hour", "must be at least 1"));
        }
        for (field, p) in [
            ("move_prob", self.move_prob),
            ("anchor_return_prob", self.anchor_return_prob),
            ("p_transmit", self.p_transmit),
            ("p_recognize", self.p_recognize),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(ConfigViolation::new(
                    field,
                    format!("must be within [0, 1], got {p}"),
                ));
            }
        }
        if self.n_initial_infected > self.n_agents {
            v.push(ConfigViolation::new(
                "n_initial_infected",
                format!(
                    "must not exceed n_agents ({} > {})",
                    self.n_initial_infected, self.n_agents
                ),
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(v))
        }
    }

    /// Canonical `(key, value)` pairs in [`WorldConfig::KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("grid_width", self.grid_width.to_string()),
            ("grid_height", self.grid_height.to_string()),
            ("n_agents", self.n_agents.to_string()),
            ("ticks_per_hour", self.ticks_per_hour.to_string()),
            ("sim_ticks", self.sim_ticks.to_string()),
            ("proximity_radius", self.proximity_radius.to_string()),
            ("move_prob", self.move_prob.to_string()),
            ("anchor_return_prob", self.anchor_return_prob.to_string()),
            ("p_transmit", self.p_transmit.to_string()),
            ("incubation_ticks", self.incubation_ticks.to_string()),
            ("infectious_ticks", self.infectious_ticks.to_string()),
            ("report_delay_ticks", self.report_delay_ticks.to_string()),
            ("n_initial_infected", self.n_initial_infected.to_string()),
            ("p_recognize", self.p_recognize.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Builds a config from raw key/value strings. Keys outside
    /// [`WorldConfig::KEYS`] are ignored here; callers decide whether
    /// they are errors. Missing keys, unparsable values and invariant
    /// violations are all collected.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigErrors> {
        let mut violations = Vec::new();
        let mut get = |key: &'static str| -> Option<&str> {
            match map.get(key) {
                Some(v) => Some(v.as_str()),
                None => {
                    violations.push(ConfigViolation::new(key, "missing required key"));
                    None
                }
            }
        };
        let raw: Vec<Option<&str>> = Self::KEYS.iter().map(|k| get(k)).collect();

        let mut parse_errors = Vec::new();
        fn num<T: std::str::FromStr + Default>(
            key: &'static str,
            raw: Option<&str>,
            errors: &mut Vec<ConfigViolation>,
        ) -> T {
            match raw {
                None => T::default(),
                Some(s) => s.parse().unwrap_or_else(|_| {
                    errors.push(ConfigViolation::new(
                        key,
                        format!("cannot parse `{s}` as {}", std::any::type_name::<T>()),
                    ));
                    T::default()
                }),
            }
        }
        fn prob(key: &'static str, raw: Option<&str>, errors: &mut Vec<ConfigViolation>) -> f64 {
            let p: f64 = num(key, raw, errors);
            if p.is_nan() {
                errors.push(ConfigViolation::new(key, "must be a number, got NaN"));
                return 0.0;
            }
            p
        }

        let e = &mut parse_errors;
        let cfg = WorldConfig {
            grid_width: num("grid_width", raw[0], e),
            grid_height: num("grid_height", raw[1], e),
            n_agents: num("n_agents", raw[2], e),
            ticks_per_hour: num("ticks_per_hour", raw[3], e),
            sim_ticks: num("sim_ticks", raw[4], e),
            proximity_radius: num("proximity_radius", raw[5], e),
            move_prob: prob("move_prob", raw[6], e),
            anchor_return_prob: prob("anchor_return_prob", raw[7], e),
            p_transmit: prob("p_transmit", raw[8], e),
            incubation_ticks: num("incubation_ticks", raw[9], e),
            infectious_ticks: num("infectious_ticks", raw[10], e),
            report_delay_ticks: num("report_delay_ticks", raw[11], e),
            n_initial_infected: num("n_initial_infected", raw[12], e),
            p_recognize: prob("p_recognize", raw[13], e),
            seed: num("seed", raw[14], e),
        };
        violations.extend(parse_errors);
        if violations.is_empty() {
            cfg.validate()?;
            Ok(cfg)
        } else {
            // Invariants are only meaningful once every field parsed.
            Err(ConfigErrors(violations))
        }
    }
}
