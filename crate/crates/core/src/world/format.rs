//! Line-oriented text form of a [`SimulationTrace`].
//!
//! ```text
//! # ctsim trace v1
//! C <config key> <value>        one per WorldConfig field
//! T <tick> <agent> <x> <y>      position
//! E <tick> <a> <b>              encounter, a < b
//! H <tick> <agent> <S|E|I|R>    phase transition
//! R <tick> <agent>              infection report
//! ```
//!
//! Records are grouped by tick. Within a tick: positions, encounters,
//! Infectious/Recovered transitions, reports, then Exposed transitions,
//! which is the order the world evaluates them in. The `reported` flag of
//! a transition is recovered from the `R` lines that precede it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    AgentId, EncounterEvent, HealthRecord, HealthState, Location, Phase, ReportEvent,
    SimulationTrace, Trajectory, WorldConfig,
};
use crate::textfmt::{records, ParseError};
use crate::Tick;

pub const TRACE_HEADER: &str = "# ctsim trace v1";

impl SimulationTrace {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for (k, v) in self.config.to_pairs() {
            let _ = writeln!(out, "C {k} {v}");
        }

        let (mut ei, mut hi, mut ri) = (0, 0, 0);
        let mut traj_cursor = vec![0usize; self.trajectories.len()];
        // Visit only ticks that carry at least one record.
        loop {
            let next = self
                .trajectories
                .iter()
                .zip(&traj_cursor)
                .filter_map(|(tr, &c)| tr.points().get(c).map(|p| p.0))
                .chain(self.encounters.get(ei).map(|e| e.tick))
                .chain(self.health_log.get(hi).map(|h| h.tick))
                .chain(self.report_events.get(ri).map(|r| r.tick))
                .min();
            let Some(t) = next else {
                break;
            };
            for (agent, traj) in self.trajectories.iter().enumerate() {
                let pts = traj.points();
                let c = &mut traj_cursor[agent];
                while *c < pts.len() && pts[*c].0 == t {
                    let loc = pts[*c].1;
                    let _ = writeln!(out, "T {t} {agent} {} {}", loc.x, loc.y);
                    *c += 1;
                }
            }
            while ei < self.encounters.len() && self.encounters[ei].tick == t {
                let e = &self.encounters[ei];
                let _ = writeln!(out, "E {t} {} {}", e.a, e.b);
                ei += 1;
            }
            let tick_end = hi
                + self.health_log[hi..]
                    .iter()
                    .take_while(|h| h.tick == t)
                    .count();
            let in_tick = &self.health_log[hi..tick_end];
            for h in in_tick.iter().filter(|h| h.state.phase != Phase::Exposed) {
                let _ = writeln!(out, "H {t} {} {}", h.agent, h.state.phase.code());
            }
            while ri < self.report_events.len() && self.report_events[ri].tick == t {
                let _ = writeln!(out, "R {t} {}", self.report_events[ri].agent);
                ri += 1;
            }
            for h in in_tick.iter().filter(|h| h.state.phase == Phase::Exposed) {
                let _ = writeln!(out, "H {t} {} E", h.agent);
            }
            hi = tick_end;
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Rejects anything that
    /// would violate the trace's structural invariants.
    pub fn parse_text(text: &str) -> Result<Self, ParseError> {
        enum Event {
            Health(usize, Tick, u32, Phase),
            Report(usize, Tick, u32),
        }

        let mut config_map = BTreeMap::new();
        let mut first_config_line = 1;
        let mut points: Vec<(usize, Tick, u32, Location)> = Vec::new();
        let mut encounters: Vec<(usize, EncounterEvent)> = Vec::new();
        let mut events = Vec::new();

        for rec in records(text) {
            match rec.tag {
                "C" => {
                    rec.expect_len(2)?;
                    let key = rec.field(0)?;
                    if !WorldConfig::KEYS.contains(&key) {
                        return Err(rec.err(format!("unknown config key `{key}`")));
                    }
                    if config_map.is_empty() {
                        first_config_line = rec.line;
                    }
                    if config_map
                        .insert(key.to_string(), rec.field(1)?.to_string())
                        .is_some()
                    {
                        return Err(rec.err(format!("duplicate config key `{key}`")));
                    }
                }
                "T" => {
                    rec.expect_len(4)?;
                    points.push((
                        rec.line,
                        rec.parse(0)?,
                        rec.parse(1)?,
                        Location::new(rec.parse(2)?, rec.parse(3)?),
                    ));
                }
                "E" => {
                    rec.expect_len(3)?;
                    let e = EncounterEvent {
                        tick: rec.parse(0)?,
                        a: AgentId(rec.parse(1)?),
                        b: AgentId(rec.parse(2)?),
                    };
                    if e.a >= e.b {
                        return Err(rec.err("encounter must satisfy a < b"));
                    }
                    encounters.push((rec.line, e));
                }
                "H" => {
                    rec.expect_len(3)?;
                    let phase = rec.parse_with(2, Phase::from_code)?;
                    if phase == Phase::Susceptible {
                        return Err(rec.err("no transition leads to Susceptible"));
                    }
                    events.push(Event::Health(rec.line, rec.parse(0)?, rec.parse(1)?, phase));
                }
                "R" => {
                    rec.expect_len(2)?;
                    events.push(Event::Report(rec.line, rec.parse(0)?, rec.parse(1)?));
                }
                other => return Err(rec.err(format!("unknown record tag `{other}`"))),
            }
        }

        let config = WorldConfig::from_map(&config_map)
            .map_err(|e| ParseError::new(first_config_line, format!("invalid config: {e}")))?;
        // Every agent has at least its tick-0 point, which bounds the
        // allocation below by the input size.
        if config.n_agents as usize > points.len() {
            return Err(ParseError::new(
                first_config_line,
                format!(
                    "n_agents = {} but only {} position records",
                    config.n_agents,
                    points.len()
                ),
            ));
        }
        let n = config.n_agents as usize;
        let horizon = config.sim_ticks.max(1);
        let in_grid = |loc: Location| loc.x < config.grid_width && loc.y < config.grid_height;
        let check_agent = |line: usize, a: u32| -> Result<AgentId, ParseError> {
            if (a as usize) < n {
                Ok(AgentId(a))
            } else {
                Err(ParseError::new(line, format!("agent {a} out of range")))
            }
        };

        let mut per_agent: Vec<Vec<(Tick, Location)>> = vec![Vec::new(); n];
        for (line, tick, agent, loc) in points {
            let a = check_agent(line, agent)?;
            if tick >= horizon || !in_grid(loc) {
                return Err(ParseError::new(line, "position outside the simulated grid or horizon"));
            }
            per_agent[a.index()].push((tick, loc));
        }
        let mut trajectories = Vec::with_capacity(n);
        for (agent, pts) in per_agent.into_iter().enumerate() {
            if pts.first().map(|p| p.0) != Some(0) {
                return Err(ParseError::new(
                    first_config_line,
                    format!("agent {agent} has no tick-0 position"),
                ));
            }
            trajectories.push(Trajectory::from_points(pts).ok_or_else(|| {
                ParseError::new(
                    first_config_line,
                    format!("agent {agent} positions are not strictly increasing in time"),
                )
            })?);
        }

        let mut enc = Vec::with_capacity(encounters.len());
        for (line, e) in encounters {
            check_agent(line, e.b.0)?;
            if e.tick >= config.sim_ticks {
                return Err(ParseError::new(line, "encounter after the simulated horizon"));
            }
            if enc.last().is_some_and(|prev| *prev >= e) {
                return Err(ParseError::new(line, "encounters must be sorted and unique"));
            }
            enc.push(e);
        }

        let mut reported = vec![false; n];
        let mut health_log = Vec::new();
        let mut report_events = Vec::new();
        let mut last_tick = 0;
        for ev in events {
            let (line, tick) = match ev {
                Event::Health(line, tick, ..) | Event::Report(line, tick, _) => (line, tick),
            };
            if tick < last_tick || tick >= horizon {
                return Err(ParseError::new(line, "health records must be in tick order within the horizon"));
            }
            last_tick = tick;
            match ev {
                Event::Health(line, tick, agent, phase) => {
                    let a = check_agent(line, agent)?;
                    health_log.push(HealthRecord {
                        tick,
                        agent: a,
                        state: HealthState {
                            phase,
                            reported: reported[a.index()],
                            phase_entry_tick: tick,
                        },
                    });
                }
                Event::Report(line, tick, agent) => {
                    let a = check_agent(line, agent)?;
                    reported[a.index()] = true;
                    report_events.push(ReportEvent { tick, agent: a });
                }
            }
        }

        Ok(SimulationTrace {
            config,
            trajectories,
            encounters: enc,
            health_log,
            report_events,
        })
    }
}
