//! Ground truth: anchored random-walk mobility on a grid, proximity
//! encounters, and a minimal SEIR epidemic with delayed honest reporting.
//!
//! Within one tick the world evaluates, in order:
//!
//! 1. movement (skipped at tick 0, where agents sit at their home cells),
//! 2. encounters between every pair within `proximity_radius`,
//! 3. timer transitions (E→I after `incubation_ticks`, I→R after
//!    `infectious_ticks`),
//! 4. reports, `report_delay_ticks` after becoming infectious,
//! 5. transmission: one Bernoulli draw per (infectious, susceptible)
//!    encounter of this tick.

mod config;
pub mod format;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Range, RangeInclusive};

use rand::seq::index;
use rand::Rng;
use sha2::{Digest, Sha256};

pub use config::{ConfigErrors, ConfigViolation, WorldConfig};

use crate::rng::{self, SimRng, Stream};
use crate::{Error, Result, Tick};

/// Ground-truth identity of a simulated person.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub x: u32,
    pub y: u32,
}

impl Location {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Location) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Time-stamped locations with strictly increasing ticks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trajectory {
    points: Vec<(Tick, Location)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// `None` unless ticks strictly increase.
    pub fn from_points(points: Vec<(Tick, Location)>) -> Option<Self> {
        if points.windows(2).all(|w| w[0].0 < w[1].0) {
            Some(Self { points })
        } else {
            None
        }
    }

    /// # Panics
    ///
    /// If `tick` is not after the last recorded point.
    pub fn push(&mut self, tick: Tick, location: Location) {
        if let Some(&(last, _)) = self.points.last() {
            assert!(tick > last, "trajectory ticks must increase ({tick} after {last})");
        }
        self.points.push((tick, location));
    }

    /// Appends every point of `other`; same ordering contract as [`push`](Self::push).
    pub fn extend_from(&mut self, other: &Trajectory) {
        for &(t, loc) in &other.points {
            self.push(t, loc);
        }
    }

    pub fn points(&self) -> &[(Tick, Location)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn at(&self, tick: Tick) -> Option<Location> {
        let &(first, _) = self.points.first()?;
        // Dense trajectories (one point per tick) resolve without a search.
        if tick >= first {
            if let Some(&(t, loc)) = usize::try_from(tick - first)
                .ok()
                .and_then(|i| self.points.get(i))
            {
                if t == tick {
                    return Some(loc);
                }
            }
        }
        self.points
            .binary_search_by_key(&tick, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    pub fn within(&self, window: RangeInclusive<Tick>) -> &[(Tick, Location)] {
        let lo = self.points.partition_point(|p| p.0 < *window.start());
        let hi = self.points.partition_point(|p| p.0 <= *window.end());
        &self.points[lo..hi.max(lo)]
    }

    /// Ticks inside `window` at which both trajectories are within `radius`.
    pub fn meeting_ticks<'a>(
        &'a self,
        other: &'a Trajectory,
        window: RangeInclusive<Tick>,
        radius: u32,
    ) -> impl Iterator<Item = Tick> + 'a {
        self.within(window).iter().filter_map(move |&(t, loc)| {
            other
                .at(t)
                .filter(|o| o.chebyshev(loc) <= radius)
                .map(|_| t)
        })
    }

    pub fn meets(&self, other: &Trajectory, window: RangeInclusive<Tick>, radius: u32) -> bool {
        self.meeting_ticks(other, window, radius).next().is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Susceptible,
    Exposed,
    Infectious,
    Recovered,
}

impl Phase {
    pub fn code(self) -> char {
        match self {
            Phase::Susceptible => 'S',
            Phase::Exposed => 'E',
            Phase::Infectious => 'I',
            Phase::Recovered => 'R',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "S" => Some(Phase::Susceptible),
            "E" => Some(Phase::Exposed),
            "I" => Some(Phase::Infectious),
            "R" => Some(Phase::Recovered),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HealthState {
    pub phase: Phase,
    pub reported: bool,
    pub phase_entry_tick: Tick,
}

impl HealthState {
    fn susceptible() -> Self {
        Self {
            phase: Phase::Susceptible,
            reported: false,
            phase_entry_tick: 0,
        }
    }
}

/// Two agents within `proximity_radius` at one tick; always `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EncounterEvent {
    pub tick: Tick,
    pub a: AgentId,
    pub b: AgentId,
}

impl EncounterEvent {
    pub fn involves(&self, agent: AgentId) -> bool {
        self.a == agent || self.b == agent
    }

    pub fn peer_of(&self, agent: AgentId) -> Option<AgentId> {
        if self.a == agent {
            Some(self.b)
        } else if self.b == agent {
            Some(self.a)
        } else {
            None
        }
    }
}

/// A phase transition, with the state as it stood right after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HealthRecord {
    pub tick: Tick,
    pub agent: AgentId,
    pub state: HealthState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReportEvent {
    pub tick: Tick,
    pub agent: AgentId,
}

/// Stable identifier of one simulated run: a digest of its configuration
/// (seed included). Every derived artifact carries it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunId(pub u64);

impl RunId {
    pub fn of(config: &WorldConfig) -> Self {
        let mut hasher = Sha256::new();
        for (k, v) in config.to_pairs() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        RunId(u64::from_be_bytes(head))
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Everything that physically happened in one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub config: WorldConfig,
    pub trajectories: Vec<Trajectory>,
    pub encounters: Vec<EncounterEvent>,
    pub health_log: Vec<HealthRecord>,
    pub report_events: Vec<ReportEvent>,
}

impl SimulationTrace {
    pub fn run_id(&self) -> RunId {
        RunId::of(&self.config)
    }

    pub fn n_agents(&self) -> usize {
        self.trajectories.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.trajectories.len() as u32).map(AgentId)
    }

    pub fn trajectory(&self, agent: AgentId) -> Result<&Trajectory> {
        self.trajectories
            .get(agent.index())
            .ok_or(Error::UnknownAgent(agent))
    }

    /// Agents that ever left Susceptible, initial infected included.
    pub fn ever_infected(&self) -> BTreeSet<AgentId> {
        self.health_log.iter().map(|h| h.agent).collect()
    }

    pub fn reported(&self) -> BTreeSet<AgentId> {
        self.report_events.iter().map(|r| r.agent).collect()
    }

    pub fn report_at(&self, agent: AgentId) -> Option<Tick> {
        self.report_events
            .iter()
            .find(|r| r.agent == agent)
            .map(|r| r.tick)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct AgentHealth {
    state: HealthState,
    infectious_since: Option<Tick>,
}

/// What one call to [`World::step`] produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub tick: Tick,
    pub encounters: Vec<EncounterEvent>,
    /// Timer transitions first, then exposures.
    pub transitions: Vec<HealthRecord>,
    pub reports: Vec<ReportEvent>,
}

/// Mutable simulation state between ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    config: WorldConfig,
    next_tick: Tick,
    homes: Vec<Location>,
    positions: Vec<Location>,
    health: Vec<AgentHealth>,
    initial: Vec<HealthRecord>,
    mobility: SimRng,
    epidemic: SimRng,
}

impl World {
    /// Places every agent at a seeded home cell and marks exactly
    /// `n_initial_infected` of them Infectious at tick 0.
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut mobility = rng::stream(config.seed, Stream::Mobility);
        let mut epidemic = rng::stream(config.seed, Stream::Epidemic);
        let n = config.n_agents as usize;

        let homes: Vec<Location> = (0..n)
            .map(|_| {
                Location::new(
                    mobility.random_range(0..config.grid_width),
                    mobility.random_range(0..config.grid_height),
                )
            })
            .collect();

        let mut health = vec![
            AgentHealth {
                state: HealthState::susceptible(),
                infectious_since: None,
            };
            n
        ];
        let mut seeded: Vec<usize> =
            index::sample(&mut epidemic, n, config.n_initial_infected as usize).into_vec();
        seeded.sort_unstable();
        let mut initial = Vec::with_capacity(seeded.len());
        for i in seeded {
            let state = HealthState {
                phase: Phase::Infectious,
                reported: false,
                phase_entry_tick: 0,
            };
            health[i] = AgentHealth {
                state,
                infectious_since: Some(0),
            };
            initial.push(HealthRecord {
                tick: 0,
                agent: AgentId(i as u32),
                state,
            });
        }

        Ok(Self {
            positions: homes.clone(),
            homes,
            health,
            initial,
            next_tick: 0,
            mobility,
            epidemic,
            config,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    /// The tick the next [`step`](Self::step) evaluates.
    pub fn next_tick(&self) -> Tick {
        self.next_tick
    }

    pub fn positions(&self) -> &[Location] {
        &self.positions
    }

    pub fn homes(&self) -> &[Location] {
        &self.homes
    }

    pub fn health(&self, agent: AgentId) -> Option<HealthState> {
        self.health.get(agent.index()).map(|h| h.state)
    }

    /// The Infectious records created at tick 0 by [`World::new`].
    pub fn initial_records(&self) -> &[HealthRecord] {
        &self.initial
    }

    /// Evaluates one tick. Returns `None` once `sim_ticks` ticks have run.
    pub fn step(&mut self) -> Option<StepOutcome> {
        if self.next_tick >= self.config.sim_ticks {
            return None;
        }
        let tick = self.next_tick;
        if tick > 0 {
            for i in 0..self.positions.len() {
                self.positions[i] = self.next_position(i);
            }
        }
        let encounters = encounters_at(
            tick,
            &self.positions,
            self.config.grid_width,
            self.config.grid_height,
            self.config.proximity_radius,
        );
        let (transitions, reports) = self.advance_health(tick, &encounters);
        self.next_tick += 1;
        Some(StepOutcome {
            tick,
            encounters,
            transitions,
            reports,
        })
    }

    fn next_position(&mut self, i: usize) -> Location {
        let pos = self.positions[i];
        let home = self.homes[i];
        if self.mobility.random_bool(self.config.anchor_return_prob) {
            return Location::new(toward(pos.x, home.x), toward(pos.y, home.y));
        }
        if self.mobility.random_bool(self.config.move_prob) {
            let dx = self.mobility.random_range(-1i64..=1);
            let dy = self.mobility.random_range(-1i64..=1);
            return Location::new(
                offset(pos.x, dx, self.config.grid_width),
                offset(pos.y, dy, self.config.grid_height),
            );
        }
        pos
    }

    fn advance_health(
        &mut self,
        tick: Tick,
        encounters: &[EncounterEvent],
    ) -> (Vec<HealthRecord>, Vec<ReportEvent>) {
        let cfg = &self.config;
        let mut transitions = Vec::new();

        for (i, h) in self.health.iter_mut().enumerate() {
            let agent = AgentId(i as u32);
            if h.state.phase == Phase::Exposed
                && tick >= h.state.phase_entry_tick.saturating_add(cfg.incubation_ticks)
            {
                h.state.phase = Phase::Infectious;
                h.state.phase_entry_tick = tick;
                h.infectious_since = Some(tick);
                transitions.push(HealthRecord {
                    tick,
                    agent,
                    state: h.state,
                });
            }
            if h.state.phase == Phase::Infectious
                && tick >= h.state.phase_entry_tick.saturating_add(cfg.infectious_ticks)
            {
                h.state.phase = Phase::Recovered;
                h.state.phase_entry_tick = tick;
                transitions.push(HealthRecord {
                    tick,
                    agent,
                    state: h.state,
                });
            }
        }

        let mut reports = Vec::new();
        for (i, h) in self.health.iter_mut().enumerate() {
            let due = h
                .infectious_since
                .is_some_and(|s| tick >= s.saturating_add(cfg.report_delay_ticks));
            if due && !h.state.reported {
                h.state.reported = true;
                reports.push(ReportEvent {
                    tick,
                    agent: AgentId(i as u32),
                });
            }
        }

        let mut exposed = vec![false; self.health.len()];
        for e in encounters {
            for (src, dst) in [(e.a, e.b), (e.b, e.a)] {
                let (s, d) = (src.index(), dst.index());
                if self.health[s].state.phase == Phase::Infectious
                    && self.health[d].state.phase == Phase::Susceptible
                    && !exposed[d]
                    && self.epidemic.random_bool(cfg.p_transmit)
                {
                    exposed[d] = true;
                }
            }
        }
        for (i, hit) in exposed.into_iter().enumerate() {
            if hit {
                let h = &mut self.health[i];
                h.state.phase = Phase::Exposed;
                h.state.phase_entry_tick = tick;
                transitions.push(HealthRecord {
                    tick,
                    agent: AgentId(i as u32),
                    state: h.state,
                });
            }
        }
        (transitions, reports)
    }
}

fn toward(from: u32, to: u32) -> u32 {
    match from.cmp(&to) {
        std::cmp::Ordering::Less => from + 1,
        std::cmp::Ordering::Greater => from - 1,
        std::cmp::Ordering::Equal => from,
    }
}

/// Moves one step along an axis; a step off the grid stays put.
fn offset(v: u32, d: i64, extent: u32) -> u32 {
    let next = i64::from(v) + d;
    if next < 0 || next >= i64::from(extent) {
        v
    } else {
        next as u32
    }
}

/// All pairs within `radius` (Chebyshev), canonical `a < b`, sorted.
pub fn encounters_at(
    tick: Tick,
    positions: &[Location],
    width: u32,
    height: u32,
    radius: u32,
) -> Vec<EncounterEvent> {
    let w = u64::from(width);
    let r = u64::from(radius);
    let cell = |p: &Location| u64::from(p.y) * w + u64::from(p.x);
    let mut cells: Vec<(u64, u32)> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| (cell(p), i as u32))
        .collect();
    cells.sort_unstable();

    let mut out = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let (x, y) = (u64::from(p.x), u64::from(p.y));
        let x0 = x.saturating_sub(r);
        let x1 = (x + r).min(w - 1);
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(u64::from(height) - 1);
        for row in y0..=y1 {
            let lo = row * w + x0;
            let hi = row * w + x1;
            let start = cells.partition_point(|c| c.0 < lo);
            for &(c, j) in &cells[start..] {
                if c > hi {
                    break;
                }
                if j as usize > i {
                    out.push(EncounterEvent {
                        tick,
                        a: AgentId(i as u32),
                        b: AgentId(j),
                    });
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Runs `config.sim_ticks` steps from a fresh [`World`].
///
/// Trajectories always hold the tick-0 placement; with `sim_ticks = 0`
/// that is all they hold, and no encounters are evaluated.
pub fn run_simulation(config: &WorldConfig) -> Result<SimulationTrace> {
    let mut world = World::new(config.clone())?;
    let mut trajectories: Vec<Trajectory> = world
        .positions()
        .iter()
        .map(|&p| {
            let mut t = Trajectory::new();
            t.push(0, p);
            t
        })
        .collect();
    let mut encounters = Vec::new();
    let mut health_log = world.initial_records().to_vec();
    let mut report_events = Vec::new();

    while let Some(out) = world.step() {
        if out.tick > 0 {
            for (traj, &p) in trajectories.iter_mut().zip(world.positions()) {
                traj.push(out.tick, p);
            }
        }
        encounters.extend(out.encounters);
        health_log.extend(out.transitions);
        report_events.extend(out.reports);
    }

    Ok(SimulationTrace {
        config: config.clone(),
        trajectories,
        encounters,
        health_log,
        report_events,
    })
}

/// Every agent sharing at least one encounter with `agent` at a tick in
/// `window`.
pub fn ground_truth_exposures(
    trace: &SimulationTrace,
    agent: AgentId,
    window: Range<Tick>,
) -> Result<BTreeSet<AgentId>> {
    if agent.index() >= trace.n_agents() {
        return Err(Error::UnknownAgent(agent));
    }
    Ok(trace
        .encounters
        .iter()
        .filter(|e| window.contains(&e.tick))
        .filter_map(|e| e.peer_of(agent))
        .collect())
}

/// Per-agent encounter lists for repeated exposure queries.
#[derive(Clone, Debug)]
pub struct ExposureIndex {
    by_agent: Vec<Vec<(Tick, AgentId)>>,
}

impl ExposureIndex {
    pub fn new(trace: &SimulationTrace) -> Self {
        let mut by_agent = vec![Vec::new(); trace.n_agents()];
        for e in &trace.encounters {
            by_agent[e.a.index()].push((e.tick, e.b));
            by_agent[e.b.index()].push((e.tick, e.a));
        }
        Self { by_agent }
    }

    /// Same answer as [`ground_truth_exposures`].
    pub fn exposures(&self, agent: AgentId, window: Range<Tick>) -> Result<BTreeSet<AgentId>> {
        let list = self
            .by_agent
            .get(agent.index())
            .ok_or(Error::UnknownAgent(agent))?;
        let lo = list.partition_point(|p| p.0 < window.start);
        Ok(list[lo..]
            .iter()
            .take_while(|p| p.0 < window.end)
            .map(|p| p.1)
            .collect())
    }

    /// First tick in `window` at which `agent` met `peer`.
    pub fn first_contact(&self, agent: AgentId, peer: AgentId, window: Range<Tick>) -> Option<Tick> {
        let list = self.by_agent.get(agent.index())?;
        let lo = list.partition_point(|p| p.0 < window.start);
        list[lo..]
            .iter()
            .take_while(|p| p.0 < window.end)
            .find(|p| p.1 == peer)
            .map(|p| p.0)
    }
}
