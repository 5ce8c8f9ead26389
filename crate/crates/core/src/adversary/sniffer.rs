use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::linkage::{link_identifier_chains, observed_links, score_links, Link, Linkage, LinkageObservation};
use super::AttackScore;
use crate::protocols::{DeviceState, EphemeralId, IdEpochRecord, ProtocolKind, ProtocolRun};
use crate::world::{AgentId, Location, SimulationTrace, WorldConfig};
use crate::{Error, Result, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub tick: Tick,
    pub station: u32,
    pub id: EphemeralId,
}

/// What a network of passive receivers heard. Sorted by tick, station, id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SnifferLog {
    pub stations: Vec<Location>,
    pub observations: Vec<Observation>,
}

/// `n` distinct cells chosen uniformly (all cells if `n` exceeds the grid).
pub fn place_stations<R: Rng>(config: &WorldConfig, n: usize, rng: &mut R) -> Vec<Location> {
    let w = config.grid_width as usize;
    let cells = w * config.grid_height as usize;
    rand::seq::index::sample(rng, cells, n.min(cells))
        .into_iter()
        .map(|c| Location::new((c % w) as u32, (c / w) as u32))
        .collect()
}

impl SnifferLog {
    /// Records every broadcast made within `proximity_radius` of a station.
    pub fn capture(trace: &SimulationTrace, run: &ProtocolRun, stations: Vec<Location>) -> Result<Self> {
        run.ensure_same_run(trace.run_id())?;
        let ctx = &run.context;
        let mut observations = Vec::new();
        if ctx.kind.uses_identifiers() {
            for t in 0..trace.config.sim_ticks {
                for d in &run.devices {
                    let Some(id) = d.current_id(ctx, t) else {
                        continue;
                    };
                    let here = trace.trajectory(d.agent)?.at(t).ok_or_else(|| {
                        Error::InconsistentTrace(format!("agent {} has no position at tick {t}", d.agent))
                    })?;
                    for (s, loc) in stations.iter().enumerate() {
                        if loc.chebyshev(here) <= ctx.proximity_radius {
                            observations.push(Observation { tick: t, station: s as u32, id });
                        }
                    }
                }
            }
        }
        observations.sort_unstable();
        Ok(Self {
            stations,
            observations,
        })
    }

    /// Per (epoch, id): the set of stations that heard it.
    pub fn linkage_view(&self, ticks_per_hour: Tick) -> Vec<LinkageObservation> {
        let mut grouped: BTreeMap<(u64, EphemeralId), BTreeSet<u64>> = BTreeMap::new();
        for o in &self.observations {
            grouped
                .entry((o.tick / ticks_per_hour.max(1), o.id))
                .or_default()
                .insert(u64::from(o.station));
        }
        grouped
            .into_iter()
            .map(|((epoch, id), evidence)| LinkageObservation { epoch, id, evidence })
            .collect()
    }
}

/// One claimed device track: the ids believed to be one device, and every
/// sighting of them in time order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Track {
    pub ids: Vec<IdEpochRecord>,
    pub sightings: Vec<(Tick, u32)>,
}

impl Track {
    pub fn epochs(&self, ticks_per_hour: Tick) -> usize {
        let tph = ticks_per_hour.max(1);
        self.sightings
            .iter()
            .map(|s| s.0 / tph)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Consecutive-epoch (epoch, id) pairs this track asserts belong together.
    pub fn links(&self) -> Vec<Link> {
        self.ids
            .windows(2)
            .filter(|w| w[1].epoch == w[0].epoch + 1)
            .map(|w| (w[0], w[1]))
            .collect()
    }
}

/// P2: one track per fixed id. P3: ids are chained across epochs by the
/// linkage attack on station sets, one track per chain. P1/P1a: nothing.
pub fn track_broadcasts(
    log: &SnifferLog,
    kind: ProtocolKind,
    ticks_per_hour: Tick,
    theta: f64,
) -> (Vec<Track>, Linkage) {
    let tph = ticks_per_hour.max(1);
    let view = log.linkage_view(tph);
    match kind {
        ProtocolKind::P2 => {
            let mut by_id: BTreeMap<EphemeralId, Track> = BTreeMap::new();
            for o in &view {
                by_id
                    .entry(o.id)
                    .or_insert_with(|| Track { ids: Vec::new(), sightings: Vec::new() })
                    .ids
                    .push(IdEpochRecord { epoch: o.epoch, id: o.id });
            }
            for o in &log.observations {
                if let Some(t) = by_id.get_mut(&o.id) {
                    t.sightings.push((o.tick, o.station));
                }
            }
            (by_id.into_values().collect(), Linkage::default())
        }
        ProtocolKind::P3 => {
            let linkage = link_identifier_chains(&view, theta);
            let mut sightings: BTreeMap<IdEpochRecord, Vec<(Tick, u32)>> = BTreeMap::new();
            for o in &log.observations {
                sightings
                    .entry(IdEpochRecord { epoch: o.tick / tph, id: o.id })
                    .or_default()
                    .push((o.tick, o.station));
            }
            let tracks = linkage
                .partition
                .chains
                .iter()
                .map(|chain| Track {
                    ids: chain.clone(),
                    sightings: chain
                        .iter()
                        .flat_map(|r| sightings.get(r).into_iter().flatten().copied())
                        .collect(),
                })
                .collect();
            (tracks, linkage)
        }
        ProtocolKind::P1 | ProtocolKind::P1a => (Vec::new(), Linkage::default()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingScore {
    pub mean_track_epochs: f64,
    /// Per observed device: share of its sightings held by its best track.
    pub device_recall: f64,
    /// Cross-epoch continuity recovered, over links visible to the sniffers.
    pub links: AttackScore,
}

pub fn score_tracking(
    tracks: &[Track],
    log: &SnifferLog,
    devices: &[DeviceState],
    ticks_per_hour: Tick,
) -> TrackingScore {
    let tph = ticks_per_hour.max(1);
    let owner: BTreeMap<EphemeralId, AgentId> = devices
        .iter()
        .flat_map(|d| d.id_schedule.iter().map(move |r| (r.id, d.agent)))
        .collect();
    let mut sightings_of: BTreeMap<AgentId, usize> = BTreeMap::new();
    for o in &log.observations {
        if let Some(a) = owner.get(&o.id) {
            *sightings_of.entry(*a).or_default() += 1;
        }
    }
    let track_of: BTreeMap<EphemeralId, usize> = tracks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.ids.iter().map(move |r| (r.id, i)))
        .collect();
    let mut shared: BTreeMap<(AgentId, usize), usize> = BTreeMap::new();
    for o in &log.observations {
        if let (Some(a), Some(t)) = (owner.get(&o.id), track_of.get(&o.id)) {
            *shared.entry((*a, *t)).or_default() += 1;
        }
    }
    let mut best: BTreeMap<AgentId, usize> = BTreeMap::new();
    for ((a, _), n) in shared {
        let b = best.entry(a).or_default();
        *b = (*b).max(n);
    }
    let device_recall = if sightings_of.is_empty() {
        0.0
    } else {
        sightings_of
            .iter()
            .map(|(a, &total)| best.get(a).copied().unwrap_or(0) as f64 / total as f64)
            .sum::<f64>()
            / sightings_of.len() as f64
    };
    let mean_track_epochs = if tracks.is_empty() {
        0.0
    } else {
        tracks.iter().map(|t| t.epochs(tph) as f64).sum::<f64>() / tracks.len() as f64
    };

    let view = log.linkage_view(tph);
    let truth = observed_links(devices, &view);
    let claimed: BTreeSet<Link> = tracks.iter().flat_map(Track::links).collect();
    TrackingScore {
        mean_track_epochs,
        device_recall,
        links: score_links(&claimed, &truth),
    }
}
