//! Attacks on what each player legitimately holds, scored against truth.
//!
//! Three roles, each confined to its own view:
//!
//! * curious authority: the [`AuthorityState`] only, attacked by id-chain
//!   linkage ([`link_identifier_chains`]);
//! * curious user: one [`DeviceState`], its memories and the publications
//!   it received ([`infer_infected_peers`], [`reidentify_trajectories`]
//!   with side knowledge about named people);
//! * eavesdropper: a [`SnifferLog`] from passive stations
//!   ([`track_broadcasts`]).
//!
//! Scores follow one convention: precision is 1 when nothing is claimed,
//! recall is 0 when there is nothing to find.
//!
//! [`DeviceState`]: crate::protocols::DeviceState

pub mod format;
mod inference;
mod linkage;
mod reid;
mod sniffer;

use std::collections::{BTreeMap, BTreeSet};

pub use inference::infer_infected_peers;
pub use linkage::{
    jaccard, link_identifier_chains, observed_links, population_links, score_links, shuffled_view,
    ChainPartition, Link, LinkTruth, Linkage, LinkageObservation, NO_EVIDENCE,
};
pub use reid::{
    published_trajectories, reidentify_trajectories, sample_side_knowledge, score_reidentification,
    SideKnowledge,
};
pub use sniffer::{place_stations, score_tracking, track_broadcasts, Observation, SnifferLog, Track, TrackingScore};

use crate::protocols::{AuthorityState, ProtocolKind, ProtocolRun, Pseudonym};
use crate::rng::{self, Stream};
use crate::world::{AgentId, Location, RunId, SimulationTrace};
use crate::{Result, Tick};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackScore {
    pub precision: f64,
    pub recall: f64,
    pub n_targets: usize,
    /// Expected recall of uniform random guessing.
    pub baseline: f64,
}

impl AttackScore {
    pub fn from_counts(correct: usize, claimed: usize, targets: usize, baseline: f64) -> Self {
        Self {
            precision: if claimed == 0 {
                1.0
            } else {
                correct as f64 / claimed as f64
            },
            recall: if targets == 0 {
                0.0
            } else {
                correct as f64 / targets as f64
            },
            n_targets: targets,
            baseline,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StationSpec {
    /// This many distinct cells drawn from the adversary stream.
    Random(usize),
    Fixed(Vec<Location>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackParams {
    pub theta: f64,
    pub k_anchors: usize,
    pub stations: StationSpec,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            k_anchors: 2,
            stations: StationSpec::Random(10),
        }
    }
}

/// Every attack's raw output for one protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub run_id: RunId,
    pub kind: ProtocolKind,
    pub theta: f64,
    pub side: SideKnowledge,
    pub reidentified: BTreeMap<Pseudonym, AgentId>,
    /// Per user, the infected people they identified. Users who learned
    /// nothing are absent.
    pub inferred: BTreeMap<AgentId, BTreeSet<AgentId>>,
    pub sniffer: SnifferLog,
    pub tracks: Vec<Track>,
    pub sniffer_linkage: Linkage,
    pub authority_linkage: Linkage,
}

/// The authority's linkage view: each id it holds, with no co-observation
/// evidence, since no protocol sends it who-heard-whom by epoch.
pub fn authority_linkage_view(auth: &AuthorityState) -> Vec<LinkageObservation> {
    auth.received_infected_id_sets
        .iter()
        .flatten()
        .map(|r| LinkageObservation {
            epoch: r.epoch,
            id: r.id,
            evidence: BTreeSet::new(),
        })
        .collect()
}

/// Runs every attack. The trace is used only to stand in for the physical
/// world: where stations hear broadcasts, and the true points that make up
/// the attacker's side knowledge.
pub fn run_attacks(
    trace: &SimulationTrace,
    run: &ProtocolRun,
    params: &AttackParams,
) -> Result<AttackReport> {
    run.ensure_same_run(trace.run_id())?;
    let kind = run.kind();
    let ctx = &run.context;

    // P1 publishes each reporter's recent trajectory; the attacker knows a
    // few true points of that same stretch of the target's life.
    let targets: BTreeMap<_, _> = if kind == ProtocolKind::P1 {
        trace
            .report_events
            .iter()
            .map(|r| (r.agent, ctx.window(r.tick)))
            .collect()
    } else {
        BTreeMap::new()
    };
    let side = sample_side_knowledge(trace, &targets, params.k_anchors)?;
    let reidentified = reidentify_trajectories(&published_trajectories(run), &side);

    let publications: Vec<_> = run.publications().map(|(_, m)| m).collect();
    let mut inferred = BTreeMap::new();
    for d in &run.devices {
        let found: BTreeSet<AgentId> = publications
            .iter()
            .flat_map(|m| infer_infected_peers(ctx, d, m))
            .collect();
        if !found.is_empty() {
            inferred.insert(d.agent, found);
        }
    }

    let stations = match &params.stations {
        StationSpec::Random(n) => {
            place_stations(&trace.config, *n, &mut rng::stream(trace.config.seed, Stream::Adversary))
        }
        StationSpec::Fixed(v) => v.clone(),
    };
    let sniffer = SnifferLog::capture(trace, run, stations)?;
    let (tracks, sniffer_linkage) = track_broadcasts(&sniffer, kind, ctx.ticks_per_hour, params.theta);
    let authority_linkage = if kind == ProtocolKind::P3 {
        link_identifier_chains(&authority_linkage_view(&run.authority), params.theta)
    } else {
        Linkage::default()
    };

    Ok(AttackReport {
        run_id: run.run_id,
        kind,
        theta: params.theta,
        side,
        reidentified,
        inferred,
        sniffer,
        tracks,
        sniffer_linkage,
        authority_linkage,
    })
}

impl AttackReport {
    /// Agents identified as infected by at least one other user.
    pub fn identified_infected(&self) -> BTreeSet<AgentId> {
        self.inferred
            .iter()
            .flat_map(|(user, peers)| peers.iter().filter(move |p| *p != user).copied())
            .collect()
    }

    pub fn tracking(&self, run: &ProtocolRun) -> Result<TrackingScore> {
        run.ensure_same_run(self.run_id)?;
        Ok(score_tracking(
            &self.tracks,
            &self.sniffer,
            &run.devices,
            run.context.ticks_per_hour,
        ))
    }

    pub fn reidentification(&self, run: &ProtocolRun) -> Result<AttackScore> {
        run.ensure_same_run(self.run_id)?;
        let truth: BTreeMap<Pseudonym, AgentId> =
            run.devices.iter().map(|d| (d.pseudonym, d.agent)).collect();
        let targets: BTreeSet<AgentId> = self.side.anchors.keys().copied().collect();
        Ok(score_reidentification(
            &self.reidentified,
            &truth,
            &targets,
            published_trajectories(run).len(),
        ))
    }

    /// Authority-side linkage against every device's rotation links.
    pub fn authority_linkage_score(&self, run: &ProtocolRun) -> Result<AttackScore> {
        run.ensure_same_run(self.run_id)?;
        Ok(score_links(
            &self.authority_linkage.partition.links(),
            &population_links(&run.devices),
        ))
    }

    pub fn epochs_tracked(&self, ticks_per_hour: Tick) -> Vec<usize> {
        self.tracks.iter().map(|t| t.epochs(ticks_per_hour)).collect()
    }
}
