//! Privacy and utility scores for one run, and cross-protocol tables.
//!
//! Empty denominators follow one convention everywhere: utility recall
//! and precision are 1 when there is nothing to find or nothing was
//! claimed, latency is 0 when nobody was notified, and attack rates are 0
//! when there are no targets.

mod compare;
pub mod format;

use std::collections::BTreeSet;

pub use compare::{compare_protocols, Aggregate, ComparisonTable, SeedOutcome};

use crate::adversary::{published_trajectories, AttackReport};
use crate::protocols::ProtocolRun;
use crate::world::{AgentId, ExposureIndex, SimulationTrace};
use crate::{Error, Result, Tick};

/// Answers to the six privacy questions for one run, as counts and rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrivacyReport {
    /// Personal-data atoms held by the authority (sum of the four below).
    pub q1_authority_items: u64,
    pub q1_trajectory_points: u64,
    pub q1_encounter_pairs: u64,
    pub q1_id_records: u64,
    pub q1_registry_entries: u64,
    /// Share of re-identification targets whose published trajectory was
    /// correctly named.
    pub q2_reid_recall: f64,
    pub q3_authority_knows_at_risk: bool,
    pub q3_known_at_risk_count: u64,
    /// Share of reporting users identified as infected by another user.
    pub q4_user_inference_rate: f64,
    /// Mean, over users, of other users' trajectory points received plus
    /// infected contacts identified.
    pub q5_personal_items_per_user: f64,
    pub q6_mean_track_epochs: f64,
    pub q6_linkage_recall: f64,
    pub q6_tracking_recall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityReport {
    pub recall: f64,
    pub precision: f64,
    pub mean_latency_ticks: f64,
}

fn ratio(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

fn check_runs(run: &ProtocolRun, trace: &SimulationTrace) -> Result<()> {
    run.ensure_same_run(trace.run_id())?;
    if run.devices.len() != trace.n_agents() {
        return Err(Error::InconsistentTrace(format!(
            "run has {} devices but the trace has {} agents",
            run.devices.len(),
            trace.n_agents()
        )));
    }
    Ok(())
}

pub fn privacy_report(
    run: &ProtocolRun,
    attacks: &AttackReport,
    trace: &SimulationTrace,
) -> Result<PrivacyReport> {
    check_runs(run, trace)?;
    run.ensure_same_run(attacks.run_id)?;
    let items = run.authority.items();
    let reported = trace.reported();

    let identified = attacks.identified_infected();
    let q4 = ratio(identified.intersection(&reported).count(), reported.len(), 0.0);

    let published = published_trajectories(run);
    let total_points: usize = published.iter().map(|(_, t)| t.len()).sum();
    let n = run.devices.len();
    let q5 = if n == 0 {
        0.0
    } else {
        let mut sum = 0usize;
        for d in &run.devices {
            let own: usize = published
                .iter()
                .filter(|(p, _)| *p == d.pseudonym)
                .map(|(_, t)| t.len())
                .sum();
            let edges = attacks.inferred.get(&d.agent).map_or(0, |s| s.len());
            sum += total_points - own + edges;
        }
        sum as f64 / n as f64
    };

    let tracking = attacks.tracking(run)?;
    Ok(PrivacyReport {
        q1_authority_items: items.total(),
        q1_trajectory_points: items.trajectory_points,
        q1_encounter_pairs: items.encounter_pairs,
        q1_id_records: items.id_records,
        q1_registry_entries: items.registry_entries,
        q2_reid_recall: attacks.reidentification(run)?.recall,
        q3_authority_knows_at_risk: !run.authority.known_at_risk.is_empty(),
        q3_known_at_risk_count: run.authority.known_at_risk.len() as u64,
        q4_user_inference_rate: q4,
        q5_personal_items_per_user: q5,
        q6_mean_track_epochs: tracking.mean_track_epochs,
        q6_linkage_recall: tracking.links.recall,
        q6_tracking_recall: tracking.device_recall,
    })
}

/// Everyone who met a reporter inside that report's window, with the tick
/// of the earliest such report.
pub fn ground_truth_at_risk(
    trace: &SimulationTrace,
    recent_window: Tick,
) -> Result<std::collections::BTreeMap<AgentId, Tick>> {
    let index = ExposureIndex::new(trace);
    let mut first = std::collections::BTreeMap::new();
    for r in &trace.report_events {
        let lo = (r.tick + 1).saturating_sub(recent_window.max(1));
        for a in index.exposures(r.agent, lo..r.tick + 1)? {
            first.entry(a).or_insert(r.tick);
        }
    }
    Ok(first)
}

pub fn utility_report(run: &ProtocolRun, trace: &SimulationTrace) -> Result<UtilityReport> {
    check_runs(run, trace)?;
    let truth = ground_truth_at_risk(trace, run.context.recent_window)?;
    let notified = run.notification_times();
    let exposed: BTreeSet<AgentId> = truth.keys().copied().collect();
    let hit: Vec<AgentId> = notified.keys().filter(|a| exposed.contains(a)).copied().collect();
    let latency = if hit.is_empty() {
        0.0
    } else {
        hit.iter()
            .map(|a| notified[a].saturating_sub(truth[a]) as f64)
            .sum::<f64>()
            / hit.len() as f64
    };
    Ok(UtilityReport {
        recall: ratio(hit.len(), exposed.len(), 1.0),
        precision: ratio(hit.len(), notified.len(), 1.0),
        mean_latency_ticks: latency,
    })
}
