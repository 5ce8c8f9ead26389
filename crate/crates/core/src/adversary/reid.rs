use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rand::Rng;

use super::AttackScore;
use crate::protocols::{Message, ProtocolRun, Pseudonym};
use crate::rng;
use crate::world::{AgentId, Location, SimulationTrace, Trajectory};
use crate::{Result, Tick};

/// True (tick, place) points the attacker knows about named people.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SideKnowledge {
    pub k_anchors: usize,
    pub anchors: BTreeMap<AgentId, Vec<(Tick, Location)>>,
}

/// Samples up to `k` distinct true points of each target's trajectory
/// within the target's span (the stretch of time the attack is about).
/// Each target draws from its own stream as a partial shuffle, so the
/// anchors for `k` are a prefix of the anchors for any larger `k`.
pub fn sample_side_knowledge(
    trace: &SimulationTrace,
    targets: &BTreeMap<AgentId, RangeInclusive<Tick>>,
    k: usize,
) -> Result<SideKnowledge> {
    let mut anchors = BTreeMap::new();
    for (&t, span) in targets {
        let pts = trace.trajectory(t)?.within(span.clone());
        let mut rng = rng::target_stream(trace.config.seed, t.0);
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        let take = k.min(pts.len());
        for i in 0..take {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        anchors.insert(t, idx[..take].iter().map(|&i| pts[i]).collect());
    }
    Ok(SideKnowledge {
        k_anchors: k,
        anchors,
    })
}

/// Every pseudonymous trajectory the authority published to users.
pub fn published_trajectories(run: &ProtocolRun) -> Vec<(Pseudonym, Trajectory)> {
    run.publications()
        .filter_map(|(_, m)| match m {
            Message::PublishTrajectories { trajectories } => Some(trajectories.iter().cloned()),
            _ => None,
        })
        .flatten()
        .collect()
}

/// Claims pseudonym `p` for target `t` when `p`'s trajectory is the only
/// published one containing every anchor of `t`. A pseudonym claimed by
/// two targets is dropped for both.
pub fn reidentify_trajectories(
    published: &[(Pseudonym, Trajectory)],
    side: &SideKnowledge,
) -> BTreeMap<Pseudonym, AgentId> {
    if side.k_anchors == 0 {
        return BTreeMap::new();
    }
    let mut claims: BTreeMap<Pseudonym, Vec<AgentId>> = BTreeMap::new();
    for (&target, anchors) in &side.anchors {
        if anchors.is_empty() {
            continue;
        }
        let mut hits = published
            .iter()
            .filter(|(_, traj)| anchors.iter().all(|&(t, loc)| traj.at(t) == Some(loc)));
        if let (Some((p, _)), None) = (hits.next(), hits.next()) {
            claims.entry(*p).or_default().push(target);
        }
    }
    claims
        .into_iter()
        .filter_map(|(p, ts)| (ts.len() == 1).then(|| (p, ts[0])))
        .collect()
}

/// Precision and recall of pseudonym claims against `truth`, over
/// `targets` re-identification targets. Baseline: a uniform guess among
/// the published pseudonyms.
pub fn score_reidentification(
    claims: &BTreeMap<Pseudonym, AgentId>,
    truth: &BTreeMap<Pseudonym, AgentId>,
    targets: &BTreeSet<AgentId>,
    n_published: usize,
) -> AttackScore {
    let correct = claims
        .iter()
        .filter(|(p, a)| truth.get(p) == Some(a) && targets.contains(a))
        .count();
    let baseline = if n_published == 0 {
        0.0
    } else {
        1.0 / n_published as f64
    };
    AttackScore::from_counts(correct, claims.len(), targets.len(), baseline)
}
