use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::AttackScore;
use crate::protocols::{DeviceState, EphemeralId, IdEpochRecord};

/// One identifier as seen in one epoch, with whatever evidence the
/// observer has about it: co-observed ids, or the stations that heard it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkageObservation {
    pub epoch: u64,
    pub id: EphemeralId,
    pub evidence: BTreeSet<u64>,
}

/// Claimed per-device id sequences. Each id sits in at most one chain and
/// epochs increase along a chain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainPartition {
    pub chains: Vec<Vec<IdEpochRecord>>,
}

/// A claimed continuity between consecutive epochs.
pub type Link = (IdEpochRecord, IdEpochRecord);

impl ChainPartition {
    pub fn links(&self) -> BTreeSet<Link> {
        self.chains
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[0], w[1])))
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.chains.iter().all(|c| {
            c.windows(2).all(|w| w[0].epoch < w[1].epoch) && c.iter().all(|r| seen.insert(*r))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Linkage {
    pub partition: ChainPartition,
    /// Set when the view cannot support any linking at all.
    pub diagnostic: Option<String>,
}

pub const NO_EVIDENCE: &str = "no co-observation data in view; linkage degenerates to chance";

pub fn jaccard(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn group(view: &[LinkageObservation]) -> BTreeMap<u64, BTreeMap<EphemeralId, BTreeSet<u64>>> {
    let mut by_epoch: BTreeMap<u64, BTreeMap<EphemeralId, BTreeSet<u64>>> = BTreeMap::new();
    for o in view {
        by_epoch
            .entry(o.epoch)
            .or_default()
            .entry(o.id)
            .or_default()
            .extend(o.evidence.iter().copied());
    }
    by_epoch
}

/// Greedy epoch-to-epoch matching on Jaccard continuity. Candidate links
/// are taken best score first, ties to the smaller ids; a link needs a
/// score of at least `theta` (and above zero). Unlinked ids come back as
/// one-element chains.
pub fn link_identifier_chains(view: &[LinkageObservation], theta: f64) -> Linkage {
    let by_epoch = group(view);
    if by_epoch.values().flat_map(|m| m.values()).all(BTreeSet::is_empty) {
        return Linkage {
            partition: ChainPartition::default(),
            diagnostic: Some(NO_EVIDENCE.to_string()),
        };
    }

    let mut next: BTreeMap<IdEpochRecord, IdEpochRecord> = BTreeMap::new();
    let mut has_prev: BTreeSet<IdEpochRecord> = BTreeSet::new();
    for (&epoch, here) in &by_epoch {
        let Some(there) = by_epoch.get(&(epoch + 1)) else {
            continue;
        };
        let mut candidates = Vec::new();
        for (&a, ea) in here {
            for (&b, eb) in there {
                let s = jaccard(ea, eb);
                if s > 0.0 && s >= theta {
                    candidates.push((s, a, b));
                }
            }
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, a, b) in candidates {
            let ra = IdEpochRecord { epoch, id: a };
            let rb = IdEpochRecord { epoch: epoch + 1, id: b };
            if !next.contains_key(&ra) && !has_prev.contains(&rb) {
                next.insert(ra, rb);
                has_prev.insert(rb);
            }
        }
    }

    let mut chains = Vec::new();
    for (&epoch, ids) in &by_epoch {
        for &id in ids.keys() {
            let start = IdEpochRecord { epoch, id };
            if has_prev.contains(&start) {
                continue;
            }
            let mut chain = vec![start];
            while let Some(&n) = next.get(chain.last().expect("non-empty")) {
                chain.push(n);
            }
            chains.push(chain);
        }
    }
    Linkage {
        partition: ChainPartition { chains },
        diagnostic: None,
    }
}

/// Control view: within each epoch the evidence sets are dealt back out
/// to the ids in random order, destroying any real continuity.
pub fn shuffled_view<R: Rng>(view: &[LinkageObservation], rng: &mut R) -> Vec<LinkageObservation> {
    let mut out = Vec::new();
    for (epoch, ids) in group(view) {
        let mut evidence: Vec<BTreeSet<u64>> = ids.values().cloned().collect();
        evidence.shuffle(rng);
        out.extend(
            ids.keys()
                .zip(evidence)
                .map(|(&id, evidence)| LinkageObservation { epoch, id, evidence }),
        );
    }
    out
}

/// The true consecutive-epoch links in some population, with the expected
/// recall of uniformly random matching over that population.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkTruth {
    pub links: BTreeSet<Link>,
    pub baseline: f64,
}

fn truth_over(
    devices: &[DeviceState],
    keep: impl Fn(&IdEpochRecord) -> bool,
) -> LinkTruth {
    let mut per_epoch: BTreeMap<u64, usize> = BTreeMap::new();
    let mut links = BTreeSet::new();
    for d in devices {
        let kept: Vec<IdEpochRecord> = d.id_schedule.iter().filter(|r| keep(r)).copied().collect();
        for r in &kept {
            *per_epoch.entry(r.epoch).or_default() += 1;
        }
        links.extend(
            kept.windows(2)
                .filter(|w| w[1].epoch == w[0].epoch + 1)
                .map(|w| (w[0], w[1])),
        );
    }
    let baseline = if links.is_empty() {
        0.0
    } else {
        links
            .iter()
            .map(|(a, b)| 1.0 / per_epoch[&a.epoch].max(per_epoch[&b.epoch]) as f64)
            .sum::<f64>()
            / links.len() as f64
    };
    LinkTruth { links, baseline }
}

/// Every device's rotation links: what an observer of the whole
/// population would have to recover.
pub fn population_links(devices: &[DeviceState]) -> LinkTruth {
    truth_over(devices, |_| true)
}

/// Rotation links whose both ends appear in `view`.
pub fn observed_links(devices: &[DeviceState], view: &[LinkageObservation]) -> LinkTruth {
    let seen: BTreeSet<IdEpochRecord> = view
        .iter()
        .map(|o| IdEpochRecord {
            epoch: o.epoch,
            id: o.id,
        })
        .collect();
    truth_over(devices, |r| seen.contains(r))
}

pub fn score_links(claimed: &BTreeSet<Link>, truth: &LinkTruth) -> AttackScore {
    let correct = claimed.intersection(&truth.links).count();
    AttackScore::from_counts(correct, claimed.len(), truth.links.len(), truth.baseline)
}
