use rayon::prelude::*;

use super::{privacy_report, utility_report, PrivacyReport, UtilityReport};
use crate::adversary::{run_attacks, AttackParams};
use crate::protocols::{run_protocol, ProtocolKind, ProtocolOptions};
use crate::world::{run_simulation, WorldConfig};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub kind: ProtocolKind,
    pub privacy: PrivacyReport,
    pub utility: UtilityReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, min: 0.0, max: 0.0 };
        }
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// All four protocols on the same trace for every seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    /// Sorted by protocol, then by position in `seeds`.
    pub outcomes: Vec<SeedOutcome>,
}

impl ComparisonTable {
    pub const METRICS: [&'static str; 16] = [
        "q1_authority_items",
        "q1_trajectory_points",
        "q1_encounter_pairs",
        "q1_id_records",
        "q1_registry_entries",
        "q2_reid_recall",
        "q3_authority_knows_at_risk",
        "q3_known_at_risk_count",
        "q4_user_inference_rate",
        "q5_personal_items_per_user",
        "q6_mean_track_epochs",
        "q6_linkage_recall",
        "q6_tracking_recall",
        "utility_recall",
        "utility_precision",
        "utility_mean_latency_ticks",
    ];

    pub fn metric_values(p: &PrivacyReport, u: &UtilityReport) -> [f64; 16] {
        [
            p.q1_authority_items as f64,
            p.q1_trajectory_points as f64,
            p.q1_encounter_pairs as f64,
            p.q1_id_records as f64,
            p.q1_registry_entries as f64,
            p.q2_reid_recall,
            if p.q3_authority_knows_at_risk { 1.0 } else { 0.0 },
            p.q3_known_at_risk_count as f64,
            p.q4_user_inference_rate,
            p.q5_personal_items_per_user,
            p.q6_mean_track_epochs,
            p.q6_linkage_recall,
            p.q6_tracking_recall,
            u.recall,
            u.precision,
            u.mean_latency_ticks,
        ]
    }

    pub fn outcomes_for(&self, kind: ProtocolKind) -> impl Iterator<Item = &SeedOutcome> {
        self.outcomes.iter().filter(move |o| o.kind == kind)
    }

    /// Per protocol, one aggregate per entry of [`Self::METRICS`].
    pub fn rows(&self) -> Vec<(ProtocolKind, Vec<Aggregate>)> {
        ProtocolKind::ALL
            .iter()
            .map(|&kind| {
                let per_seed: Vec<[f64; 16]> = self
                    .outcomes_for(kind)
                    .map(|o| Self::metric_values(&o.privacy, &o.utility))
                    .collect();
                let aggs = (0..Self::METRICS.len())
                    .map(|m| Aggregate::of(&per_seed.iter().map(|v| v[m]).collect::<Vec<_>>()))
                    .collect();
                (kind, aggs)
            })
            .collect()
    }
}

/// Runs every protocol on every seed's trace. Seeds run in parallel; the
/// result does not depend on scheduling.
pub fn compare_protocols(
    config: &WorldConfig,
    seeds: &[u64],
    options: &ProtocolOptions,
    attack: &AttackParams,
) -> Result<ComparisonTable> {
    let per_seed: Vec<Vec<SeedOutcome>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = WorldConfig { seed, ..config.clone() };
            let trace = run_simulation(&cfg)?;
            ProtocolKind::ALL
                .iter()
                .map(|&kind| {
                    let run = run_protocol(&trace, kind, options)?;
                    let attacks = run_attacks(&trace, &run, attack)?;
                    Ok(SeedOutcome {
                        seed,
                        kind,
                        privacy: privacy_report(&run, &attacks, &trace)?,
                        utility: utility_report(&run, &trace)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(seeds.len() * 4);
    for kind in ProtocolKind::ALL {
        outcomes.extend(per_seed.iter().flatten().filter(|o| o.kind == kind).copied());
    }
    Ok(ComparisonTable {
        seeds: seeds.to_vec(),
        outcomes,
    })
}
