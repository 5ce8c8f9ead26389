use std::collections::{BTreeMap, BTreeSet};

use super::{
    EphemeralId, Endpoint, IdEpochRecord, Message, ProtocolContext, ProtocolKind, Pseudonym,
    TrajectoryOwner, UploadPurpose,
};
use crate::world::{AgentId, Trajectory};
use crate::{Error, Result, Tick};

/// Everything the authority holds. Contents are exactly what it was sent,
/// plus the registry it created when issuing ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthorityState {
    pub kind: ProtocolKind,
    pub registry: Option<BTreeMap<EphemeralId, AgentId>>,
    pub received_trajectories: BTreeMap<TrajectoryOwner, Trajectory>,
    pub received_encounter_ids: Vec<(Pseudonym, EphemeralId)>,
    pub received_infected_id_sets: Vec<Vec<IdEpochRecord>>,
    pub known_at_risk: BTreeSet<AgentId>,
}

/// Personal-data atoms held by the authority, by category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuthorityItems {
    pub trajectory_points: u64,
    pub encounter_pairs: u64,
    pub id_records: u64,
    pub registry_entries: u64,
}

impl AuthorityItems {
    pub fn total(&self) -> u64 {
        self.trajectory_points + self.encounter_pairs + self.id_records + self.registry_entries
    }
}

impl AuthorityState {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            registry: None,
            received_trajectories: BTreeMap::new(),
            received_encounter_ids: Vec::new(),
            received_infected_id_sets: Vec::new(),
            known_at_risk: BTreeSet::new(),
        }
    }

    /// Processes one inbound message and returns what the authority sends
    /// out in response, addressed.
    pub fn ingest(
        &mut self,
        ctx: &ProtocolContext,
        tick: Tick,
        msg: &Message,
    ) -> Result<Vec<(Endpoint, Message)>> {
        let kind = self.kind;
        match (kind, msg) {
            (
                ProtocolKind::P1,
                Message::TrajectoryUpload {
                    owner: TrajectoryOwner::Pseudonym(p),
                    purpose: UploadPurpose::InfectionReport,
                    trajectory,
                },
            ) => {
                self.received_trajectories
                    .insert(TrajectoryOwner::Pseudonym(*p), trajectory.clone());
                Ok(vec![(
                    Endpoint::Everyone,
                    Message::PublishTrajectories {
                        trajectories: vec![(*p, trajectory.clone())],
                    },
                )])
            }
            (
                ProtocolKind::P1a,
                Message::TrajectoryUpload {
                    owner: owner @ TrajectoryOwner::Agent(reporter),
                    purpose,
                    trajectory,
                },
            ) => {
                let held = self.received_trajectories.entry(*owner).or_default();
                match purpose {
                    UploadPurpose::Enrollment => {
                        held.extend_from(trajectory);
                        return Ok(Vec::new());
                    }
                    UploadPurpose::InfectionReport => {
                        let new_tail: Vec<_> = trajectory
                            .points()
                            .iter()
                            .filter(|p| held.points().last().is_none_or(|l| p.0 > l.0))
                            .copied()
                            .collect();
                        for (t, loc) in new_tail {
                            held.push(t, loc);
                        }
                    }
                }
                let reporter_traj = &self.received_trajectories[owner];
                let mut out = Vec::new();
                for (other, traj) in &self.received_trajectories {
                    let TrajectoryOwner::Agent(agent) = *other else {
                        continue;
                    };
                    if agent != *reporter
                        && reporter_traj.meets(traj, ctx.window(tick), ctx.proximity_radius)
                    {
                        out.push(agent);
                    }
                }
                self.known_at_risk.extend(out.iter().copied());
                Ok(out
                    .into_iter()
                    .map(|agent| (Endpoint::Device(agent), Message::DirectNotify { agent }))
                    .collect())
            }
            (ProtocolKind::P2, Message::EncounterReport { pseudonym, ids }) => {
                let registry = self.registry.as_ref();
                let mut resolved = BTreeSet::new();
                for id in ids {
                    let agent = registry
                        .and_then(|r| r.get(id))
                        .ok_or(Error::UnknownIdentifier(*id))?;
                    resolved.insert(*agent);
                }
                self.received_encounter_ids
                    .extend(ids.iter().map(|id| (*pseudonym, *id)));
                self.known_at_risk.extend(resolved.iter().copied());
                Ok(resolved
                    .into_iter()
                    .map(|agent| (Endpoint::Device(agent), Message::DirectNotify { agent }))
                    .collect())
            }
            (ProtocolKind::P3, Message::UsedIdReport { records }) => {
                self.received_infected_id_sets.push(records.clone());
                Ok(vec![(
                    Endpoint::Everyone,
                    Message::PublishInfectedIds {
                        ids: records.iter().map(|r| r.id).collect(),
                    },
                )])
            }
            (kind, msg) => Err(msg.illegal(kind)),
        }
    }

    pub fn items(&self) -> AuthorityItems {
        AuthorityItems {
            trajectory_points: self
                .received_trajectories
                .values()
                .map(|t| t.len() as u64)
                .sum(),
            encounter_pairs: self.received_encounter_ids.len() as u64,
            id_records: self
                .received_infected_id_sets
                .iter()
                .map(|s| s.len() as u64)
                .sum(),
            registry_entries: self.registry.as_ref().map_or(0, |r| r.len() as u64),
        }
    }

    /// True when every field outside this kind's column is empty.
    pub fn respects_column(&self) -> bool {
        let kind = self.kind;
        let traj_ok = kind.uses_trajectories() || self.received_trajectories.is_empty();
        let pairs_ok = kind == ProtocolKind::P2 || self.received_encounter_ids.is_empty();
        let sets_ok = kind == ProtocolKind::P3 || self.received_infected_id_sets.is_empty();
        let reg_ok = kind.uses_identifiers() || self.registry.is_none();
        let risk_ok =
            matches!(kind, ProtocolKind::P1a | ProtocolKind::P2) || self.known_at_risk.is_empty();
        traj_ok && pairs_ok && sets_ok && reg_ok && risk_ok
    }
}
