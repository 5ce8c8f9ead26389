use std::collections::HashSet;

use rand::Rng;

use super::{
    EphemeralId, IdEpochRecord, Message, ProtocolContext, ProtocolKind, Pseudonym,
    TrajectoryOwner, UploadPurpose,
};
use crate::world::{AgentId, Location, ReportEvent, Trajectory};
use crate::{Error, Result, Tick};

/// A broadcast heard this tick. `sender` is ground truth, used only to
/// sample what the user remembers; it never reaches `encounter_log`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nearby {
    pub id: Option<EphemeralId>,
    pub sender: AgentId,
}

/// An encounter tick where the user knows who they were with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Recognition {
    pub tick: Tick,
    /// The id heard at that moment; `None` under P1/P1a.
    pub observed: Option<EphemeralId>,
    pub peer: AgentId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceState {
    pub agent: AgentId,
    pub kind: ProtocolKind,
    pub pseudonym: Pseudonym,
    pub own_trajectory: Trajectory,
    pub id_schedule: Vec<IdEpochRecord>,
    /// Sorted by tick.
    pub encounter_log: Vec<(Tick, EphemeralId)>,
    pub recognized_peers: Vec<Recognition>,
    pub at_risk: bool,
    pub notified_tick: Option<Tick>,
}

impl DeviceState {
    pub fn new(
        agent: AgentId,
        kind: ProtocolKind,
        pseudonym: Pseudonym,
        id_schedule: Vec<IdEpochRecord>,
    ) -> Self {
        Self {
            agent,
            kind,
            pseudonym,
            own_trajectory: Trajectory::new(),
            id_schedule,
            encounter_log: Vec::new(),
            recognized_peers: Vec::new(),
            at_risk: false,
            notified_tick: None,
        }
    }

    pub fn id_for_epoch(&self, epoch: u64) -> Option<EphemeralId> {
        match self.id_schedule.get(epoch as usize) {
            Some(r) if r.epoch == epoch => Some(r.id),
            _ => self
                .id_schedule
                .binary_search_by_key(&epoch, |r| r.epoch)
                .ok()
                .map(|i| self.id_schedule[i].id),
        }
    }

    pub fn current_id(&self, ctx: &ProtocolContext, tick: Tick) -> Option<EphemeralId> {
        if !self.kind.uses_identifiers() {
            return None;
        }
        self.id_for_epoch(ctx.epoch(tick))
    }

    /// Records this tick and returns the device's own broadcast, if any.
    /// Recognition draws happen once per heard broadcast, for every kind,
    /// so all four protocols see the same memories on the same trace.
    pub fn device_tick<R: Rng>(
        &mut self,
        ctx: &ProtocolContext,
        tick: Tick,
        own_location: Location,
        nearby: &[Nearby],
        rng: &mut R,
    ) -> Option<Message> {
        for n in nearby {
            if self.kind.uses_identifiers() {
                if let Some(id) = n.id {
                    self.encounter_log.push((tick, id));
                }
            }
            if rng.random_bool(ctx.p_recognize) {
                self.recognized_peers.push(Recognition {
                    tick,
                    observed: n.id,
                    peer: n.sender,
                });
            }
        }
        match self.kind {
            ProtocolKind::P1 => {
                self.own_trajectory.push(tick, own_location);
                None
            }
            ProtocolKind::P1a => {
                self.own_trajectory.push(tick, own_location);
                Some(Message::TrajectoryUpload {
                    owner: TrajectoryOwner::Agent(self.agent),
                    purpose: UploadPurpose::Enrollment,
                    trajectory: Trajectory::from_points(vec![(tick, own_location)])
                        .expect("single point"),
                })
            }
            ProtocolKind::P2 | ProtocolKind::P3 => self
                .current_id(ctx, tick)
                .map(|id| Message::Broadcast { tick, id }),
        }
    }

    /// Entries of `encounter_log` inside the check window ending at `now`.
    pub fn recent_encounters(&self, ctx: &ProtocolContext, now: Tick) -> &[(Tick, EphemeralId)] {
        let w = ctx.window(now);
        let lo = self.encounter_log.partition_point(|e| e.0 < *w.start());
        let hi = self.encounter_log.partition_point(|e| e.0 <= *w.end());
        &self.encounter_log[lo..hi]
    }

    pub fn report_infection(&self, ctx: &ProtocolContext, report: ReportEvent) -> Result<Message> {
        if report.agent != self.agent {
            return Err(Error::NotReported {
                agent: self.agent,
                tick: report.tick,
            });
        }
        let now = report.tick;
        Ok(match self.kind {
            ProtocolKind::P1 => Message::TrajectoryUpload {
                owner: TrajectoryOwner::Pseudonym(self.pseudonym),
                purpose: UploadPurpose::InfectionReport,
                trajectory: self.own_trajectory.clone(),
            },
            ProtocolKind::P1a => Message::TrajectoryUpload {
                owner: TrajectoryOwner::Agent(self.agent),
                purpose: UploadPurpose::InfectionReport,
                trajectory: self.own_trajectory.clone(),
            },
            ProtocolKind::P2 => {
                let mut ids: Vec<EphemeralId> = self
                    .recent_encounters(ctx, now)
                    .iter()
                    .map(|e| e.1)
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                Message::EncounterReport {
                    pseudonym: self.pseudonym,
                    ids,
                }
            }
            ProtocolKind::P3 => {
                let w = ctx.window(now);
                let (first, last) = (ctx.epoch(*w.start()), ctx.epoch(*w.end()));
                Message::UsedIdReport {
                    records: self
                        .id_schedule
                        .iter()
                        .filter(|r| (first..=last).contains(&r.epoch))
                        .copied()
                        .collect(),
                }
            }
        })
    }

    pub fn receive_notification(&mut self, tick: Tick) {
        self.mark_at_risk(tick);
    }

    fn mark_at_risk(&mut self, tick: Tick) {
        if !self.at_risk {
            self.at_risk = true;
            self.notified_tick = Some(tick);
        }
    }

    /// Local risk check against a publication received at `now`.
    pub fn check_exposure(
        &mut self,
        ctx: &ProtocolContext,
        now: Tick,
        publication: &Message,
    ) -> Result<bool> {
        let verdict = match (self.kind, publication) {
            (ProtocolKind::P1, Message::PublishTrajectories { trajectories }) => {
                trajectories.iter().any(|(p, traj)| {
                    *p != self.pseudonym
                        && traj.meets(&self.own_trajectory, ctx.window(now), ctx.proximity_radius)
                })
            }
            (ProtocolKind::P3, Message::PublishInfectedIds { ids }) => {
                let published: HashSet<EphemeralId> = ids.iter().copied().collect();
                self.recent_encounters(ctx, now)
                    .iter()
                    .any(|e| published.contains(&e.1))
            }
            (kind, msg) => return Err(msg.illegal(kind)),
        };
        if verdict {
            self.mark_at_risk(now);
        }
        Ok(verdict)
    }

    /// True when every field outside this kind's column is empty.
    pub fn respects_column(&self) -> bool {
        if self.kind.uses_identifiers() {
            self.own_trajectory.is_empty()
        } else {
            self.id_schedule.is_empty() && self.encounter_log.is_empty()
        }
    }
}
