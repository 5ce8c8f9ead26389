//! Device and authority state machines for the four tracing protocols.
//!
//! | kind | device keeps        | on report, device sends        | authority then                         |
//! |------|---------------------|--------------------------------|----------------------------------------|
//! | P1   | own trajectory      | pseudonymous trajectory        | publishes it to every user             |
//! | P1a  | own trajectory, streamed to the authority every tick | trajectory | intersects, notifies contacts directly |
//! | P2   | fixed id, ids heard | every id heard                 | resolves ids, notifies contacts directly |
//! | P3   | hourly ids, ids heard | own ids used                 | publishes them to every user           |
//!
//! Under P1 and P3 each device decides for itself whether it is at risk;
//! under P1a and P2 the authority decides and tells it.

mod authority;
mod device;
pub mod format;
mod harness;

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::Rng;

pub use authority::{AuthorityItems, AuthorityState};
pub use device::{DeviceState, Nearby, Recognition};
pub use harness::{run_protocol, LoggedMessage, ProtocolOptions, ProtocolRun};

use crate::world::{AgentId, Trajectory, WorldConfig};
use crate::{Error, Result, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    P1,
    P1a,
    P2,
    P3,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::P1,
        ProtocolKind::P1a,
        ProtocolKind::P2,
        ProtocolKind::P3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::P1 => "P1",
            ProtocolKind::P1a => "P1a",
            ProtocolKind::P2 => "P2",
            ProtocolKind::P3 => "P3",
        }
    }

    pub fn uses_identifiers(self) -> bool {
        matches!(self, ProtocolKind::P2 | ProtocolKind::P3)
    }

    pub fn uses_trajectories(self) -> bool {
        !self.uses_identifiers()
    }

    /// P2's authority must resolve ids to people; P3's must not be able to.
    pub fn default_blinded(self) -> bool {
        self == ProtocolKind::P3
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "P1" | "p1" => Ok(ProtocolKind::P1),
            "P1a" | "p1a" | "P1A" => Ok(ProtocolKind::P1a),
            "P2" | "p2" => Ok(ProtocolKind::P2),
            "P3" | "p3" => Ok(ProtocolKind::P3),
            other => Err(format!("unknown protocol `{other}` (expected P1, P1a, P2 or P3)")),
        }
    }
}

/// Opaque broadcast token issued by the authority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EphemeralId(pub u64);

impl fmt::Display for EphemeralId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Per-run random label standing in for a user in uploads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pseudonym(pub u64);

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdEpochRecord {
    pub epoch: u64,
    pub id: EphemeralId,
}

/// Key of a trajectory held by the authority: pseudonymous under P1,
/// the enrolled user under P1a.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrajectoryOwner {
    Pseudonym(Pseudonym),
    Agent(AgentId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UploadPurpose {
    /// P1a streaming: every user, every tick.
    Enrollment,
    InfectionReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Device(AgentId),
    Authority,
    /// Publication to the whole user base.
    Everyone,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Broadcast {
        tick: Tick,
        id: EphemeralId,
    },
    TrajectoryUpload {
        owner: TrajectoryOwner,
        purpose: UploadPurpose,
        trajectory: Trajectory,
    },
    EncounterReport {
        pseudonym: Pseudonym,
        ids: Vec<EphemeralId>,
    },
    UsedIdReport {
        records: Vec<IdEpochRecord>,
    },
    PublishTrajectories {
        trajectories: Vec<(Pseudonym, Trajectory)>,
    },
    PublishInfectedIds {
        ids: Vec<EphemeralId>,
    },
    DirectNotify {
        agent: AgentId,
    },
}

impl Message {
    pub const NAMES: [&'static str; 7] = [
        "Broadcast",
        "TrajectoryUpload",
        "EncounterReport",
        "UsedIdReport",
        "PublishTrajectories",
        "PublishInfectedIds",
        "DirectNotify",
    ];

    pub fn variant_index(&self) -> usize {
        match self {
            Message::Broadcast { .. } => 0,
            Message::TrajectoryUpload { .. } => 1,
            Message::EncounterReport { .. } => 2,
            Message::UsedIdReport { .. } => 3,
            Message::PublishTrajectories { .. } => 4,
            Message::PublishInfectedIds { .. } => 5,
            Message::DirectNotify { .. } => 6,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        Self::NAMES[self.variant_index()]
    }

    pub fn is_legal_for(&self, kind: ProtocolKind) -> bool {
        use ProtocolKind::*;
        matches!(
            (kind, self),
            (P1, Message::TrajectoryUpload { .. })
                | (P1, Message::PublishTrajectories { .. })
                | (P1a, Message::TrajectoryUpload { .. })
                | (P1a, Message::DirectNotify { .. })
                | (P2, Message::Broadcast { .. })
                | (P2, Message::EncounterReport { .. })
                | (P2, Message::DirectNotify { .. })
                | (P3, Message::Broadcast { .. })
                | (P3, Message::UsedIdReport { .. })
                | (P3, Message::PublishInfectedIds { .. })
        )
    }

    pub(crate) fn illegal(&self, kind: ProtocolKind) -> Error {
        Error::IllegalMessage {
            kind,
            variant: self.variant_name(),
        }
    }
}

/// Run-wide protocol parameters shared by devices and the authority.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolContext {
    pub kind: ProtocolKind,
    pub ticks_per_hour: Tick,
    pub proximity_radius: u32,
    /// How far back "recently" reaches, in ticks (at least 1).
    pub recent_window: Tick,
    pub p_recognize: f64,
}

impl ProtocolContext {
    pub fn new(kind: ProtocolKind, config: &WorldConfig, recent_window: Option<Tick>) -> Self {
        Self {
            kind,
            ticks_per_hour: config.ticks_per_hour.max(1),
            proximity_radius: config.proximity_radius,
            recent_window: recent_window
                .unwrap_or_else(|| default_recent_window(config))
                .max(1),
            p_recognize: config.p_recognize,
        }
    }

    pub fn epoch(&self, tick: Tick) -> u64 {
        tick / self.ticks_per_hour
    }

    /// The inclusive tick range a check at `now` looks back over.
    pub fn window(&self, now: Tick) -> RangeInclusive<Tick> {
        now.saturating_sub(self.recent_window - 1)..=now
    }
}

/// Fourteen simulated days, or the whole run if shorter.
pub fn default_recent_window(config: &WorldConfig) -> Tick {
    let two_weeks = 14 * 24 * config.ticks_per_hour.max(1);
    two_weeks.min(config.sim_ticks.max(1))
}

pub fn n_epochs(config: &WorldConfig) -> u64 {
    config.sim_ticks.div_ceil(config.ticks_per_hour.max(1)).max(1)
}

/// Issues ids for P2 (one per device for the whole run) or P3 (one per
/// device per epoch). All ids are distinct. With `blinded` the authority
/// keeps no id-to-user registry.
pub fn issue_identifiers<R: Rng>(
    kind: ProtocolKind,
    agents: &[AgentId],
    n_epochs: u64,
    blinded: bool,
    rng: &mut R,
) -> Result<(Vec<Vec<IdEpochRecord>>, AuthorityState)> {
    if !kind.uses_identifiers() {
        return Err(Error::IdentifiersNotUsed(kind));
    }
    let mut used = std::collections::HashSet::new();
    let mut fresh = || loop {
        let id = EphemeralId(rng.random());
        if used.insert(id) {
            return id;
        }
    };
    let mut authority = AuthorityState::new(kind);
    let mut registry = std::collections::BTreeMap::new();
    let mut schedules = Vec::with_capacity(agents.len());
    for &agent in agents {
        let schedule: Vec<IdEpochRecord> = match kind {
            ProtocolKind::P2 => {
                let id = fresh();
                (0..n_epochs).map(|epoch| IdEpochRecord { epoch, id }).collect()
            }
            _ => (0..n_epochs)
                .map(|epoch| IdEpochRecord { epoch, id: fresh() })
                .collect(),
        };
        for r in &schedule {
            registry.insert(r.id, agent);
        }
        schedules.push(schedule);
    }
    if !blinded {
        authority.registry = Some(registry);
    }
    Ok((schedules, authority))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use std::collections::BTreeSet;

    fn agents(n: u32) -> Vec<AgentId> {
        (0..n).map(AgentId).collect()
    }

    #[test]
    fn p2_issues_one_fixed_id_per_device() {
        let mut r = rng::stream(1, Stream::Issuance);
        let (sched, auth) = issue_identifiers(ProtocolKind::P2, &agents(3), 10, false, &mut r).unwrap();
        let ids: BTreeSet<_> = sched.iter().flatten().map(|rec| rec.id).collect();
        assert_eq!(ids.len(), 3);
        for s in &sched {
            assert_eq!(s.len(), 10);
            assert!(s.iter().all(|rec| rec.id == s[0].id));
        }
        assert_eq!(auth.registry.unwrap().len(), 3);
    }

    #[test]
    fn p3_rotates_at_every_epoch() {
        let mut r = rng::stream(1, Stream::Issuance);
        let (sched, auth) = issue_identifiers(ProtocolKind::P3, &agents(3), 10, true, &mut r).unwrap();
        let ids: BTreeSet<_> = sched.iter().flatten().map(|rec| rec.id).collect();
        assert_eq!(ids.len(), 30);
        for s in &sched {
            assert!(s.windows(2).all(|w| w[0].id != w[1].id && w[1].epoch == w[0].epoch + 1));
        }
        assert!(auth.registry.is_none());
    }

    #[test]
    fn unblinded_p3_registry_covers_every_id() {
        let mut r = rng::stream(2, Stream::Issuance);
        let (sched, auth) = issue_identifiers(ProtocolKind::P3, &agents(4), 3, false, &mut r).unwrap();
        let reg = auth.registry.unwrap();
        for (i, s) in sched.iter().enumerate() {
            for rec in s {
                assert_eq!(reg[&rec.id], AgentId(i as u32));
            }
        }
    }

    #[test]
    fn empty_population_gets_empty_schedules() {
        let mut r = rng::stream(1, Stream::Issuance);
        let (sched, auth) = issue_identifiers(ProtocolKind::P3, &[], 5, false, &mut r).unwrap();
        assert!(sched.is_empty());
        assert!(auth.registry.unwrap().is_empty());
    }

    #[test]
    fn trajectory_protocols_refuse_identifiers() {
        let mut r = rng::stream(1, Stream::Issuance);
        for kind in [ProtocolKind::P1, ProtocolKind::P1a] {
            assert!(matches!(
                issue_identifiers(kind, &agents(2), 5, false, &mut r),
                Err(Error::IdentifiersNotUsed(k)) if k == kind
            ));
        }
    }

    #[test]
    fn legality_table() {
        let notify = Message::DirectNotify { agent: AgentId(0) };
        let publish = Message::PublishInfectedIds { ids: vec![] };
        let legal: Vec<_> = ProtocolKind::ALL
            .iter()
            .map(|&k| (notify.is_legal_for(k), publish.is_legal_for(k)))
            .collect();
        assert_eq!(legal, [(false, false), (true, false), (true, false), (false, true)]);
    }

    #[test]
    fn window_defaults_to_run_length_when_shorter_than_two_weeks() {
        let cfg = WorldConfig::desk();
        let ctx = ProtocolContext::new(ProtocolKind::P3, &cfg, None);
        assert_eq!(ctx.recent_window, cfg.sim_ticks);
        assert_eq!(ctx.window(100), 0..=100);
        let narrow = ProtocolContext::new(ProtocolKind::P3, &cfg, Some(10));
        assert_eq!(narrow.window(100), 91..=100);
        assert_eq!(n_epochs(&cfg), 168);
    }

    #[test]
    fn kinds_parse_and_print() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.as_str().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("P4".parse::<ProtocolKind>().is_err());
    }
}
