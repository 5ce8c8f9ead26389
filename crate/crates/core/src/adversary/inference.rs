use std::collections::{BTreeSet, HashSet};

use crate::protocols::{DeviceState, EphemeralId, Message, ProtocolContext, ProtocolKind};
use crate::world::AgentId;

/// What a curious user learns about who is infected from one publication,
/// by joining it with the encounters they remember.
///
/// P3: a remembered encounter whose heard id is in the published set names
/// the infected person. P1: a published trajectory that met the user's own
/// at ticks where the user remembers exactly one person names that person.
/// P1a and P2 users only ever get an anonymous notification.
pub fn infer_infected_peers(
    ctx: &ProtocolContext,
    device: &DeviceState,
    publication: &Message,
) -> BTreeSet<AgentId> {
    match (device.kind, publication) {
        (ProtocolKind::P3, Message::PublishInfectedIds { ids }) => {
            let published: HashSet<EphemeralId> = ids.iter().copied().collect();
            device
                .recognized_peers
                .iter()
                .filter(|r| r.observed.is_some_and(|id| published.contains(&id)))
                .map(|r| r.peer)
                .collect()
        }
        (ProtocolKind::P1, Message::PublishTrajectories { trajectories }) => {
            let mut out = BTreeSet::new();
            if device.recognized_peers.is_empty() {
                return out;
            }
            for (p, traj) in trajectories {
                if *p == device.pseudonym {
                    continue;
                }
                let ticks: BTreeSet<_> = traj
                    .meeting_ticks(&device.own_trajectory, 0..=u64::MAX, ctx.proximity_radius)
                    .collect();
                let named: BTreeSet<AgentId> = device
                    .recognized_peers
                    .iter()
                    .filter(|r| ticks.contains(&r.tick))
                    .map(|r| r.peer)
                    .collect();
                if named.len() == 1 {
                    out.extend(named);
                }
            }
            out
        }
        _ => BTreeSet::new(),
    }
}
