use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;

use super::{
    issue_identifiers, n_epochs, AuthorityState, DeviceState, Endpoint, Message, Nearby,
    ProtocolContext, ProtocolKind, Pseudonym,
};
use crate::rng::{self, Stream};
use crate::world::{AgentId, RunId, SimulationTrace};
use crate::{Error, Result, Tick};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProtocolOptions {
    /// Defaults to the kind's own convention when `None`.
    pub blinded: Option<bool>,
    pub recent_window: Option<Tick>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoggedMessage {
    pub tick: Tick,
    pub from: Endpoint,
    pub to: Endpoint,
    pub message: Message,
}

/// Final state of every player after replaying a trace, plus the log of
/// all traffic that touched the authority. Broadcasts travel device to
/// device and are not logged here.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRun {
    pub run_id: RunId,
    pub context: ProtocolContext,
    pub blinded: bool,
    pub devices: Vec<DeviceState>,
    pub authority: AuthorityState,
    pub messages: Vec<LoggedMessage>,
}

impl ProtocolRun {
    pub fn kind(&self) -> ProtocolKind {
        self.context.kind
    }

    pub fn at_risk(&self) -> BTreeSet<AgentId> {
        self.devices
            .iter()
            .filter(|d| d.at_risk)
            .map(|d| d.agent)
            .collect()
    }

    pub fn notification_times(&self) -> BTreeMap<AgentId, Tick> {
        self.devices
            .iter()
            .filter_map(|d| d.notified_tick.map(|t| (d.agent, t)))
            .collect()
    }

    /// Messages the authority sent to every user.
    pub fn publications(&self) -> impl Iterator<Item = (Tick, &Message)> {
        self.messages
            .iter()
            .filter(|m| m.to == Endpoint::Everyone)
            .map(|m| (m.tick, &m.message))
    }

    pub fn device(&self, agent: AgentId) -> Result<&DeviceState> {
        self.devices
            .get(agent.index())
            .ok_or(Error::UnknownAgent(agent))
    }

    pub fn ensure_same_run(&self, expected: RunId) -> Result<()> {
        if self.run_id == expected {
            Ok(())
        } else {
            Err(Error::MismatchedRun {
                expected,
                found: self.run_id,
            })
        }
    }
}

fn distinct_pseudonyms<R: Rng>(n: usize, rng: &mut R) -> Vec<Pseudonym> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Pseudonym(rng.random());
        if seen.insert(p) {
            out.push(p);
        }
    }
    out
}

/// Replays `trace` tick by tick through the protocol. Within a tick:
/// every device records and broadcasts, reporters upload, then the
/// authority's responses are delivered.
pub fn run_protocol(
    trace: &SimulationTrace,
    kind: ProtocolKind,
    options: &ProtocolOptions,
) -> Result<ProtocolRun> {
    let cfg = &trace.config;
    let ctx = ProtocolContext::new(kind, cfg, options.recent_window);
    let blinded = kind.uses_identifiers() && options.blinded.unwrap_or(kind.default_blinded());
    let agents: Vec<AgentId> = trace.agents().collect();
    let n = agents.len();

    let mut issuance = rng::stream(cfg.seed, Stream::Issuance);
    let pseudonyms = distinct_pseudonyms(n, &mut issuance);
    let (schedules, mut authority) = if kind.uses_identifiers() {
        issue_identifiers(kind, &agents, n_epochs(cfg), blinded, &mut issuance)?
    } else {
        (vec![Vec::new(); n], AuthorityState::new(kind))
    };
    let mut devices: Vec<DeviceState> = agents
        .iter()
        .zip(pseudonyms)
        .zip(schedules)
        .map(|((&a, p), s)| DeviceState::new(a, kind, p, s))
        .collect();

    let mut recognition = rng::stream(cfg.seed, Stream::Recognition);
    let mut messages = Vec::new();
    let mut nearby: Vec<Vec<Nearby>> = vec![Vec::new(); n];
    let mut enc = trace.encounters.iter().peekable();
    let mut reports = trace.report_events.iter().peekable();

    for t in 0..cfg.sim_ticks {
        nearby.iter_mut().for_each(Vec::clear);
        let ids: Vec<_> = devices.iter().map(|d| d.current_id(&ctx, t)).collect();
        while let Some(e) = enc.next_if(|e| e.tick == t) {
            let (a, b) = (e.a.index(), e.b.index());
            if a >= n || b >= n {
                return Err(Error::UnknownAgent(if a >= n { e.a } else { e.b }));
            }
            nearby[a].push(Nearby { id: ids[b], sender: e.b });
            nearby[b].push(Nearby { id: ids[a], sender: e.a });
        }

        for (i, dev) in devices.iter_mut().enumerate() {
            let here = trace.trajectories[i].at(t).ok_or_else(|| {
                Error::InconsistentTrace(format!("agent {i} has no position at tick {t}"))
            })?;
            match dev.device_tick(&ctx, t, here, &nearby[i], &mut recognition) {
                None | Some(Message::Broadcast { .. }) => {}
                Some(upload) => {
                    authority.ingest(&ctx, t, &upload)?;
                    messages.push(LoggedMessage {
                        tick: t,
                        from: Endpoint::Device(dev.agent),
                        to: Endpoint::Authority,
                        message: upload,
                    });
                }
            }
        }

        let mut outbound = Vec::new();
        while let Some(r) = reports.next_if(|r| r.tick == t) {
            let dev = devices.get(r.agent.index()).ok_or(Error::UnknownAgent(r.agent))?;
            let upload = dev.report_infection(&ctx, *r)?;
            outbound.extend(authority.ingest(&ctx, t, &upload)?);
            messages.push(LoggedMessage {
                tick: t,
                from: Endpoint::Device(r.agent),
                to: Endpoint::Authority,
                message: upload,
            });
        }

        for (to, message) in outbound {
            match (&to, &message) {
                (Endpoint::Device(agent), Message::DirectNotify { .. }) => {
                    devices[agent.index()].receive_notification(t);
                }
                (Endpoint::Everyone, _) => {
                    for dev in devices.iter_mut() {
                        dev.check_exposure(&ctx, t, &message)?;
                    }
                }
                _ => return Err(message.illegal(kind)),
            }
            messages.push(LoggedMessage {
                tick: t,
                from: Endpoint::Authority,
                to,
                message,
            });
        }
    }

    Ok(ProtocolRun {
        run_id: trace.run_id(),
        context: ctx,
        blinded,
        devices,
        authority,
        messages,
    })
}
