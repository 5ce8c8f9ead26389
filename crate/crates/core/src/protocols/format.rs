//! Line-oriented text form of a [`ProtocolRun`].
//!
//! ```text
//! # ctsim run v1
//! run <run id>                      header lines, each exactly once
//! kind <P1|P1a|P2|P3>
//! blinded <0|1>
//! ticks_per_hour <n>
//! proximity_radius <n>
//! recent_window <n>
//! p_recognize <p>
//! n_agents <n>
//! dev <agent> <pseudonym> <at_risk 0|1> <notified tick|->    one per agent, in order
//! sched <agent> <epoch:id,...>
//! traj <agent> <tick:x:y,...>
//! enc <agent> <tick:id,...>
//! recog <agent> <tick:id|-:peer,...>
//! reg <id> <agent>                  authority registry
//! atraj <p:pseudonym|a:agent> <tick:x:y,...>
//! aenc <pseudonym> <id>
//! aset <epoch:id,...>
//! arisk <agent>
//! msg <tick> <from> <to> <variant> <payload...>
//! ```
//!
//! Ids and pseudonyms are 16 hex digits; endpoints are `dev:<agent>`,
//! `auth` or `all`; an empty list is `-`. Message payloads:
//!
//! ```text
//! Broadcast           <tick> <id>
//! TrajectoryUpload    <owner> <enroll|report> <trajectory>
//! EncounterReport     <pseudonym> <ids>
//! UsedIdReport        <records>
//! PublishTrajectories <pseudonym> <trajectory> [<pseudonym> <trajectory> ...]
//! PublishInfectedIds  <ids>
//! DirectNotify        <agent>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    AuthorityState, DeviceState, Endpoint, EphemeralId, IdEpochRecord, LoggedMessage, Message,
    ProtocolContext, ProtocolKind, ProtocolRun, Pseudonym, Recognition, TrajectoryOwner,
    UploadPurpose,
};
use crate::textfmt::{fmt_bool, parse_bool, parse_hex, records, ParseError, Record};
use crate::world::{AgentId, Location, RunId, Trajectory};
use crate::Tick;

pub const RUN_HEADER: &str = "# ctsim run v1";

pub(crate) fn list<T>(items: impl IntoIterator<Item = T>, f: impl Fn(&mut String, T)) -> String {
    let mut out = String::new();
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        f(&mut out, item);
    }
    if out.is_empty() {
        out.push('-');
    }
    out
}

pub(crate) fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split(',').map(f).collect()
}

/// `tick:x:y` items in the given order.
pub fn fmt_points(points: &[(Tick, Location)]) -> String {
    list(points, |out, (tick, loc)| {
        let _ = write!(out, "{tick}:{}:{}", loc.x, loc.y);
    })
}

pub fn parse_points(s: &str) -> Option<Vec<(Tick, Location)>> {
    parse_list(s, |item| {
        let mut parts = item.split(':');
        let tick = parts.next()?.parse().ok()?;
        let x = parts.next()?.parse().ok()?;
        let y = parts.next()?.parse().ok()?;
        parts.next().is_none().then_some((tick, Location::new(x, y)))
    })
}

pub fn fmt_trajectory(t: &Trajectory) -> String {
    fmt_points(t.points())
}

pub fn parse_trajectory(s: &str) -> Option<Trajectory> {
    Trajectory::from_points(parse_points(s)?)
}

pub fn fmt_ids(ids: &[EphemeralId]) -> String {
    list(ids, |out, id| {
        let _ = write!(out, "{id}");
    })
}

pub fn parse_ids(s: &str) -> Option<Vec<EphemeralId>> {
    parse_list(s, |item| parse_hex(item).map(EphemeralId))
}

pub fn fmt_records(recs: &[IdEpochRecord]) -> String {
    list(recs, |out, r| {
        let _ = write!(out, "{}:{}", r.epoch, r.id);
    })
}

pub fn parse_records(s: &str) -> Option<Vec<IdEpochRecord>> {
    parse_list(s, |item| {
        let (e, id) = item.split_once(':')?;
        Some(IdEpochRecord {
            epoch: e.parse().ok()?,
            id: EphemeralId(parse_hex(id)?),
        })
    })
}

pub fn fmt_owner(o: TrajectoryOwner) -> String {
    match o {
        TrajectoryOwner::Pseudonym(p) => format!("p:{p}"),
        TrajectoryOwner::Agent(a) => format!("a:{a}"),
    }
}

pub fn parse_owner(s: &str) -> Option<TrajectoryOwner> {
    match s.split_once(':')? {
        ("p", p) => Some(TrajectoryOwner::Pseudonym(Pseudonym(parse_hex(p)?))),
        ("a", a) => Some(TrajectoryOwner::Agent(AgentId(a.parse().ok()?))),
        _ => None,
    }
}

pub fn fmt_endpoint(e: Endpoint) -> String {
    match e {
        Endpoint::Device(a) => format!("dev:{a}"),
        Endpoint::Authority => "auth".into(),
        Endpoint::Everyone => "all".into(),
    }
}

pub fn parse_endpoint(s: &str) -> Option<Endpoint> {
    match s {
        "auth" => Some(Endpoint::Authority),
        "all" => Some(Endpoint::Everyone),
        _ => Some(Endpoint::Device(AgentId(s.strip_prefix("dev:")?.parse().ok()?))),
    }
}

fn pseudonym(s: &str) -> Option<Pseudonym> {
    parse_hex(s).map(Pseudonym)
}

/// Payload fields of a message, after the variant name.
pub fn fmt_message(m: &Message) -> String {
    match m {
        Message::Broadcast { tick, id } => format!("{tick} {id}"),
        Message::TrajectoryUpload {
            owner,
            purpose,
            trajectory,
        } => {
            let purpose = match purpose {
                UploadPurpose::Enrollment => "enroll",
                UploadPurpose::InfectionReport => "report",
            };
            format!("{} {purpose} {}", fmt_owner(*owner), fmt_trajectory(trajectory))
        }
        Message::EncounterReport { pseudonym, ids } => format!("{pseudonym} {}", fmt_ids(ids)),
        Message::UsedIdReport { records } => fmt_records(records),
        Message::PublishTrajectories { trajectories } => {
            let parts: Vec<String> = trajectories
                .iter()
                .map(|(p, t)| format!("{p} {}", fmt_trajectory(t)))
                .collect();
            if parts.is_empty() {
                "-".into()
            } else {
                parts.join(" ")
            }
        }
        Message::PublishInfectedIds { ids } => fmt_ids(ids),
        Message::DirectNotify { agent } => agent.to_string(),
    }
}

/// Parses a message whose variant name sits in field `at` of `rec`.
pub fn parse_message(rec: &Record<'_>, at: usize) -> Result<Message, ParseError> {
    let variant = rec.field(at)?;
    let n = rec.len() - at - 1;
    let want = |k: usize| {
        if n == k {
            Ok(())
        } else {
            Err(rec.err(format!("{variant} takes {k} payload fields, found {n}")))
        }
    };
    let p = at + 1;
    Ok(match variant {
        "Broadcast" => {
            want(2)?;
            Message::Broadcast {
                tick: rec.parse(p)?,
                id: EphemeralId(rec.parse_with(p + 1, parse_hex)?),
            }
        }
        "TrajectoryUpload" => {
            want(3)?;
            Message::TrajectoryUpload {
                owner: rec.parse_with(p, parse_owner)?,
                purpose: rec.parse_with(p + 1, |s| match s {
                    "enroll" => Some(UploadPurpose::Enrollment),
                    "report" => Some(UploadPurpose::InfectionReport),
                    _ => None,
                })?,
                trajectory: rec.parse_with(p + 2, parse_trajectory)?,
            }
        }
        "EncounterReport" => {
            want(2)?;
            Message::EncounterReport {
                pseudonym: rec.parse_with(p, pseudonym)?,
                ids: rec.parse_with(p + 1, parse_ids)?,
            }
        }
        "UsedIdReport" => {
            want(1)?;
            Message::UsedIdReport {
                records: rec.parse_with(p, parse_records)?,
            }
        }
        "PublishTrajectories" => {
            if n == 1 && rec.field(p)? == "-" {
                Message::PublishTrajectories {
                    trajectories: Vec::new(),
                }
            } else {
                if n == 0 || !n.is_multiple_of(2) {
                    return Err(rec.err("PublishTrajectories takes pseudonym/trajectory pairs"));
                }
                let mut trajectories = Vec::with_capacity(n / 2);
                for i in (p..p + n).step_by(2) {
                    trajectories.push((
                        rec.parse_with(i, pseudonym)?,
                        rec.parse_with(i + 1, parse_trajectory)?,
                    ));
                }
                Message::PublishTrajectories { trajectories }
            }
        }
        "PublishInfectedIds" => {
            want(1)?;
            Message::PublishInfectedIds {
                ids: rec.parse_with(p, parse_ids)?,
            }
        }
        "DirectNotify" => {
            want(1)?;
            Message::DirectNotify {
                agent: AgentId(rec.parse(p)?),
            }
        }
        other => return Err(rec.err(format!("unknown message variant `{other}`"))),
    })
}

impl ProtocolRun {
    pub fn to_text(&self) -> String {
        let c = &self.context;
        let mut out = String::new();
        let _ = writeln!(out, "{RUN_HEADER}");
        let _ = writeln!(out, "run {}", self.run_id);
        let _ = writeln!(out, "kind {}", c.kind);
        let _ = writeln!(out, "blinded {}", fmt_bool(self.blinded));
        let _ = writeln!(out, "ticks_per_hour {}", c.ticks_per_hour);
        let _ = writeln!(out, "proximity_radius {}", c.proximity_radius);
        let _ = writeln!(out, "recent_window {}", c.recent_window);
        let _ = writeln!(out, "p_recognize {}", c.p_recognize);
        let _ = writeln!(out, "n_agents {}", self.devices.len());
        for d in &self.devices {
            let notified = d.notified_tick.map_or("-".to_string(), |t| t.to_string());
            let _ = writeln!(
                out,
                "dev {} {} {} {notified}",
                d.agent,
                d.pseudonym,
                fmt_bool(d.at_risk)
            );
        }
        for d in &self.devices {
            let a = d.agent;
            if !d.id_schedule.is_empty() {
                let _ = writeln!(out, "sched {a} {}", fmt_records(&d.id_schedule));
            }
            if !d.own_trajectory.is_empty() {
                let _ = writeln!(out, "traj {a} {}", fmt_trajectory(&d.own_trajectory));
            }
            if !d.encounter_log.is_empty() {
                let s = list(&d.encounter_log, |o, (t, id)| {
                    let _ = write!(o, "{t}:{id}");
                });
                let _ = writeln!(out, "enc {a} {s}");
            }
            if !d.recognized_peers.is_empty() {
                let s = list(&d.recognized_peers, |o, r| {
                    let id = r.observed.map_or("-".to_string(), |id| id.to_string());
                    let _ = write!(o, "{}:{id}:{}", r.tick, r.peer);
                });
                let _ = writeln!(out, "recog {a} {s}");
            }
        }
        let auth = &self.authority;
        if let Some(reg) = &auth.registry {
            for (id, agent) in reg {
                let _ = writeln!(out, "reg {id} {agent}");
            }
        }
        for (owner, t) in &auth.received_trajectories {
            let _ = writeln!(out, "atraj {} {}", fmt_owner(*owner), fmt_trajectory(t));
        }
        for (p, id) in &auth.received_encounter_ids {
            let _ = writeln!(out, "aenc {p} {id}");
        }
        for set in &auth.received_infected_id_sets {
            let _ = writeln!(out, "aset {}", fmt_records(set));
        }
        for a in &auth.known_at_risk {
            let _ = writeln!(out, "arisk {a}");
        }
        for m in &self.messages {
            let _ = writeln!(
                out,
                "msg {} {} {} {} {}",
                m.tick,
                fmt_endpoint(m.from),
                fmt_endpoint(m.to),
                m.message.variant_name(),
                fmt_message(&m.message)
            );
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, ParseError> {
        #[derive(Default)]
        struct Header {
            run: Option<RunId>,
            kind: Option<ProtocolKind>,
            blinded: Option<bool>,
            ticks_per_hour: Option<Tick>,
            proximity_radius: Option<u32>,
            recent_window: Option<Tick>,
            p_recognize: Option<f64>,
            n_agents: Option<usize>,
        }
        fn once<T>(slot: &mut Option<T>, rec: &Record<'_>, v: T) -> Result<(), ParseError> {
            if slot.replace(v).is_some() {
                return Err(rec.err(format!("duplicate `{}` line", rec.tag)));
            }
            Ok(())
        }

        let mut h = Header::default();
        let mut devices: Vec<DeviceState> = Vec::new();
        let mut seen: BTreeMap<(&str, u32), ()> = BTreeMap::new();
        let mut registry: Option<BTreeMap<EphemeralId, AgentId>> = None;
        let mut trajectories = BTreeMap::new();
        let mut enc_ids = Vec::new();
        let mut id_sets = Vec::new();
        let mut at_risk = std::collections::BTreeSet::new();
        let mut messages = Vec::new();

        let kind_of = |h: &Header, rec: &Record<'_>| {
            h.kind
                .ok_or_else(|| rec.err("`kind` must precede device and authority lines"))
        };

        for rec in records(text) {
            match rec.tag {
                "run" => {
                    rec.expect_len(1)?;
                    once(&mut h.run, &rec, RunId(rec.parse_with(0, parse_hex)?))?;
                }
                "kind" => {
                    rec.expect_len(1)?;
                    once(&mut h.kind, &rec, rec.parse(0).map_err(|_| rec.err("unknown protocol kind"))?)?;
                }
                "blinded" => {
                    rec.expect_len(1)?;
                    once(&mut h.blinded, &rec, rec.parse_with(0, parse_bool)?)?;
                }
                "ticks_per_hour" => {
                    rec.expect_len(1)?;
                    let v: Tick = rec.parse(0)?;
                    if v == 0 {
                        return Err(rec.err("ticks_per_hour must be at least 1"));
                    }
                    once(&mut h.ticks_per_hour, &rec, v)?;
                }
                "proximity_radius" => {
                    rec.expect_len(1)?;
                    once(&mut h.proximity_radius, &rec, rec.parse(0)?)?;
                }
                "recent_window" => {
                    rec.expect_len(1)?;
                    let v: Tick = rec.parse(0)?;
                    if v == 0 {
                        return Err(rec.err("recent_window must be at least 1"));
                    }
                    once(&mut h.recent_window, &rec, v)?;
                }
                "p_recognize" => {
                    rec.expect_len(1)?;
                    let p: f64 = rec.parse(0)?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(rec.err("p_recognize must be within [0, 1]"));
                    }
                    once(&mut h.p_recognize, &rec, p)?;
                }
                "n_agents" => {
                    rec.expect_len(1)?;
                    once(&mut h.n_agents, &rec, rec.parse(0)?)?;
                }
                "dev" => {
                    rec.expect_len(4)?;
                    let kind = kind_of(&h, &rec)?;
                    let agent: u32 = rec.parse(0)?;
                    if agent as usize != devices.len() {
                        return Err(rec.err(format!("expected device {}, found {agent}", devices.len())));
                    }
                    let mut d = DeviceState::new(AgentId(agent), kind, rec.parse_with(1, pseudonym)?, Vec::new());
                    d.at_risk = rec.parse_with(2, parse_bool)?;
                    d.notified_tick = match rec.field(3)? {
                        "-" => None,
                        _ => Some(rec.parse(3)?),
                    };
                    if d.at_risk != d.notified_tick.is_some() {
                        return Err(rec.err("at_risk and notification tick disagree"));
                    }
                    devices.push(d);
                }
                "sched" | "traj" | "enc" | "recog" => {
                    rec.expect_len(2)?;
                    let agent: u32 = rec.parse(0)?;
                    if seen.insert((rec.tag, agent), ()).is_some() {
                        return Err(rec.err(format!("duplicate `{}` line for agent {agent}", rec.tag)));
                    }
                    let d = devices
                        .get_mut(agent as usize)
                        .ok_or_else(|| rec.err(format!("agent {agent} has no `dev` line")))?;
                    match rec.tag {
                        "sched" => {
                            d.id_schedule = rec.parse_with(1, parse_records)?;
                            if !d.id_schedule.windows(2).all(|w| w[0].epoch < w[1].epoch) {
                                return Err(rec.err("schedule epochs must increase"));
                            }
                        }
                        "traj" => d.own_trajectory = rec.parse_with(1, parse_trajectory)?,
                        "enc" => {
                            d.encounter_log = rec.parse_with(1, |s| {
                                parse_list(s, |item| {
                                    let (t, id) = item.split_once(':')?;
                                    Some((t.parse().ok()?, EphemeralId(parse_hex(id)?)))
                                })
                            })?;
                            if !d.encounter_log.windows(2).all(|w| w[0].0 <= w[1].0) {
                                return Err(rec.err("encounter log must be in tick order"));
                            }
                        }
                        _ => {
                            d.recognized_peers = rec.parse_with(1, |s| {
                                parse_list(s, |item| {
                                    let mut parts = item.split(':');
                                    let tick = parts.next()?.parse().ok()?;
                                    let observed = match parts.next()? {
                                        "-" => None,
                                        id => Some(EphemeralId(parse_hex(id)?)),
                                    };
                                    let peer = AgentId(parts.next()?.parse().ok()?);
                                    parts.next().is_none().then_some(Recognition { tick, observed, peer })
                                })
                            })?;
                        }
                    }
                }
                "reg" => {
                    rec.expect_len(2)?;
                    let reg = registry.get_or_insert_with(BTreeMap::new);
                    let id = EphemeralId(rec.parse_with(0, parse_hex)?);
                    if reg.insert(id, AgentId(rec.parse(1)?)).is_some() {
                        return Err(rec.err(format!("duplicate registry entry {id}")));
                    }
                }
                "atraj" => {
                    rec.expect_len(2)?;
                    let owner = rec.parse_with(0, parse_owner)?;
                    if trajectories
                        .insert(owner, rec.parse_with(1, parse_trajectory)?)
                        .is_some()
                    {
                        return Err(rec.err("duplicate authority trajectory"));
                    }
                }
                "aenc" => {
                    rec.expect_len(2)?;
                    enc_ids.push((
                        rec.parse_with(0, pseudonym)?,
                        EphemeralId(rec.parse_with(1, parse_hex)?),
                    ));
                }
                "aset" => {
                    rec.expect_len(1)?;
                    id_sets.push(rec.parse_with(0, parse_records)?);
                }
                "arisk" => {
                    rec.expect_len(1)?;
                    at_risk.insert(AgentId(rec.parse(0)?));
                }
                "msg" => {
                    if rec.len() < 4 {
                        return Err(rec.err("`msg` record needs tick, sender, recipient and variant"));
                    }
                    let kind = kind_of(&h, &rec)?;
                    let message = parse_message(&rec, 3)?;
                    if !message.is_legal_for(kind) {
                        return Err(rec.err(format!("{} is not legal under {kind}", message.variant_name())));
                    }
                    let m = LoggedMessage {
                        tick: rec.parse(0)?,
                        from: rec.parse_with(1, parse_endpoint)?,
                        to: rec.parse_with(2, parse_endpoint)?,
                        message,
                    };
                    if messages.last().is_some_and(|prev: &LoggedMessage| prev.tick > m.tick) {
                        return Err(rec.err("messages must be in tick order"));
                    }
                    messages.push(m);
                }
                other => return Err(rec.err(format!("unknown record tag `{other}`"))),
            }
        }

        let missing = |what: &str| ParseError::new(0, format!("missing `{what}` line"));
        let kind = h.kind.ok_or_else(|| missing("kind"))?;
        let n = h.n_agents.ok_or_else(|| missing("n_agents"))?;
        if devices.len() != n {
            return Err(ParseError::new(0, format!("n_agents = {n} but {} `dev` lines", devices.len())));
        }
        let in_range = |a: AgentId| a.index() < n;
        let bad_agent = devices.iter().flat_map(|d| d.recognized_peers.iter().map(|r| r.peer))
            .chain(registry.iter().flat_map(|r| r.values().copied()))
            .chain(at_risk.iter().copied())
            .chain(trajectories.keys().filter_map(|o| match o {
                TrajectoryOwner::Agent(a) => Some(*a),
                TrajectoryOwner::Pseudonym(_) => None,
            }))
            .chain(messages.iter().flat_map(|m| {
                let mut v = Vec::new();
                for e in [m.from, m.to] {
                    if let Endpoint::Device(a) = e {
                        v.push(a);
                    }
                }
                if let Message::DirectNotify { agent } = m.message {
                    v.push(agent);
                }
                v
            }))
            .find(|a| !in_range(*a));
        if let Some(a) = bad_agent {
            return Err(ParseError::new(0, format!("agent {a} out of range")));
        }

        let context = ProtocolContext {
            kind,
            ticks_per_hour: h.ticks_per_hour.ok_or_else(|| missing("ticks_per_hour"))?,
            proximity_radius: h.proximity_radius.ok_or_else(|| missing("proximity_radius"))?,
            recent_window: h.recent_window.ok_or_else(|| missing("recent_window"))?,
            p_recognize: h.p_recognize.ok_or_else(|| missing("p_recognize"))?,
        };
        let blinded = h.blinded.ok_or_else(|| missing("blinded"))?;
        let keeps_registry = kind.uses_identifiers() && !blinded;
        if registry.is_some() && !keeps_registry {
            return Err(ParseError::new(0, format!("`reg` lines but {kind} (blinded {blinded}) keeps no registry")));
        }
        let registry = if keeps_registry { Some(registry.unwrap_or_default()) } else { None };
        let authority = AuthorityState {
            kind,
            registry,
            received_trajectories: trajectories,
            received_encounter_ids: enc_ids,
            received_infected_id_sets: id_sets,
            known_at_risk: at_risk,
        };
        Ok(ProtocolRun {
            run_id: h.run.ok_or_else(|| missing("run"))?,
            context,
            blinded,
            devices,
            authority,
            messages,
        })
    }
}
