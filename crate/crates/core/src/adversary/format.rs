//! Line-oriented text form of an [`AttackReport`].
//!
//! ```text
//! # ctsim attacks v1
//! run <run id>
//! kind <P1|P1a|P2|P3>
//! theta <score threshold>
//! k_anchors <n>
//! anchor <agent> <tick:x:y,...>          side knowledge, sampling order
//! reid <pseudonym> <agent>               re-identification claim
//! infer <user> <agent,...>               infected people a user identified
//! station <x> <y>                        numbered from 0 in file order
//! obs <tick> <station> <id>
//! track <epoch:id,...> <tick:station,...>
//! chain <epoch:id,...>                   eavesdropper linkage
//! sdiag <text>
//! achain <epoch:id,...>                  authority linkage
//! adiag <text>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{AttackReport, Linkage, Observation, SideKnowledge, SnifferLog, Track};
use crate::protocols::format::{fmt_points, fmt_records, list, parse_list, parse_points, parse_records};
use crate::protocols::{EphemeralId, IdEpochRecord, ProtocolKind, Pseudonym};
use crate::textfmt::{parse_hex, records, ParseError, Record};
use crate::world::{AgentId, Location, RunId};
use crate::Tick;

pub const ATTACKS_HEADER: &str = "# ctsim attacks v1";

fn fmt_sightings(s: &[(Tick, u32)]) -> String {
    list(s, |out, (t, st)| {
        let _ = write!(out, "{t}:{st}");
    })
}

fn parse_sightings(s: &str) -> Option<Vec<(Tick, u32)>> {
    parse_list(s, |item| {
        let (t, st) = item.split_once(':')?;
        Some((t.parse().ok()?, st.parse().ok()?))
    })
}

fn write_linkage(out: &mut String, l: &Linkage, chain: &str, diag: &str) {
    for c in &l.partition.chains {
        let _ = writeln!(out, "{chain} {}", fmt_records(c));
    }
    if let Some(d) = &l.diagnostic {
        let _ = writeln!(out, "{diag} {d}");
    }
}

impl AttackReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{ATTACKS_HEADER}");
        let _ = writeln!(out, "run {}", self.run_id);
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "theta {}", self.theta);
        let _ = writeln!(out, "k_anchors {}", self.side.k_anchors);
        for (a, pts) in &self.side.anchors {
            let _ = writeln!(out, "anchor {a} {}", fmt_points(pts));
        }
        for (p, a) in &self.reidentified {
            let _ = writeln!(out, "reid {p} {a}");
        }
        for (user, peers) in &self.inferred {
            let s = list(peers, |o, p| {
                let _ = write!(o, "{p}");
            });
            let _ = writeln!(out, "infer {user} {s}");
        }
        for s in &self.sniffer.stations {
            let _ = writeln!(out, "station {} {}", s.x, s.y);
        }
        for o in &self.sniffer.observations {
            let _ = writeln!(out, "obs {} {} {}", o.tick, o.station, o.id);
        }
        for t in &self.tracks {
            let _ = writeln!(out, "track {} {}", fmt_records(&t.ids), fmt_sightings(&t.sightings));
        }
        write_linkage(&mut out, &self.sniffer_linkage, "chain", "sdiag");
        write_linkage(&mut out, &self.authority_linkage, "achain", "adiag");
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, ParseError> {
        fn once<T>(slot: &mut Option<T>, rec: &Record<'_>, v: T) -> Result<(), ParseError> {
            if slot.replace(v).is_some() {
                return Err(rec.err(format!("duplicate `{}` line", rec.tag)));
            }
            Ok(())
        }
        let chain_of = |rec: &Record<'_>| -> Result<Vec<IdEpochRecord>, ParseError> {
            rec.expect_len(1)?;
            let c = rec.parse_with(0, parse_records)?;
            if c.is_empty() {
                return Err(rec.err("empty chain"));
            }
            Ok(c)
        };

        let mut run = None;
        let mut kind: Option<ProtocolKind> = None;
        let mut theta: Option<f64> = None;
        let mut k_anchors: Option<usize> = None;
        let mut anchors = BTreeMap::new();
        let mut reidentified = BTreeMap::new();
        let mut inferred = BTreeMap::new();
        let mut sniffer = SnifferLog::default();
        let mut tracks = Vec::new();
        let mut sniffer_linkage = Linkage::default();
        let mut authority_linkage = Linkage::default();

        for rec in records(text) {
            match rec.tag {
                "run" => {
                    rec.expect_len(1)?;
                    once(&mut run, &rec, RunId(rec.parse_with(0, parse_hex)?))?;
                }
                "kind" => {
                    rec.expect_len(1)?;
                    let k = rec.parse(0).map_err(|_| rec.err("unknown protocol kind"))?;
                    once(&mut kind, &rec, k)?;
                }
                "theta" => {
                    rec.expect_len(1)?;
                    let t: f64 = rec.parse(0)?;
                    if !t.is_finite() {
                        return Err(rec.err("theta must be finite"));
                    }
                    once(&mut theta, &rec, t)?;
                }
                "k_anchors" => {
                    rec.expect_len(1)?;
                    once(&mut k_anchors, &rec, rec.parse(0)?)?;
                }
                "anchor" => {
                    rec.expect_len(2)?;
                    let pts = rec.parse_with(1, parse_points)?;
                    if anchors.insert(AgentId(rec.parse(0)?), pts).is_some() {
                        return Err(rec.err("duplicate anchor line"));
                    }
                }
                "reid" => {
                    rec.expect_len(2)?;
                    let p = Pseudonym(rec.parse_with(0, parse_hex)?);
                    if reidentified.insert(p, AgentId(rec.parse(1)?)).is_some() {
                        return Err(rec.err(format!("pseudonym {p} claimed twice")));
                    }
                }
                "infer" => {
                    rec.expect_len(2)?;
                    let peers: BTreeSet<AgentId> = rec
                        .parse_with(1, |s| parse_list(s, |p| p.parse().ok().map(AgentId)))?
                        .into_iter()
                        .collect();
                    if peers.is_empty() {
                        return Err(rec.err("empty inference line"));
                    }
                    if inferred.insert(AgentId(rec.parse(0)?), peers).is_some() {
                        return Err(rec.err("duplicate inference line"));
                    }
                }
                "station" => {
                    rec.expect_len(2)?;
                    sniffer.stations.push(Location::new(rec.parse(0)?, rec.parse(1)?));
                }
                "obs" => {
                    rec.expect_len(3)?;
                    let o = Observation {
                        tick: rec.parse(0)?,
                        station: rec.parse(1)?,
                        id: EphemeralId(rec.parse_with(2, parse_hex)?),
                    };
                    if o.station as usize >= sniffer.stations.len() {
                        return Err(rec.err(format!("unknown station {}", o.station)));
                    }
                    if sniffer.observations.last().is_some_and(|p| *p >= o) {
                        return Err(rec.err("observations must be sorted and unique"));
                    }
                    sniffer.observations.push(o);
                }
                "track" => {
                    rec.expect_len(2)?;
                    let ids = rec.parse_with(0, parse_records)?;
                    let sightings = rec.parse_with(1, parse_sightings)?;
                    if sightings.iter().any(|s| s.1 as usize >= sniffer.stations.len()) {
                        return Err(rec.err("track sighting at an unknown station"));
                    }
                    tracks.push(Track { ids, sightings });
                }
                "chain" => sniffer_linkage.partition.chains.push(chain_of(&rec)?),
                "achain" => authority_linkage.partition.chains.push(chain_of(&rec)?),
                "sdiag" | "adiag" => {
                    if rec.is_empty() {
                        return Err(rec.err("empty diagnostic"));
                    }
                    let slot = if rec.tag == "sdiag" {
                        &mut sniffer_linkage.diagnostic
                    } else {
                        &mut authority_linkage.diagnostic
                    };
                    once(slot, &rec, rec.rest(0))?;
                }
                other => return Err(rec.err(format!("unknown record tag `{other}`"))),
            }
        }
        for l in [&sniffer_linkage, &authority_linkage] {
            if !l.partition.is_valid() {
                return Err(ParseError::new(0, "chains overlap or run backwards in time"));
            }
        }

        let missing = |what: &str| ParseError::new(0, format!("missing `{what}` line"));
        let k_anchors = k_anchors.ok_or_else(|| missing("k_anchors"))?;
        Ok(AttackReport {
            run_id: run.ok_or_else(|| missing("run"))?,
            kind: kind.ok_or_else(|| missing("kind"))?,
            theta: theta.ok_or_else(|| missing("theta"))?,
            side: SideKnowledge { k_anchors, anchors },
            reidentified,
            inferred,
            sniffer,
            tracks,
            sniffer_linkage,
            authority_linkage,
        })
    }
}
