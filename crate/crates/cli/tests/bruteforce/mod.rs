//! Recomputes every report field from the text files alone.
//!
//! Deliberately shares nothing with the library: the files are split by
//! hand and every quantity is recomputed by exhaustive loops, so a bug in
//! the library's parsers or scorers cannot hide itself here.

use std::collections::{BTreeMap, BTreeSet};

type Point = (u64, u32, u32);

fn list(s: &str) -> Vec<&str> {
    if s == "-" {
        Vec::new()
    } else {
        s.split(',').collect()
    }
}

fn points(s: &str) -> Vec<Point> {
    list(s)
        .into_iter()
        .map(|p| {
            let v: Vec<&str> = p.split(':').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap())
        })
        .collect()
}

/// `epoch:id` pairs.
fn records(s: &str) -> Vec<(u64, String)> {
    list(s)
        .into_iter()
        .map(|r| {
            let (e, id) = r.split_once(':').unwrap();
            (e.parse().unwrap(), id.to_string())
        })
        .collect()
}

fn lines<'a>(text: &'a str, tag: &str) -> Vec<Vec<&'a str>> {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|w| w.first() == Some(&tag))
        .map(|w| w[1..].to_vec())
        .collect()
}

fn header<'a>(text: &'a str, tag: &str) -> &'a str {
    lines(text, tag)[0][0]
}

/// Every privacy and utility field, keyed by its report name.
pub fn expected_reports(trace: &str, run: &str, attacks: &str) -> Result<BTreeMap<String, f64>, String> {
    let tph: u64 = header(run, "ticks_per_hour").parse().unwrap();
    let radius: u32 = header(run, "proximity_radius").parse().unwrap();
    let window: u64 = header(run, "recent_window").parse().unwrap();
    let kind = header(run, "kind");
    let mut out = BTreeMap::new();

    // Authority holdings.
    let traj_points: usize = lines(run, "atraj").iter().map(|w| list(w[1]).len()).sum();
    let enc_pairs = lines(run, "aenc").len();
    let id_records: usize = lines(run, "aset").iter().map(|w| list(w[0]).len()).sum();
    let registry = lines(run, "reg").len();
    out.insert("q1_trajectory_points".into(), traj_points as f64);
    out.insert("q1_encounter_pairs".into(), enc_pairs as f64);
    out.insert("q1_id_records".into(), id_records as f64);
    out.insert("q1_registry_entries".into(), registry as f64);
    out.insert("q1_authority_items".into(), (traj_points + enc_pairs + id_records + registry) as f64);
    let known = lines(run, "arisk").len();
    out.insert("q3_authority_knows_at_risk".into(), if known > 0 { 1.0 } else { 0.0 });
    out.insert("q3_known_at_risk_count".into(), known as f64);

    // Devices.
    let devs = lines(run, "dev");
    let n = devs.len();
    let pseudonym_of: Vec<String> = devs.iter().map(|w| w[1].to_string()).collect();
    let notified: BTreeMap<u32, u64> = devs
        .iter()
        .filter(|w| w[3] != "-")
        .map(|w| (w[0].parse().unwrap(), w[3].parse().unwrap()))
        .collect();
    let own_traj: BTreeMap<u32, Vec<Point>> = lines(run, "traj")
        .iter()
        .map(|w| (w[0].parse().unwrap(), points(w[1])))
        .collect();
    // (tick, observed id or "-", peer)
    let recog: BTreeMap<u32, Vec<(u64, String, u32)>> = lines(run, "recog")
        .iter()
        .map(|w| {
            let entries = list(w[1])
                .into_iter()
                .map(|e| {
                    let v: Vec<&str> = e.split(':').collect();
                    (v[0].parse().unwrap(), v[1].to_string(), v[2].parse().unwrap())
                })
                .collect();
            (w[0].parse().unwrap(), entries)
        })
        .collect();
    let schedule: BTreeMap<u32, Vec<(u64, String)>> = lines(run, "sched")
        .iter()
        .map(|w| (w[0].parse().unwrap(), records(w[1])))
        .collect();

    // Publications, in log order.
    let mut published_trajs: Vec<Vec<(String, Vec<Point>)>> = Vec::new();
    let mut published_ids: Vec<BTreeSet<String>> = Vec::new();
    for w in lines(run, "msg") {
        if w[2] != "all" {
            continue;
        }
        match w[3] {
            "PublishTrajectories" => {
                let mut batch = Vec::new();
                let mut rest = &w[4..];
                while rest.len() >= 2 {
                    batch.push((rest[0].to_string(), points(rest[1])));
                    rest = &rest[2..];
                }
                published_trajs.push(batch);
            }
            "PublishInfectedIds" => {
                published_ids.push(list(w[4]).into_iter().map(str::to_string).collect());
            }
            _ => {}
        }
    }
    let all_published: Vec<&(String, Vec<Point>)> = published_trajs.iter().flatten().collect();

    // Curious users: who each one can name as infected.
    let mut inferred: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for d in 0..n as u32 {
        let mine = recog.get(&d).cloned().unwrap_or_default();
        let mut found = BTreeSet::new();
        if kind == "P3" {
            for ids in &published_ids {
                for (_, observed, peer) in &mine {
                    if ids.contains(observed) {
                        found.insert(*peer);
                    }
                }
            }
        }
        if kind == "P1" && !mine.is_empty() {
            let own = own_traj.get(&d).cloned().unwrap_or_default();
            for (p, traj) in &all_published {
                if *p == pseudonym_of[d as usize] {
                    continue;
                }
                let mut meet = BTreeSet::new();
                for &(t, x, y) in traj.iter() {
                    for &(u, ox, oy) in &own {
                        if t == u && x.abs_diff(ox).max(y.abs_diff(oy)) <= radius {
                            meet.insert(t);
                        }
                    }
                }
                let named: BTreeSet<u32> = mine.iter().filter(|r| meet.contains(&r.0)).map(|r| r.2).collect();
                if named.len() == 1 {
                    found.extend(named);
                }
            }
        }
        if !found.is_empty() {
            inferred.insert(d, found);
        }
    }
    let mut lib_inferred: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for w in lines(attacks, "infer") {
        lib_inferred.insert(w[0].parse().unwrap(), list(w[1]).iter().map(|p| p.parse().unwrap()).collect());
    }
    if inferred != lib_inferred {
        return Err(format!("inference claims differ: recomputed {inferred:?}, attacks.txt {lib_inferred:?}"));
    }

    let reported: BTreeSet<u32> = lines(trace, "R").iter().map(|w| w[1].parse().unwrap()).collect();
    let identified: BTreeSet<u32> = inferred
        .iter()
        .flat_map(|(u, ps)| ps.iter().filter(move |p| *p != u).copied())
        .collect();
    out.insert(
        "q4_user_inference_rate".into(),
        if reported.is_empty() {
            0.0
        } else {
            identified.intersection(&reported).count() as f64 / reported.len() as f64
        },
    );

    let total_points: usize = all_published.iter().map(|(_, t)| t.len()).sum();
    let q5 = if n == 0 {
        0.0
    } else {
        let mut sum = 0usize;
        for d in 0..n as u32 {
            let own: usize = all_published
                .iter()
                .filter(|(p, _)| *p == pseudonym_of[d as usize])
                .map(|(_, t)| t.len())
                .sum();
            sum += total_points - own + inferred.get(&d).map_or(0, BTreeSet::len);
        }
        sum as f64 / n as f64
    };
    out.insert("q5_personal_items_per_user".into(), q5);

    // Re-identification from anchors against the published trajectories.
    let anchors: BTreeMap<u32, Vec<Point>> = lines(attacks, "anchor")
        .iter()
        .map(|w| (w[0].parse().unwrap(), points(w[1])))
        .collect();
    let k: usize = header(attacks, "k_anchors").parse().unwrap();
    let mut claims: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    if k > 0 {
        for (t, a) in &anchors {
            if a.is_empty() {
                continue;
            }
            let hits: Vec<&String> = all_published
                .iter()
                .filter(|(_, traj)| a.iter().all(|p| traj.contains(p)))
                .map(|(p, _)| p)
                .collect();
            if hits.len() == 1 {
                claims.entry(hits[0].clone()).or_default().push(*t);
            }
        }
    }
    let claims: BTreeMap<String, u32> = claims.into_iter().filter(|(_, v)| v.len() == 1).map(|(p, v)| (p, v[0])).collect();
    let lib_claims: BTreeMap<String, u32> =
        lines(attacks, "reid").iter().map(|w| (w[0].to_string(), w[1].parse().unwrap())).collect();
    if claims != lib_claims {
        return Err(format!("re-identification claims differ: recomputed {claims:?}, attacks.txt {lib_claims:?}"));
    }
    let correct = claims
        .iter()
        .filter(|(p, a)| pseudonym_of.get(**a as usize) == Some(p) && anchors.contains_key(a))
        .count();
    out.insert(
        "q2_reid_recall".into(),
        if anchors.is_empty() { 0.0 } else { correct as f64 / anchors.len() as f64 },
    );

    // Eavesdropper.
    let obs: Vec<(u64, u32, String)> = lines(attacks, "obs")
        .iter()
        .map(|w| (w[0].parse().unwrap(), w[1].parse().unwrap(), w[2].to_string()))
        .collect();
    let tracks: Vec<(Vec<(u64, String)>, Vec<(u64, u32)>)> = lines(attacks, "track")
        .iter()
        .map(|w| {
            let s = list(w[1])
                .into_iter()
                .map(|x| {
                    let (t, st) = x.split_once(':').unwrap();
                    (t.parse().unwrap(), st.parse().unwrap())
                })
                .collect();
            (records(w[0]), s)
        })
        .collect();
    if kind == "P2" {
        let ids: BTreeSet<&String> = obs.iter().map(|o| &o.2).collect();
        if tracks.len() != ids.len() {
            return Err(format!("P2: {} tracks for {} heard ids", tracks.len(), ids.len()));
        }
    }
    let mean_epochs = if tracks.is_empty() {
        0.0
    } else {
        tracks
            .iter()
            .map(|(_, s)| s.iter().map(|x| x.0 / tph).collect::<BTreeSet<_>>().len() as f64)
            .sum::<f64>()
            / tracks.len() as f64
    };
    out.insert("q6_mean_track_epochs".into(), mean_epochs);

    let owner = |id: &str| -> Option<u32> {
        schedule.iter().find(|(_, s)| s.iter().any(|r| r.1 == id)).map(|(a, _)| *a)
    };
    let mut per_device: BTreeMap<u32, Vec<&String>> = BTreeMap::new();
    for o in &obs {
        if let Some(a) = owner(&o.2) {
            per_device.entry(a).or_default().push(&o.2);
        }
    }
    let recall = if per_device.is_empty() {
        0.0
    } else {
        per_device
            .values()
            .map(|ids| {
                let best = tracks
                    .iter()
                    .map(|(tids, _)| ids.iter().filter(|id| tids.iter().any(|r| r.1 == ***id)).count())
                    .max()
                    .unwrap_or(0);
                best as f64 / ids.len() as f64
            })
            .sum::<f64>()
            / per_device.len() as f64
    };
    out.insert("q6_tracking_recall".into(), recall);

    let heard: BTreeSet<(u64, &String)> = obs.iter().map(|o| (o.0 / tph, &o.2)).collect();
    let mut truth = BTreeSet::new();
    for s in schedule.values() {
        for w in s.windows(2) {
            if w[1].0 == w[0].0 + 1 && heard.contains(&(w[0].0, &w[0].1)) && heard.contains(&(w[1].0, &w[1].1)) {
                truth.insert((w[0].clone(), w[1].clone()));
            }
        }
    }
    let mut claimed = BTreeSet::new();
    for (ids, _) in &tracks {
        for w in ids.windows(2) {
            if w[1].0 == w[0].0 + 1 {
                claimed.insert((w[0].clone(), w[1].clone()));
            }
        }
    }
    out.insert(
        "q6_linkage_recall".into(),
        if truth.is_empty() {
            0.0
        } else {
            claimed.intersection(&truth).count() as f64 / truth.len() as f64
        },
    );

    // Utility against the encounters in the trace.
    let encounters: Vec<(u64, u32, u32)> = lines(trace, "E")
        .iter()
        .map(|w| (w[0].parse().unwrap(), w[1].parse().unwrap(), w[2].parse().unwrap()))
        .collect();
    let mut first: BTreeMap<u32, u64> = BTreeMap::new();
    for w in lines(trace, "R") {
        let (tr, who): (u64, u32) = (w[0].parse().unwrap(), w[1].parse().unwrap());
        let lo = (tr + 1).saturating_sub(window.max(1));
        for &(t, a, b) in &encounters {
            if t >= lo && t <= tr && (a == who || b == who) {
                let peer = if a == who { b } else { a };
                let e = first.entry(peer).or_insert(tr);
                *e = (*e).min(tr);
            }
        }
    }
    let hits: Vec<u32> = notified.keys().filter(|a| first.contains_key(a)).copied().collect();
    out.insert(
        "recall".into(),
        if first.is_empty() { 1.0 } else { hits.len() as f64 / first.len() as f64 },
    );
    out.insert(
        "precision".into(),
        if notified.is_empty() { 1.0 } else { hits.len() as f64 / notified.len() as f64 },
    );
    out.insert(
        "mean_latency_ticks".into(),
        if hits.is_empty() {
            0.0
        } else {
            hits.iter().map(|a| notified[a].saturating_sub(first[a]) as f64).sum::<f64>() / hits.len() as f64
        },
    );
    Ok(out)
}

/// `key = value` pairs of a report file, skipping `run` and `kind`.
pub fn report_values(text: &str) -> BTreeMap<String, f64> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(" = "))
        .filter(|(k, _)| *k != "run" && *k != "kind")
        .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
        .collect()
}
