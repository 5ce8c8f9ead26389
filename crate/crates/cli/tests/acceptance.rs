//! The ten acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 1-8 run in process on the desk scenario (50x50 grid, 200
//! agents, one week, 10 seeds). Criterion 9 drives the `ctsim` binary;
//! criterion 10 checks the binary's files against an independent
//! recomputation in `bruteforce`.

mod bruteforce;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ctsim::adversary::{
    link_identifier_chains, observed_links, run_attacks, score_links, shuffled_view, AttackParams,
    AttackScore, StationSpec,
};
use ctsim::metrics::{privacy_report, utility_report, PrivacyReport, UtilityReport};
use ctsim::protocols::{run_protocol, ProtocolKind, ProtocolOptions};
use ctsim::scenario::{ProtocolChoice, Scenario};
use ctsim::{run_simulation, AgentId, SimulationTrace, Tick, World, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const K_SWEEP: [usize; 4] = [0, 1, 2, 4];
const CHANCE_TOLERANCE: f64 = 0.05;
const COMPARE_TIME_LIMIT: Duration = Duration::from_secs(60);

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct KindFacts {
    kind: ProtocolKind,
    /// Empty when the at-risk set matched the oracle.
    at_risk_mismatch: Option<String>,
    known_at_risk: usize,
    privacy: PrivacyReport,
    utility: UtilityReport,
}

struct SeedFacts {
    seed: u64,
    exposure_exists: bool,
    has_uninfected: bool,
    kinds: Vec<KindFacts>,
    authority_linkage: AttackScore,
    shuffled_sniffer_linkage: AttackScore,
    reid_by_k: Vec<f64>,
}

impl SeedFacts {
    fn of(&self, kind: ProtocolKind) -> &KindFacts {
        self.kinds.iter().find(|k| k.kind == kind).expect("all kinds run")
    }
}

/// Everyone who shared an encounter with a reporter inside that report's
/// window, by a straight scan of the encounter list.
fn oracle_at_risk(trace: &SimulationTrace, window: Tick) -> BTreeSet<AgentId> {
    let mut out = BTreeSet::new();
    for r in &trace.report_events {
        let lo = (r.tick + 1).saturating_sub(window);
        for e in &trace.encounters {
            if e.tick >= lo && e.tick <= r.tick {
                if e.a == r.agent {
                    out.insert(e.b);
                } else if e.b == r.agent {
                    out.insert(e.a);
                }
            }
        }
    }
    out
}

fn collect_seed(seed: u64) -> SeedFacts {
    let trace = run_simulation(&WorldConfig { seed, ..WorldConfig::desk() }).expect("desk runs");
    let params = AttackParams::default();
    let mut kinds = Vec::new();
    let mut authority_linkage = None;
    let mut shuffled = None;
    let mut reid_by_k = Vec::new();
    let mut exposure_exists = false;
    for kind in ProtocolKind::ALL {
        let run = run_protocol(&trace, kind, &ProtocolOptions::default()).expect("protocol runs");
        let oracle = oracle_at_risk(&trace, run.context.recent_window);
        exposure_exists |= !oracle.is_empty();
        let got = run.at_risk();
        let at_risk_mismatch = (got != oracle).then(|| {
            format!(
                "{kind} seed {seed}: {} missed, {} spurious",
                oracle.difference(&got).count(),
                got.difference(&oracle).count()
            )
        });
        let attacks = run_attacks(&trace, &run, &params).expect("attacks run");
        if kind == ProtocolKind::P3 {
            authority_linkage = Some(attacks.authority_linkage_score(&run).expect("same run"));
            let view = attacks.sniffer.linkage_view(run.context.ticks_per_hour);
            let truth = observed_links(&run.devices, &view);
            let sv = shuffled_view(&view, &mut ChaCha8Rng::seed_from_u64(seed));
            let claimed = link_identifier_chains(&sv, params.theta).partition.links();
            shuffled = Some(score_links(&claimed, &truth));
        }
        if kind == ProtocolKind::P1 {
            for k in K_SWEEP {
                let p = AttackParams { k_anchors: k, ..params.clone() };
                let a = run_attacks(&trace, &run, &p).expect("attacks run");
                reid_by_k.push(privacy_report(&run, &a, &trace).expect("same run").q2_reid_recall);
            }
        }
        kinds.push(KindFacts {
            kind,
            at_risk_mismatch,
            known_at_risk: run.authority.known_at_risk.len(),
            privacy: privacy_report(&run, &attacks, &trace).expect("same run"),
            utility: utility_report(&run, &trace).expect("same run"),
        });
    }
    SeedFacts {
        seed,
        exposure_exists,
        has_uninfected: trace.ever_infected().len() < trace.n_agents(),
        kinds,
        authority_linkage: authority_linkage.expect("P3 ran"),
        shuffled_sniffer_linkage: shuffled.expect("P3 ran"),
        reid_by_k,
    }
}

fn verdict(id: u8, title: &'static str, failures: Vec<String>, ok_detail: String) -> Verdict {
    Verdict {
        id,
        title,
        pass: failures.is_empty(),
        detail: if failures.is_empty() { ok_detail } else { failures.join("; ") },
    }
}

fn c1_oracle(desk: &[SeedFacts]) -> Verdict {
    let failures: Vec<String> = desk
        .iter()
        .flat_map(|s| s.kinds.iter().filter_map(|k| k.at_risk_mismatch.clone()))
        .collect();
    verdict(1, "oracle equivalence of at-risk sets", failures, format!("4 protocols x {} seeds, exact", desk.len()))
}

fn c2_authority_knows(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    let mut checked = 0;
    for s in desk.iter().filter(|s| s.exposure_exists) {
        checked += 1;
        for k in &s.kinds {
            let should_know = matches!(k.kind, ProtocolKind::P1a | ProtocolKind::P2);
            if (k.known_at_risk > 0) != should_know {
                failures.push(format!("{} seed {}: authority knows {} at-risk users", k.kind, s.seed, k.known_at_risk));
            }
        }
    }
    verdict(2, "authority learns at-risk identities only under P1a and P2", failures, format!("{checked} seeds with exposures"))
}

fn c3_user_inference(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    for s in desk {
        let q = s.of(ProtocolKind::P2).privacy.q4_user_inference_rate;
        if q != 0.0 {
            failures.push(format!("P2 seed {}: q4 = {q}", s.seed));
        }
    }
    let p3_positive = desk.iter().filter(|s| s.of(ProtocolKind::P3).privacy.q4_user_inference_rate > 0.0).count();
    if p3_positive < 8 {
        failures.push(format!("P3 q4 > 0 on only {p3_positive}/{} seeds", desk.len()));
    }
    verdict(3, "users identify infected peers under P3, never under P2", failures, format!("P2 q4 = 0 everywhere; P3 q4 > 0 on {p3_positive}/{} seeds", desk.len()))
}

fn c4_authority_data(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    for s in desk {
        let q1 = |k| s.of(k).privacy;
        if s.has_uninfected && q1(ProtocolKind::P1a).q1_authority_items <= q1(ProtocolKind::P1).q1_authority_items {
            failures.push(format!("seed {}: q1(P1a) <= q1(P1)", s.seed));
        }
        if q1(ProtocolKind::P2).q1_encounter_pairs == 0 {
            failures.push(format!("seed {}: P2 holds no encounter pairs", s.seed));
        }
        if q1(ProtocolKind::P3).q1_encounter_pairs != 0 {
            failures.push(format!("seed {}: P3 holds encounter pairs", s.seed));
        }
    }
    let mean = |k| desk.iter().map(|s| s.of(k).privacy.q1_authority_items as f64).sum::<f64>() / desk.len() as f64;
    verdict(4, "authority data volume ordering", failures, format!("mean q1: P1 {:.0}, P1a {:.0}", mean(ProtocolKind::P1), mean(ProtocolKind::P1a)))
}

fn c5_tracking(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    let mut wins = 0;
    let mut ratios = Vec::new();
    for s in desk {
        let p2 = s.of(ProtocolKind::P2).privacy;
        let p3 = s.of(ProtocolKind::P3).privacy;
        if p2.q6_mean_track_epochs >= 2.0 * p3.q6_mean_track_epochs {
            wins += 1;
        }
        ratios.push(p2.q6_mean_track_epochs / p3.q6_mean_track_epochs);
        if p2.q6_tracking_recall != 1.0 {
            failures.push(format!("seed {}: P2 tracking recall {}", s.seed, p2.q6_tracking_recall));
        }
    }
    if wins < 8 {
        failures.push(format!("P2 tracks >= 2x P3 on only {wins}/{} seeds", desk.len()));
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(5, "fixed identifiers are tracked longer than rotating ones", failures, format!("{wins}/{} seeds, smallest P2/P3 ratio {min:.2}; P2 recall 1.0", desk.len()))
}

/// Three stationary devices on distinct cells, each with a sniffer on its
/// cell: their rotating ids are heard by the same single station every
/// epoch.
fn colocated_scenario() -> (f64, f64, f64) {
    let base = WorldConfig {
        grid_width: 5,
        grid_height: 5,
        n_agents: 3,
        ticks_per_hour: 10,
        sim_ticks: 30,
        proximity_radius: 0,
        move_prob: 0.0,
        anchor_return_prob: 0.0,
        p_transmit: 0.0,
        incubation_ticks: 1,
        infectious_ticks: 1,
        report_delay_ticks: 1,
        n_initial_infected: 0,
        p_recognize: 0.0,
        seed: 0,
    };
    let (config, homes) = (0u64..)
        .find_map(|seed| {
            let cfg = WorldConfig { seed, ..base.clone() };
            let homes = World::new(cfg.clone()).expect("valid").homes().to_vec();
            let distinct: BTreeSet<_> = homes.iter().collect();
            (distinct.len() == homes.len()).then_some((cfg, homes))
        })
        .expect("some seed spreads three homes");
    let trace = run_simulation(&config).expect("runs");
    let run = run_protocol(&trace, ProtocolKind::P3, &ProtocolOptions::default()).expect("runs");
    let params = AttackParams { stations: StationSpec::Fixed(homes), ..AttackParams::default() };
    let attacks = run_attacks(&trace, &run, &params).expect("runs");
    let real = attacks.tracking(&run).expect("same run").links;

    let view = attacks.sniffer.linkage_view(config.ticks_per_hour);
    let truth = observed_links(&run.devices, &view);
    let draws = 2000;
    let shuffled_mean = (0..draws)
        .map(|i| {
            let sv = shuffled_view(&view, &mut ChaCha8Rng::seed_from_u64(i));
            score_links(&link_identifier_chains(&sv, params.theta).partition.links(), &truth).recall
        })
        .sum::<f64>()
        / draws as f64;
    (real.recall, shuffled_mean, truth.baseline)
}

fn c6_linkage_bet(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    for s in desk {
        let a = s.authority_linkage;
        if (a.recall - a.baseline).abs() > CHANCE_TOLERANCE {
            failures.push(format!("seed {}: authority recall {:.3} vs chance {:.3}", s.seed, a.recall, a.baseline));
        }
        let c = s.shuffled_sniffer_linkage;
        if (c.recall - c.baseline).abs() > CHANCE_TOLERANCE {
            failures.push(format!("seed {}: shuffled desk recall {:.3} vs chance {:.3}", s.seed, c.recall, c.baseline));
        }
    }
    let (real, shuffled, baseline) = colocated_scenario();
    if real < 0.9 {
        failures.push(format!("co-located eavesdropper recall {real:.3} < 0.9"));
    }
    if (shuffled - baseline).abs() > CHANCE_TOLERANCE {
        failures.push(format!("co-located shuffled recall {shuffled:.3} vs chance {baseline:.3}"));
    }
    let worst_auth = desk.iter().map(|s| (s.authority_linkage.recall - s.authority_linkage.baseline).abs()).fold(0.0, f64::max);
    verdict(
        6,
        "linkage succeeds only with real continuity evidence",
        failures,
        format!("authority within {worst_auth:.3} of chance; co-located recall {real:.3}; shuffled {shuffled:.3} vs chance {baseline:.3}"),
    )
}

fn c7_utility(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    for s in desk {
        let (u2, u3) = (s.of(ProtocolKind::P2).utility, s.of(ProtocolKind::P3).utility);
        let bits = |u: UtilityReport| (u.recall.to_bits(), u.precision.to_bits(), u.mean_latency_ticks.to_bits());
        if bits(u2) != bits(u3) {
            failures.push(format!("seed {}: P2 {u2:?} != P3 {u3:?}", s.seed));
        }
        for k in &s.kinds {
            if k.utility.recall != 1.0 {
                failures.push(format!("{} seed {}: recall {}", k.kind, s.seed, k.utility.recall));
            }
        }
    }
    verdict(7, "utility identical for P2 and P3, perfect recall everywhere", failures, "bit-exact".into())
}

fn c8_reid(desk: &[SeedFacts]) -> Verdict {
    let mut failures = Vec::new();
    for s in desk {
        let r = &s.reid_by_k;
        if r[0] != 0.0 || r.windows(2).any(|w| w[1] < w[0]) {
            failures.push(format!("seed {}: recall by k {K_SWEEP:?} = {r:?}", s.seed));
        }
    }
    let mean = |i: usize| desk.iter().map(|s| s.reid_by_k[i]).sum::<f64>() / desk.len() as f64;
    verdict(
        8,
        "re-identification grows with side knowledge",
        failures,
        format!("mean recall for k = 0,1,2,4: {:.3}, {:.3}, {:.3}, {:.3}", mean(0), mean(1), mean(2), mean(3)),
    )
}

fn ctsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ctsim")).args(args).output().expect("binary runs")
}

fn desk_scenario(dir: &Path) -> String {
    let mut s = Scenario::from_world(WorldConfig::desk());
    s.seeds = SEEDS.collect();
    let path = dir.join("desk.cfg");
    fs::write(&path, s.to_text()).expect("write config");
    path.to_string_lossy().into_owned()
}

/// Ordering facts every desk table must satisfy, read back from its CSV.
fn table_invariants(csv: &str) -> Vec<String> {
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap_or_default().split(',').collect();
    let table: BTreeMap<&str, Vec<f64>> = rows
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0], cells[1..].iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        })
        .collect();
    let get = |p: &str, col: &str| -> f64 {
        let i = header.iter().position(|h| *h == col).expect("column") - 1;
        table[p][i]
    };
    let mut bad = Vec::new();
    if table.len() != 4 {
        bad.push(format!("{} rows", table.len()));
        return bad;
    }
    if get("P2", "q4_user_inference_rate_max") != 0.0 || get("P3", "q4_user_inference_rate_mean") < get("P2", "q4_user_inference_rate_mean") {
        bad.push("q4(P3) >= q4(P2) = 0 violated".into());
    }
    if get("P1a", "q1_authority_items_min") <= get("P1", "q1_authority_items_max") {
        bad.push("q1(P1a) > q1(P1) violated".into());
    }
    if get("P2", "q1_encounter_pairs_min") == 0.0 || get("P3", "q1_encounter_pairs_max") != 0.0 {
        bad.push("encounter pairs: P2 > 0, P3 = 0 violated".into());
    }
    if get("P2", "q6_mean_track_epochs_mean") < get("P3", "q6_mean_track_epochs_mean") {
        bad.push("q6(P2) >= q6(P3) violated".into());
    }
    for p in ["P1", "P3"] {
        if get(p, "q3_authority_knows_at_risk_max") != 0.0 {
            bad.push(format!("authority knows at-risk users under {p}"));
        }
    }
    for col in ["utility_recall", "utility_precision", "utility_mean_latency_ticks"] {
        for s in ["mean", "min", "max"] {
            let c = format!("{col}_{s}");
            if get("P2", &c).to_bits() != get("P3", &c).to_bits() {
                bad.push(format!("{c} differs between P2 and P3"));
            }
        }
    }
    bad
}

fn c9_determinism(extra: &mut Vec<String>) -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = desk_scenario(dir.path());
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut times = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let start = Instant::now();
        let o = ctsim(&["compare", "--config", &config, "--out", &out.to_string_lossy(), "--format", "csv"]);
        let took = start.elapsed();
        times.push(took);
        if !o.status.success() {
            failures.push(format!("compare exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
            continue;
        }
        if took > COMPARE_TIME_LIMIT {
            failures.push(format!("compare took {took:.1?}, limit {COMPARE_TIME_LIMIT:?}"));
        }
        outputs.push(fs::read(out.join("table.csv")).expect("table written"));
    }
    if outputs.len() == 2 && outputs[0] != outputs[1] {
        failures.push("table.csv differs between runs".into());
    }
    if let Some(first) = outputs.first() {
        let bad = table_invariants(&String::from_utf8_lossy(first));
        extra.push(format!(
            "{} desk table ordering invariants{}",
            if bad.is_empty() { "PASS" } else { "FAIL" },
            if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }
        ));
    }
    verdict(9, "compare output is byte-identical across runs", failures, format!("desk, 10 seeds, {:.1?} and {:.1?}", times[0], times[1]))
}

fn tiny_world(seed: u64) -> WorldConfig {
    WorldConfig {
        grid_width: 3,
        grid_height: 3,
        n_agents: 5,
        ticks_per_hour: 5,
        sim_ticks: 20,
        proximity_radius: 1,
        move_prob: 0.6,
        anchor_return_prob: 0.2,
        p_transmit: 0.5,
        incubation_ticks: 1,
        infectious_ticks: 12,
        report_delay_ticks: 2,
        n_initial_infected: 1,
        p_recognize: 0.6,
        seed,
    }
}

fn c10_bruteforce() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut failures = Vec::new();
    let mut checked = 0;
    for seed in 1..=6u64 {
        let mut per_kind: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for kind in ProtocolKind::ALL {
            let mut s = Scenario::from_world(tiny_world(seed));
            s.protocol = ProtocolChoice::One(kind);
            s.attack.stations = StationSpec::Random(4);
            let cfg = dir.path().join(format!("{kind}-{seed}.cfg"));
            fs::write(&cfg, s.to_text()).expect("write config");
            let out = dir.path().join(format!("{kind}-{seed}"));
            let o = ctsim(&["simulate", "--config", &cfg.to_string_lossy(), "--out", &out.to_string_lossy()]);
            if !o.status.success() {
                failures.push(format!("{kind} seed {seed}: simulate failed"));
                continue;
            }
            let read = |n: &str| fs::read_to_string(out.join(n)).expect("file written");
            let expected = match bruteforce::expected_reports(&read("trace.txt"), &read("run.txt"), &read("attacks.txt")) {
                Ok(e) => e,
                Err(e) => {
                    failures.push(format!("{kind} seed {seed}: {e}"));
                    continue;
                }
            };
            let mut reported = bruteforce::report_values(&read("privacy.txt"));
            reported.extend(bruteforce::report_values(&read("utility.txt")));
            for (key, want) in &expected {
                checked += 1;
                match reported.get(key) {
                    Some(got) if got.to_bits() == want.to_bits() => {}
                    got => failures.push(format!("{kind} seed {seed} {key}: file {got:?}, recomputed {want}")),
                }
            }
            if reported.len() != expected.len() {
                failures.push(format!("{kind} seed {seed}: {} report fields, {} recomputed", reported.len(), expected.len()));
            }
            per_kind.insert(kind.to_string(), expected);
        }

        // The one-seed comparison table must repeat the same numbers.
        let s = Scenario::from_world(tiny_world(seed));
        let mut s = s;
        s.attack.stations = StationSpec::Random(4);
        let cfg = dir.path().join(format!("all-{seed}.cfg"));
        fs::write(&cfg, s.to_text()).expect("write config");
        let out = dir.path().join(format!("all-{seed}"));
        let o = ctsim(&["compare", "--config", &cfg.to_string_lossy(), "--out", &out.to_string_lossy(), "--format", "csv"]);
        if !o.status.success() {
            failures.push(format!("seed {seed}: compare failed"));
            continue;
        }
        let csv = fs::read_to_string(out.join("table.csv")).expect("table written");
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            let Some(expected) = per_kind.get(cells[0]) else {
                failures.push(format!("seed {seed}: unexpected row {}", cells[0]));
                continue;
            };
            for (col, cell) in header.iter().zip(&cells).skip(2) {
                let metric = col.rsplit_once('_').map_or(*col, |(m, _)| m);
                let key = metric.strip_prefix("utility_").unwrap_or(metric);
                checked += 1;
                let got: f64 = cell.parse().unwrap_or(f64::NAN);
                if expected.get(key).map(|w| w.to_bits()) != Some(got.to_bits()) {
                    failures.push(format!("seed {seed} table {} {col}: {cell} vs {:?}", cells[0], expected.get(key)));
                }
            }
        }
    }
    verdict(10, "every reported number recomputed from the serialized logs", failures, format!("5 agents, 20 ticks, 6 seeds, {checked} values matched exactly"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let desk: Vec<SeedFacts> = SEEDS.map(collect_seed).collect();
    let in_process = start.elapsed();
    let mut extra = Vec::new();
    let verdicts = vec![
        c1_oracle(&desk),
        c2_authority_knows(&desk),
        c3_user_inference(&desk),
        c4_authority_data(&desk),
        c5_tracking(&desk),
        c6_linkage_bet(&desk),
        c7_utility(&desk),
        c8_reid(&desk),
        c9_determinism(&mut extra),
        c10_bruteforce(),
    ];
    println!("desk scenario, seeds {}..={}: in-process runs took {in_process:.1?}", SEEDS.start(), SEEDS.end());
    for v in &verdicts {
        println!(
            "{} criterion {:>2}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.title,
            v.detail
        );
    }
    for line in &extra {
        println!("{line}");
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 && extra.iter().all(|l| l.starts_with("PASS")) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
