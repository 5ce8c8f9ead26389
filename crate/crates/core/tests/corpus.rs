//! Replays the fuzz seed corpus through every parser.

use std::fs;
use std::path::PathBuf;

use ctsim::adversary::AttackReport;
use ctsim::metrics::{PrivacyReport, UtilityReport};
use ctsim::protocols::ProtocolRun;
use ctsim::scenario::Scenario;
use ctsim::SimulationTrace;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn scenario_seeds_parse_except_the_invalid_one() {
    for (name, text) in seeds("scenario") {
        match Scenario::parse(&text) {
            Ok(s) => assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s, "{name}"),
            Err(e) => assert!(name.starts_with("invalid"), "{name}: {e}"),
        }
    }
}

#[test]
fn trace_seeds_round_trip() {
    for (name, text) in seeds("trace") {
        let trace = SimulationTrace::parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(trace.to_text(), text, "{name}");
    }
}

#[test]
fn run_seeds_round_trip() {
    for (name, text) in seeds("protocol_run") {
        let run = ProtocolRun::parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(run.to_text(), text, "{name}");
    }
}

#[test]
fn attack_seeds_round_trip() {
    for (name, text) in seeds("attacks") {
        let report = AttackReport::parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(report.to_text(), text, "{name}");
    }
}

#[test]
fn report_seeds_round_trip_under_their_own_parser() {
    for (name, text) in seeds("reports") {
        if name.starts_with("privacy") {
            let (label, p) = PrivacyReport::parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(p.to_text(label), text, "{name}");
            assert!(UtilityReport::parse_text(&text).is_err(), "{name}");
        } else {
            let (label, u) = UtilityReport::parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(u.to_text(label), text, "{name}");
            assert!(PrivacyReport::parse_text(&text).is_err(), "{name}");
        }
    }
}

#[test]
fn truncated_seeds_never_panic() {
    for target in ["trace", "protocol_run", "attacks", "reports"] {
        for (_, text) in seeds(target) {
            for cut in (0..text.len()).step_by(97) {
                let prefix = &text[..cut];
                let _ = SimulationTrace::parse_text(prefix);
                let _ = ProtocolRun::parse_text(prefix);
                let _ = AttackReport::parse_text(prefix);
                let _ = PrivacyReport::parse_text(prefix);
                let _ = UtilityReport::parse_text(prefix);
                let _ = Scenario::parse(prefix);
            }
        }
    }
}
