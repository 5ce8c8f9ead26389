#![no_main]

use ctsim::adversary::AttackReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = AttackReport::parse_text(text) {
        let again = AttackReport::parse_text(&report.to_text()).expect("written report reparses");
        assert_eq!(again.to_text(), report.to_text());
    }
});
