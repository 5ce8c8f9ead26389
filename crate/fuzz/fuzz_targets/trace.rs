#![no_main]

use ctsim::SimulationTrace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = SimulationTrace::parse_text(text) {
        let again = SimulationTrace::parse_text(&trace.to_text()).expect("written trace reparses");
        assert_eq!(again.to_text(), trace.to_text());
    }
});
