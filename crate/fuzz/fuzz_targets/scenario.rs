#![no_main]

use ctsim::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Scenario::parse(text) {
        let again = Scenario::parse(&s.to_text()).expect("canonical form reparses");
        assert_eq!(again.to_text(), s.to_text());
    }
});
