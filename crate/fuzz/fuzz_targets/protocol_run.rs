#![no_main]

use ctsim::protocols::ProtocolRun;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(run) = ProtocolRun::parse_text(text) {
        let again = ProtocolRun::parse_text(&run.to_text()).expect("written run reparses");
        assert_eq!(again.to_text(), run.to_text());
    }
});
