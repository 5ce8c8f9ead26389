#![no_main]

use ctsim::metrics::{PrivacyReport, UtilityReport};
use libfuzzer_sys::fuzz_target;

// privacy.txt and utility.txt share one target; the header picks the parser.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((label, p)) = PrivacyReport::parse_text(text) {
        let (l2, p2) = PrivacyReport::parse_text(&p.to_text(label)).expect("written report reparses");
        assert_eq!(p2.to_text(l2), p.to_text(label));
    }
    if let Ok((label, u)) = UtilityReport::parse_text(text) {
        let (l2, u2) = UtilityReport::parse_text(&u.to_text(label)).expect("written report reparses");
        assert_eq!(u2.to_text(l2), u.to_text(label));
    }
});
