#![no_main]

use libfuzzer_sys::fuzz_target;
use shockprice_core::{Measure, PayoffKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(kind) = text.parse::<PayoffKind>() {
        // canonical names parse back to the same kind
        assert_eq!(kind.name().parse::<PayoffKind>().ok(), Some(kind));
    }
    let _ = text.parse::<Measure>();
});
