#![no_main]

use libfuzzer_sys::fuzz_target;
use shockprice_cli::config::MAX_LIST_LEN;
use shockprice_cli::parse_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(xs) = parse_list(text) {
        assert!(!xs.is_empty() && xs.len() <= MAX_LIST_LEN + 1);
        assert!(xs.iter().all(|x| x.is_finite()));
    }
});
