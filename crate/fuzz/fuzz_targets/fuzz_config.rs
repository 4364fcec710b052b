#![no_main]

use libfuzzer_sys::fuzz_target;
use shockprice_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        // anything accepted must also pass validation on its own
        assert!(cfg.validate().is_ok());
        assert!(cfg.spots.iter().all(|s| *s > 0.0 && s.is_finite()));
    }
});
