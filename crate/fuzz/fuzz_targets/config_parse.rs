#![no_main]

use libfuzzer_sys::fuzz_target;
use placelab::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml(text) else {
        return;
    };
    let emitted = cfg.to_toml();
    let again = RunConfig::from_toml(&emitted).expect("emitted config must parse");
    assert_eq!(again, cfg);
    assert_eq!(again.to_toml(), emitted);
});
