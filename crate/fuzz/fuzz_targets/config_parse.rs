#![no_main]
use libfuzzer_sys::fuzz_target;
use mfimpulse::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            // anything accepted must survive a round trip unchanged
            let again = RunConfig::parse(&cfg.to_toml()).expect("re-parse");
            assert_eq!(again, cfg);
        }
    }
});
