#![no_main]
use libfuzzer_sys::fuzz_target;
use mfimpulse::report::ReportEnvelope;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(env) = ReportEnvelope::from_json(text) {
            let _ = env.to_json();
        }
    }
});
