#![no_main]
use libfuzzer_sys::fuzz_target;
use mfimpulse::model::forms::FormSpec;
use mfimpulse::{PriceForm, RewardForm};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = FormSpec::parse(text) {
        assert_eq!(FormSpec::parse(&spec.to_string()).unwrap(), spec);
    }
    if let Ok(c) = text.parse::<RewardForm>() {
        assert_eq!(c.to_string().parse::<RewardForm>().unwrap(), c);
    }
    if let Ok(phi) = text.parse::<PriceForm>() {
        assert_eq!(phi.to_string().parse::<PriceForm>().unwrap(), phi);
    }
});
