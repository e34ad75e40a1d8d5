#![no_main]

use cutlab_core::harness::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = Config::from_bytes(data) {
        let text = config.to_toml().expect("parsed values serialize");
        let again = Config::parse(&text).expect("canonical form parses");
        // NaN fields compare unequal; compare the canonical text instead.
        assert_eq!(again.to_toml().expect("parsed values serialize"), text);
    }
});
