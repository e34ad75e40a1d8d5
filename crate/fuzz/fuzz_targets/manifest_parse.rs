#![no_main]

use cutlab_core::harness::manifest::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = Manifest::from_bytes(data) {
        let again = Manifest::from_bytes(manifest.to_json().as_bytes()).expect("re-encoded manifest parses");
        assert_eq!(again, manifest);
    }
});
