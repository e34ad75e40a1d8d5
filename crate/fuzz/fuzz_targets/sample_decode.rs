#![no_main]

use cutlab_core::lattice::PercolationSample;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(sample) = PercolationSample::from_bytes(data) {
        // Anything accepted must round-trip.
        let again = PercolationSample::from_bytes(&sample.to_bytes()).expect("re-encoded sample decodes");
        assert_eq!(again, sample);
        let spec = sample.spec();
        assert_eq!(sample.bits().len(), spec.edge_count());
    }
});
