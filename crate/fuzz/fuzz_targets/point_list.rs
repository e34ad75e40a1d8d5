#![no_main]

use cutlab_core::harness::config::{parse_point, parse_point_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_point_list::<i64>(text) {
        assert!(!points.is_empty());
        let d = points[0].len();
        assert!(d > 0 && points.iter().all(|p| p.len() == d));
        let joined: Vec<String> =
            points.iter().map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")).collect();
        assert_eq!(parse_point_list::<i64>(&joined.join(";")).expect("canonical list parses"), points);
    }
    let _ = parse_point::<f64>(text);
});
