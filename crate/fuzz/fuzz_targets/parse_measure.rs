#![no_main]

use idem_core::transport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mu) = idem_core::formats::parse_inline_measure(text) else { return };
    assert_eq!(mu.weights().map(|(_, w)| w).fold(f64::NEG_INFINITY, f64::max), 0.0);
    let d = transport::distance_fast(&mu, &mu).expect("same space");
    assert_eq!(d.value, 0.0);
    let p = transport::distance_paper_mode(&mu, &mu).expect("same space");
    assert!(p.value <= mu.space().diameter());
});
