#![no_main]

use idem_core::example1;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (x, y) = (example1::domain(), example1::codomain());
    if let Ok(f) = idem_core::formats::parse_point_map(text, x.clone(), y) {
        assert_eq!(f.assignment().len(), x.len());
        let _ = f.lipschitz_constant();
        let _ = f.modulus(1.0);
    }
});
