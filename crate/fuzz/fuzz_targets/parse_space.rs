#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(space) = idem_core::formats::parse_space(text) {
        // an accepted space must survive a second validation unchanged
        let again = idem_core::FiniteMetricSpace::validate(space.labels().to_vec(), space.matrix().to_vec())
            .expect("revalidation");
        assert_eq!(again, space);
        assert!(space.diameter() >= 0.0);
    }
});
