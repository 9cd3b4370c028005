#![no_main]

use idem_core::example1;
use idem_core::tower::Tower;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let x = example1::domain();
    let Ok(e) = idem_core::formats::parse_tower_element(text, &x) else { return };
    let tower = Tower::new(x.clone());
    if tower.check(&e).is_ok() && e.level() <= 2 && e.weights().len() <= 4 {
        // supports are small enough for the fast metric to stay cheap
        if let Ok(d) = tower.level_metric(&e, &e) {
            assert_eq!(d, 0.0);
        }
    }
});
