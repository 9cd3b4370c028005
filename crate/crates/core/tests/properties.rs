use std::sync::Arc;

use idem_core::tower::{LimitPoint, Tower, TowerElement, TowerError};
use idem_core::transport::{self, Algorithm, Mode};
use idem_core::{FiniteMetricSpace, IdempotentMeasure, MaxPlus, PointMap};
use proptest::prelude::*;

fn line(coords: &[i32]) -> Arc<FiniteMetricSpace> {
    let labels = (0..coords.len()).map(|i| format!("p{i}")).collect();
    let xs: Vec<f64> = coords.iter().map(|&c| c as f64 / 4.0).collect();
    Arc::new(FiniteMetricSpace::on_line(labels, &xs).unwrap())
}

fn coords(max: usize) -> impl Strategy<Value = Vec<i32>> {
    prop::collection::btree_set(0i32..40, 1..=max).prop_map(|s| s.into_iter().collect())
}

/// Up to four `(point, weight)` pairs; indices are reduced mod the space size.
fn raw_weights() -> impl Strategy<Value = Vec<(usize, i32)>> {
    prop::collection::vec((0usize..8, -32i32..=0), 1..=4)
}

fn level1(x: &Arc<FiniteMetricSpace>, w: &[(usize, i32)]) -> TowerElement {
    let mu = IdempotentMeasure::from_indexed(
        x.clone(),
        w.iter().map(|&(i, v)| (i % x.len(), MaxPlus::Finite(v as f64 / 4.0))),
    )
    .unwrap();
    TowerElement::from_measure(&mu)
}

fn level2(x: &Arc<FiniteMetricSpace>, parts: &[(Vec<(usize, i32)>, i32)]) -> TowerElement {
    TowerElement::measure(parts.iter().map(|(w, v)| (level1(x, w), MaxPlus::Finite(*v as f64 / 4.0)))).unwrap()
}

fn satisfies_axioms(d: &[Vec<f64>]) -> bool {
    let n = d.len();
    (0..n).all(|i| {
        (0..n)
            .all(|j| (d[i][j] == 0.0) == (i == j) && d[i][j] == d[j][i] && (0..n).all(|k| d[i][k] <= d[i][j] + d[j][k]))
    })
}

proptest! {
    #[test]
    fn validate_accepts_exactly_metrics(
        n in 1usize..=4,
        entries in prop::collection::vec(0u8..6, 16),
        symmetric in any::<bool>(),
    ) {
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = if symmetric { entries[i.min(j) * 4 + i.max(j)] } else { entries[i * 4 + j] } as f64;
            }
        }
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let result = FiniteMetricSpace::validate(labels.clone(), d.clone());
        prop_assert_eq!(result.is_ok(), satisfies_axioms(&d));
        if let Ok(space) = result {
            let again = FiniteMetricSpace::validate(labels, space.matrix().to_vec()).unwrap();
            prop_assert_eq!(again.matrix(), space.matrix());
        }
    }

    #[test]
    fn modulus_is_monotone_and_isometries_behave(
        src in coords(5),
        tgt in coords(5),
        picks in prop::collection::vec(0usize..5, 5),
        eps in prop::collection::vec(0i32..48, 2),
    ) {
        let (x, y) = (line(&src), line(&tgt));
        let f = PointMap::new(x.clone(), y.clone(), (0..x.len()).map(|i| picks[i] % y.len()).collect()).unwrap();
        let (e1, e2) = (eps[0].min(eps[1]) as f64 / 4.0, eps[0].max(eps[1]) as f64 / 4.0);
        prop_assert!(f.modulus(e1).as_f64() <= f.modulus(e2).as_f64());

        // inclusion of a point set into a superset
        let mut wider = src.clone();
        wider.extend(tgt.iter().filter(|c| !src.contains(c)));
        let z = line(&wider);
        let inc = PointMap::new(x.clone(), z, (0..x.len()).collect()).unwrap();
        prop_assert!(inc.is_isometric_embedding());
        if x.len() > 1 {
            prop_assert_eq!(inc.lipschitz_constant(), 1.0);
        }
        prop_assert!(inc.modulus(e1).as_f64() >= e1);
    }

    #[test]
    fn truncation_caps_both_modes(pts in coords(5), a in 0usize..5, b in 0usize..5, gap in 0i32..400) {
        let x = line(&pts);
        let (a, b) = (a % x.len(), b % x.len());
        // second point buried far below the first
        let mu = IdempotentMeasure::from_indexed(x.clone(), [(a, MaxPlus::ONE), (b, MaxPlus::Finite(-(gap as f64)))]).unwrap();
        let nu = IdempotentMeasure::dirac_at(x.clone(), b);
        for mode in [Mode::Paper, Mode::Coupling] {
            let r = transport::distance(&mu, &nu, mode, Algorithm::Fast).unwrap();
            prop_assert!(r.value <= x.diameter());
            prop_assert_eq!(r.truncated, r.value == x.diameter() && r.witness.cost() > x.diameter());
        }
    }

    #[test]
    fn limit_distance_does_not_depend_on_level(
        pts in coords(5),
        p in prop::collection::vec((raw_weights(), -16i32..=0), 1..=2),
        q in raw_weights(),
        r in 0usize..5,
    ) {
        let x = line(&pts);
        let tower = Tower::new(x.clone());
        let points = [
            LimitPoint::new(level2(&x, &p)),
            LimitPoint::new(level1(&x, &q)),
            LimitPoint::new(TowerElement::Point(r % x.len())),
        ];
        for a in &points {
            for b in &points {
                let m = a.level().max(b.level());
                let here = tower.limit_distance_at(a, b, m).unwrap();
                for higher in m + 1..=tower.max_level() {
                    prop_assert_eq!(tower.limit_distance_at(a, b, higher).unwrap(), here);
                }
                prop_assert_eq!(tower.limit_distance(b, a).unwrap(), here);
            }
        }
    }

    #[test]
    fn lift_is_an_isometry(pts in coords(5), a in raw_weights(), b in raw_weights()) {
        let x = line(&pts);
        let tower = Tower::new(x.clone());
        let (a, b) = (level1(&x, &a), level1(&x, &b));
        prop_assert_eq!(tower.level_metric(&a.lift(), &b.lift()).unwrap(), tower.level_metric(&a, &b).unwrap());
    }
}

#[test]
fn depth_guard_rejects_deep_elements() {
    let x = line(&[0, 4, 8]);
    let deep = TowerElement::Point(0).eta(4).unwrap();
    let tower = Tower::new(x);
    assert_eq!(tower.max_level(), 3);
    assert!(matches!(tower.level_metric(&deep, &deep), Err(TowerError::LevelTooHigh { level: 4, max: 3 })));
    assert!(matches!(tower.eta(&TowerElement::Point(0), 4), Err(TowerError::LevelTooHigh { .. })));
}
