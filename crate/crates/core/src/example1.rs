//! Built-in worked example: two measures on a grid in `[0, 10]` and the
//! folding map `f(x) = 1 − 4(x − ½)²` on `[0, 1]`, `x − 1` beyond.
//!
//! The interval is discretized to the points the example touches. The
//! codomain additionally carries `9 = f(10)` so that `f` is total; both
//! grids have diameter `10`.

use std::sync::Arc;

use crate::measure::IdempotentMeasure;
use crate::space::{FiniteMetricSpace, PointMap};

pub const DOMAIN_LABELS: [&str; 7] = ["0", "1/4", "1/2", "3/4", "1", "7/4", "10"];
pub const DOMAIN_COORDS: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.75, 10.0];
pub const CODOMAIN_LABELS: [&str; 8] = ["0", "1/4", "1/2", "3/4", "1", "7/4", "9", "10"];
pub const CODOMAIN_COORDS: [f64; 8] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.75, 9.0, 10.0];

pub const MU1: [(&str, f64); 2] = [("0", 0.0), ("1/4", -5.0)];
pub const MU2: [(&str, f64); 2] = [("3/4", 0.0), ("1", -4.0)];

pub fn fold(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        1.0 - 4.0 * (x - 0.5) * (x - 0.5)
    } else {
        x - 1.0
    }
}

fn grid(labels: &[&str], coords: &[f64]) -> Arc<FiniteMetricSpace> {
    let labels = labels.iter().map(|s| s.to_string()).collect();
    Arc::new(FiniteMetricSpace::on_line(labels, coords).expect("grid is a metric space"))
}

pub fn domain() -> Arc<FiniteMetricSpace> {
    grid(&DOMAIN_LABELS, &DOMAIN_COORDS)
}

pub fn codomain() -> Arc<FiniteMetricSpace> {
    grid(&CODOMAIN_LABELS, &CODOMAIN_COORDS)
}

pub fn map() -> PointMap {
    let assignment = DOMAIN_COORDS
        .iter()
        .map(|&x| {
            let y = fold(x);
            CODOMAIN_COORDS.iter().position(|&c| c == y).expect("grid is closed under f")
        })
        .collect();
    PointMap::new(domain(), codomain(), assignment).expect("valid map")
}

pub fn measures() -> (IdempotentMeasure, IdempotentMeasure) {
    let x = domain();
    (
        IdempotentMeasure::from_weights(x.clone(), &MU1).expect("valid measure"),
        IdempotentMeasure::from_weights(x, &MU2).expect("valid measure"),
    )
}
