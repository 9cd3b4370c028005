//! The idempotent Kantorovich-type distance between finitely supported
//! measures.
//!
//! For a set `S` of support pairs the transport cost is
//! `max_{(x,y) ∈ S} |λ₁(x) − λ₂(y)| + ρ(x, y)`, and every distance is
//! truncated to `min(diam X, cost)` at the very end. Two readings of which
//! `S` to use are provided:
//!
//! * [`Mode::Paper`] takes `S` to be the whole product of the supports.
//!   This is a closed form; it is not zero on the diagonal.
//! * [`Mode::Coupling`] minimizes over all `S` that support a max-plus
//!   coupling of the two measures. It is computed both by exhaustive
//!   enumeration ([`distance_oracle`]) and by a bottleneck formula
//!   ([`distance_fast`]).
//!
//! Pair weights of a coupling never enter the cost, so feasibility of `S`
//! only needs the largest admissible assignment `min(λ₁(x), λ₂(y))`: row
//! `x` reaches its marginal iff some `y` with `(x, y) ∈ S` has
//! `λ₂(y) ≥ λ₁(x)`, and symmetrically for columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::IdempotentMeasure;
use crate::semiring::TOL;
use crate::space::same_space;

/// Largest number of support pairs the oracle will enumerate subsets of.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("measures live on different spaces")]
    SpaceMismatch,
    #[error("point {0:?} is outside the support")]
    OutsideSupport(String),
    #[error("{pairs} support pairs exceed the oracle cap of {cap}; use the fast algorithm")]
    CapExceeded { pairs: usize, cap: usize },
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Paper,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ClosedForm,
    Oracle,
    Fast,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Paper => "paper",
            Mode::Coupling => "coupling",
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::ClosedForm => "closed_form",
            Algorithm::Oracle => "oracle",
            Algorithm::Fast => "fast",
        })
    }
}

/// A max-plus coupling `ξ` of two measures on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    row: IdempotentMeasure,
    col: IdempotentMeasure,
    pairs: BTreeMap<(usize, usize), f64>,
}

impl Coupling {
    /// Checks both marginals and the pointwise bound on pair weights.
    pub fn new(
        row: IdempotentMeasure,
        col: IdempotentMeasure,
        pairs: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self, TransportError> {
        if !same_space(row.space(), col.space()) {
            return Err(TransportError::SpaceMismatch);
        }
        if pairs.is_empty() {
            return Err(TransportError::InvalidCoupling("empty pair set".into()));
        }
        let mut row_max: BTreeMap<usize, f64> = BTreeMap::new();
        let mut col_max: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(x, y), &w) in &pairs {
            let (lx, ly) = match (row.weight(x).finite(), col.weight(y).finite()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(TransportError::InvalidCoupling(format!(
                        "pair ({}, {}) leaves the supports",
                        row.space().label(x),
                        row.space().label(y)
                    )))
                }
            };
            if !w.is_finite() || w > lx.min(ly) + TOL {
                return Err(TransportError::InvalidCoupling(format!(
                    "weight {w} at ({}, {}) exceeds min(λ₁, λ₂)",
                    row.space().label(x),
                    row.space().label(y)
                )));
            }
            let r = row_max.entry(x).or_insert(f64::NEG_INFINITY);
            *r = r.max(w);
            let c = col_max.entry(y).or_insert(f64::NEG_INFINITY);
            *c = c.max(w);
        }
        let marginal_ok = |m: &IdempotentMeasure, got: &BTreeMap<usize, f64>| {
            m.weights().all(|(i, l)| got.get(&i).is_some_and(|&g| (g - l).abs() <= TOL))
        };
        if !marginal_ok(&row, &row_max) || !marginal_ok(&col, &col_max) {
            return Err(TransportError::InvalidCoupling("marginals do not match".into()));
        }
        Ok(Coupling { row, col, pairs })
    }

    pub fn row_measure(&self) -> &IdempotentMeasure {
        &self.row
    }

    pub fn col_measure(&self) -> &IdempotentMeasure {
        &self.col
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pairs.iter().map(|(&k, &w)| (k, w))
    }

    /// The support set `S_ξ`.
    pub fn support_set(&self) -> Vec<(usize, usize)> {
        self.pairs.keys().copied().collect()
    }

    /// Untruncated cost: the largest pair cost over `S_ξ`.
    pub fn cost(&self) -> f64 {
        self.pairs.keys().map(|&(x, y)| raw_pair_cost(&self.row, &self.col, x, y)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub witness: Coupling,
    /// Whether the outer `min` with the diameter was active.
    pub truncated: bool,
}

impl DistanceResult {
    fn finish(witness: Coupling, mode: Mode, algorithm: Algorithm) -> Self {
        let raw = witness.cost();
        let diam = witness.row.space().diameter();
        DistanceResult { value: raw.min(diam), mode, algorithm, witness, truncated: raw > diam }
    }
}

#[derive(Serialize)]
struct PairJson<'a> {
    x: &'a str,
    y: &'a str,
    w: f64,
}

#[derive(Serialize)]
struct ResultJson<'a> {
    pairs: Vec<PairJson<'a>>,
    value: f64,
    truncated: bool,
    mode: Mode,
    algorithm: Algorithm,
}

impl Serialize for DistanceResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let space = self.witness.row.space();
        ResultJson {
            pairs: self
                .witness
                .pairs()
                .map(|((x, y), w)| PairJson { x: space.label(x), y: space.label(y), w })
                .collect(),
            value: self.value,
            truncated: self.truncated,
            mode: self.mode,
            algorithm: self.algorithm,
        }
        .serialize(s)
    }
}

fn raw_pair_cost(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure, x: usize, y: usize) -> f64 {
    let l1 = mu1.weight(x).to_f64();
    let l2 = mu2.weight(y).to_f64();
    (l1 - l2).abs() + mu1.space().dist(x, y)
}

/// `λ₂(y) ≥ λ₁(x)` up to [`TOL`].
fn reaches(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - TOL
}

fn check_same_space(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure) -> Result<(), TransportError> {
    if same_space(mu1.space(), mu2.space()) {
        Ok(())
    } else {
        Err(TransportError::SpaceMismatch)
    }
}

/// `|λ₁(x) − λ₂(y)| ⊙ ρ(x, y)` for `x ∈ supp μ₁`, `y ∈ supp μ₂`.
pub fn pair_cost(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure, x: usize, y: usize) -> Result<f64, TransportError> {
    check_same_space(mu1, mu2)?;
    for (m, p) in [(mu1, x), (mu2, y)] {
        if m.weight(p).is_bottom() {
            let label = if p < m.space().len() { m.space().label(p).to_string() } else { format!("#{p}") };
            return Err(TransportError::OutsideSupport(label));
        }
    }
    Ok(raw_pair_cost(mu1, mu2, x, y))
}

/// Cost over the full product of the supports.
pub fn distance_paper_mode(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure) -> Result<DistanceResult, TransportError> {
    check_same_space(mu1, mu2)?;
    let all: Vec<(usize, usize)> = product(mu1, mu2).collect();
    let witness = coupling_feasible(&all, mu1, mu2).expect("full product always supports a coupling");
    Ok(DistanceResult::finish(witness, Mode::Paper, Algorithm::ClosedForm))
}

fn product<'a>(mu1: &'a IdempotentMeasure, mu2: &'a IdempotentMeasure) -> impl Iterator<Item = (usize, usize)> + 'a {
    mu1.weights().flat_map(move |(x, _)| mu2.weights().map(move |(y, _)| (x, y)))
}

/// Gives each pair its largest admissible weight and returns the coupling
/// if both marginals are attained.
pub fn coupling_feasible(
    support_set: &[(usize, usize)],
    mu1: &IdempotentMeasure,
    mu2: &IdempotentMeasure,
) -> Option<Coupling> {
    if !same_space(mu1.space(), mu2.space()) || support_set.is_empty() {
        return None;
    }
    let mut pairs = BTreeMap::new();
    let mut rows_hit = BTreeSet::new();
    let mut cols_hit = BTreeSet::new();
    for &(x, y) in support_set {
        let l1 = mu1.weight(x).finite()?;
        let l2 = mu2.weight(y).finite()?;
        pairs.insert((x, y), l1.min(l2));
        if reaches(l2, l1) {
            rows_hit.insert(x);
        }
        if reaches(l1, l2) {
            cols_hit.insert(y);
        }
    }
    let rows_ok = mu1.weights().all(|(x, _)| rows_hit.contains(&x));
    let cols_ok = mu2.weights().all(|(y, _)| cols_hit.contains(&y));
    if !(rows_ok && cols_ok) {
        return None;
    }
    Coupling::new(mu1.clone(), mu2.clone(), pairs).ok()
}

pub fn distance_oracle(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure) -> Result<DistanceResult, TransportError> {
    distance_oracle_with_cap(mu1, mu2, DEFAULT_ENUMERATION_CAP)
}

/// Minimum cost over every nonempty subset of the support product that
/// carries a coupling.
pub fn distance_oracle_with_cap(
    mu1: &IdempotentMeasure,
    mu2: &IdempotentMeasure,
    cap: usize,
) -> Result<DistanceResult, TransportError> {
    check_same_space(mu1, mu2)?;
    let all: Vec<(usize, usize)> = product(mu1, mu2).collect();
    if all.len() > cap || all.len() >= 64 {
        return Err(TransportError::CapExceeded { pairs: all.len(), cap });
    }
    let cost: Vec<f64> = all.iter().map(|&(x, y)| raw_pair_cost(mu1, mu2, x, y)).collect();
    let masks = marginal_masks(&all, mu1, mu2);
    let mut best: Option<(f64, u64)> = None;
    for mask in 1u64..(1u64 << all.len()) {
        if !covers(&masks, mask) {
            continue;
        }
        let mut c = 0.0f64;
        let mut bits = mask;
        while bits != 0 {
            c = c.max(cost[bits.trailing_zeros() as usize]);
            bits &= bits - 1;
        }
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, mask));
        }
    }
    let (_, mask) = best.expect("full product is always feasible");
    let chosen: Vec<(usize, usize)> = (0..all.len()).filter(|b| mask >> b & 1 == 1).map(|b| all[b]).collect();
    let witness = coupling_feasible(&chosen, mu1, mu2).expect("mask test agrees with coupling_feasible");
    Ok(DistanceResult::finish(witness, Mode::Coupling, Algorithm::Oracle))
}

/// One bitmask per support point of either measure: bit `b` is set when
/// pair `all[b]` lies on that point's row or column and can carry its
/// marginal weight.
fn marginal_masks(all: &[(usize, usize)], mu1: &IdempotentMeasure, mu2: &IdempotentMeasure) -> Vec<u64> {
    let rows = mu1.support();
    let cols = mu2.support();
    let mut masks = vec![0u64; rows.len() + cols.len()];
    for (b, &(x, y)) in all.iter().enumerate() {
        let (l1, l2) = (mu1.weight(x).to_f64(), mu2.weight(y).to_f64());
        if reaches(l2, l1) {
            masks[rows.binary_search(&x).unwrap()] |= 1 << b;
        }
        if reaches(l1, l2) {
            masks[rows.len() + cols.binary_search(&y).unwrap()] |= 1 << b;
        }
    }
    masks
}

/// A subset of pairs carries a coupling iff it meets every marginal mask.
fn covers(masks: &[u64], subset: u64) -> bool {
    masks.iter().all(|&m| m & subset != 0)
}

/// Bottleneck formula: every row takes its cheapest partner among the
/// columns that can carry its weight, every column likewise, and the cost
/// is the worst of those choices. Ties go to the lower point index.
pub fn distance_fast(mu1: &IdempotentMeasure, mu2: &IdempotentMeasure) -> Result<DistanceResult, TransportError> {
    check_same_space(mu1, mu2)?;
    let mut chosen = Vec::new();
    for (x, l1) in mu1.weights() {
        let y =
            cheapest(mu2.weights().filter(|&(_, l2)| reaches(l2, l1)).map(|(y, _)| (y, raw_pair_cost(mu1, mu2, x, y))));
        chosen.push((x, y));
    }
    for (y, l2) in mu2.weights() {
        let x =
            cheapest(mu1.weights().filter(|&(_, l1)| reaches(l1, l2)).map(|(x, _)| (x, raw_pair_cost(mu1, mu2, x, y))));
        chosen.push((x, y));
    }
    chosen.sort_unstable();
    chosen.dedup();
    let witness = coupling_feasible(&chosen, mu1, mu2).expect("per-row and per-column choices are feasible");
    Ok(DistanceResult::finish(witness, Mode::Coupling, Algorithm::Fast))
}

fn cheapest(candidates: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates {
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((i, c));
        }
    }
    // a weight-0 point is always a candidate
    best.expect("normalized measure has a point of weight 0").0
}

/// Dispatches on mode; the algorithm only matters in coupling mode, where
/// [`Algorithm::ClosedForm`] is treated as [`Algorithm::Fast`].
pub fn distance(
    mu1: &IdempotentMeasure,
    mu2: &IdempotentMeasure,
    mode: Mode,
    algorithm: Algorithm,
) -> Result<DistanceResult, TransportError> {
    match (mode, algorithm) {
        (Mode::Paper, _) => distance_paper_mode(mu1, mu2),
        (Mode::Coupling, Algorithm::Oracle) => distance_oracle(mu1, mu2),
        (Mode::Coupling, _) => distance_fast(mu1, mu2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example1;
    use crate::space::FiniteMetricSpace;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn idx(m: &IdempotentMeasure, l: &str) -> usize {
        m.space().index_of(l).unwrap()
    }

    #[test]
    fn pair_cost_examples() {
        let (mu1, mu2) = example1::measures();
        assert_eq!(pair_cost(&mu1, &mu2, idx(&mu1, "1/4"), idx(&mu1, "3/4")).unwrap(), 5.5);
        assert_eq!(pair_cost(&mu1, &mu2, idx(&mu1, "0"), idx(&mu1, "1")).unwrap(), 5.0);
        assert_eq!(pair_cost(&mu1, &mu1, idx(&mu1, "1/4"), idx(&mu1, "1/4")).unwrap(), 0.0);
        assert_eq!(
            pair_cost(&mu1, &mu2, idx(&mu1, "1/2"), idx(&mu1, "1")).unwrap_err(),
            TransportError::OutsideSupport("1/2".into())
        );
    }

    #[test]
    fn paper_mode_example1() {
        let (mu1, mu2) = example1::measures();
        let f = example1::map();
        assert_eq!(distance_paper_mode(&mu1, &mu2).unwrap().value, 5.5);
        let (p1, p2) = (mu1.pushforward(&f).unwrap(), mu2.pushforward(&f).unwrap());
        assert_eq!(distance_paper_mode(&p1, &p2).unwrap().value, 5.0);
        assert!(distance_paper_mode(&mu1, &mu1).unwrap().value > 0.0);
    }

    #[test]
    fn coupling_feasible_examples() {
        let (mu1, mu2) = example1::measures();
        let p = |a: &str, b: &str| (idx(&mu1, a), idx(&mu1, b));
        let xi = coupling_feasible(&[p("0", "3/4"), p("0", "1"), p("1/4", "1")], &mu1, &mu2).unwrap();
        let ws: Vec<f64> = xi.pairs().map(|(_, w)| w).collect();
        assert_eq!(ws, vec![0.0, -4.0, -5.0]);
        assert!(coupling_feasible(&[p("0", "3/4")], &mu1, &mu2).is_none());
        let diag: Vec<_> = mu1.support().into_iter().map(|x| (x, x)).collect();
        let id = coupling_feasible(&diag, &mu1, &mu1).unwrap();
        assert_eq!(id.pairs().map(|((x, _), w)| (x, w)).collect::<Vec<_>>(), mu1.weights().collect::<Vec<_>>());
    }

    #[test]
    fn oracle_and_fast_example1() {
        let (mu1, mu2) = example1::measures();
        let o = distance_oracle(&mu1, &mu2).unwrap();
        assert_eq!(o.value, 5.0);
        let p = |a: &str, b: &str| (idx(&mu1, a), idx(&mu1, b));
        assert_eq!(o.witness.support_set(), vec![p("0", "3/4"), p("0", "1"), p("1/4", "1")]);
        assert_eq!(distance_fast(&mu1, &mu2).unwrap().value, 5.0);

        let f = example1::map();
        let (p1, p2) = (mu1.pushforward(&f).unwrap(), mu2.pushforward(&f).unwrap());
        assert_eq!(distance_oracle(&p1, &p2).unwrap().value, 4.0);
        assert_eq!(distance_fast(&p1, &p2).unwrap().value, 4.0);
        assert_eq!(distance_oracle(&mu1, &mu1).unwrap().value, 0.0);
    }

    #[test]
    fn dirac_distance_is_base_distance() {
        let x = example1::domain();
        for i in 0..x.len() {
            for j in 0..x.len() {
                let a = IdempotentMeasure::dirac_at(x.clone(), i);
                let b = IdempotentMeasure::dirac_at(x.clone(), j);
                for mode in [Mode::Paper, Mode::Coupling] {
                    assert_eq!(distance(&a, &b, mode, Algorithm::Fast).unwrap().value, x.dist(i, j));
                }
            }
        }
    }

    #[test]
    fn truncation_by_diameter() {
        let x = Arc::new(FiniteMetricSpace::on_line(vec!["x1".into(), "x2".into()], &[0.0, 1.0]).unwrap());
        let mu1 = IdempotentMeasure::from_weights(x.clone(), &[("x1", 0.0), ("x2", -2.0)]).unwrap();
        let mu2 = IdempotentMeasure::from_weights(x.clone(), &[("x1", 0.0), ("x2", -7.0)]).unwrap();
        for r in [distance_fast(&mu1, &mu2), distance_oracle(&mu1, &mu2), distance_paper_mode(&mu1, &mu2)] {
            let r = r.unwrap();
            assert_eq!(r.value, 1.0);
            assert!(r.truncated);
        }
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let x = example1::domain();
        let all: Vec<(&str, f64)> = example1::DOMAIN_LABELS.iter().map(|&l| (l, -1.0)).collect();
        let m = IdempotentMeasure::from_weights(x, &all).unwrap();
        assert_eq!(
            distance_oracle(&m, &m).unwrap_err(),
            TransportError::CapExceeded { pairs: 49, cap: DEFAULT_ENUMERATION_CAP }
        );
        assert_eq!(
            distance_oracle_with_cap(&m, &m, 48).unwrap_err(),
            TransportError::CapExceeded { pairs: 49, cap: 48 }
        );
    }

    #[test]
    fn space_mismatch() {
        let (mu1, _) = example1::measures();
        let other = mu1.pushforward(&example1::map()).unwrap();
        assert_eq!(distance_fast(&mu1, &other).unwrap_err(), TransportError::SpaceMismatch);
        assert_eq!(distance_paper_mode(&mu1, &other).unwrap_err(), TransportError::SpaceMismatch);
    }

    #[test]
    fn serialized_witness_shape() {
        let (mu1, mu2) = example1::measures();
        let v = serde_json::to_value(distance_oracle(&mu1, &mu2).unwrap()).unwrap();
        assert_eq!(v["value"], 5.0);
        assert_eq!(v["mode"], "coupling");
        assert_eq!(v["algorithm"], "oracle");
        assert_eq!(v["truncated"], false);
        assert_eq!(v["pairs"][1]["x"], "0");
        assert_eq!(v["pairs"][1]["y"], "1");
        assert_eq!(v["pairs"][1]["w"], -4.0);
    }

    fn measure_strategy(n: usize) -> impl Strategy<Value = Vec<Option<i32>>> {
        prop::collection::vec(prop::option::weighted(0.6, -32i32..=0), n)
    }

    prop_compose! {
        fn instance()(coords in prop::collection::btree_set(0i32..40, 1..6))(
            w1 in measure_strategy(coords.len()),
            w2 in measure_strategy(coords.len()),
            coords in Just(coords),
        ) -> Option<(IdempotentMeasure, IdempotentMeasure)> {
            let coords: Vec<f64> = coords.into_iter().map(|c| c as f64 / 4.0).collect();
            let labels = (0..coords.len()).map(|i| format!("p{i}")).collect();
            let x = Arc::new(FiniteMetricSpace::on_line(labels, &coords).unwrap());
            let build = |w: Vec<Option<i32>>| {
                IdempotentMeasure::from_indexed(
                    x.clone(),
                    w.into_iter().enumerate().filter_map(|(i, w)| w.map(|w| (i, (w as f64 / 4.0).into()))).take(3),
                ).ok()
            };
            Some((build(w1)?, build(w2)?))
        }
    }

    proptest! {
        #[test]
        fn oracle_matches_fast_and_basic_bounds(inst in instance()) {
            let Some((mu1, mu2)) = inst else { return Ok(()) };
            let o = distance_oracle(&mu1, &mu2).unwrap();
            let f = distance_fast(&mu1, &mu2).unwrap();
            prop_assert_eq!(o.value, f.value);
            prop_assert_eq!(o.truncated, f.truncated);
            prop_assert!(o.value <= distance_paper_mode(&mu1, &mu2).unwrap().value);
            prop_assert!(o.value <= mu1.space().diameter());
            prop_assert_eq!(o.value, distance_fast(&mu2, &mu1).unwrap().value);
            prop_assert_eq!(distance_fast(&mu1, &mu1).unwrap().value, 0.0);
            prop_assert_eq!(o.witness.cost().min(mu1.space().diameter()), o.value);
        }

        #[test]
        fn mask_test_matches_coupling_feasible(inst in instance()) {
            let Some((mu1, mu2)) = inst else { return Ok(()) };
            let all: Vec<(usize, usize)> = product(&mu1, &mu2).collect();
            let masks = marginal_masks(&all, &mu1, &mu2);
            for subset in 1u64..(1 << all.len()) {
                let pairs: Vec<_> = (0..all.len()).filter(|b| subset >> b & 1 == 1).map(|b| all[b]).collect();
                prop_assert_eq!(covers(&masks, subset), coupling_feasible(&pairs, &mu1, &mu2).is_some());
            }
        }
    }
}
