//! The iterated measure spaces `I^k(X)` restricted to everywhere-finite
//! supports, the Dirac embeddings between them, and the direct-limit metric.
//!
//! A level-`k` element is a normalized max-plus combination of level-`k−1`
//! elements; level `0` is a point of the base space. Distances at level
//! `k ≥ 2` are computed on the finite carrier formed by the union of the two
//! supports, metrized recursively and validated as a metric space before the
//! transport distance is applied. At level `1` the carrier is the base space
//! itself, so level-1 distances coincide with [`transport::distance`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::measure::{IdempotentMeasure, MeasureError};
use crate::semiring::{oplus, MaxPlus};
use crate::space::{same_space, FiniteMetricSpace, PointMap, SpaceError};
use crate::transport::{self, Algorithm, Mode, TransportError};

pub const DEFAULT_MAX_LEVEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TowerError {
    #[error("elements have different levels ({0} and {1})")]
    LevelMismatch(usize, usize),
    #[error("level {level} exceeds the configured maximum {max}")]
    LevelTooHigh { level: usize, max: usize },
    #[error("cannot embed level {from} into lower level {to}")]
    Downward { from: usize, to: usize },
    #[error("a tower measure needs at least one element of finite weight")]
    Empty,
    #[error("weight {0} is not a finite real or -inf")]
    BadWeight(f64),
    #[error("support elements of one measure must share a level")]
    MixedLevels,
    #[error("point index {0} is not in the base space")]
    UnknownPoint(usize),
    #[error("map does not start at the tower's base space")]
    SpaceMismatch,
    #[error("carrier at level {level} is not a metric space: {source}")]
    InnerMetric { level: usize, source: SpaceError },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// An element of `I_f^k(X)`.
#[derive(Debug, Clone)]
pub enum TowerElement {
    Point(usize),
    /// Support sorted by element, weights `≤ 0` with maximum `0`.
    Measure {
        level: usize,
        weights: Vec<(TowerElement, f64)>,
    },
}

impl TowerElement {
    /// Builds a measure over elements of one common level, merging
    /// duplicates with `⊕` and normalizing.
    pub fn measure<I>(pairs: I) -> Result<Self, TowerError>
    where
        I: IntoIterator<Item = (TowerElement, MaxPlus)>,
    {
        let mut merged: BTreeMap<TowerElement, MaxPlus> = BTreeMap::new();
        let mut inner_level = None;
        for (e, w) in pairs {
            match inner_level {
                None => inner_level = Some(e.level()),
                Some(l) if l != e.level() => return Err(TowerError::MixedLevels),
                _ => {}
            }
            let slot = merged.entry(e).or_insert(MaxPlus::ZERO);
            *slot = oplus(*slot, w);
        }
        let top = merged.values().copied().fold(MaxPlus::ZERO, oplus).finite().ok_or(TowerError::Empty)?;
        let weights = merged.into_iter().filter_map(|(e, w)| w.finite().map(|w| (e, w - top))).collect();
        Ok(TowerElement::Measure { level: inner_level.expect("nonempty") + 1, weights })
    }

    pub fn from_measure(mu: &IdempotentMeasure) -> Self {
        TowerElement::Measure { level: 1, weights: mu.weights().map(|(i, w)| (TowerElement::Point(i), w)).collect() }
    }

    pub fn level(&self) -> usize {
        match self {
            TowerElement::Point(_) => 0,
            TowerElement::Measure { level, .. } => *level,
        }
    }

    /// Support with weights; empty for a point.
    pub fn weights(&self) -> &[(TowerElement, f64)] {
        match self {
            TowerElement::Point(_) => &[],
            TowerElement::Measure { weights, .. } => weights,
        }
    }

    /// `η`: the Dirac measure at `self`, one level up.
    pub fn lift(&self) -> TowerElement {
        TowerElement::Measure { level: self.level() + 1, weights: vec![(self.clone(), 0.0)] }
    }

    /// `η_{n,m}` applied to an element of level `n`.
    pub fn eta(&self, m: usize) -> Result<TowerElement, TowerError> {
        let n = self.level();
        if m < n {
            return Err(TowerError::Downward { from: n, to: m });
        }
        let mut e = self.clone();
        for _ in n..m {
            e = e.lift();
        }
        Ok(e)
    }

    fn points_in_range(&self, n: usize) -> Result<(), TowerError> {
        match self {
            TowerElement::Point(i) if *i >= n => Err(TowerError::UnknownPoint(*i)),
            TowerElement::Point(_) => Ok(()),
            TowerElement::Measure { weights, .. } => weights.iter().try_for_each(|(e, _)| e.points_in_range(n)),
        }
    }
}

impl PartialEq for TowerElement {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TowerElement {}

impl PartialOrd for TowerElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TowerElement {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (TowerElement::Point(a), TowerElement::Point(b)) => a.cmp(b),
            (TowerElement::Point(_), _) => Ordering::Less,
            (_, TowerElement::Point(_)) => Ordering::Greater,
            (TowerElement::Measure { level: la, weights: wa }, TowerElement::Measure { level: lb, weights: wb }) => {
                la.cmp(lb).then_with(|| {
                    for ((ea, xa), (eb, xb)) in wa.iter().zip(wb) {
                        let o = ea.cmp(eb).then_with(|| xa.total_cmp(xb));
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    wa.len().cmp(&wb.len())
                })
            }
        }
    }
}

/// A point of the direct limit `I⁺(X)`, represented at some finite level.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPoint {
    pub element: TowerElement,
}

impl LimitPoint {
    pub fn new(element: TowerElement) -> Self {
        LimitPoint { element }
    }

    pub fn level(&self) -> usize {
        self.element.level()
    }
}

/// Distance computations over a fixed base space.
#[derive(Debug, Clone)]
pub struct Tower {
    base: Arc<FiniteMetricSpace>,
    max_level: usize,
    mode: Mode,
    algorithm: Algorithm,
}

impl Tower {
    pub fn new(base: Arc<FiniteMetricSpace>) -> Self {
        Tower { base, max_level: DEFAULT_MAX_LEVEL, mode: Mode::Coupling, algorithm: Algorithm::Fast }
    }

    pub fn with_max_level(mut self, max_level: usize) -> Self {
        self.max_level = max_level;
        self
    }

    pub fn with_metric(mut self, mode: Mode, algorithm: Algorithm) -> Self {
        self.mode = mode;
        self.algorithm = algorithm;
        self
    }

    pub fn base(&self) -> &Arc<FiniteMetricSpace> {
        &self.base
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Rejects elements above the level cap or naming unknown points.
    pub fn check(&self, e: &TowerElement) -> Result<(), TowerError> {
        if e.level() > self.max_level {
            return Err(TowerError::LevelTooHigh { level: e.level(), max: self.max_level });
        }
        e.points_in_range(self.base.len())
    }

    /// Guarded `η_{n,m}`.
    pub fn eta(&self, e: &TowerElement, m: usize) -> Result<TowerElement, TowerError> {
        if m > self.max_level {
            return Err(TowerError::LevelTooHigh { level: m, max: self.max_level });
        }
        e.eta(m)
    }

    /// `ρ^k` between two elements of the same level `k`.
    pub fn level_metric(&self, a: &TowerElement, b: &TowerElement) -> Result<f64, TowerError> {
        self.check(a)?;
        self.check(b)?;
        if a.level() != b.level() {
            return Err(TowerError::LevelMismatch(a.level(), b.level()));
        }
        self.metric(a, b)
    }

    fn metric(&self, a: &TowerElement, b: &TowerElement) -> Result<f64, TowerError> {
        match (a, b) {
            (TowerElement::Point(i), TowerElement::Point(j)) => Ok(self.base.dist(*i, *j)),
            _ if a.level() == 1 => {
                let to_measure = |e: &TowerElement| {
                    IdempotentMeasure::from_indexed(
                        self.base.clone(),
                        e.weights().iter().map(|(p, w)| match p {
                            TowerElement::Point(i) => (*i, MaxPlus::Finite(*w)),
                            TowerElement::Measure { .. } => unreachable!("level-1 support is points"),
                        }),
                    )
                };
                let r = transport::distance(&to_measure(a)?, &to_measure(b)?, self.mode, self.algorithm)?;
                Ok(r.value)
            }
            _ => {
                let (mu, nu) = self.carrier(a, b)?;
                Ok(transport::distance(&mu, &nu, self.mode, self.algorithm)?.value)
            }
        }
    }

    /// The union of two supports as a validated finite metric space, with
    /// both measures re-expressed on it.
    fn carrier(
        &self,
        a: &TowerElement,
        b: &TowerElement,
    ) -> Result<(IdempotentMeasure, IdempotentMeasure), TowerError> {
        let mut points: Vec<TowerElement> = a.weights().iter().chain(b.weights()).map(|(e, _)| e.clone()).collect();
        points.sort();
        points.dedup();
        let n = points.len();
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.metric(&points[i], &points[j])?;
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        let labels = (0..n).map(|i| format!("e{i}")).collect();
        let space = FiniteMetricSpace::validate(labels, dist)
            .map_err(|source| TowerError::InnerMetric { level: a.level() - 1, source })?;
        let space = Arc::new(space);
        let on_carrier = |e: &TowerElement| {
            IdempotentMeasure::from_indexed(
                space.clone(),
                e.weights().iter().map(|(x, w)| (points.binary_search(x).expect("in carrier"), MaxPlus::Finite(*w))),
            )
        };
        let mu = on_carrier(a)?;
        let nu = on_carrier(b)?;
        Ok((mu, nu))
    }

    /// `ρ⁺`, evaluated at the lowest common level.
    pub fn limit_distance(&self, p: &LimitPoint, q: &LimitPoint) -> Result<f64, TowerError> {
        self.limit_distance_at(p, q, p.level().max(q.level()))
    }

    /// `ρ⁺` evaluated after embedding both points at level `m`; the value
    /// should not depend on `m`.
    pub fn limit_distance_at(&self, p: &LimitPoint, q: &LimitPoint, m: usize) -> Result<f64, TowerError> {
        let a = self.eta(&p.element, m)?;
        let b = self.eta(&q.element, m)?;
        self.level_metric(&a, &b)
    }

    /// `I⁺(f)`: applies `I^k(f)` at the point's own level.
    pub fn limit_map(&self, f: &PointMap, p: &LimitPoint) -> Result<LimitPoint, TowerError> {
        if !same_space(&self.base, f.source()) {
            return Err(TowerError::SpaceMismatch);
        }
        self.check(&p.element)?;
        Ok(LimitPoint::new(map_element(f, &p.element)?))
    }
}

/// `I^k(f)` on a level-`k` element.
pub fn map_element(f: &PointMap, e: &TowerElement) -> Result<TowerElement, TowerError> {
    match e {
        TowerElement::Point(i) => {
            if *i >= f.source().len() {
                return Err(TowerError::UnknownPoint(*i));
            }
            Ok(TowerElement::Point(f.apply(*i)))
        }
        TowerElement::Measure { weights, .. } => TowerElement::measure(
            weights
                .iter()
                .map(|(x, w)| Ok((map_element(f, x)?, MaxPlus::Finite(*w))))
                .collect::<Result<Vec<_>, TowerError>>()?,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example1;

    fn m(pairs: Vec<(TowerElement, f64)>) -> TowerElement {
        TowerElement::measure(pairs.into_iter().map(|(e, w)| (e, MaxPlus::Finite(w)))).unwrap()
    }

    fn p(i: usize) -> TowerElement {
        TowerElement::Point(i)
    }

    #[test]
    fn lift_and_eta() {
        let x = p(2);
        let d = x.lift();
        assert_eq!(d, m(vec![(p(2), 0.0)]));
        assert_eq!(d.level(), 1);
        assert_eq!(x.eta(2).unwrap(), d.lift());
        assert_eq!(d.eta(1).unwrap(), d);
        assert_eq!(x.eta(2).unwrap(), x.eta(1).unwrap().eta(2).unwrap());
        assert_eq!(d.eta(0).unwrap_err(), TowerError::Downward { from: 1, to: 0 });
    }

    #[test]
    fn measure_constructor_rules() {
        assert_eq!(TowerElement::measure(Vec::new()).unwrap_err(), TowerError::Empty);
        let mixed = TowerElement::measure([(p(0), MaxPlus::ONE), (p(1).lift(), MaxPlus::ONE)]);
        assert_eq!(mixed.unwrap_err(), TowerError::MixedLevels);
        let merged = m(vec![(p(1), -3.0), (p(0), -2.0), (p(1), -1.0)]);
        assert_eq!(merged.weights(), &[(p(0), -1.0), (p(1), 0.0)]);
    }

    #[test]
    fn level_one_matches_transport() {
        let (mu1, mu2) = example1::measures();
        let tower = Tower::new(mu1.space().clone());
        let a = TowerElement::from_measure(&mu1);
        let b = TowerElement::from_measure(&mu2);
        assert_eq!(tower.level_metric(&a, &b).unwrap(), 5.0);
        let paper = tower.clone().with_metric(Mode::Paper, Algorithm::ClosedForm);
        assert_eq!(paper.level_metric(&a, &b).unwrap(), 5.5);
        assert_eq!(tower.level_metric(&p(0), &p(6)).unwrap(), 10.0);
    }

    #[test]
    fn dirac_lift_is_isometric_at_level_two() {
        let (mu1, mu2) = example1::measures();
        let tower = Tower::new(mu1.space().clone());
        let a = TowerElement::from_measure(&mu1);
        let b = TowerElement::from_measure(&mu2);
        assert_eq!(tower.level_metric(&a.lift(), &b.lift()).unwrap(), tower.level_metric(&a, &b).unwrap());
        let oracle = tower.clone().with_metric(Mode::Coupling, Algorithm::Oracle);
        assert_eq!(oracle.level_metric(&a.lift(), &b.lift()).unwrap(), 5.0);
    }

    #[test]
    fn limit_distance_is_representative_independent() {
        let x = example1::domain();
        let tower = Tower::new(x);
        let a = LimitPoint::new(p(0));
        let b = LimitPoint::new(p(3).lift());
        assert_eq!(tower.limit_distance(&a, &LimitPoint::new(p(0).lift())).unwrap(), 0.0);
        assert_eq!(tower.limit_distance(&a, &b).unwrap(), 0.75);
        assert_eq!(tower.limit_distance_at(&a, &b, 2).unwrap(), 0.75);
        assert_eq!(tower.limit_distance_at(&a, &b, 3).unwrap(), 0.75);
        assert!(matches!(tower.limit_distance_at(&a, &b, 4), Err(TowerError::LevelTooHigh { .. })));
    }

    #[test]
    fn level_guards() {
        let tower = Tower::new(example1::domain()).with_max_level(1);
        let deep = p(0).lift().lift();
        assert_eq!(tower.check(&deep).unwrap_err(), TowerError::LevelTooHigh { level: 2, max: 1 });
        assert_eq!(tower.level_metric(&p(0), &p(0).lift()).unwrap_err(), TowerError::LevelMismatch(0, 1));
    }

    #[test]
    fn unknown_points_rejected() {
        let tower = Tower::new(example1::domain());
        assert_eq!(tower.level_metric(&p(0), &p(99)).unwrap_err(), TowerError::UnknownPoint(99));
    }

    #[test]
    fn limit_map_levelwise() {
        let f = example1::map();
        let (mu1, _) = example1::measures();
        let tower = Tower::new(f.source().clone());
        let x = LimitPoint::new(p(1));
        assert_eq!(tower.limit_map(&f, &x).unwrap().element, p(3));
        let a = LimitPoint::new(TowerElement::from_measure(&mu1));
        let pushed = mu1.pushforward(&f).unwrap();
        assert_eq!(tower.limit_map(&f, &a).unwrap().element, TowerElement::from_measure(&pushed));
        let lifted = LimitPoint::new(a.element.lift());
        assert_eq!(tower.limit_map(&f, &lifted).unwrap().element, tower.limit_map(&f, &a).unwrap().element.lift());
        let on_y = Tower::new(f.target().clone());
        assert_eq!(on_y.limit_map(&f, &x).unwrap_err(), TowerError::SpaceMismatch);
    }
}
