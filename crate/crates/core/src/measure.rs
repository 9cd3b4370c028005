//! Finitely supported idempotent probability measures `⊕ λ_i ⊙ δ(x_i)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::semiring::{odot, oplus, MaxPlus};
use crate::space::{same_space, FiniteMetricSpace, PointMap, SpaceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("a measure needs at least one point of finite weight")]
    Empty,
    #[error("weight {0} is not a finite real or -inf")]
    BadWeight(f64),
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("function has {got} values but the space has {expected} points")]
    FunctionShape { expected: usize, got: usize },
    #[error("function value {0} is not finite")]
    NonFiniteValue(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A normalized max-plus combination of Dirac measures.
///
/// Weights are finite and `≤ 0`, at least one weight is exactly `0`, and
/// points of weight `−∞` are simply absent.
#[derive(Debug, Clone)]
pub struct IdempotentMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: BTreeMap<usize, f64>,
}

impl IdempotentMeasure {
    pub fn dirac(space: Arc<FiniteMetricSpace>, label: &str) -> Result<Self, MeasureError> {
        let i = space.index_of(label)?;
        Ok(Self::dirac_at(space, i))
    }

    /// Panics if `i` is not a point index of `space`.
    pub fn dirac_at(space: Arc<FiniteMetricSpace>, i: usize) -> Self {
        assert!(i < space.len(), "point index {i} out of range");
        IdempotentMeasure { space, weights: BTreeMap::from([(i, 0.0)]) }
    }

    /// Merges duplicates with `⊕`, drops bottom weights and shifts so the
    /// largest weight is `0`.
    pub fn from_weighted_points<'a, I>(space: Arc<FiniteMetricSpace>, pairs: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (&'a str, MaxPlus)>,
    {
        let indexed =
            pairs.into_iter().map(|(l, w)| Ok((space.index_of(l)?, w))).collect::<Result<Vec<_>, MeasureError>>()?;
        Self::from_indexed(space, indexed)
    }

    /// Convenience wrapper over [`Self::from_weighted_points`] for plain floats.
    pub fn from_weights(space: Arc<FiniteMetricSpace>, pairs: &[(&str, f64)]) -> Result<Self, MeasureError> {
        let converted = pairs
            .iter()
            .map(|&(l, w)| MaxPlus::new(w).map(|w| (l, w)).map_err(|_| MeasureError::BadWeight(w)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_weighted_points(space, converted)
    }

    pub fn from_indexed<I>(space: Arc<FiniteMetricSpace>, pairs: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (usize, MaxPlus)>,
    {
        let mut merged: BTreeMap<usize, MaxPlus> = BTreeMap::new();
        for (i, w) in pairs {
            if i >= space.len() {
                return Err(SpaceError::UnknownLabel(format!("#{i}")).into());
            }
            let slot = merged.entry(i).or_insert(MaxPlus::ZERO);
            *slot = oplus(*slot, w);
        }
        let top = merged.values().copied().fold(MaxPlus::ZERO, oplus).finite().ok_or(MeasureError::Empty)?;
        let weights = merged.into_iter().filter_map(|(i, w)| w.finite().map(|w| (i, w - top))).collect();
        Ok(IdempotentMeasure { space, weights })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    /// Weight at point `i`, bottom off the support.
    pub fn weight(&self, i: usize) -> MaxPlus {
        self.weights.get(&i).map_or(MaxPlus::ZERO, |&w| MaxPlus::Finite(w))
    }

    /// `(point index, weight)` in point order.
    pub fn weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().map(|(&i, &w)| (i, w))
    }

    /// Support as point indices, in point order.
    pub fn support(&self) -> Vec<usize> {
        self.weights.keys().copied().collect()
    }

    pub fn support_labels(&self) -> Vec<&str> {
        self.weights.keys().map(|&i| self.space.label(i)).collect()
    }

    /// The Maslov integral `max_x (λ_x + φ(x))`.
    pub fn integrate(&self, phi: &ObservableFunction) -> Result<f64, MeasureError> {
        if !same_space(&self.space, &phi.space) {
            return Err(MeasureError::SpaceMismatch);
        }
        let v = self
            .weights
            .iter()
            .map(|(&i, &w)| odot(MaxPlus::Finite(w), MaxPlus::Finite(phi.values[i])))
            .fold(MaxPlus::ZERO, oplus);
        Ok(v.finite().expect("nonempty support"))
    }

    /// `I(f)(μ)`, the measure `φ ↦ μ(φ ∘ f)`.
    pub fn pushforward(&self, f: &PointMap) -> Result<Self, MeasureError> {
        if !same_space(&self.space, f.source()) {
            return Err(MeasureError::SpaceMismatch);
        }
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        for (&i, &w) in &self.weights {
            let slot = weights.entry(f.apply(i)).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(w);
        }
        Ok(IdempotentMeasure { space: f.target().clone(), weights })
    }

    /// Membership in the basic neighbourhood `⟨self; φ_1..φ_k; ε⟩`.
    pub fn in_neighborhood(
        &self,
        nu: &IdempotentMeasure,
        phis: &[ObservableFunction],
        eps: f64,
    ) -> Result<bool, MeasureError> {
        for phi in phis {
            if (self.integrate(phi)? - nu.integrate(phi)?).abs() >= eps {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl PartialEq for IdempotentMeasure {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.weights == other.weights
    }
}

/// A real-valued function on the points of a space.
#[derive(Debug, Clone)]
pub struct ObservableFunction {
    space: Arc<FiniteMetricSpace>,
    values: Vec<f64>,
}

impl ObservableFunction {
    pub fn new(space: Arc<FiniteMetricSpace>, values: Vec<f64>) -> Result<Self, MeasureError> {
        if values.len() != space.len() {
            return Err(MeasureError::FunctionShape { expected: space.len(), got: values.len() });
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(MeasureError::NonFiniteValue(v));
        }
        Ok(ObservableFunction { space, values })
    }

    pub fn constant(space: Arc<FiniteMetricSpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        ObservableFunction { space, values }
    }

    pub fn from_fn(space: Arc<FiniteMetricSpace>, f: impl Fn(usize) -> f64) -> Result<Self, MeasureError> {
        let values = (0..space.len()).map(f).collect();
        Self::new(space, values)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    /// `φ ∘ f`, a function on `f`'s source.
    pub fn pullback(&self, f: &PointMap) -> Result<Self, MeasureError> {
        if !same_space(&self.space, f.target()) {
            return Err(MeasureError::SpaceMismatch);
        }
        let values = (0..f.source().len()).map(|i| self.values[f.apply(i)]).collect();
        Ok(ObservableFunction { space: f.source().clone(), values })
    }

    /// `λ ⊙ φ`.
    pub fn shifted(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v + c).collect();
        ObservableFunction { space: self.space.clone(), values }
    }

    /// `φ ⊕ ψ`.
    pub fn pointwise_max(&self, other: &ObservableFunction) -> Result<Self, MeasureError> {
        if !same_space(&self.space, &other.space) {
            return Err(MeasureError::SpaceMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.max(*b)).collect();
        Ok(ObservableFunction { space: self.space.clone(), values })
    }
}
