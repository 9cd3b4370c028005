//! Finite metric spaces and maps between them.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::semiring::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("a metric space needs at least one point")]
    Empty,
    #[error("distance matrix shape does not match {labels} labels: {detail}")]
    Shape { labels: usize, detail: String },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("distance d({0}, {1}) = {2} is negative or not finite")]
    BadDistance(String, String, f64),
    #[error("identity axiom violated at ({0}, {1})")]
    IdentityViolation(String, String),
    #[error("symmetry violated: d({0}, {1}) != d({1}, {0})")]
    SymmetryViolation(String, String),
    #[error("triangle inequality violated: d({0}, {2}) > d({0}, {1}) + d({1}, {2})")]
    TriangleViolation(String, String, String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("no image given for source label {0:?}")]
    MissingAssignment(String),
}

/// A finite set of labelled points with a validated metric.
#[derive(Clone)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    diameter: f64,
}

impl FiniteMetricSpace {
    /// Checks the metric axioms and reports the first one that fails.
    ///
    /// Symmetry and the triangle inequality are tested with tolerance
    /// [`TOL`]; pairs that agree within it are averaged, so an accepted
    /// matrix is exactly symmetric and revalidating it is the identity.
    pub fn validate(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        let n = labels.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(SpaceError::DuplicateLabel(l.clone()));
            }
        }
        if dist.len() != n {
            return Err(SpaceError::Shape { labels: n, detail: format!("{} rows", dist.len()) });
        }
        if let Some((i, row)) = dist.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(SpaceError::Shape { labels: n, detail: format!("row {i} has {} entries", row.len()) });
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(SpaceError::BadDistance(labels[i].clone(), labels[j].clone(), d));
                }
            }
        }
        for i in 0..n {
            if dist[i][i] > TOL {
                return Err(SpaceError::IdentityViolation(labels[i].clone(), labels[i].clone()));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (dist[i][j] - dist[j][i]).abs() > TOL {
                    return Err(SpaceError::SymmetryViolation(labels[i].clone(), labels[j].clone()));
                }
                if dist[i][j] <= TOL {
                    return Err(SpaceError::IdentityViolation(labels[i].clone(), labels[j].clone()));
                }
            }
        }
        let mut sym = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = if dist[i][j] == dist[j][i] { dist[i][j] } else { 0.5 * (dist[i][j] + dist[j][i]) };
                sym[i][j] = d;
                sym[j][i] = d;
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if sym[i][k] > sym[i][j] + sym[j][k] + TOL {
                        return Err(SpaceError::TriangleViolation(
                            labels[i].clone(),
                            labels[j].clone(),
                            labels[k].clone(),
                        ));
                    }
                }
            }
        }
        let diameter = sym.iter().flat_map(|r| r.iter().copied()).fold(0.0, f64::max);
        Ok(FiniteMetricSpace { labels, dist: sym, index, diameter })
    }

    /// Points of the real line with `|x − y|` as the metric.
    pub fn on_line(labels: Vec<String>, coords: &[f64]) -> Result<Self, SpaceError> {
        if labels.len() != coords.len() {
            return Err(SpaceError::Shape { labels: labels.len(), detail: format!("{} coordinates", coords.len()) });
        }
        let dist = coords.iter().map(|a| coords.iter().map(|b| (a - b).abs()).collect()).collect();
        Self::validate(labels, dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, SpaceError> {
        self.index.get(label).copied().ok_or_else(|| SpaceError::UnknownLabel(label.to_string()))
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// Largest pairwise distance; `0` for a singleton.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// A pair of indices realizing the diameter (first in row-major order).
    pub fn diameter_pair(&self) -> (usize, usize) {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                if self.dist[i][j] == self.diameter {
                    return (i, j);
                }
            }
        }
        (0, 0)
    }
}

impl PartialEq for FiniteMetricSpace {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self, other) || (self.labels == other.labels && self.dist == other.dist)
    }
}

impl fmt::Debug for FiniteMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMetricSpace").field("labels", &self.labels).field("diameter", &self.diameter).finish()
    }
}

pub fn same_space(a: &Arc<FiniteMetricSpace>, b: &Arc<FiniteMetricSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Largest `δ` with `ρ_X(x, x') < δ ⇒ ρ_Y(f x, f x') < ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    Bounded(f64),
    /// No pair is sent `ε` or further apart, so any `δ` works.
    Unconstrained,
}

impl Modulus {
    /// `δ` as a float, with `+inf` for the unconstrained case.
    pub fn as_f64(self) -> f64 {
        match self {
            Modulus::Bounded(d) => d,
            Modulus::Unconstrained => f64::INFINITY,
        }
    }
}

/// A total map between the points of two finite spaces.
#[derive(Debug, Clone)]
pub struct PointMap {
    source: Arc<FiniteMetricSpace>,
    target: Arc<FiniteMetricSpace>,
    assignment: Vec<usize>,
}

impl PointMap {
    pub fn new(
        source: Arc<FiniteMetricSpace>,
        target: Arc<FiniteMetricSpace>,
        assignment: Vec<usize>,
    ) -> Result<Self, SpaceError> {
        if assignment.len() != source.len() {
            return Err(SpaceError::Shape {
                labels: source.len(),
                detail: format!("assignment has {} entries", assignment.len()),
            });
        }
        if let Some(&bad) = assignment.iter().find(|&&j| j >= target.len()) {
            return Err(SpaceError::UnknownLabel(format!("#{bad}")));
        }
        Ok(PointMap { source, target, assignment })
    }

    /// Builds a map from `(source label, target label)` pairs; every source
    /// label must appear.
    pub fn from_labels<'a, I>(
        source: Arc<FiniteMetricSpace>,
        target: Arc<FiniteMetricSpace>,
        pairs: I,
    ) -> Result<Self, SpaceError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut assignment = vec![None; source.len()];
        for (s, t) in pairs {
            let i = source.index_of(s)?;
            let j = target.index_of(t)?;
            assignment[i] = Some(j);
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.ok_or_else(|| SpaceError::MissingAssignment(source.label(i).to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PointMap { source, target, assignment })
    }

    pub fn identity(space: Arc<FiniteMetricSpace>) -> Self {
        let assignment = (0..space.len()).collect();
        PointMap { source: space.clone(), target: space, assignment }
    }

    pub fn source(&self) -> &Arc<FiniteMetricSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteMetricSpace> {
        &self.target
    }

    pub fn apply(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &PointMap) -> Result<PointMap, SpaceError> {
        if !same_space(&self.target, &other.source) {
            return Err(SpaceError::Shape {
                labels: other.source.len(),
                detail: "composition of maps with mismatched spaces".into(),
            });
        }
        let assignment = self.assignment.iter().map(|&j| other.assignment[j]).collect();
        Ok(PointMap { source: self.source.clone(), target: other.target.clone(), assignment })
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.source.len();
        (0..n).flat_map(move |i| {
            ((i + 1)..n)
                .map(move |j| (self.source.dist(i, j), self.target.dist(self.assignment[i], self.assignment[j])))
        })
    }

    /// Injective and distance-preserving within [`TOL`].
    pub fn is_isometric_embedding(&self) -> bool {
        // distance preservation on distinct points already forces injectivity
        self.pairs().all(|(dx, dy)| (dx - dy).abs() <= TOL)
    }

    pub fn modulus(&self, eps: f64) -> Modulus {
        self.pairs()
            .filter(|&(_, dy)| dy >= eps - TOL)
            .map(|(dx, _)| dx)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
            .map_or(Modulus::Unconstrained, Modulus::Bounded)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.pairs().map(|(dx, dy)| dy / dx).fold(0.0, f64::max)
    }
}
