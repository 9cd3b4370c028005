//! JSON file formats for spaces, maps, measures and tower elements.
//!
//! ```text
//! space:   {"labels": ["a", "b"], "dist": [[0, 1], [1, 0]]}
//! map:     {"assignment": {"a": "b", "b": "b"}}
//! measure: {"space": "space.json" | {<inline space>}, "weights": {"a": 0, "b": -2.5}}
//! tower:   {"level": 0, "point": "a"}
//!          {"level": k, "measure": {"weights": [{"element": <tower>, "w": -1}]}}
//! ```
//!
//! All parsers take untrusted text and either return a validated value or
//! a [`FormatError`]; none of them panic.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{IdempotentMeasure, MeasureError};
use crate::semiring::MaxPlus;
use crate::space::{FiniteMetricSpace, PointMap, SpaceError};
use crate::tower::{TowerElement, TowerError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
}

impl SpaceFile {
    pub fn validate(self) -> Result<FiniteMetricSpace, SpaceError> {
        FiniteMetricSpace::validate(self.labels, self.dist)
    }
}

impl From<&FiniteMetricSpace> for SpaceFile {
    fn from(s: &FiniteMetricSpace) -> Self {
        SpaceFile { labels: s.labels().to_vec(), dist: s.matrix().to_vec() }
    }
}

pub fn parse_space(text: &str) -> Result<FiniteMetricSpace, FormatError> {
    let file: SpaceFile = serde_json::from_str(text)?;
    Ok(file.validate()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub assignment: BTreeMap<String, String>,
}

pub fn parse_point_map(
    text: &str,
    source: Arc<FiniteMetricSpace>,
    target: Arc<FiniteMetricSpace>,
) -> Result<PointMap, FormatError> {
    let file: MapFile = serde_json::from_str(text)?;
    let pairs = file.assignment.iter().map(|(s, t)| (s.as_str(), t.as_str()));
    Ok(PointMap::from_labels(source, target, pairs)?)
}

/// Where a measure file finds its space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(String),
    Inline(SpaceFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceRef>,
    pub weights: BTreeMap<String, f64>,
}

impl MeasureFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the measure on `space`; weights must be `≤ 0` and are shifted
    /// so the largest is exactly `0`.
    pub fn to_measure(&self, space: Arc<FiniteMetricSpace>) -> Result<IdempotentMeasure, FormatError> {
        if let Some((l, &w)) = self.weights.iter().find(|(_, w)| w.is_nan() || **w > 0.0) {
            return Err(FormatError::Invalid(format!("weight {w} at {l:?} must be a number <= 0")));
        }
        let pairs = self.weights.iter().map(|(l, &w)| (l.as_str(), MaxPlus::Finite(w)));
        Ok(IdempotentMeasure::from_weighted_points(space, pairs)?)
    }

    pub fn from_measure(mu: &IdempotentMeasure) -> Self {
        let space = mu.space();
        MeasureFile { space: None, weights: mu.weights().map(|(i, w)| (space.label(i).to_string(), w)).collect() }
    }
}

/// Parses a measure whose space is inline; path references are refused.
pub fn parse_inline_measure(text: &str) -> Result<IdempotentMeasure, FormatError> {
    let file = MeasureFile::parse(text)?;
    match &file.space {
        Some(SpaceRef::Inline(s)) => {
            let space = Arc::new(s.clone().validate()?);
            file.to_measure(space)
        }
        _ => Err(FormatError::Invalid("measure has no inline space".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerJson {
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<TowerMeasureJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerMeasureJson {
    pub weights: Vec<TowerWeightJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerWeightJson {
    pub element: TowerJson,
    pub w: f64,
}

impl TowerJson {
    pub fn to_element(&self, base: &FiniteMetricSpace) -> Result<TowerElement, FormatError> {
        match (self.level, &self.point, &self.measure) {
            (0, Some(label), None) => Ok(TowerElement::Point(base.index_of(label)?)),
            (k, None, Some(m)) if k > 0 => {
                if m.weights.is_empty() {
                    return Err(TowerError::Empty.into());
                }
                let mut pairs = Vec::with_capacity(m.weights.len());
                for entry in &m.weights {
                    if entry.w.is_nan() || entry.w > 0.0 {
                        return Err(FormatError::Invalid(format!("tower weight {} must be a number <= 0", entry.w)));
                    }
                    let e = entry.element.to_element(base)?;
                    if e.level() + 1 != k {
                        return Err(FormatError::Invalid(format!(
                            "level-{k} measure has a support element of level {}",
                            e.level()
                        )));
                    }
                    pairs.push((e, MaxPlus::Finite(entry.w)));
                }
                Ok(TowerElement::measure(pairs)?)
            }
            (k, _, _) => Err(FormatError::Invalid(format!(
                "a level-{k} element needs exactly {}",
                if k == 0 { "a \"point\"" } else { "a \"measure\"" }
            ))),
        }
    }

    pub fn from_element(e: &TowerElement, base: &FiniteMetricSpace) -> Self {
        match e {
            TowerElement::Point(i) => TowerJson { level: 0, point: Some(base.label(*i).to_string()), measure: None },
            TowerElement::Measure { level, weights } => TowerJson {
                level: *level,
                point: None,
                measure: Some(TowerMeasureJson {
                    weights: weights
                        .iter()
                        .map(|(x, w)| TowerWeightJson { element: TowerJson::from_element(x, base), w: *w })
                        .collect(),
                }),
            },
        }
    }
}

pub fn parse_tower_element(text: &str, base: &FiniteMetricSpace) -> Result<TowerElement, FormatError> {
    let json: TowerJson = serde_json::from_str(text)?;
    json.to_element(base)
}
