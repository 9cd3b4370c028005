//! Max-plus arithmetic on `R ∪ {−∞}` and the logarithmic deformation `⊕_h`.
//!
//! `⊕` is `max` and `⊙` is `+`. The bottom element `−∞` is the additive zero
//! and `0` is the multiplicative one. Bottom is a distinct variant rather than
//! an IEEE infinity, so `⊙` never has to reason about `inf - inf`.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Absolute tolerance used for every floating-point comparison in the crate.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiringError {
    #[error("value {0} is not a finite real or -inf")]
    NotExtendedReal(f64),
    #[error("deformation parameter h must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("argument {0} is outside the domain")]
    OutOfDomain(f64),
}

/// An element of the max-plus semifield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxPlus {
    /// The additive zero `−∞`.
    Bottom,
    /// A finite real; never NaN or infinite.
    Finite(f64),
}

impl MaxPlus {
    pub const ZERO: MaxPlus = MaxPlus::Bottom;
    pub const ONE: MaxPlus = MaxPlus::Finite(0.0);

    /// Converts an `f64`, mapping `-inf` to bottom and rejecting NaN and `+inf`.
    pub fn new(x: f64) -> Result<Self, SemiringError> {
        if x == f64::NEG_INFINITY {
            Ok(MaxPlus::Bottom)
        } else if x.is_finite() {
            Ok(MaxPlus::Finite(x))
        } else {
            Err(SemiringError::NotExtendedReal(x))
        }
    }

    pub fn is_bottom(self) -> bool {
        matches!(self, MaxPlus::Bottom)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            MaxPlus::Bottom => None,
            MaxPlus::Finite(x) => Some(x),
        }
    }

    /// Lossy view as an IEEE float (`Bottom` becomes `-inf`).
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn oplus(self, other: MaxPlus) -> MaxPlus {
        oplus(self, other)
    }

    pub fn odot(self, other: MaxPlus) -> MaxPlus {
        odot(self, other)
    }
}

impl Eq for MaxPlus {}

impl PartialOrd for MaxPlus {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MaxPlus {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (MaxPlus::Bottom, MaxPlus::Bottom) => Ordering::Equal,
            (MaxPlus::Bottom, _) => Ordering::Less,
            (_, MaxPlus::Bottom) => Ordering::Greater,
            (MaxPlus::Finite(a), MaxPlus::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl From<f64> for MaxPlus {
    /// Panics on NaN or `+inf`; use [`MaxPlus::new`] for untrusted input.
    fn from(x: f64) -> Self {
        MaxPlus::new(x).expect("NaN or +inf is not a max-plus value")
    }
}

impl fmt::Display for MaxPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxPlus::Bottom => write!(f, "-inf"),
            MaxPlus::Finite(x) => write!(f, "{x}"),
        }
    }
}

/// `u ⊕ v = max{u, v}`.
pub fn oplus(u: MaxPlus, v: MaxPlus) -> MaxPlus {
    std::cmp::max(u, v)
}

/// `u ⊙ v = u + v`, with bottom absorbing.
pub fn odot(u: MaxPlus, v: MaxPlus) -> MaxPlus {
    match (u, v) {
        (MaxPlus::Finite(a), MaxPlus::Finite(b)) => MaxPlus::Finite(a + b),
        _ => MaxPlus::Bottom,
    }
}

/// `h ln(e^{u/h} + e^{v/h})`, evaluated as `max + h ln(1 + e^{-|u-v|/h})`
/// so that small `h` cannot overflow.
pub fn oplus_h(u: f64, v: f64, h: f64) -> Result<f64, SemiringError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(SemiringError::NonPositiveH(h));
    }
    for x in [u, v] {
        if !x.is_finite() {
            return Err(SemiringError::OutOfDomain(x));
        }
    }
    let hi = u.max(v);
    let gap = (u - v).abs();
    Ok(hi + h * (-gap / h).exp().ln_1p())
}

/// The change of variables `x ↦ h ln x`; `0` maps to bottom.
pub fn phi_h(x: f64, h: f64) -> Result<MaxPlus, SemiringError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(SemiringError::NonPositiveH(h));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(SemiringError::OutOfDomain(x));
    }
    if x == 0.0 {
        return Ok(MaxPlus::Bottom);
    }
    Ok(MaxPlus::Finite(h * x.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(x: f64) -> MaxPlus {
        MaxPlus::Finite(x)
    }

    #[test]
    fn oplus_examples() {
        assert_eq!(oplus(f(3.0), f(5.0)), f(5.0));
        assert_eq!(oplus(MaxPlus::ZERO, f(-4.0)), f(-4.0));
        assert_eq!(oplus(f(-5.0), f(-5.0)), f(-5.0));
    }

    #[test]
    fn odot_examples() {
        assert_eq!(odot(f(3.0), f(5.0)), f(8.0));
        assert_eq!(odot(MaxPlus::ONE, f(-7.0)), f(-7.0));
        assert_eq!(odot(MaxPlus::ZERO, f(2.0)), MaxPlus::ZERO);
    }

    #[test]
    fn oplus_h_examples() {
        assert!((oplus_h(0.0, 0.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(oplus_h(0.0, -10.0, 0.001).unwrap().abs() < 1e-9);
        let v = oplus_h(2.0, 2.0, 0.5).unwrap();
        assert!((v - (2.0 + 0.5 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn oplus_h_rejects_bad_h() {
        assert!(oplus_h(0.0, 0.0, 0.0).is_err());
        assert!(oplus_h(0.0, 0.0, -1.0).is_err());
        assert!(oplus_h(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn oplus_h_tiny_h_does_not_overflow() {
        let v = oplus_h(1000.0, 999.0, 1e-9).unwrap();
        assert_eq!(v, 1000.0);
    }

    #[test]
    fn phi_h_examples() {
        assert_eq!(phi_h(1.0, 3.0).unwrap(), MaxPlus::ONE);
        assert!((phi_h(std::f64::consts::E, 1.0).unwrap().to_f64() - 1.0).abs() < 1e-12);
        assert_eq!(phi_h(0.0, 1.0).unwrap(), MaxPlus::ZERO);
        assert!(phi_h(-1.0, 1.0).is_err());
        assert!(phi_h(1.0, 0.0).is_err());
    }

    #[test]
    fn new_rejects_nan_and_pos_inf() {
        assert!(MaxPlus::new(f64::NAN).is_err());
        assert!(MaxPlus::new(f64::INFINITY).is_err());
        assert_eq!(MaxPlus::new(f64::NEG_INFINITY).unwrap(), MaxPlus::Bottom);
    }

    fn value() -> impl Strategy<Value = MaxPlus> {
        prop_oneof![
            1 => Just(MaxPlus::Bottom),
            // quarter-integers keep `+` exact so associativity is bitwise
            6 => (-400i32..400).prop_map(|k| MaxPlus::Finite(k as f64 / 4.0)),
        ]
    }

    proptest! {
        #[test]
        fn semiring_laws(u in value(), v in value(), w in value()) {
            prop_assert_eq!(oplus(oplus(u, v), w), oplus(u, oplus(v, w)));
            prop_assert_eq!(oplus(u, v), oplus(v, u));
            prop_assert_eq!(oplus(u, u), u);
            prop_assert_eq!(odot(odot(u, v), w), odot(u, odot(v, w)));
            prop_assert_eq!(odot(u, v), odot(v, u));
            prop_assert_eq!(odot(u, oplus(v, w)), oplus(odot(u, v), odot(u, w)));
            prop_assert_eq!(oplus(MaxPlus::ZERO, u), u);
            prop_assert_eq!(odot(MaxPlus::ZERO, u), MaxPlus::ZERO);
            prop_assert_eq!(odot(MaxPlus::ONE, u), u);
        }

        #[test]
        fn dequantization_bracket(u in -1e3f64..1e3, v in -1e3f64..1e3, h in 1e-9f64..10.0) {
            let s = oplus_h(u, v, h).unwrap();
            let m = u.max(v);
            prop_assert!(m <= s);
            prop_assert!(s <= m + h * std::f64::consts::LN_2 + TOL);
        }

        #[test]
        fn phi_h_monotone(a in 1e-6f64..1e6, b in 1e-6f64..1e6, h in 1e-3f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(phi_h(lo, h).unwrap() <= phi_h(hi, h).unwrap());
        }
    }
}
