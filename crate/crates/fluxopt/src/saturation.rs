//! Current-dependent main inductance `L_m(i_sd)`.
//!
//! Three curve families are supported: a constant inductance (the unsaturated
//! model), an affine roll-off `L_m(i) = a - b*i`, and a tabulated curve with
//! linear interpolation. Every family is clamped from below by a positive
//! floor `l_min`, so the inductance stays usable for any non-negative current
//! a solver may probe.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::MotorParams;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("saturation curve rejected: {0}")]
    Invalid(String),
}

/// Main inductance as a function of magnetizing current.
///
/// Serialized form is a tagged object, e.g.
/// `{"kind": "affine", "a": 2.6, "b": 0.65}` or
/// `{"kind": "tabulated", "points": [[0.0, 2.6], [2.0, 1.3]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SaturationCurve {
    Constant {
        l: f64,
    },
    Affine {
        a: f64,
        b: f64,
        #[serde(default = "default_l_min")]
        l_min: f64,
    },
    Tabulated {
        /// `(i, L)` pairs, strictly increasing in `i`.
        points: Vec<(f64, f64)>,
        #[serde(default = "default_l_min")]
        l_min: f64,
    },
}

fn default_l_min() -> f64 {
    1e-4
}

impl SaturationCurve {
    pub fn constant(l: f64) -> Self {
        SaturationCurve::Constant { l }
    }

    /// Default affine roll-off used when a scenario asks for saturation but
    /// supplies no curve: `a = 2*L_M`, `b = L_M / (2*i_sd_nom)`, floored at
    /// `0.1*L_M`. It passes through `1.5*L_M` at nominal magnetizing current.
    pub fn affine_default(params: &MotorParams) -> Self {
        SaturationCurve::Affine {
            a: 2.0 * params.lm,
            b: params.lm / (2.0 * params.i_sd_nom),
            l_min: 0.1 * params.lm,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SaturationCurve::Constant { .. })
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        match self {
            SaturationCurve::Constant { l } => {
                if !(l.is_finite() && *l > 0.0) {
                    return Err(CurveError::Invalid(format!("constant L = {l} must be > 0")));
                }
            }
            SaturationCurve::Affine { a, b, l_min } => {
                if !(a.is_finite() && b.is_finite() && l_min.is_finite()) {
                    return Err(CurveError::Invalid("non-finite coefficient".into()));
                }
                if *l_min <= 0.0 || *a < *l_min {
                    return Err(CurveError::Invalid(format!(
                        "need 0 < l_min <= a, got a = {a}, l_min = {l_min}"
                    )));
                }
                if *b < 0.0 {
                    return Err(CurveError::Invalid(format!("slope b = {b} must be >= 0")));
                }
            }
            SaturationCurve::Tabulated { points, l_min } => {
                if points.is_empty() {
                    return Err(CurveError::Invalid("empty table".into()));
                }
                if !(l_min.is_finite() && *l_min > 0.0) {
                    return Err(CurveError::Invalid(format!("l_min = {l_min} must be > 0")));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].0.is_nan() || w[0].0.is_nan() {
                        return Err(CurveError::Invalid(format!(
                            "currents not strictly increasing at i = {}",
                            w[1].0
                        )));
                    }
                }
                for (i, l) in points {
                    if !(i.is_finite() && l.is_finite() && *i >= 0.0 && *l > 0.0) {
                        return Err(CurveError::Invalid(format!("bad node ({i}, {l})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `L_m(i)`, never below the floor.
    pub fn value(&self, i: f64) -> f64 {
        assert!(i.is_finite(), "non-finite current {i}");
        match self {
            SaturationCurve::Constant { l } => *l,
            SaturationCurve::Affine { a, b, l_min } => (a - b * i).max(*l_min),
            SaturationCurve::Tabulated { points, l_min } => {
                let raw = if i <= points[0].0 {
                    points[0].1
                } else if i >= points[points.len() - 1].0 {
                    points[points.len() - 1].1
                } else {
                    let k = points.partition_point(|p| p.0 < i);
                    let (i0, l0) = points[k - 1];
                    let (i1, l1) = points[k];
                    l0 + (l1 - l0) * (i - i0) / (i1 - i0)
                };
                raw.max(*l_min)
            }
        }
    }

    /// Slope `dL_m/di`. Piecewise-linear curves use the left segment's slope
    /// at a node; the slope is zero wherever the floor or the end clamps are
    /// active.
    pub fn derivative(&self, i: f64) -> f64 {
        assert!(i.is_finite(), "non-finite current {i}");
        match self {
            SaturationCurve::Constant { .. } => 0.0,
            SaturationCurve::Affine { a, b, l_min } => {
                if a - b * i >= *l_min {
                    -b
                } else {
                    0.0
                }
            }
            SaturationCurve::Tabulated { points, l_min } => {
                if i <= points[0].0 || i > points[points.len() - 1].0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 < i);
                let (i0, l0) = points[k - 1];
                let (i1, l1) = points[k];
                let raw = l0 + (l1 - l0) * (i - i0) / (i1 - i0);
                if raw < *l_min {
                    0.0
                } else {
                    (l1 - l0) / (i1 - i0)
                }
            }
        }
    }
}
