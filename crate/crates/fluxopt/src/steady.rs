//! Steady-state loss-optimal operating points.
//!
//! In steady state the flux sits at `phi_r = L_m(i_sd) * i_sd` and the torque
//! pins `i_sq = T_m / (p * phi_r)`, so the copper loss is a function of
//! `i_sd` alone. With a current-independent inductance the minimizer has the
//! closed form
//!
//! ```text
//! gamma = sqrt(R_s / (R_R + R_s))        (in (0, 1))
//! i_sd_opt(T_m) = sqrt(T_m / (p * gamma * L_M)),   i_sq_opt = gamma * i_sd_opt
//! ```
//!
//! Under saturation the minimizer is the root of the loss derivative at fixed
//! torque, expressed through `i_sq` as [`stationarity_residual`]; [`zeta`]
//! solves it for a given `i_sq` and [`ZetaTable`] caches the map for cheap
//! lookup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::MotorParams;
use crate::numerics::{self, NumericsError};
use crate::saturation::SaturationCurve;

#[derive(Debug, Error, PartialEq)]
pub enum SteadyError {
    #[error("torque {t_m} is negative; generation is out of scope")]
    NegativeTorque { t_m: f64 },
    #[error("no stationary point in [{lo}, {hi}] for i_sq = {i_sq}")]
    NoRoot { i_sq: f64, lo: f64, hi: f64 },
}

/// A steady operating point: torque, currents, flux, and the loss there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub t_m: f64,
    pub i_sd: f64,
    pub i_sq: f64,
    pub phi_r: f64,
    pub p_loss: f64,
}

/// Optimal steady-state ratio `i_sq / i_sd = sqrt(R_s / (R_R + R_s))`.
pub fn gamma(params: &MotorParams) -> f64 {
    (params.rs / (params.rr + params.rs)).sqrt()
}

/// Loss-optimal magnetizing current for a constant inductance,
/// `sqrt(T_m / (p * gamma * L_M))`.
pub fn i_sd_opt_linear(params: &MotorParams, t_m: f64) -> Result<f64, SteadyError> {
    if t_m < 0.0 {
        return Err(SteadyError::NegativeTorque { t_m });
    }
    Ok((t_m / (params.p as f64 * gamma(params) * params.lm)).sqrt())
}

/// Derivative of the steady-state loss with respect to `i_sd` at fixed
/// torque, written in terms of the torque current:
///
/// ```text
/// 2*R_s*i_sd - 2*(R_s + R_R)*i_sq^2*(1/i_sd + L_m'(i_sd)/L_m(i_sd))
/// ```
pub fn stationarity_residual(
    params: &MotorParams,
    sat: &SaturationCurve,
    i_sd: f64,
    i_sq: f64,
) -> f64 {
    assert!(i_sd > 0.0, "i_sd = {i_sd} must be > 0");
    let l = sat.value(i_sd);
    let dl = sat.derivative(i_sd);
    2.0 * params.rs * i_sd - 2.0 * (params.rs + params.rr) * i_sq * i_sq * (1.0 / i_sd + dl / l)
}

/// Root at the first sign change of `f` over `[lo, hi]`: a uniform scan
/// locates the earliest crossing, then bisection refines inside it. A curve
/// clamped at its floor has a second stationary point on the flat branch;
/// scanning from below keeps the result on the branch that continues the
/// unsaturated rule.
fn first_crossing_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    const SCAN: usize = 96;
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=SCAN {
        let b = lo + (hi - lo) * k as f64 / SCAN as f64;
        let fb = f(b);
        if fa == 0.0 {
            return Ok(a);
        }
        if fa * fb <= 0.0 {
            return numerics::find_root(&mut f, a, b, tol);
        }
        (a, fa) = (b, fb);
    }
    if fa == 0.0 {
        return Ok(a);
    }
    Err(NumericsError::NoSignChange { lo, hi })
}

/// Loss-optimal `i_sd` for a given torque current under saturation: the
/// lowest root of [`stationarity_residual`] in `i_sd`. Returns 0 for
/// `i_sq = 0`.
///
/// The root is bracketed in `[1e-6, 10 * i_sd_nom]`; the bracket widens
/// geometrically up to four times before giving up.
pub fn zeta(params: &MotorParams, sat: &SaturationCurve, i_sq: f64) -> Result<f64, SteadyError> {
    assert!(i_sq >= 0.0, "i_sq = {i_sq} must be >= 0");
    if i_sq == 0.0 {
        return Ok(0.0);
    }
    let lo = 1e-6;
    let mut hi = 10.0 * params.i_sd_nom;
    for _ in 0..=4 {
        match first_crossing_root(
            |i| stationarity_residual(params, sat, i, i_sq),
            lo,
            hi,
            1e-12 * params.rs * params.i_sd_nom,
        ) {
            Ok(root) => return Ok(root),
            Err(NumericsError::NoSignChange { .. }) => hi *= 2.0,
            Err(_) => break,
        }
    }
    Err(SteadyError::NoRoot { i_sq, lo, hi })
}

/// Steady-state loss-optimal operating point for torque `t_m` under the given
/// curve. For a constant curve this reproduces [`i_sd_opt_linear`]; otherwise
/// the stationarity condition is solved with `i_sq` tied to the torque.
pub fn optimal_point(
    params: &MotorParams,
    sat: &SaturationCurve,
    t_m: f64,
) -> Result<OperatingPoint, SteadyError> {
    if t_m < 0.0 {
        return Err(SteadyError::NegativeTorque { t_m });
    }
    let p = params.p as f64;
    if t_m == 0.0 {
        return Ok(OperatingPoint { t_m, i_sd: 0.0, i_sq: 0.0, phi_r: 0.0, p_loss: 0.0 });
    }
    let i_sd = if sat.is_constant() {
        // Same root, closed form.
        let g = gamma(params);
        (t_m / (p * g * sat.value(0.0))).sqrt()
    } else {
        let i_sq_of = |i: f64| t_m / (p * sat.value(i) * i);
        let lo = 1e-6 * params.i_sd_nom;
        let mut hi = 10.0 * params.i_sd_nom;
        let mut found = None;
        for _ in 0..=4 {
            match first_crossing_root(
                |i| stationarity_residual(params, sat, i, i_sq_of(i)),
                lo,
                hi,
                1e-12 * params.rs * params.i_sd_nom,
            ) {
                Ok(root) => {
                    found = Some(root);
                    break;
                }
                Err(NumericsError::NoSignChange { .. }) => hi *= 2.0,
                Err(_) => break,
            }
        }
        found.ok_or(SteadyError::NoRoot { i_sq: t_m / (p * sat.value(0.0)), lo, hi })?
    };
    let phi_r = sat.value(i_sd) * i_sd;
    let i_sq = t_m / (p * phi_r);
    let p_loss = i_sq * i_sq * (params.rs + params.rr) + i_sd * i_sd * params.rs;
    Ok(OperatingPoint { t_m, i_sd, i_sq, phi_r, p_loss })
}

/// Precomputed `i_sq -> zeta(i_sq)` map on a uniform grid with linear
/// interpolation between nodes (and linear extrapolation past the last node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaTable {
    i_sq_max: f64,
    values: Vec<f64>,
}

impl ZetaTable {
    /// Tabulates `zeta` at `n` uniform nodes on `[0, i_sq_max]` (`n >= 2`).
    pub fn build(
        params: &MotorParams,
        sat: &SaturationCurve,
        i_sq_max: f64,
        n: usize,
    ) -> Result<Self, SteadyError> {
        assert!(n >= 2, "table needs >= 2 nodes");
        assert!(i_sq_max > 0.0);
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let i_sq = i_sq_max * k as f64 / (n - 1) as f64;
            values.push(zeta(params, sat, i_sq)?);
        }
        Ok(ZetaTable { i_sq_max, values })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let step = self.i_sq_max / (self.values.len() - 1) as f64;
        self.values.iter().enumerate().map(move |(k, v)| (step * k as f64, *v))
    }

    pub fn eval(&self, i_sq: f64) -> f64 {
        assert!(i_sq >= 0.0);
        let n = self.values.len();
        let step = self.i_sq_max / (n - 1) as f64;
        let pos = i_sq / step;
        let k = (pos.floor() as usize).min(n - 2);
        let frac = pos - k as f64;
        self.values[k] + (self.values[k + 1] - self.values[k]) * frac
    }

    /// True when the tabulated values never decrease.
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> MotorParams {
        MotorParams {
            rs: 1.0,
            rr: 3.0,
            lm: 0.5,
            j_inertia: 0.01,
            p: 2,
            i_sd_nom: 1.0,
            t_rated: 2.0,
            name: "unit".into(),
        }
    }

    #[test]
    fn gamma_examples() {
        // Rs = RR: sqrt(1/2).
        let mut p = params();
        p.rr = 1.0;
        assert!((gamma(&p) - 0.5f64.sqrt()).abs() < 1e-12);
        // Rs = 1, RR = 3: 0.5.
        assert_eq!(gamma(&params()), 0.5);
        // RR -> 0 pushes gamma toward 1.
        p.rr = 1e-12;
        assert!((gamma(&p) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn i_sd_opt_zero_torque_and_scaling() {
        let p = params();
        assert_eq!(i_sd_opt_linear(&p, 0.0).unwrap(), 0.0);
        let base = i_sd_opt_linear(&p, 1.0).unwrap();
        let quad = i_sd_opt_linear(&p, 4.0).unwrap();
        assert!((quad - 2.0 * base).abs() < 1e-12);
        assert_eq!(
            i_sd_opt_linear(&p, -1.0).unwrap_err(),
            SteadyError::NegativeTorque { t_m: -1.0 }
        );
    }

    #[test]
    fn i_sd_opt_beats_a_current_grid() {
        let p = params();
        let t_m = 1.7;
        let i_opt = i_sd_opt_linear(&p, t_m).unwrap();
        let loss = |i_sd: f64| {
            let i_sq = t_m / (p.p as f64 * p.lm * i_sd);
            i_sq * i_sq * (p.rs + p.rr) + i_sd * i_sd * p.rs
        };
        let best = loss(i_opt);
        for k in 1..=10_000 {
            let i = 4.0 * i_opt * k as f64 / 10_000.0;
            assert!(loss(i) >= best - 1e-12, "grid point {i} beats the optimum");
        }
    }

    #[test]
    fn optimal_ratio_is_gamma() {
        let p = params();
        let op = optimal_point(&p, &SaturationCurve::constant(p.lm), 1.3).unwrap();
        assert!((op.i_sq / op.i_sd - gamma(&p)).abs() < 1e-12);
        assert!((op.phi_r - p.lm * op.i_sd).abs() < 1e-12);
        assert!((p.p as f64 * op.phi_r * op.i_sq - 1.3).abs() < 1e-12);
    }

    #[test]
    fn stationarity_residual_constant_curve_root_is_feedback_ratio() {
        let p = params();
        let sat = SaturationCurve::constant(p.lm);
        let i_sq = 0.8;
        let root = zeta(&p, &sat, i_sq).unwrap();
        assert!((root - i_sq / gamma(&p)).abs() < 1e-9);
        // Sign pattern around the root: negative below, positive above.
        assert!(stationarity_residual(&p, &sat, 0.5 * root, i_sq) < 0.0);
        assert!(stationarity_residual(&p, &sat, 2.0 * root, i_sq) > 0.0);
    }

    #[test]
    fn stationarity_residual_matches_fixed_torque_loss_slope() {
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.25, l_min: 0.1 };
        let i_sd = 1.3;
        let i_sq = 0.9;
        // Freeze the torque implied by (i_sd, i_sq), then differentiate the
        // steady loss along it.
        let t_m = p.p as f64 * sat.value(i_sd) * i_sd * i_sq;
        let loss = |i: f64| {
            let isq = t_m / (p.p as f64 * sat.value(i) * i);
            isq * isq * (p.rs + p.rr) + i * i * p.rs
        };
        let h = 1e-6;
        let fd = (loss(i_sd + h) - loss(i_sd - h)) / (2.0 * h);
        let res = stationarity_residual(&p, &sat, i_sd, i_sq);
        assert!((res - fd).abs() / fd.abs().max(1.0) < 1e-6, "residual {res} vs fd {fd}");
    }

    #[test]
    fn zeta_zero_and_residual_quality() {
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.25, l_min: 0.1 };
        assert_eq!(zeta(&p, &sat, 0.0).unwrap(), 0.0);
        for k in 1..=32 {
            let i_sq = 3.0 * k as f64 / 32.0;
            let root = zeta(&p, &sat, i_sq).unwrap();
            let res = stationarity_residual(&p, &sat, root, i_sq);
            assert!(res.abs() <= 1e-9, "residual {res} at i_sq = {i_sq}");
            // Second-order minimality of the fixed-torque loss at the root.
            let t_m = p.p as f64 * sat.value(root) * root * i_sq;
            let loss = |i: f64| {
                let isq = t_m / (p.p as f64 * sat.value(i) * i);
                isq * isq * (p.rs + p.rr) + i * i * p.rs
            };
            let h = 1e-4 * root;
            let second = (loss(root + h) - 2.0 * loss(root) + loss(root - h)) / (h * h);
            assert!(second > 0.0, "loss not convex at root for i_sq = {i_sq}");
        }
    }

    #[test]
    fn zeta_beats_linear_rule_under_saturation() {
        // With a drooping curve, applying i_sq/gamma (the constant-curve rule)
        // must never beat zeta on the saturated steady loss.
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.3, l_min: 0.1 };
        for k in 1..=100 {
            let i_sq = 2.5 * k as f64 / 100.0;
            let z = zeta(&p, &sat, i_sq).unwrap();
            let naive = i_sq / gamma(&p);
            let t_m_z = p.p as f64 * sat.value(z) * z * i_sq;
            let loss = |i: f64, t: f64| {
                let isq = t / (p.p as f64 * sat.value(i) * i);
                isq * isq * (p.rs + p.rr) + i * i * p.rs
            };
            assert!(loss(z, t_m_z) <= loss(naive, t_m_z) + 1e-12);
        }
    }

    #[test]
    fn zeta_lipschitz_constant_is_finite() {
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.25, l_min: 0.1 };
        let h = 1e-3;
        let mut c: f64 = 0.0;
        for k in 1..400 {
            let i_sq = 2.0 * k as f64 / 400.0;
            let a = zeta(&p, &sat, i_sq).unwrap();
            let b = zeta(&p, &sat, i_sq + h).unwrap();
            c = c.max((b - a).abs() / h);
        }
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn zeta_table_against_pointwise() {
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.25, l_min: 0.1 };
        let table = ZetaTable::build(&p, &sat, 3.0, 256).unwrap();
        assert!(table.is_monotone());
        // Endpoints exact.
        assert_eq!(table.eval(0.0), 0.0);
        let z_end = zeta(&p, &sat, 3.0).unwrap();
        assert!((table.eval(3.0) - z_end).abs() < 1e-9);
        // Off-node error <= 0.5% at 256 nodes.
        for k in 0..500 {
            let i_sq = 3.0 * (k as f64 + 0.5) / 500.0;
            let exact = zeta(&p, &sat, i_sq).unwrap();
            let interp = table.eval(i_sq);
            assert!(
                (interp - exact).abs() <= 5e-3 * exact.max(1e-9),
                "table error at i_sq = {i_sq}: {interp} vs {exact}"
            );
        }
    }

    #[test]
    fn optimal_point_saturated_invariants() {
        let p = params();
        let sat = SaturationCurve::Affine { a: 1.0, b: 0.25, l_min: 0.1 };
        let op = optimal_point(&p, &sat, 1.5).unwrap();
        assert!((op.phi_r - sat.value(op.i_sd) * op.i_sd).abs() < 1e-12);
        assert!((p.p as f64 * op.phi_r * op.i_sq - 1.5).abs() < 1e-10);
        // Consistency with zeta at the point's own torque current.
        let z = zeta(&p, &sat, op.i_sq).unwrap();
        assert!((z - op.i_sd).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn gamma_strictly_inside_unit_interval(rs in 1e-3..100.0f64, rr in 1e-3..100.0f64) {
            let mut p = params();
            p.rs = rs;
            p.rr = rr;
            let g = gamma(&p);
            prop_assert!(g > 0.0 && g < 1.0);
        }
    }
}
