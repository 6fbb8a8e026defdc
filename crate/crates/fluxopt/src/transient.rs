//! Costate formulation of the minimum-loss flux transient and the
//! closed-form results attached to it.
//!
//! A load step at `t = 0` moves the optimal steady flux, and the question is
//! how `i_sd(t)` should travel between the two levels on a fixed horizon.
//! With torque tracked exactly (`i_sq = T / (p * phi_r)`) and the plain loss
//! `p_loss` as objective, the adjoint system for the scalar flux state is
//!
//! ```text
//! i_sd    = -R_R * lambda / (2 * R_s)
//! lambda' =  R_R * lambda / L_M + 2 * i_sq^2 * (R_s + R_R) / phi_r
//! ```
//!
//! and the trajectory generated by the static feedback `i_sd = i_sq / gamma`
//! satisfies it exactly: along that trajectory `lambda = -(2 R_s / R_R) *
//! i_sd` holds pointwise and the Hamiltonian stays at the constant
//! `2 R_s T / (p gamma L_M)`.
//!
//! Charging the full `p_dyn = p_loss + delta_p` instead changes the algebra
//! ([`bvp_dyn_current`], [`bvp_dyn_rates`]); magnetic saturation makes the
//! current/costate relation implicit ([`bvp_sat_current`]). Both variants are
//! solved by single shooting in [`crate::simulate`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::{self, MotorParams};
use crate::saturation::SaturationCurve;
use crate::steady;

#[derive(Debug, Error, PartialEq)]
pub enum TransientError {
    #[error("load step rejected: {0}")]
    InvalidStep(String),
    #[error("losses still moving at the end of the horizon t = {t_end}")]
    NotSettled { t_end: f64 },
}

/// One torque step at `t = 0`: `T_m` before, `T_m + delta_T_m` after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    pub t_m: f64,
    pub delta_t_m: f64,
}

impl LoadStep {
    pub fn new(t_m: f64, delta_t_m: f64) -> Result<Self, TransientError> {
        if !(t_m.is_finite() && delta_t_m.is_finite()) {
            return Err(TransientError::InvalidStep("non-finite torque".into()));
        }
        if t_m < 0.0 || t_m + delta_t_m < 0.0 {
            return Err(TransientError::InvalidStep(format!(
                "torques must stay >= 0 (got {t_m} -> {})",
                t_m + delta_t_m
            )));
        }
        Ok(LoadStep { t_m, delta_t_m })
    }

    /// Step expressed as fractions of rated torque.
    pub fn from_fractions(t_rated: f64, from: f64, to: f64) -> Result<Self, TransientError> {
        LoadStep::new(t_rated * from, t_rated * (to - from))
    }

    /// Post-step torque.
    pub fn total(&self) -> f64 {
        self.t_m + self.delta_t_m
    }

    /// Step ratio `k = (T_m + delta_T_m) / T_m`; undefined from zero torque.
    pub fn ratio(&self) -> Option<f64> {
        (self.t_m > 0.0).then(|| self.total() / self.t_m)
    }
}

/// Flux and costate along one extremal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostateState {
    pub phi_r: f64,
    pub lambda: f64,
}

/// Energy comparison of an exact solution (`J1`) against an approximation
/// (`J2`) over the same horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    #[serde(rename = "delta_J")]
    pub delta_j: f64,
    /// `delta_J / J1`, as a fraction (not percent).
    pub rel_err: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl EnergyReport {
    pub fn new(j1: f64, j2: f64, horizon: f64) -> Self {
        let delta_j = j2 - j1;
        EnergyReport { j1, j2, delta_j, rel_err: delta_j / j1, horizon }
    }
}

/// Static feedback `i_sd = i_sq / gamma`, the exact minimizer of the
/// `p_loss` objective for a current-independent inductance.
pub fn feedback_law(params: &MotorParams, i_sq: f64) -> f64 {
    assert!(i_sq >= 0.0, "i_sq = {i_sq} must be >= 0");
    i_sq / steady::gamma(params)
}

/// Hamiltonian of the `p_loss` objective, with `i_sq` pinned by the torque:
/// `(T/(p phi))^2 (R_s+R_R) + i_sd^2 R_s + lambda * phi_r'`.
pub fn hamiltonian_ideal(
    params: &MotorParams,
    t_total: f64,
    state: &CostateState,
    i_sd: f64,
) -> f64 {
    let i_sq = t_total / (params.p as f64 * state.phi_r);
    i_sq * i_sq * (params.rs + params.rr)
        + i_sd * i_sd * params.rs
        + state.lambda * motor::flux_derivative(params, state.phi_r, i_sd)
}

/// Hamiltonian of the full `p_dyn` objective (adds the flux-slip penalty
/// `R_R (i_sd - phi_r/L_M)^2`).
pub fn hamiltonian_dyn(params: &MotorParams, t_total: f64, state: &CostateState, i_sd: f64) -> f64 {
    let mismatch = i_sd - state.phi_r / params.lm;
    hamiltonian_ideal(params, t_total, state, i_sd) + params.rr * mismatch * mismatch
}

/// Costate rate `lambda' = R_R lambda / L_M + 2 i_sq^2 (R_s + R_R) / phi_r`
/// for the `p_loss` objective. `t_total` is the torque carried by `i_sq` at
/// this instant, so a time-varying torque command can be injected directly.
pub fn costate_rate_ideal(params: &MotorParams, t_total: f64, state: &CostateState) -> f64 {
    let i_sq = t_total / (params.p as f64 * state.phi_r);
    params.rr * state.lambda / params.lm
        + 2.0 * i_sq * i_sq * (params.rs + params.rr) / state.phi_r
}

/// Minimizing magnetizing current of the `p_loss` Hamiltonian,
/// `i_sd = -R_R lambda / (2 R_s)`.
pub fn bvp_loss_current(params: &MotorParams, lambda: f64) -> f64 {
    -params.rr * lambda / (2.0 * params.rs)
}

/// `(phi_r', lambda')` of the `p_loss` adjoint system.
pub fn bvp_loss_rates(params: &MotorParams, t_total: f64, state: &CostateState) -> [f64; 2] {
    let i_sd = bvp_loss_current(params, state.lambda);
    [
        motor::flux_derivative(params, state.phi_r, i_sd),
        costate_rate_ideal(params, t_total, state),
    ]
}

/// Minimizing magnetizing current of the `p_dyn` Hamiltonian,
/// `i_sd = -(R_R lambda - 2 R_R phi_r / L_M) / (2 R_R + 2 R_s)`.
pub fn bvp_dyn_current(params: &MotorParams, state: &CostateState) -> f64 {
    -(params.rr * state.lambda - 2.0 * params.rr * state.phi_r / params.lm)
        / (2.0 * params.rr + 2.0 * params.rs)
}

/// `(phi_r', lambda')` of the `p_dyn` adjoint system:
/// `lambda' = R_R lambda / L_M + 2 i_sq^2 (R_R + R_s) / phi_r
///          + 2 R_R (i_sd - phi_r / L_M) / L_M`.
pub fn bvp_dyn_rates(params: &MotorParams, t_total: f64, state: &CostateState) -> [f64; 2] {
    let i_sd = bvp_dyn_current(params, state);
    let extra = 2.0 * params.rr * (i_sd - state.phi_r / params.lm) / params.lm;
    [
        motor::flux_derivative(params, state.phi_r, i_sd),
        costate_rate_ideal(params, t_total, state) + extra,
    ]
}

/// Minimizing magnetizing current of the saturated `p_loss` Hamiltonian: the
/// root of `R_R lambda (1 + phi_r L_m'(i)/L_m(i)^2) + 2 R_s i` in `i`.
///
/// For `lambda >= 0` (reachable on off-solution shots) the minimum over
/// admissible `i_sd >= 0` sits at the boundary and 0 is returned. A runaway
/// costate asking for more current than the widened bracket holds saturates
/// at the bracket cap, which keeps shooting residuals finite and correctly
/// signed; the converged solution never touches the cap.
pub fn bvp_sat_current(params: &MotorParams, sat: &SaturationCurve, state: &CostateState) -> f64 {
    let g = |i: f64| {
        let l = sat.value(i);
        params.rr * state.lambda * (1.0 + state.phi_r * sat.derivative(i) / (l * l))
            + 2.0 * params.rs * i
    };
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = 10.0 * params.i_sd_nom;
    for _ in 0..=4 {
        match crate::numerics::find_root(g, 0.0, hi, 1e-12 * params.rs * params.i_sd_nom) {
            Ok(root) => return root,
            Err(crate::numerics::NumericsError::NoSignChange { .. }) => hi *= 2.0,
            Err(_) => break,
        }
    }
    hi / 2.0
}

/// `(phi_r', lambda')` of the saturated `p_loss` adjoint system:
/// the flux decays through `L_m(i_sd)` and
/// `lambda' = R_R lambda / L_m(i_sd) + 2 (R_R + R_s) i_sq^2 / phi_r`.
pub fn bvp_sat_rates(
    params: &MotorParams,
    sat: &SaturationCurve,
    t_total: f64,
    state: &CostateState,
) -> [f64; 2] {
    let i_sd = bvp_sat_current(params, sat, state);
    let i_sq = t_total / (params.p as f64 * state.phi_r);
    let l = sat.value(i_sd);
    [
        motor::flux_derivative_sat(params, sat, state.phi_r, i_sd),
        params.rr * state.lambda / l
            + 2.0 * (params.rr + params.rs) * i_sq * i_sq / state.phi_r,
    ]
}

/// Instant-of-step loss ratio `delta_p(0) / p_loss(0-)` for a torque drop to
/// `k * T_m`, `0 <= k <= 1`: `R_R (k - 1)^2 / (2 R_s)`.
pub fn peak_ratio_decrease(params: &MotorParams, k: f64) -> f64 {
    assert!((0.0..=1.0).contains(&k), "k = {k} outside [0, 1]");
    params.rr * (k - 1.0) * (k - 1.0) / (2.0 * params.rs)
}

/// Instant-of-step loss share `delta_p(0) / p_dyn(0)` for a torque rise to
/// `k * T_m`, `k > 1`:
/// `R_R (k-1)^2 / (R_R + R_R k^2 + 2 R_s k^2 - 2 R_R k)`.
/// `k = +inf` returns the limit `R_R / (R_R + 2 R_s)`.
pub fn peak_ratio_increase(params: &MotorParams, k: f64) -> f64 {
    assert!(k > 1.0, "k = {k} must exceed 1");
    if k.is_infinite() {
        return params.rr / (params.rr + 2.0 * params.rs);
    }
    let num = params.rr * (k - 1.0) * (k - 1.0);
    num / (params.rr + params.rr * k * k + 2.0 * params.rs * k * k - 2.0 * params.rr * k)
}

/// Settle time of a loss transient: the first time after the slope peak
/// beyond which `|p_dyn'|` stays below `epsilon * max |p_dyn'|` for the rest
/// of the horizon. Slopes are central differences on the grid (one-sided at
/// the ends). A constant series settles immediately at `t0`; a series still
/// above threshold at the last node has `NotSettled`.
pub fn transient_duration(
    p_dyn: &[f64],
    dt: f64,
    t0: f64,
    epsilon: f64,
) -> Result<f64, TransientError> {
    assert!(p_dyn.len() >= 2, "need >= 2 samples");
    assert!(dt > 0.0);
    assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon = {epsilon} outside (0, 1]");
    let n = p_dyn.len();
    let slope = |i: usize| -> f64 {
        if i == 0 {
            (p_dyn[1] - p_dyn[0]) / dt
        } else if i == n - 1 {
            (p_dyn[n - 1] - p_dyn[n - 2]) / dt
        } else {
            (p_dyn[i + 1] - p_dyn[i - 1]) / (2.0 * dt)
        }
    };
    let max_slope = (0..n).map(|i| slope(i).abs()).fold(0.0f64, f64::max);
    if max_slope == 0.0 {
        return Ok(t0);
    }
    let threshold = epsilon * max_slope;
    let last_above = (0..n)
        .rev()
        .find(|&i| slope(i).abs() >= threshold)
        .expect("max slope exists");
    if last_above == n - 1 {
        return Err(TransientError::NotSettled { t_end: t0 + dt * (n - 1) as f64 });
    }
    Ok(t0 + dt * last_above as f64)
}
