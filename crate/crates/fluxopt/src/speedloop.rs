//! PI speed loop and its closed-form response to a load-torque step.
//!
//! The speed controller outputs a torque command that is turned into `i_sq`
//! by dividing by `p * phi_r`, so the speed dynamics
//!
//! ```text
//! J * omega_r' = Kp * e + xi - T_load,   xi' = Ki * e,   e = omega_ref - omega_r
//! ```
//!
//! (with `omega_r` the mechanical speed) are linear and completely decoupled
//! from the flux level. Gains follow the overdamped pattern `Ki = J * w0^2`,
//! `Kp = 2 * z * sqrt(J * Ki)` with `z > 1`, giving the real poles
//! `lam1 = (-z - sqrt(z^2 - 1)) * w0` and `lam2 = (-z + sqrt(z^2 - 1)) * w0`.
//!
//! After a load step of `delta_T_m` at `t = 0` from equilibrium, the torque
//! command deviates from its final value `T_m + delta_T_m` by
//!
//! ```text
//! delta(t) = delta_T_m / (2*sqrt(z^2-1)*w0) * (lam1*exp(lam1*t) - lam2*exp(lam2*t))
//! ```
//!
//! so `delta(0) = -delta_T_m` (the command is continuous at the step), and
//! the speed error integrates `delta / J`:
//!
//! ```text
//! delta_omega(t) = delta_T_m / (2*J*sqrt(z^2-1)*w0) * (exp(lam1*t) - exp(lam2*t))
//! ```
//!
//! which is <= 0 for a load rise (the machine sags, then recovers). No
//! anti-windup is modelled and the speed setpoint is constant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::MotorParams;
use crate::transient::LoadStep;

#[derive(Debug, Error, PartialEq)]
pub enum SpeedLoopError {
    #[error("damping z = {z} too low; the overdamped design needs z > 1")]
    DampingTooLow { z: f64 },
    #[error("w0 = {w0} must be finite and > 0")]
    BadBandwidth { w0: f64 },
}

/// Speed-loop model used when producing `i_sq`.
///
/// `ideal` holds the torque at its post-step value exactly; `analytic`
/// superposes the closed-form deviation `delta(t)`; `closed_loop` integrates
/// the PI equations alongside the flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpeedLoopConfig {
    Ideal,
    Analytic { w0: f64, z: f64 },
    ClosedLoop { w0: f64, z: f64 },
}

impl SpeedLoopConfig {
    pub fn is_ideal(&self) -> bool {
        matches!(self, SpeedLoopConfig::Ideal)
    }

    pub fn validate(&self) -> Result<(), SpeedLoopError> {
        match *self {
            SpeedLoopConfig::Ideal => Ok(()),
            SpeedLoopConfig::Analytic { w0, z } | SpeedLoopConfig::ClosedLoop { w0, z } => {
                if !(w0.is_finite() && w0 > 0.0) {
                    return Err(SpeedLoopError::BadBandwidth { w0 });
                }
                if !(z.is_finite() && z > 1.0 + 1e-9) {
                    return Err(SpeedLoopError::DampingTooLow { z });
                }
                Ok(())
            }
        }
    }

    /// PI gains `(Kp, Ki)` for inertia `j`: `Ki = J w0^2`, `Kp = 2 z sqrt(J Ki)`.
    pub fn gains(&self, j: f64) -> Option<(f64, f64)> {
        match *self {
            SpeedLoopConfig::Ideal => None,
            SpeedLoopConfig::Analytic { w0, z } | SpeedLoopConfig::ClosedLoop { w0, z } => {
                let ki = j * w0 * w0;
                let kp = 2.0 * z * (j * ki).sqrt();
                Some((kp, ki))
            }
        }
    }
}

/// Closed-form response of the loop to one load step, precomputed for cheap
/// per-sample evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StepResponse {
    lam1: f64,
    lam2: f64,
    /// `delta_T_m / (2 * sqrt(z^2 - 1) * w0)`.
    scale: f64,
    j_inertia: f64,
    delta_t_m: f64,
}

impl StepResponse {
    pub fn new(w0: f64, z: f64, delta_t_m: f64, j_inertia: f64) -> Result<Self, SpeedLoopError> {
        if !(w0.is_finite() && w0 > 0.0) {
            return Err(SpeedLoopError::BadBandwidth { w0 });
        }
        if !(z.is_finite() && z > 1.0 + 1e-9) {
            return Err(SpeedLoopError::DampingTooLow { z });
        }
        let root = (z * z - 1.0).sqrt();
        Ok(StepResponse {
            lam1: (-z - root) * w0,
            lam2: (-z + root) * w0,
            scale: delta_t_m / (2.0 * root * w0),
            j_inertia,
            delta_t_m,
        })
    }

    /// From a config's `w0`/`z`; `None` in ideal mode (no deviation).
    pub fn from_config(
        cfg: &SpeedLoopConfig,
        delta_t_m: f64,
        j_inertia: f64,
    ) -> Result<Option<Self>, SpeedLoopError> {
        match *cfg {
            SpeedLoopConfig::Ideal => Ok(None),
            SpeedLoopConfig::Analytic { w0, z } | SpeedLoopConfig::ClosedLoop { w0, z } => {
                Ok(Some(StepResponse::new(w0, z, delta_t_m, j_inertia)?))
            }
        }
    }

    /// Torque-command deviation `delta(t)` from the post-step torque.
    pub fn torque_deviation(&self, t: f64) -> f64 {
        if t < 0.0 {
            return -self.delta_t_m;
        }
        self.scale * (self.lam1 * (self.lam1 * t).exp() - self.lam2 * (self.lam2 * t).exp())
    }

    /// Speed error `omega_r(t) - omega_ref` (mechanical rad/s).
    pub fn speed_deviation(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.scale / self.j_inertia * ((self.lam1 * t).exp() - (self.lam2 * t).exp())
    }
}

/// Closed-form torque deviation for one step; 0 in ideal mode.
pub fn torque_deviation(
    cfg: &SpeedLoopConfig,
    delta_t_m: f64,
    j_inertia: f64,
    t: f64,
) -> Result<f64, SpeedLoopError> {
    Ok(match StepResponse::from_config(cfg, delta_t_m, j_inertia)? {
        None => 0.0,
        Some(r) => r.torque_deviation(t),
    })
}

/// Closed-form speed error for one step; 0 in ideal mode.
pub fn speed_deviation(
    cfg: &SpeedLoopConfig,
    delta_t_m: f64,
    j_inertia: f64,
    t: f64,
) -> Result<f64, SpeedLoopError> {
    Ok(match StepResponse::from_config(cfg, delta_t_m, j_inertia)? {
        None => 0.0,
        Some(r) => r.speed_deviation(t),
    })
}

/// Torque current delivered by the non-ideal loop,
/// `(T_m + delta_T_m + delta(t)) / (p * phi_r)`.
pub fn i_sq_nonideal(
    cfg: &SpeedLoopConfig,
    params: &MotorParams,
    step: &LoadStep,
    phi_r: f64,
    t: f64,
) -> Result<f64, SpeedLoopError> {
    assert!(phi_r > 0.0, "phi_r = {phi_r} must be > 0");
    let delta = torque_deviation(cfg, step.delta_t_m, params.j_inertia, t)?;
    Ok((step.total() + delta) / (params.p as f64 * phi_r))
}

/// State of the simulated PI loop: mechanical speed and integrator output
/// (integrator in torque units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub omega_r: f64,
    pub integrator: f64,
}

/// Torque command `Kp * e + xi` for the current loop state.
pub fn pi_torque(cfg: &SpeedLoopConfig, j_inertia: f64, omega_ref: f64, state: &PiState) -> f64 {
    let (kp, _) = cfg.gains(j_inertia).expect("pi_torque needs a non-ideal config");
    kp * (omega_ref - state.omega_r) + state.integrator
}

/// Right-hand side of the closed-loop ODE for `(phi_r, omega_r, xi)` given
/// the momentary magnetizing current and its saturated inductance. The speed
/// states do not read `phi_r` or `i_sd`: the loop is flux-invariant.
#[allow(clippy::too_many_arguments)]
pub fn closed_loop_dynamics(
    cfg: &SpeedLoopConfig,
    params: &MotorParams,
    sat: &crate::saturation::SaturationCurve,
    t_load: f64,
    omega_ref: f64,
    phi_r: f64,
    state: &PiState,
    i_sd: f64,
) -> [f64; 3] {
    let (kp, ki) = cfg.gains(params.j_inertia).expect("closed loop needs a non-ideal config");
    let e = omega_ref - state.omega_r;
    let torque = kp * e + state.integrator;
    let phi = phi_r.max(crate::motor::PHI_FLOOR);
    [
        crate::motor::flux_derivative_sat(params, sat, phi, i_sd),
        (torque - t_load) / params.j_inertia,
        ki * e,
    ]
}
