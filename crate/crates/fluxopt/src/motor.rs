//! Machine constants, the reduced flux/speed dynamics, and the instantaneous
//! loss decomposition.
//!
//! The machine is the Gamma-inverse equivalent circuit with the d axis locked
//! to the rotor flux and the current controllers assumed fast, leaving
//!
//! ```text
//! phi_r' = -(R_R / L_M) * phi_r + R_R * i_sd        (rotor time constant tau_R = L_M / R_R)
//! omega' = p * (p * phi_r * i_sq - T_m) / J
//! ```
//!
//! with `omega` the electrical shaft speed. All quantities are SI and the d-q
//! transform is power-invariant, so torque and loss expressions carry no 3/2
//! factors.
//!
//! Copper loss splits into a part fixed by the operating point and a part
//! charged only while the flux moves:
//!
//! ```text
//! p_dyn  = p_loss + delta_p
//! p_loss = i_sq^2 * (R_s + R_R) + i_sd^2 * R_s
//! delta_p = R_R * (i_sd - phi_r / L_m(i_sd))^2
//! ```
//!
//! Some sources print the direct-axis term of `p_loss` with `R_R`; that is
//! inconsistent with the decomposition above (expanding `delta_p` must
//! reproduce the raw winding losses) and with the curvature `2*R_s` of the
//! loss in `i_sd`, so `R_s` is used throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::saturation::SaturationCurve;

/// Flux level below which simulations clamp `phi_r` to keep `i_sq = T / (p
/// phi_r)` finite. Clamping marks the trajectory as degenerate.
pub const PHI_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MotorError {
    #[error("motor parameters rejected: {0}")]
    Invalid(String),
}

/// Electrical and mechanical constants of one machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Stator resistance (ohm).
    #[serde(rename = "Rs")]
    pub rs: f64,
    /// Rotor resistance, stator-referred (ohm).
    #[serde(rename = "RR")]
    pub rr: f64,
    /// Unsaturated main inductance (H).
    #[serde(rename = "LM")]
    pub lm: f64,
    /// Total inertia at the shaft (kg m^2).
    #[serde(rename = "J_inertia")]
    pub j_inertia: f64,
    /// Pole pairs.
    pub p: u32,
    /// Nominal magnetizing current (A).
    pub i_sd_nom: f64,
    /// Rated torque (N m).
    #[serde(rename = "T_rated")]
    pub t_rated: f64,
    /// Label used in reports.
    pub name: String,
}

impl MotorParams {
    /// Rotor time constant `L_M / R_R` (s).
    pub fn tau_r(&self) -> f64 {
        self.lm / self.rr
    }

    pub fn validate(&self) -> Result<(), MotorError> {
        let positives = [
            ("Rs", self.rs),
            ("RR", self.rr),
            ("LM", self.lm),
            ("J_inertia", self.j_inertia),
            ("i_sd_nom", self.i_sd_nom),
            ("T_rated", self.t_rated),
        ];
        for (label, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(MotorError::Invalid(format!("{label} = {v} must be finite and > 0")));
            }
        }
        if self.p < 1 {
            return Err(MotorError::Invalid("p must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MotorError> {
        let params: MotorParams =
            serde_json::from_str(text).map_err(|e| MotorError::Invalid(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Dynamic state of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSpeedState {
    /// Rotor flux linkage (Wb), > 0.
    pub phi_r: f64,
    /// Electrical shaft speed (rad/s).
    pub omega: f64,
}

/// Stator current components in the rotor-flux frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentsDQ {
    /// Magnetizing (flux-producing) component (A), >= 0.
    pub i_sd: f64,
    /// Torque-producing component (A).
    pub i_sq: f64,
}

/// Instantaneous copper-loss decomposition (W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSample {
    /// Loss charged to the operating point itself.
    pub p_loss: f64,
    /// Extra loss present only while the flux is off its quasi-steady value.
    pub delta_p: f64,
    /// Total copper loss, `p_loss + delta_p`.
    pub p_dyn: f64,
}

/// `phi_r' = -(R_R / L_M) * phi_r + R_R * i_sd` with the constant inductance.
pub fn flux_derivative(params: &MotorParams, phi_r: f64, i_sd: f64) -> f64 {
    assert!(phi_r.is_finite() && i_sd.is_finite(), "non-finite flux/current");
    assert!(phi_r > 0.0, "phi_r = {phi_r} must be > 0");
    -(params.rr / params.lm) * phi_r + params.rr * i_sd
}

/// Flux derivative with the saturated inductance `L_m(i_sd)` in the decay
/// term. Collapses to [`flux_derivative`] for a constant curve at `L_M`.
pub fn flux_derivative_sat(
    params: &MotorParams,
    sat: &SaturationCurve,
    phi_r: f64,
    i_sd: f64,
) -> f64 {
    assert!(phi_r.is_finite() && i_sd.is_finite(), "non-finite flux/current");
    assert!(phi_r > 0.0, "phi_r = {phi_r} must be > 0");
    -params.rr * phi_r / sat.value(i_sd) + params.rr * i_sd
}

/// `omega' = p * (p * phi_r * i_sq - T_m) / J`.
pub fn speed_derivative(params: &MotorParams, phi_r: f64, i_sq: f64, t_m: f64) -> f64 {
    assert!(
        phi_r.is_finite() && i_sq.is_finite() && t_m.is_finite(),
        "non-finite input to speed_derivative"
    );
    let p = params.p as f64;
    p * (p * phi_r * i_sq - t_m) / params.j_inertia
}

/// Electromagnetic torque `T_e = p * phi_r * i_sq`.
pub fn electromagnetic_torque(params: &MotorParams, phi_r: f64, i_sq: f64) -> f64 {
    params.p as f64 * phi_r * i_sq
}

/// Copper-loss decomposition at one instant. The inductance inside `delta_p`
/// is the saturated value at `i_sd`.
pub fn loss_sample(
    params: &MotorParams,
    sat: &SaturationCurve,
    currents: CurrentsDQ,
    phi_r: f64,
) -> LossSample {
    assert!(
        currents.i_sd.is_finite() && currents.i_sq.is_finite() && phi_r.is_finite(),
        "non-finite input to loss_sample"
    );
    let p_loss =
        currents.i_sq * currents.i_sq * (params.rs + params.rr) + currents.i_sd * currents.i_sd * params.rs;
    let mismatch = currents.i_sd - phi_r / sat.value(currents.i_sd);
    let delta_p = params.rr * mismatch * mismatch;
    LossSample { p_loss, delta_p, p_dyn: p_loss + delta_p }
}
