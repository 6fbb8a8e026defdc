//! Load-step trajectory simulation for every magnetizing-current strategy,
//! the shooting drivers for the exact minimum-loss solutions, CSV export,
//! and the automatic horizon rule.
//!
//! A run covers `[0, T]` with the torque step at `t = 0`. The flux starts at
//! the pre-step steady optimum (the nominal strategy instead holds nominal
//! flux), the torque current tracks the load through the configured speed
//! loop, and the chosen strategy supplies `i_sd`. Losses are sampled at every
//! grid node so energies integrate by the trapezoid rule on the same grid.
//!
//! Exact solutions come from single shooting on the initial costate. Which
//! boundary value problem applies depends on the setting:
//!
//! - constant inductance, ideal loop: the full `p_dyn` objective
//!   ([`solve_bvp_dyn`], compared on `energy_dyn`);
//! - constant inductance, modelled speed loop: the `p_loss` objective with
//!   the analytic torque deviation injected into `i_sq`
//!   ([`solve_bvp_loss_analytic`], compared on `energy_loss`);
//! - saturated inductance, ideal loop: the `p_loss` objective with the
//!   implicit current law ([`solve_bvp_sat`], compared on `energy_loss`).

use std::cell::Cell;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motor::{self, CurrentsDQ, MotorParams, PHI_FLOOR};
use crate::numerics::{integrate, trapezoid, Grid, NumericsError, ShootingProblem};
use crate::saturation::{CurveError, SaturationCurve};
use crate::speedloop::{SpeedLoopConfig, SpeedLoopError, StepResponse};
use crate::steady::{self, SteadyError};
use crate::transient::{self, CostateState, LoadStep, TransientError};

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("steady-state solve failed: {0}")]
    Steady(#[from] SteadyError),
    #[error("integration failed: {0}")]
    Numerics(#[from] NumericsError),
    #[error("speed loop rejected: {0}")]
    SpeedLoop(#[from] SpeedLoopError),
    #[error("saturation curve rejected: {0}")]
    Curve(#[from] CurveError),
    #[error("transient analysis failed: {0}")]
    Transient(#[from] TransientError),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

/// Magnetizing-current policy applied during the load step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStrategy {
    /// Hold the nominal magnetizing current (and so nominal flux).
    Nominal,
    /// Static law `i_sd = i_sq / gamma`.
    Feedback,
    /// Jump to the post-step optimal steady value at `t = 0` and hold.
    Step,
    /// Saturation-aware static law `i_sd = zeta(i_sq)`.
    Zeta,
    /// Single-shooting solution of the matching boundary value problem.
    BvpExact,
}

impl ControlStrategy {
    pub const ALL: [ControlStrategy; 5] = [
        ControlStrategy::Nominal,
        ControlStrategy::Feedback,
        ControlStrategy::Step,
        ControlStrategy::Zeta,
        ControlStrategy::BvpExact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ControlStrategy::Nominal => "nominal",
            ControlStrategy::Feedback => "feedback",
            ControlStrategy::Step => "step",
            ControlStrategy::Zeta => "zeta",
            ControlStrategy::BvpExact => "bvp_exact",
        }
    }
}

impl fmt::Display for ControlStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControlStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControlStrategy::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown strategy '{s}' (expected one of: nominal, feedback, step, zeta, bvp_exact)"))
    }
}

/// One grid node of a simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub phi_r: f64,
    pub i_sd: f64,
    pub i_sq: f64,
    pub p_loss: f64,
    pub delta_p: f64,
    pub p_dyn: f64,
    /// Speed error `omega_r - omega_ref` (mechanical rad/s); 0 for the ideal loop.
    pub omega_err: f64,
}

/// Time-sampled record of one run on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub dt: f64,
    /// True when the flux floor clamp was active at any integration stage.
    pub flux_clamped: bool,
}

impl Trajectory {
    /// `integral of p_loss dt` over the horizon (J).
    pub fn energy_loss(&self) -> f64 {
        let series: Vec<f64> = self.samples.iter().map(|s| s.p_loss).collect();
        trapezoid(&series, self.dt)
    }

    /// `integral of p_dyn dt` over the horizon (J).
    pub fn energy_dyn(&self) -> f64 {
        let series: Vec<f64> = self.samples.iter().map(|s| s.p_dyn).collect();
        trapezoid(&series, self.dt)
    }

    /// Settle time of `p_dyn` on this trajectory; see
    /// [`transient::transient_duration`].
    pub fn transient_duration(&self, epsilon: f64) -> Result<f64, TransientError> {
        assert!(self.samples.len() >= 3, "need >= 3 samples");
        let series: Vec<f64> = self.samples.iter().map(|s| s.p_dyn).collect();
        transient::transient_duration(&series, self.dt, self.samples[0].t, epsilon)
    }

    /// Writes the run as CSV: header plus one row per node, 12 significant
    /// digits, '.' decimal separator, LF line endings.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,phi_r,i_sd,i_sq,p_loss,delta_p,p_dyn,omega_err")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                s.t, s.phi_r, s.i_sd, s.i_sq, s.p_loss, s.delta_p, s.p_dyn, s.omega_err
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Energy measure matching the objective the exact solver optimizes in this
/// setting: `p_dyn` for constant inductance under the ideal loop, `p_loss`
/// otherwise.
pub fn objective_energy(
    sat: &SaturationCurve,
    controller: &SpeedLoopConfig,
    traj: &Trajectory,
) -> f64 {
    if sat.is_constant() && controller.is_ideal() {
        traj.energy_dyn()
    } else {
        traj.energy_loss()
    }
}

/// Default integration step `tau_R / 2000`.
pub fn default_dt(params: &MotorParams) -> f64 {
    params.tau_r() / 2000.0
}

/// Shooting solution of one boundary value problem, sampled on the grid.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    /// Initial costate found by the solver.
    pub lambda0: f64,
    /// Terminal flux mismatch of the accepted solution.
    pub residual: f64,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub i_sd: Vec<f64>,
}

/// Drives `solve_shooting` over `[lo, hi]`, doubling the bracket away from
/// `hi` up to four times when no sign change is found.
fn shoot_widening<F>(
    dynamics: F,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
    mut lo: f64,
    hi: f64,
) -> Result<crate::numerics::ShootingSolution, SimulateError>
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    // Loose enough that the residual floor left by the costate instability
    // over the longest supported horizons (about 1e-8 of the flux scale at
    // 8 tau_R) stays reachable.
    let tol = 1e-7 * phi_target.abs().max(phi0.abs());
    let mut attempt = 0;
    loop {
        let problem =
            ShootingProblem { dynamics: &dynamics, initial_state: phi0, terminal_target: phi_target };
        match crate::numerics::solve_shooting(&problem, grid, (lo, hi), tol) {
            Ok(sol) => return Ok(sol),
            Err(NumericsError::NoSignChange { .. }) if attempt < 4 => {
                attempt += 1;
                lo = hi - (hi - lo) * 2.0;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn collect_solution(
    sol: crate::numerics::ShootingSolution,
    mut current: impl FnMut(&[f64; 2]) -> f64,
) -> BvpSolution {
    let mut phi = Vec::with_capacity(sol.path.len());
    let mut lambda = Vec::with_capacity(sol.path.len());
    let mut i_sd = Vec::with_capacity(sol.path.len());
    for y in &sol.path {
        phi.push(y[0]);
        lambda.push(y[1]);
        i_sd.push(current(y));
    }
    BvpSolution { lambda0: sol.lambda0, residual: sol.residual, phi, lambda, i_sd }
}

/// Exact minimizer of the plain `p_loss` objective under the ideal loop and
/// constant inductance, between fixed boundary fluxes. The feedback law
/// solves this problem in closed form, so this solver exists as an oracle.
///
/// The costate bracket spans `i_sd(0)` from 0 to 50 times nominal through
/// `lambda = -(2 Rs / RR) i_sd`.
pub fn solve_bvp_loss_ideal(
    params: &MotorParams,
    t_total: f64,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
) -> Result<BvpSolution, SimulateError> {
    // A shot whose flux crashes to the floor freezes there: its residual
    // then reads as a clean undershoot, keeping a usable sign for the
    // costate bisection.
    let dynamics = |_t: f64, y: &[f64; 2]| {
        if y[0] <= PHI_FLOOR || !y[0].is_finite() || !y[1].is_finite() {
            return [0.0; 2];
        }
        transient::bvp_loss_rates(params, t_total, &CostateState { phi_r: y[0], lambda: y[1] })
    };
    let lo = -(2.0 * params.rs / params.rr) * 50.0 * params.i_sd_nom;
    let sol = shoot_widening(dynamics, grid, phi0, phi_target, lo, 0.0)?;
    Ok(collect_solution(sol, |y| transient::bvp_loss_current(params, y[1])))
}

/// Same `p_loss` objective with the modelled speed loop: the torque carried
/// by `i_sq` is `T_total + delta(t)` from the loop's closed-form step
/// response. Time dependence enters only through that deviation.
pub fn solve_bvp_loss_analytic(
    params: &MotorParams,
    t_total: f64,
    response: &StepResponse,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
) -> Result<BvpSolution, SimulateError> {
    let dynamics = |t: f64, y: &[f64; 2]| {
        if y[0] <= PHI_FLOOR || !y[0].is_finite() || !y[1].is_finite() {
            return [0.0; 2];
        }
        let state = CostateState { phi_r: y[0], lambda: y[1] };
        let t_eff = t_total + response.torque_deviation(t);
        [
            motor::flux_derivative(params, y[0], transient::bvp_loss_current(params, y[1])),
            transient::costate_rate_ideal(params, t_eff, &state),
        ]
    };
    let lo = -(2.0 * params.rs / params.rr) * 50.0 * params.i_sd_nom;
    let sol = shoot_widening(dynamics, grid, phi0, phi_target, lo, 0.0)?;
    Ok(collect_solution(sol, |y| transient::bvp_loss_current(params, y[1])))
}

/// Exact minimizer of the full `p_dyn` objective (constant inductance, ideal
/// loop). The costate bracket spans `i_sd(0)` from 0 to 50 times nominal
/// through this problem's current law, which puts its upper end at
/// `2 phi0 / L_M` rather than 0.
pub fn solve_bvp_dyn(
    params: &MotorParams,
    t_total: f64,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
) -> Result<BvpSolution, SimulateError> {
    let dynamics = |_t: f64, y: &[f64; 2]| {
        if y[0] <= PHI_FLOOR || !y[0].is_finite() || !y[1].is_finite() {
            return [0.0; 2];
        }
        transient::bvp_dyn_rates(params, t_total, &CostateState { phi_r: y[0], lambda: y[1] })
    };
    let hi = 2.0 * phi0 / params.lm;
    let lo = hi - 2.0 * (params.rr + params.rs) / params.rr * 50.0 * params.i_sd_nom;
    let sol = shoot_widening(dynamics, grid, phi0, phi_target, lo, hi)?;
    Ok(collect_solution(sol, |y| {
        transient::bvp_dyn_current(params, &CostateState { phi_r: y[0], lambda: y[1] })
    }))
}

/// Exact minimizer of the `p_loss` objective under a saturated inductance
/// and the ideal loop; the current law is implicit, so every stage solves it
/// by root finding.
pub fn solve_bvp_sat(
    params: &MotorParams,
    sat: &SaturationCurve,
    t_total: f64,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
) -> Result<BvpSolution, SimulateError> {
    let dynamics = |_t: f64, y: &[f64; 2]| {
        if y[0] <= PHI_FLOOR || !y[0].is_finite() || !y[1].is_finite() {
            return [0.0; 2];
        }
        transient::bvp_sat_rates(params, sat, t_total, &CostateState { phi_r: y[0], lambda: y[1] })
    };
    let lo = -(2.0 * params.rs / params.rr) * 5.0 * params.i_sd_nom;
    let sol = shoot_widening(dynamics, grid, phi0, phi_target, lo, 0.0)?;
    Ok(collect_solution(sol, |y| {
        transient::bvp_sat_current(params, sat, &CostateState { phi_r: y[0], lambda: y[1] })
    }))
}

/// Picks the boundary value problem matching the scenario (see the module
/// doc) and solves it. A saturated curve combined with a modelled speed loop
/// is not supported.
pub fn solve_matching_bvp(
    params: &MotorParams,
    sat: &SaturationCurve,
    step: &LoadStep,
    controller: &SpeedLoopConfig,
    grid: &Grid,
    phi0: f64,
    phi_target: f64,
) -> Result<BvpSolution, SimulateError> {
    if step.total() <= 0.0 {
        return Err(SimulateError::Unsupported(
            "the exact solve needs a positive post-step torque".into(),
        ));
    }
    if sat.is_constant() {
        if controller.is_ideal() {
            solve_bvp_dyn(params, step.total(), grid, phi0, phi_target)
        } else {
            let response = StepResponse::from_config(controller, step.delta_t_m, params.j_inertia)?
                .expect("non-ideal controller has a step response");
            solve_bvp_loss_analytic(params, step.total(), &response, grid, phi0, phi_target)
        }
    } else if controller.is_ideal() {
        solve_bvp_sat(params, sat, step.total(), grid, phi0, phi_target)
    } else {
        Err(SimulateError::Unsupported(
            "the exact saturated solve supports only the ideal speed loop".into(),
        ))
    }
}

/// Simulates one load step under the given strategy and speed loop.
///
/// The grid must start at `t = 0` (the step instant). Strategies other than
/// `nominal` start from the pre-step optimal flux and need `T_m > 0`. The
/// strategy laws read the torque current clamped at zero, so a brief
/// regenerative dip of the modelled loop commands the zero-torque
/// magnetizing level rather than a negative current.
pub fn run_strategy(
    params: &MotorParams,
    sat: &SaturationCurve,
    step: &LoadStep,
    strategy: ControlStrategy,
    controller: &SpeedLoopConfig,
    omega_ref: f64,
    grid: &Grid,
) -> Result<Trajectory, SimulateError> {
    assert!(grid.t0() == 0.0, "load-step grids start at t = 0");
    sat.validate()?;
    controller.validate()?;
    let pre = steady::optimal_point(params, sat, step.t_m)?;
    let post = steady::optimal_point(params, sat, step.total())?;
    let t_total = step.total();
    let p = params.p as f64;
    let phi0 = if strategy == ControlStrategy::Nominal {
        sat.value(params.i_sd_nom) * params.i_sd_nom
    } else {
        pre.phi_r
    };
    if phi0 <= PHI_FLOOR {
        return Err(SimulateError::Unsupported(
            "starting flux is zero; strategies other than nominal need T_m > 0".into(),
        ));
    }
    let response = StepResponse::from_config(controller, step.delta_t_m, params.j_inertia)?;
    let closed = matches!(controller, SpeedLoopConfig::ClosedLoop { .. });
    let (kp, ki) = controller.gains(params.j_inertia).unwrap_or((0.0, 0.0));

    if strategy == ControlStrategy::BvpExact {
        let bvp = solve_matching_bvp(params, sat, step, controller, grid, phi0, post.phi_r)?;
        // The speed states never read the flux, so in closed-loop mode they
        // integrate separately on the same grid.
        let speed_path = if closed {
            Some(integrate(
                |_t, y: &[f64; 2]| {
                    let e = omega_ref - y[0];
                    [(kp * e + y[1] - t_total) / params.j_inertia, ki * e]
                },
                [omega_ref, step.t_m],
                grid,
            )?)
        } else {
            None
        };
        let mut samples = Vec::with_capacity(grid.n_nodes());
        for k in 0..grid.n_nodes() {
            let t = grid.time(k);
            let phi_r = bvp.phi[k];
            let (te, omega_err) = match (&speed_path, &response) {
                (Some(path), _) => {
                    (kp * (omega_ref - path[k][0]) + path[k][1], path[k][0] - omega_ref)
                }
                (None, Some(r)) => (t_total + r.torque_deviation(t), r.speed_deviation(t)),
                (None, None) => (t_total, 0.0),
            };
            let i_sq = te / (p * phi_r);
            let i_sd = bvp.i_sd[k];
            let loss = motor::loss_sample(params, sat, CurrentsDQ { i_sd, i_sq }, phi_r);
            samples.push(Sample {
                t,
                phi_r,
                i_sd,
                i_sq,
                p_loss: loss.p_loss,
                delta_p: loss.delta_p,
                p_dyn: loss.p_dyn,
                omega_err,
            });
        }
        return Ok(Trajectory { samples, dt: grid.dt(), flux_clamped: false });
    }

    let policy = |i_sq_cmd: f64| -> Result<f64, SteadyError> {
        match strategy {
            ControlStrategy::Nominal => Ok(params.i_sd_nom),
            ControlStrategy::Feedback => Ok(transient::feedback_law(params, i_sq_cmd)),
            ControlStrategy::Step => Ok(post.i_sd),
            ControlStrategy::Zeta => steady::zeta(params, sat, i_sq_cmd),
            ControlStrategy::BvpExact => unreachable!("handled above"),
        }
    };
    let clamped = Cell::new(false);
    let dynamics = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        if y.iter().any(|v| !v.is_finite()) {
            return [f64::NAN; 3];
        }
        let phi = if y[0] > PHI_FLOOR {
            y[0]
        } else {
            clamped.set(true);
            PHI_FLOOR
        };
        let te = if closed {
            kp * (omega_ref - y[1]) + y[2]
        } else if let Some(r) = &response {
            t_total + r.torque_deviation(t)
        } else {
            t_total
        };
        let i_sq_cmd = (te / (p * phi)).max(0.0);
        let i_sd = match policy(i_sq_cmd) {
            Ok(v) => v,
            Err(_) => return [f64::NAN; 3],
        };
        let dphi = motor::flux_derivative_sat(params, sat, phi, i_sd);
        if closed {
            [dphi, (te - t_total) / params.j_inertia, ki * (omega_ref - y[1])]
        } else {
            [dphi, 0.0, 0.0]
        }
    };
    let path = integrate(dynamics, [phi0, omega_ref, step.t_m], grid)?;

    let mut samples = Vec::with_capacity(path.len());
    for (k, y) in path.iter().enumerate() {
        let t = grid.time(k);
        let phi_r = y[0].max(PHI_FLOOR);
        let (te, omega_err) = if closed {
            (kp * (omega_ref - y[1]) + y[2], y[1] - omega_ref)
        } else if let Some(r) = &response {
            (t_total + r.torque_deviation(t), r.speed_deviation(t))
        } else {
            (t_total, 0.0)
        };
        let i_sq = te / (p * phi_r);
        let i_sd = policy(i_sq.max(0.0))?;
        let loss = motor::loss_sample(params, sat, CurrentsDQ { i_sd, i_sq }, phi_r);
        samples.push(Sample {
            t,
            phi_r,
            i_sd,
            i_sq,
            p_loss: loss.p_loss,
            delta_p: loss.delta_p,
            p_dyn: loss.p_dyn,
            omega_err,
        });
    }
    Ok(Trajectory { samples, dt: grid.dt(), flux_clamped: clamped.get() })
}

/// Horizon used when a scenario asks for `auto`: simulate the cheap
/// reference strategy (feedback for a constant curve, zeta otherwise) and
/// take its [`Trajectory::transient_duration`]. The probe window doubles up
/// to four times if the losses have not settled. The result is floored at
/// `3 tau_R` (the loss spike right after the step inflates the slope
/// normalizer, which can end the scan while the flux is still far from its
/// endpoint) and, for a modelled speed loop, at the point where the slow
/// closed-loop mode's share of the torque step has decayed under `epsilon`.
pub fn resolve_horizon(
    params: &MotorParams,
    sat: &SaturationCurve,
    step: &LoadStep,
    controller: &SpeedLoopConfig,
    omega_ref: f64,
    epsilon: f64,
    dt: f64,
) -> Result<f64, SimulateError> {
    controller.validate()?;
    let probe_strategy = if sat.is_constant() {
        ControlStrategy::Feedback
    } else {
        ControlStrategy::Zeta
    };
    // The slow mode enters the torque deviation with a (z - root)/(2 root)
    // share of the step. The floor is where that share decays under epsilon,
    // capped at 8 tau_R: past that the leftover tail moves the energies
    // negligibly while the costate instability puts the exact solve beyond
    // single-shooting reach.
    let slow_floor = match *controller {
        SpeedLoopConfig::Ideal => 0.0,
        SpeedLoopConfig::Analytic { w0, z } | SpeedLoopConfig::ClosedLoop { w0, z } => {
            let root = (z * z - 1.0).sqrt();
            let share = (z - root) / (2.0 * root);
            if share > epsilon {
                ((share / epsilon).ln() / ((z - root) * w0)).min(8.0 * params.tau_r())
            } else {
                0.0
            }
        }
    };
    let mut t_probe = (12.0 * params.tau_r()).max(1.2 * slow_floor);
    for _ in 0..4 {
        let grid = Grid::from_step(0.0, t_probe, dt);
        let traj = run_strategy(params, sat, step, probe_strategy, controller, omega_ref, &grid)?;
        match traj.transient_duration(epsilon) {
            Ok(d) => return Ok(d.max(3.0 * params.tau_r()).max(slow_floor)),
            Err(TransientError::NotSettled { .. }) => t_probe *= 2.0,
            Err(e) => return Err(e.into()),
        }
    }
    Err(TransientError::NotSettled { t_end: t_probe }.into())
}

/// Surrogate transient energy of an `i_sd` path: the path runs through a
/// unit-gain first-order filter with time constant `tau_R`, the flux is read
/// statically off the saturation curve at the filtered current, and the loss
/// charges the filtered current. Equals the true loss exactly in steady
/// state; the gap on a transient shrinks with `tau_R`.
pub fn wiener_energy(
    params: &MotorParams,
    sat: &SaturationCurve,
    t_total: f64,
    i_sd_path: &[f64],
    i_f0: f64,
    grid: &Grid,
) -> Result<f64, SimulateError> {
    assert_eq!(i_sd_path.len(), grid.n_nodes(), "path must be sampled on the grid");
    let tau = params.tau_r();
    let sample_path = |t: f64| -> f64 {
        let pos = (t - grid.t0()) / grid.dt();
        let k = (pos.max(0.0).floor() as usize).min(i_sd_path.len() - 1);
        if k + 1 >= i_sd_path.len() {
            return i_sd_path[i_sd_path.len() - 1];
        }
        let frac = (pos - k as f64).clamp(0.0, 1.0);
        i_sd_path[k] + (i_sd_path[k + 1] - i_sd_path[k]) * frac
    };
    let path = integrate(|t, y: &[f64; 1]| [(sample_path(t) - y[0]) / tau], [i_f0], grid)?;
    let p = params.p as f64;
    let series: Vec<f64> = path
        .iter()
        .map(|y| {
            let i_f = y[0];
            let phi = (sat.value(i_f) * i_f).max(PHI_FLOOR);
            let i_sq = t_total / (p * phi);
            i_sq * i_sq * (params.rs + params.rr) + i_f * i_f * params.rs
        })
        .collect();
    Ok(trapezoid(&series, grid.dt()))
}
