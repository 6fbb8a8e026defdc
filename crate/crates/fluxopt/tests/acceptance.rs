//! Acceptance gate: one test per shipping criterion. Each test measures its
//! quantities first, then prints a single pass/fail line (visible under
//! `--nocapture` or on failure) and asserts. Tolerances and runtime budgets
//! are pinned next to each check.

use std::time::Instant;

use fluxopt::motor::{CurrentsDQ, MotorParams};
use fluxopt::numerics::{integrate, trapezoid, Grid};
use fluxopt::saturation::SaturationCurve;
use fluxopt::scenario::{run_scenario, run_suite, MotorSpec, SaturationSpec, ScenarioSpec, StepSpec, TableRow, TableSuite};
use fluxopt::simulate::{default_dt, run_strategy, solve_bvp_loss_ideal, ControlStrategy};
use fluxopt::speedloop::{SpeedLoopConfig, StepResponse};
use fluxopt::transient::{
    bvp_dyn_current, bvp_dyn_rates, bvp_loss_current, bvp_loss_rates, bvp_sat_current,
    bvp_sat_rates, costate_rate_ideal, hamiltonian_dyn, hamiltonian_ideal, peak_ratio_decrease,
    peak_ratio_increase, CostateState, LoadStep,
};
use fluxopt::{motor, presets, scenario::HorizonSpec, steady};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!("acceptance {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance {criterion} failed: {detail}");
}

fn all_presets() -> Vec<MotorParams> {
    presets::names().map(|n| presets::builtin(n).unwrap()).collect()
}

fn rise_10_to_100(params: &MotorParams) -> LoadStep {
    LoadStep::from_fractions(params.t_rated, 0.10, 1.0).unwrap()
}

/// Feedback trajectory plus the costate reconstructed from its currents
/// through `lambda = -(2 Rs / RR) i_sd`, on a fixed `4 tau_R` horizon.
fn feedback_with_costate(params: &MotorParams) -> (Grid, fluxopt::simulate::Trajectory, Vec<f64>) {
    let sat = SaturationCurve::constant(params.lm);
    let step = rise_10_to_100(params);
    let grid = Grid::from_step(0.0, 4.0 * params.tau_r(), default_dt(params));
    let traj = run_strategy(
        params,
        &sat,
        &step,
        ControlStrategy::Feedback,
        &SpeedLoopConfig::Ideal,
        60.0,
        &grid,
    )
    .unwrap();
    let lam: Vec<f64> =
        traj.samples.iter().map(|s| -(2.0 * params.rs / params.rr) * s.i_sd).collect();
    (grid, traj, lam)
}

#[test]
fn criterion_1_feedback_law_carries_an_optimality_certificate() {
    let start = Instant::now();
    let mut worst_spread = 0.0f64;
    let mut worst_gap = 0.0f64;
    for params in all_presets() {
        let step = rise_10_to_100(&params);
        let (grid, traj, lam) = feedback_with_costate(&params);

        // Constancy of the Hamiltonian along the trajectory, with the costate
        // read off the current law.
        let h: Vec<f64> = traj
            .samples
            .iter()
            .zip(&lam)
            .map(|(s, &l)| {
                hamiltonian_ideal(
                    &params,
                    step.total(),
                    &CostateState { phi_r: s.phi_r, lambda: l },
                    s.i_sd,
                )
            })
            .collect();
        let h_max = h.iter().cloned().fold(f64::MIN, f64::max);
        let h_min = h.iter().cloned().fold(f64::MAX, f64::min);
        let h_mid = 0.5 * (h_max + h_min);
        worst_spread = worst_spread.max((h_max - h_min) / h_mid.abs());

        // The costate propagated by the adjoint system from lambda(0) must
        // keep matching the law along the independently simulated run.
        let path = integrate(
            |_t, y: &[f64; 2]| {
                bvp_loss_rates(&params, step.total(), &CostateState { phi_r: y[0], lambda: y[1] })
            },
            [traj.samples[0].phi_r, lam[0]],
            &grid,
        )
        .unwrap();
        let lam_scale = lam.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        for (y, &l) in path.iter().zip(&lam) {
            worst_gap = worst_gap.max((y[1] - l).abs() / lam_scale);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_spread <= 1e-6 && worst_gap <= 1e-6 && elapsed < 1.0;
    verdict(
        "1 optimality certificate",
        pass,
        &format!("H spread {worst_spread:.2e} <= 1e-6, costate gap {worst_gap:.2e} <= 1e-6, {elapsed:.2} s < 1 s"),
    );
}

#[test]
fn criterion_2_shooting_reproduces_the_feedback_oracle() {
    let start = Instant::now();
    let mut worst_isd = 0.0f64;
    let mut worst_energy = 0.0f64;
    for params in all_presets() {
        let sat = SaturationCurve::constant(params.lm);
        let step = rise_10_to_100(&params);
        let (grid, traj, _) = feedback_with_costate(&params);
        let bvp = solve_bvp_loss_ideal(
            &params,
            step.total(),
            &grid,
            traj.samples[0].phi_r,
            traj.samples.last().unwrap().phi_r,
        )
        .unwrap();
        let mut loss = Vec::with_capacity(bvp.phi.len());
        for (k, s) in traj.samples.iter().enumerate() {
            worst_isd = worst_isd.max((bvp.i_sd[k] - s.i_sd).abs() / s.i_sd);
            let i_sq = step.total() / (params.p as f64 * bvp.phi[k]);
            loss.push(
                motor::loss_sample(&params, &sat, CurrentsDQ { i_sd: bvp.i_sd[k], i_sq }, bvp.phi[k])
                    .p_loss,
            );
        }
        let j_bvp = trapezoid(&loss, grid.dt());
        let j_fb = traj.energy_loss();
        worst_energy = worst_energy.max((j_bvp - j_fb).abs() / j_fb);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_isd <= 1e-3 && worst_energy <= 1e-3 && elapsed < 5.0;
    verdict(
        "2 oracle equivalence",
        pass,
        &format!("max i_sd dev {worst_isd:.2e} <= 1e-3, energy gap {worst_energy:.2e} <= 1e-3, {elapsed:.2} s < 5 s"),
    );
}

fn unwrap_rows(outcomes: Vec<fluxopt::scenario::RowOutcome>) -> Vec<TableRow> {
    outcomes
        .into_iter()
        .map(|o| match o.row {
            Ok(row) => row,
            Err(e) => panic!("row {} failed: {e}", o.label),
        })
        .collect()
}

#[test]
fn criterion_3_exact_solution_beats_feedback_by_under_five_percent() {
    let start = Instant::now();
    let fall = unwrap_rows(run_suite(TableSuite::Table1).unwrap());
    let rise = unwrap_rows(run_suite(TableSuite::Table2).unwrap());
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for row in fall.iter().chain(&rise) {
        lo = lo.min(row.rel_err_pct);
        hi = hi.max(row.rel_err_pct);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = lo > 0.0 && hi < 5.0 && elapsed < 30.0;
    verdict(
        "3 approximation quality",
        pass,
        &format!("rel_err over rise+fall in [{lo:.3}%, {hi:.3}%], bounds (0, 5)%, {elapsed:.1} s < 30 s"),
    );
}

/// Instant-of-step loss ratio measured from a short feedback run, mirroring
/// the closed forms: against the pre-step loss for a drop, against the total
/// instantaneous loss for a rise.
fn simulated_peak_ratio(params: &MotorParams, k: f64) -> f64 {
    let sat = SaturationCurve::constant(params.lm);
    let t_m = 0.5 * params.t_rated;
    let step = LoadStep::new(t_m, (k - 1.0) * t_m).unwrap();
    let dt = default_dt(params);
    let grid = Grid::from_step(0.0, 10.0 * dt, dt);
    let traj = run_strategy(
        params,
        &sat,
        &step,
        ControlStrategy::Feedback,
        &SpeedLoopConfig::Ideal,
        60.0,
        &grid,
    )
    .unwrap();
    let first = traj.samples[0];
    if k <= 1.0 {
        first.delta_p / steady::optimal_point(params, &sat, t_m).unwrap().p_loss
    } else {
        first.delta_p / first.p_dyn
    }
}

#[test]
fn criterion_4_step_loss_ratios_match_their_closed_forms() {
    let mut worst = 0.0f64;
    let mut limits_ok = true;
    for params in all_presets() {
        for k in [0.0, 0.25, 0.5, 2.0, 5.0, 10.0] {
            let analytic = if k <= 1.0 {
                peak_ratio_decrease(&params, k)
            } else {
                peak_ratio_increase(&params, k)
            };
            worst = worst.max((simulated_peak_ratio(&params, k) - analytic).abs());
        }
        limits_ok &= peak_ratio_decrease(&params, 1.0) == 0.0;
        limits_ok &= peak_ratio_increase(&params, f64::INFINITY)
            == params.rr / (params.rr + 2.0 * params.rs);
    }
    let pass = worst <= 1e-6 && limits_ok;
    verdict(
        "4 step-loss analytics",
        pass,
        &format!("max |simulated - analytic| {worst:.2e} <= 1e-6, limits at k=1 and k=inf exact: {limits_ok}"),
    );
}

#[test]
fn criterion_5_faster_speed_loops_shrink_the_gap() {
    let start = Instant::now();
    let rows = unwrap_rows(run_suite(TableSuite::Table3).unwrap());
    let trend = rows[0].rel_err_pct > rows[1].rel_err_pct
        && rows[1].rel_err_pct > rows[2].rel_err_pct
        && rows.iter().all(|r| r.rel_err_pct > 0.0);
    let slowest_ok = rows[0].rel_err_pct < 3.0;

    // Closed-form loop response against the integrated PI/speed system.
    let params = presets::builtin("DRS71S4").unwrap();
    let step = LoadStep::from_fractions(params.t_rated, 0.25, 1.0).unwrap();
    let omega_ref = 60.0;
    let mut worst_resp = 0.0f64;
    for w0 in [20.0, 60.0] {
        let cfg = SpeedLoopConfig::Analytic { w0, z: 10.0 };
        let resp = StepResponse::from_config(&cfg, step.delta_t_m, params.j_inertia)
            .unwrap()
            .unwrap();
        let (kp, ki) = cfg.gains(params.j_inertia).unwrap();
        let grid = Grid::from_step(0.0, 8.0 * params.tau_r(), default_dt(&params));
        let path = integrate(
            |_t, y: &[f64; 2]| {
                let e = omega_ref - y[0];
                [(kp * e + y[1] - step.total()) / params.j_inertia, ki * e]
            },
            [omega_ref, step.t_m],
            &grid,
        )
        .unwrap();
        let delta_scale = step.delta_t_m.abs();
        let speed_scale = path.iter().fold(0.0f64, |m, y| m.max((y[0] - omega_ref).abs()));
        for (k, y) in path.iter().enumerate() {
            let t = grid.time(k);
            let delta_ode = kp * (omega_ref - y[0]) + y[1] - step.total();
            let speed_ode = y[0] - omega_ref;
            worst_resp = worst_resp
                .max((resp.torque_deviation(t) - delta_ode).abs() / delta_scale)
                .max((resp.speed_deviation(t) - speed_ode).abs() / speed_scale);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = trend && slowest_ok && worst_resp <= 1e-4 && elapsed < 20.0;
    verdict(
        "5 speed-loop trend",
        pass,
        &format!(
            "rel_err {:.3}% > {:.3}% > {:.3}% (all > 0), slowest < 3%: {slowest_ok}, closed form vs ODE {worst_resp:.2e} <= 1e-4, {elapsed:.1} s < 20 s",
            rows[0].rel_err_pct, rows[1].rel_err_pct, rows[2].rel_err_pct
        ),
    );
}

#[test]
fn criterion_6_saturation_rule_is_stationary_and_near_exact() {
    let start = Instant::now();

    // The zeta rule zeroes the loss derivative and sits at a minimum.
    let mut worst_residual = 0.0f64;
    let mut minimality = true;
    for params in all_presets() {
        let sat = SaturationCurve::affine_default(&params);
        let scale = 2.0 * params.rs * params.i_sd_nom;
        for k in 1..=41 {
            let i_sq = 2.0 * params.i_sd_nom * k as f64 / 41.0;
            let i = steady::zeta(&params, &sat, i_sq).unwrap();
            let r = steady::stationarity_residual(&params, &sat, i, i_sq);
            worst_residual = worst_residual.max(r.abs() / scale);
            minimality &= steady::stationarity_residual(&params, &sat, i * 0.999, i_sq) < 0.0
                && steady::stationarity_residual(&params, &sat, i * 1.001, i_sq) > 0.0;
        }
    }

    let rise = unwrap_rows(run_suite(TableSuite::Table4).unwrap());
    let fall = unwrap_rows(run_suite(TableSuite::Table5).unwrap());
    // Presets come ordered by rotor time constant; a slower rotor leaves the
    // rule less room to deviate from the exact transient.
    let rise_ok = rise.iter().all(|r| r.rel_err_pct > 0.0 && r.rel_err_pct < 2.0)
        && rise[0].rel_err_pct > rise[1].rel_err_pct
        && rise[1].rel_err_pct > rise[2].rel_err_pct;
    let fall_ok = fall.iter().all(|r| r.rel_err_pct > 0.0 && r.rel_err_pct < 0.5);
    let fall_below_rise = fall.iter().zip(&rise).all(|(f, r)| f.rel_err_pct < r.rel_err_pct);

    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        worst_residual <= 1e-9 && minimality && rise_ok && fall_ok && fall_below_rise && elapsed < 60.0;
    verdict(
        "6 saturation suite",
        pass,
        &format!(
            "zeta residual {worst_residual:.2e} <= 1e-9, minimality {minimality}, rise {:.3}% > {:.3}% > {:.3}% all < 2%, fall < 0.5%: {fall_ok}, fall < rise: {fall_below_rise}, {elapsed:.1} s < 60 s",
            rise[0].rel_err_pct, rise[1].rel_err_pct, rise[2].rel_err_pct
        ),
    );
}

#[test]
fn criterion_7_optimized_magnetization_beats_nominal_flux() {
    let mut ordered = true;
    let mut detail = String::new();
    for name in presets::names() {
        let spec = ScenarioSpec {
            motor: MotorSpec::Preset(name.into()),
            saturation: SaturationSpec::Named("affine_default".into()),
            step: StepSpec::Percent { from_pct: 14.0, to_pct: 55.0 },
            strategies: vec![ControlStrategy::Zeta, ControlStrategy::Nominal],
            controller: SpeedLoopConfig::Ideal,
            horizon: HorizonSpec::Auto { epsilon: 1e-3 },
            dt: None,
            omega_ref: 60.0,
            output_dir: None,
        };
        let outcome = run_scenario(&spec).unwrap();
        let j_zeta = outcome.objective_of(&outcome.runs[0]);
        let j_nominal = outcome.objective_of(&outcome.runs[1]);
        ordered &= j_zeta < j_nominal;
        detail.push_str(&format!("{name}: {j_zeta:.2} < {j_nominal:.2} J; "));
    }
    verdict("7 strategy ordering", ordered, detail.trim_end_matches("; "));
}

#[test]
fn criterion_8_integrator_order_and_adjoint_consistency() {
    // Observed RK4 order on the flux relaxation toward a constant drive,
    // which has the exact exponential solution.
    let params = presets::builtin("DRS71S4").unwrap();
    let tau = params.tau_r();
    let i_sd = 0.3 * params.i_sd_nom;
    let phi0 = params.lm * params.i_sd_nom;
    let exact = |t: f64| {
        params.lm * i_sd + (phi0 - params.lm * i_sd) * (-t / tau).exp()
    };
    let err_at = |n: usize| {
        let grid = Grid::from_step(0.0, tau, tau / n as f64);
        let path = integrate(
            |_t, y: &[f64; 1]| [motor::flux_derivative(&params, y[0], i_sd)],
            [phi0],
            &grid,
        )
        .unwrap();
        (path.last().unwrap()[0] - exact(tau)).abs()
    };
    let order = (err_at(8) / err_at(16)).log2();

    // Central differences of the Hamiltonians against the coded adjoint
    // rates and current laws, at off-equilibrium states on every preset.
    let mut worst_rate = 0.0f64;
    let mut worst_stat = 0.0f64;
    let mut convex = true;
    for params in all_presets() {
        let sat = SaturationCurve::affine_default(&params);
        let t_total = params.t_rated;
        for phi_frac in [0.5, 0.8, 1.1] {
            for lam_frac in [0.3, 1.0] {
                let phi = phi_frac * params.lm * params.i_sd_nom;
                let lam = -(2.0 * params.rs / params.rr) * lam_frac * params.i_sd_nom;
                let state = CostateState { phi_r: phi, lambda: lam };
                let h_phi = 1e-5 * phi;
                let h_i = 1e-5 * params.i_sd_nom;
                let i_scale = 2.0 * params.rs * params.i_sd_nom;

                let at = |phi_r: f64| CostateState { phi_r, lambda: lam };

                // p_loss adjoint: rate vs -dH/dphi at the law's current.
                let i_loss = bvp_loss_current(&params, lam);
                let fd = -(hamiltonian_ideal(&params, t_total, &at(phi + h_phi), i_loss)
                    - hamiltonian_ideal(&params, t_total, &at(phi - h_phi), i_loss))
                    / (2.0 * h_phi);
                let coded = costate_rate_ideal(&params, t_total, &state);
                worst_rate = worst_rate.max((fd - coded).abs() / coded.abs());

                // p_dyn adjoint.
                let i_dyn = bvp_dyn_current(&params, &state);
                let fd = -(hamiltonian_dyn(&params, t_total, &at(phi + h_phi), i_dyn)
                    - hamiltonian_dyn(&params, t_total, &at(phi - h_phi), i_dyn))
                    / (2.0 * h_phi);
                let coded = bvp_dyn_rates(&params, t_total, &state)[1];
                worst_rate = worst_rate.max((fd - coded).abs() / coded.abs());

                // Saturated p_loss adjoint, Hamiltonian built from parts.
                let i_sat = bvp_sat_current(&params, &sat, &state);
                let h_sat = |phi_r: f64| {
                    let i_sq = t_total / (params.p as f64 * phi_r);
                    i_sq * i_sq * (params.rs + params.rr)
                        + i_sat * i_sat * params.rs
                        + lam * motor::flux_derivative_sat(&params, &sat, phi_r, i_sat)
                };
                let fd = -(h_sat(phi + h_phi) - h_sat(phi - h_phi)) / (2.0 * h_phi);
                let coded = bvp_sat_rates(&params, &sat, t_total, &state)[1];
                worst_rate = worst_rate.max((fd - coded).abs() / coded.abs());

                // Each current law zeroes its Hamiltonian's i_sd derivative
                // and sits at a minimum.
                let pairs: [(&dyn Fn(f64) -> f64, f64); 2] = [
                    (&|i| hamiltonian_ideal(&params, t_total, &state, i), i_loss),
                    (&|i| hamiltonian_dyn(&params, t_total, &state, i), i_dyn),
                ];
                for (h, i_star) in pairs {
                    let fd_i = (h(i_star + h_i) - h(i_star - h_i)) / (2.0 * h_i);
                    worst_stat = worst_stat.max(fd_i.abs() / i_scale);
                    convex &= h(i_star + h_i) + h(i_star - h_i) - 2.0 * h(i_star) > 0.0;
                }
            }
        }
    }
    let pass = order >= 3.8 && worst_rate <= 1e-6 && worst_stat <= 1e-6 && convex;
    verdict(
        "8 numerics",
        pass,
        &format!("RK4 order {order:.2} >= 3.8, adjoint FD gap {worst_rate:.2e} <= 1e-6, law stationarity {worst_stat:.2e} <= 1e-6, convex minima: {convex}"),
    );
}
