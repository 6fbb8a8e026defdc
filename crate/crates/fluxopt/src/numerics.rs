//! Fixed-step integration, quadrature, scalar root finding, and the
//! single-shooting solver for two-point boundary value problems.
//!
//! Everything here is deliberately plain: classical RK4 on a uniform grid,
//! trapezoid sums on the same grid, and a bracketing bisection/secant hybrid.
//! The shooting solver adjusts one unknown initial costate until one terminal
//! state condition is met, which is the only BVP shape the rest of the crate
//! needs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("no sign change over bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("shot with lambda0 = {lambda0} became non-finite at step {step}")]
    NonFiniteShot { lambda0: f64, step: usize },
    #[error("shooting stalled at lambda0 = {lambda0}, residual {residual}")]
    ShootingStalled { lambda0: f64, residual: f64 },
}

/// Uniform time grid `t_i = t0 + i*dt` for `i = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl Grid {
    /// Grid covering `[t0, t_end]`; `n_steps` is `(t_end - t0) / dt` rounded
    /// to the nearest whole step, never zero.
    pub fn from_step(t0: f64, t_end: f64, dt: f64) -> Self {
        assert!(t0.is_finite() && t_end.is_finite() && dt.is_finite());
        assert!(dt > 0.0, "dt = {dt} must be > 0");
        assert!(t_end > t0, "t_end = {t_end} must exceed t0 = {t0}");
        let n_steps = (((t_end - t0) / dt).round() as usize).max(1);
        Grid { t0, dt, n_steps }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|i| self.time(i))
    }
}

/// Classical fixed-step RK4 over the grid. Returns one state per node
/// (`n_steps + 1` entries, the first being `y0`).
pub fn integrate<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    grid: &Grid,
) -> Result<Vec<[f64; N]>, NumericsError> {
    let mut states = Vec::with_capacity(grid.n_nodes());
    states.push(y0);
    let mut y = y0;
    let h = grid.dt();
    for step in 0..grid.n_steps() {
        let t = grid.time(step);
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &add_scaled(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &add_scaled(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &add_scaled(&y, &k3, h));
        for j in 0..N {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { step });
        }
        states.push(y);
    }
    Ok(states)
}

fn add_scaled<const N: usize>(y: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *y;
    for j in 0..N {
        out[j] += h * k[j];
    }
    out
}

/// Trapezoid sum of uniformly spaced samples. Needs at least two samples.
pub fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    assert!(samples.len() >= 2, "trapezoid needs >= 2 samples");
    assert!(dt > 0.0);
    let interior: f64 = samples[1..samples.len() - 1].iter().sum();
    dt * (0.5 * (samples[0] + samples[samples.len() - 1]) + interior)
}

/// Bracketing root finder: bisection interleaved with secant steps. Succeeds
/// when `|f(x)| <= tol` or the bracket width falls below `tol`.
pub fn find_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    find_root_impl(|x| Ok(f(x)), lo, hi, tol, tol)
}

/// `f_tol` accepts on the residual, `x_tol` on the bracket width. Shooting
/// passes the smallest positive `f_tol` and `x_tol = 0` to exhaust the
/// bracket: a steep residual may never dip under any useful `f_tol` at a
/// representable argument, and acceptance is judged by the caller instead.
fn find_root_impl(
    mut f: impl FnMut(f64) -> Result<f64, NumericsError>,
    lo: f64,
    hi: f64,
    f_tol: f64,
    x_tol: f64,
) -> Result<f64, NumericsError> {
    assert!(f_tol > 0.0 && x_tol >= 0.0);
    assert!(lo < hi, "bad bracket [{lo}, {hi}]");
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    if fa.abs() <= f_tol {
        return Ok(a);
    }
    let mut fb = f(b)?;
    if fb.abs() <= f_tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoSignChange { lo, hi });
    }
    for iter in 0..256 {
        // Secant candidate; fall back to midpoint when it leaves the bracket
        // or on every other iteration so the width provably shrinks.
        let mut x = b - fb * (b - a) / (fb - fa);
        if iter % 2 == 1 || !x.is_finite() || x <= a || x >= b {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            // The bracket has collapsed to adjacent floats.
            return Ok(0.5 * (a + b));
        }
        let fx = f(x)?;
        if fx.abs() <= f_tol || (b - a) <= x_tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Ok(0.5 * (a + b))
}

/// Two-point BVP with a two-component state `(state, costate)`: the state
/// component starts at `initial_state` and must reach `terminal_target`; the
/// costate initial value is the unknown. One unknown scalar, one terminal
/// condition.
pub struct ShootingProblem<F> {
    pub dynamics: F,
    pub initial_state: f64,
    pub terminal_target: f64,
}

#[derive(Debug, Clone)]
pub struct ShootingSolution {
    /// Costate initial value found by the solver.
    pub lambda0: f64,
    /// Integrated `(state, costate)` path at the grid nodes.
    pub path: Vec<[f64; 2]>,
    /// Terminal mismatch `state(T) - terminal_target` of the returned path.
    pub residual: f64,
}

/// Single shooting on the costate initial value over `bracket`. `tol` bounds
/// the terminal mismatch of the accepted solution.
///
/// A shot that blows up at a bracket end is retried with that end pulled
/// toward the other (the interesting sign change, when it exists, survives
/// shrinking); blow-ups strictly inside the bracket abort the solve.
///
/// The residual can cross zero more than once: wilder extremals may pass
/// through the same terminal state. A uniform scan from `hi` takes the first
/// crossing, so callers must put the quiet (low-drive) costate at `hi`; the
/// root nearest it is the minimizing one.
pub fn solve_shooting<F>(
    problem: &ShootingProblem<F>,
    grid: &Grid,
    bracket: (f64, f64),
    tol: f64,
) -> Result<ShootingSolution, NumericsError>
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    let shoot = |lambda0: f64| -> Result<(f64, Vec<[f64; 2]>), NumericsError> {
        let y0 = [problem.initial_state, lambda0];
        match integrate(&problem.dynamics, y0, grid) {
            Ok(path) => {
                let residual = path[path.len() - 1][0] - problem.terminal_target;
                Ok((residual, path))
            }
            Err(NumericsError::NonFinite { step }) => {
                Err(NumericsError::NonFiniteShot { lambda0, step })
            }
            Err(e) => Err(e),
        }
    };

    // Edge shots may fail for extreme costates; shrink the failing end.
    let (mut lo, mut hi) = bracket;
    assert!(lo < hi, "bad shooting bracket [{lo}, {hi}]");
    let mut attempts = 0;
    while let Err(e) = shoot(lo) {
        attempts += 1;
        if attempts > 48 {
            return Err(e);
        }
        lo = hi + (lo - hi) * 0.5;
    }
    attempts = 0;
    while let Err(e) = shoot(hi) {
        attempts += 1;
        if attempts > 48 {
            return Err(e);
        }
        hi = lo + (hi - lo) * 0.5;
    }

    const SCAN: usize = 32;
    let accept = |lambda0: f64| -> Result<ShootingSolution, NumericsError> {
        let (residual, path) = shoot(lambda0)?;
        if residual.abs() > tol {
            return Err(NumericsError::ShootingStalled { lambda0, residual });
        }
        Ok(ShootingSolution { lambda0, path, residual })
    };
    let mut b = hi;
    let mut fb = shoot(b)?.0;
    for k in 1..=SCAN {
        let a = hi - (hi - lo) * k as f64 / SCAN as f64;
        let fa = shoot(a)?.0;
        if fb == 0.0 {
            return accept(b);
        }
        if fa.signum() != fb.signum() {
            let lambda0 =
                find_root_impl(|l| shoot(l).map(|(r, _)| r), a, b, f64::MIN_POSITIVE, 0.0)?;
            return accept(lambda0);
        }
        (b, fb) = (a, fa);
    }
    if fb == 0.0 {
        return accept(b);
    }
    Err(NumericsError::NoSignChange { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_counts_steps() {
        let g = Grid::from_step(0.0, 1.0, 0.1);
        assert_eq!(g.n_steps(), 10);
        assert_eq!(g.n_nodes(), 11);
        assert!((g.t_end() - 1.0).abs() < 1e-12);
        let ts: Vec<f64> = g.times().collect();
        assert_eq!(ts.len(), 11);
        assert!((ts[3] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn integrate_constant_derivative() {
        let g = Grid::from_step(0.0, 2.0, 0.5);
        let path = integrate(|_, _: &[f64; 1]| [3.0], [1.0], &g).unwrap();
        assert!((path.last().unwrap()[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_matches_exponential_decay() {
        // y' = -y / tau, tau = 0.065: relative error <= 1e-8 at dt = tau/1000.
        let tau = 0.065;
        let g = Grid::from_step(0.0, 3.0 * tau, tau / 1000.0);
        let path = integrate(|_, y: &[f64; 1]| [-y[0] / tau], [1.0], &g).unwrap();
        let exact = (-3.0f64).exp();
        assert!((path.last().unwrap()[0] - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn integrate_single_step_truncation_is_fifth_order() {
        let tau = 1.0;
        let h = 0.01;
        let g = Grid::from_step(0.0, h, h);
        let path = integrate(|_, y: &[f64; 1]| [-y[0] / tau], [1.0], &g).unwrap();
        let err = (path[1][0] - (-h / tau).exp()).abs();
        assert!(err < h.powi(5), "one-step error {err} above O(h^5) bound");
    }

    #[test]
    fn integrate_observed_order_at_least_3_8() {
        let tau = 1.0;
        let run = |dt: f64| {
            let g = Grid::from_step(0.0, 1.0, dt);
            let path = integrate(|_, y: &[f64; 1]| [-y[0] / tau], [1.0], &g).unwrap();
            (path.last().unwrap()[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.05);
        let e2 = run(0.025);
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order}");
    }

    #[test]
    fn integrate_reports_non_finite_step() {
        let g = Grid::from_step(0.0, 1.0, 0.1);
        let err = integrate(
            |t, _y: &[f64; 1]| if t > 0.44 { [f64::NAN] } else { [1.0] },
            [0.0],
            &g,
        )
        .unwrap_err();
        // Step 4 spans [0.4, 0.5]; its midpoint stages are the first to see
        // the NaN region.
        assert_eq!(err, NumericsError::NonFinite { step: 4 });
    }

    #[test]
    fn trapezoid_examples() {
        assert!((trapezoid(&[2.0, 2.0, 2.0], 0.5) - 2.0).abs() < 1e-15);
        // Ramp: integral of t over [0, 1] = 0.5, exact for the trapezoid rule.
        let n = 10;
        let samples: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        assert!((trapezoid(&samples, 0.1) - 0.5).abs() < 1e-15);
        // Smooth curve: 1 - exp(-1) within 1e-6 at 1000 panels.
        let n = 1000;
        let samples: Vec<f64> = (0..=n).map(|i| (-(i as f64) / n as f64).exp()).collect();
        assert!((trapezoid(&samples, 1.0 / n as f64) - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    #[should_panic(expected = ">= 2 samples")]
    fn trapezoid_rejects_single_sample() {
        trapezoid(&[1.0], 0.1);
    }

    #[test]
    fn find_root_linear_and_sqrt2() {
        let x = find_root(|x| x - 2.0, 0.0, 5.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-9);
        let x = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((x - 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn find_root_requires_sign_change() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-9).unwrap_err();
        assert_eq!(err, NumericsError::NoSignChange { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn find_root_accepts_root_at_bracket_end() {
        let x = find_root(|x| x, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(x, 0.0);
    }

    #[test]
    fn shooting_recovers_linear_bvp() {
        // state' = costate, costate' = 0: costate0 = (target - y0) / T.
        let g = Grid::from_step(0.0, 2.0, 0.01);
        let p = ShootingProblem {
            dynamics: |_t: f64, y: &[f64; 2]| [y[1], 0.0],
            initial_state: 1.0,
            terminal_target: 4.0,
        };
        let sol = solve_shooting(&p, &g, (-10.0, 10.0), 1e-10).unwrap();
        assert!((sol.lambda0 - 1.5).abs() < 1e-8);
        assert!(sol.residual.abs() <= 1e-10);
        assert_eq!(sol.path.len(), g.n_nodes());
    }

    #[test]
    fn shooting_reports_missing_sign_change() {
        // state is pinned at its initial value; no costate can move it.
        let g = Grid::from_step(0.0, 1.0, 0.1);
        let p = ShootingProblem {
            dynamics: |_t: f64, _y: &[f64; 2]| [0.0, 0.0],
            initial_state: 1.0,
            terminal_target: 2.0,
        };
        let err = solve_shooting(&p, &g, (-1.0, 1.0), 1e-10).unwrap_err();
        assert!(matches!(err, NumericsError::NoSignChange { .. }));
    }

    #[test]
    fn shooting_shrinks_past_blowup_bracket_end() {
        // Shots with |costate0| > 5 diverge immediately; the sign change at
        // costate0 = 1.5 must still be found.
        let g = Grid::from_step(0.0, 2.0, 0.01);
        let p = ShootingProblem {
            dynamics: |_t: f64, y: &[f64; 2]| {
                if y[1].abs() > 5.0 {
                    [f64::NAN, 0.0]
                } else {
                    [y[1], 0.0]
                }
            },
            initial_state: 1.0,
            terminal_target: 4.0,
        };
        let sol = solve_shooting(&p, &g, (-40.0, 40.0), 1e-10).unwrap();
        assert!((sol.lambda0 - 1.5).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn trapezoid_exact_on_affine(a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let n = 37;
            let dt = 0.01;
            let samples: Vec<f64> = (0..=n).map(|i| a + b * (i as f64 * dt)).collect();
            let t_end = n as f64 * dt;
            let exact = a * t_end + 0.5 * b * t_end * t_end;
            prop_assert!((trapezoid(&samples, dt) - exact).abs() < 1e-12);
        }
    }
}
