//! Configuration-driven experiment runner: a JSON scenario selects motor,
//! saturation curve, load step, strategies, speed loop and horizon; the
//! runner simulates every requested strategy on one shared grid and reports
//! per-strategy energies plus the exact-vs-approximate gap. Batch suites
//! cover the stock comparison studies.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::motor::{MotorError, MotorParams};
use crate::numerics::Grid;
use crate::presets::{self, PresetError};
use crate::saturation::{CurveError, SaturationCurve};
use crate::simulate::{
    default_dt, objective_energy, resolve_horizon, run_strategy, ControlStrategy, SimulateError,
    Trajectory,
};
use crate::speedloop::SpeedLoopConfig;
use crate::transient::{EnergyReport, LoadStep, TransientError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Preset(#[from] PresetError),
    #[error(transparent)]
    Motor(#[from] MotorError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Step(#[from] TransientError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

/// Motor selection: a bundled/override preset name or inline parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MotorSpec {
    Preset(String),
    Inline(MotorParams),
}

impl MotorSpec {
    pub fn resolve(&self) -> Result<MotorParams, ScenarioError> {
        let params = match self {
            MotorSpec::Preset(name) => presets::resolve(name)?,
            MotorSpec::Inline(params) => params.clone(),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Saturation selection: a shorthand name (`"constant"` holds the motor's
/// L_M, `"affine_default"` builds the stock drooping curve from it) or a
/// full curve object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SaturationSpec {
    Named(String),
    Curve(SaturationCurve),
}

impl Default for SaturationSpec {
    fn default() -> Self {
        SaturationSpec::Named("constant".into())
    }
}

impl SaturationSpec {
    pub fn resolve(&self, params: &MotorParams) -> Result<SaturationCurve, ScenarioError> {
        let curve = match self {
            SaturationSpec::Named(name) => match name.as_str() {
                "constant" => SaturationCurve::constant(params.lm),
                "affine_default" => SaturationCurve::affine_default(params),
                other => {
                    return Err(ScenarioError::Invalid(format!(
                        "unknown saturation shorthand '{other}' (expected 'constant' or 'affine_default')"
                    )))
                }
            },
            SaturationSpec::Curve(curve) => curve.clone(),
        };
        curve.validate()?;
        Ok(curve)
    }
}

/// Load step given either as percentages of the motor's rated torque or as
/// absolute newton-metres.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Percent { from_pct: f64, to_pct: f64 },
    Absolute { t_m: f64, delta_t_m: f64 },
}

impl StepSpec {
    pub fn resolve(&self, t_rated: f64) -> Result<LoadStep, ScenarioError> {
        let step = match *self {
            StepSpec::Percent { from_pct, to_pct } => {
                LoadStep::from_fractions(t_rated, from_pct / 100.0, to_pct / 100.0)?
            }
            StepSpec::Absolute { t_m, delta_t_m } => LoadStep::new(t_m, delta_t_m)?,
        };
        Ok(step)
    }
}

fn default_epsilon() -> f64 {
    1e-3
}

/// Horizon selection: a fixed length or automatic settling detection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HorizonSpec {
    Fixed { t: f64 },
    Auto {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

impl Default for HorizonSpec {
    fn default() -> Self {
        HorizonSpec::Auto { epsilon: default_epsilon() }
    }
}

fn default_controller() -> SpeedLoopConfig {
    SpeedLoopConfig::Ideal
}

fn default_omega_ref() -> f64 {
    60.0
}

/// One load-step experiment as read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub motor: MotorSpec,
    #[serde(default)]
    pub saturation: SaturationSpec,
    pub step: StepSpec,
    pub strategies: Vec<ControlStrategy>,
    #[serde(default = "default_controller")]
    pub controller: SpeedLoopConfig,
    #[serde(default)]
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_omega_ref")]
    pub omega_ref: f64,
    #[serde(default)]
    pub output_dir: Option<std::path::PathBuf>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text)
            .map_err(|e| ScenarioError::Invalid(format!("could not parse scenario JSON: {e}")))
    }
}

/// One simulated strategy of a scenario run.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: ControlStrategy,
    pub trajectory: Trajectory,
    pub j_loss: f64,
    pub j_dyn: f64,
    /// Settle time of `p_dyn`; `None` when the horizon ends first.
    pub duration: Option<f64>,
}

/// Result of running one scenario: per-strategy energies on a shared grid
/// plus, when the exact strategy and an approximation were both requested,
/// the gap between them on the objective the exact solver optimizes.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub motor: MotorParams,
    pub horizon: f64,
    pub dt: f64,
    /// True when energies compare on `p_dyn` (constant curve, ideal loop).
    pub objective_is_dyn: bool,
    pub runs: Vec<StrategyRun>,
    pub report: Option<EnergyReport>,
}

impl ScenarioOutcome {
    pub fn objective_of(&self, run: &StrategyRun) -> f64 {
        if self.objective_is_dyn {
            run.j_dyn
        } else {
            run.j_loss
        }
    }
}

/// Runs every strategy of `spec` on one grid. The horizon resolves first
/// (fixed, or auto via the settling probe), then strategies simulate in the
/// listed order.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome, ScenarioError> {
    if spec.strategies.is_empty() {
        return Err(ScenarioError::Invalid("at least one strategy is required".into()));
    }
    let params = spec.motor.resolve()?;
    let sat = spec.saturation.resolve(&params)?;
    let step = spec.step.resolve(params.t_rated)?;
    if !(spec.omega_ref.is_finite() && spec.omega_ref > 0.0) {
        return Err(ScenarioError::Invalid(format!(
            "omega_ref must be positive and finite, got {}",
            spec.omega_ref
        )));
    }
    let dt = match spec.dt {
        Some(v) if v.is_finite() && v > 0.0 => v,
        Some(v) => {
            return Err(ScenarioError::Invalid(format!("dt must be positive and finite, got {v}")))
        }
        None => default_dt(&params),
    };
    let epsilon = match spec.horizon {
        HorizonSpec::Auto { epsilon } => epsilon,
        HorizonSpec::Fixed { .. } => default_epsilon(),
    };
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(ScenarioError::Invalid(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    let horizon = match spec.horizon {
        HorizonSpec::Fixed { t } => {
            if !(t.is_finite() && t >= 2.0 * dt) {
                return Err(ScenarioError::Invalid(format!(
                    "fixed horizon must span at least two steps, got t = {t} with dt = {dt}"
                )));
            }
            t
        }
        HorizonSpec::Auto { .. } => resolve_horizon(
            &params,
            &sat,
            &step,
            &spec.controller,
            spec.omega_ref,
            epsilon,
            dt,
        )?,
    };
    let grid = Grid::from_step(0.0, horizon, dt);
    let mut runs = Vec::with_capacity(spec.strategies.len());
    for &strategy in &spec.strategies {
        let trajectory =
            run_strategy(&params, &sat, &step, strategy, &spec.controller, spec.omega_ref, &grid)?;
        let duration = trajectory.transient_duration(epsilon).ok();
        runs.push(StrategyRun {
            strategy,
            j_loss: trajectory.energy_loss(),
            j_dyn: trajectory.energy_dyn(),
            duration,
            trajectory,
        });
    }
    let objective_is_dyn = sat.is_constant() && spec.controller.is_ideal();
    let pick = |r: &StrategyRun| if objective_is_dyn { r.j_dyn } else { r.j_loss };
    let exact = runs.iter().find(|r| r.strategy == ControlStrategy::BvpExact);
    let approx = runs.iter().find(|r| r.strategy != ControlStrategy::BvpExact);
    let report = match (exact, approx) {
        (Some(e), Some(a)) => Some(EnergyReport::new(pick(e), pick(a), horizon)),
        _ => None,
    };
    Ok(ScenarioOutcome { motor: params, horizon, dt, objective_is_dyn, runs, report })
}

/// JSON summary of an outcome: per-strategy energies and settle times plus
/// the gap report. Deterministic for identical inputs.
pub fn summary_value(outcome: &ScenarioOutcome) -> serde_json::Value {
    let strategies: Vec<serde_json::Value> = outcome
        .runs
        .iter()
        .map(|r| {
            json!({
                "strategy": r.strategy.name(),
                "J_loss": r.j_loss,
                "J_dyn": r.j_dyn,
                "J": outcome.objective_of(r),
                "transient_duration": r.duration,
            })
        })
        .collect();
    json!({
        "motor": outcome.motor.name,
        "T": outcome.horizon,
        "dt": outcome.dt,
        "objective": if outcome.objective_is_dyn { "p_dyn" } else { "p_loss" },
        "strategies": strategies,
        "report": outcome.report,
    })
}

/// One row of a comparison suite: exact vs. approximate energy on a shared
/// horizon.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub label: String,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    #[serde(rename = "delta_J")]
    pub delta_j: f64,
    pub rel_err_pct: f64,
}

pub const TABLE_CSV_HEADER: &str = "label,T,J1,J2,delta_J,rel_err_pct";

impl TableRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            self.label, self.t_horizon, self.j1, self.j2, self.delta_j, self.rel_err_pct
        )
    }
}

/// Built-in comparison suites, selectable by name from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSuite {
    /// Fall from rated load to 10%, constant inductance, every preset.
    Table1,
    /// Rise from 10% to rated load, constant inductance, every preset.
    Table2,
    /// Rise from 25% to rated load on DRS71S4 under the modelled speed
    /// loop, sweeping w0 over {20, 40, 60} at z = 10.
    Table3,
    /// Rise from 25% to rated load on the default saturation curve, every
    /// preset.
    Table4,
    /// Fall from rated load to 25% on the default saturation curve, every
    /// preset.
    Table5,
}

impl TableSuite {
    pub const ALL: [TableSuite; 5] = [
        TableSuite::Table1,
        TableSuite::Table2,
        TableSuite::Table3,
        TableSuite::Table4,
        TableSuite::Table5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableSuite::Table1 => "table1",
            TableSuite::Table2 => "table2",
            TableSuite::Table3 => "table3",
            TableSuite::Table4 => "table4",
            TableSuite::Table5 => "table5",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            TableSuite::Table1 => "fall 100% -> 10%, constant inductance, all presets",
            TableSuite::Table2 => "rise 10% -> 100%, constant inductance, all presets",
            TableSuite::Table3 => "rise 25% -> 100%, DRS71S4, speed loop w0 in {20, 40, 60}",
            TableSuite::Table4 => "rise 25% -> 100%, default saturation curve, all presets",
            TableSuite::Table5 => "fall 100% -> 25%, default saturation curve, all presets",
        }
    }
}

impl FromStr for TableSuite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableSuite::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected table1..table5)"))
    }
}

/// Result of one suite row; failures are recorded so the suite continues.
#[derive(Debug)]
pub struct RowOutcome {
    pub label: String,
    pub row: Result<TableRow, ScenarioError>,
}

struct RowDef {
    label: String,
    params: MotorParams,
    sat: SaturationCurve,
    step: LoadStep,
    controller: SpeedLoopConfig,
    /// Suites sweeping one machine share a horizon so energies compare;
    /// preset sweeps resolve per row (each machine has its own timescale).
    fixed_horizon: Option<f64>,
}

fn preset_rows(from: f64, to: f64, saturated: bool) -> Result<Vec<RowDef>, ScenarioError> {
    presets::names()
        .map(|name| {
            let params = presets::builtin(name)?;
            let sat = if saturated {
                SaturationCurve::affine_default(&params)
            } else {
                SaturationCurve::constant(params.lm)
            };
            let step = LoadStep::from_fractions(params.t_rated, from, to)?;
            Ok(RowDef {
                label: name.to_string(),
                params,
                sat,
                step,
                controller: SpeedLoopConfig::Ideal,
                fixed_horizon: None,
            })
        })
        .collect()
}

fn sweep_rows() -> Result<Vec<RowDef>, ScenarioError> {
    let params = presets::builtin("DRS71S4")?;
    let sat = SaturationCurve::constant(params.lm);
    let step = LoadStep::from_fractions(params.t_rated, 0.25, 1.0)?;
    // The slowest setting dictates the shared horizon.
    let slowest = SpeedLoopConfig::Analytic { w0: 20.0, z: 10.0 };
    let horizon = resolve_horizon(
        &params,
        &sat,
        &step,
        &slowest,
        default_omega_ref(),
        default_epsilon(),
        default_dt(&params),
    )?;
    Ok([20.0, 40.0, 60.0]
        .into_iter()
        .map(|w0| RowDef {
            label: format!("w0={w0}"),
            params: params.clone(),
            sat: sat.clone(),
            step,
            controller: SpeedLoopConfig::Analytic { w0, z: 10.0 },
            fixed_horizon: Some(horizon),
        })
        .collect())
}

fn suite_defs(suite: TableSuite) -> Result<Vec<RowDef>, ScenarioError> {
    match suite {
        TableSuite::Table1 => preset_rows(1.0, 0.10, false),
        TableSuite::Table2 => preset_rows(0.10, 1.0, false),
        TableSuite::Table3 => sweep_rows(),
        TableSuite::Table4 => preset_rows(0.25, 1.0, true),
        TableSuite::Table5 => preset_rows(1.0, 0.25, true),
    }
}

fn run_row(def: &RowDef) -> Result<TableRow, ScenarioError> {
    let dt = default_dt(&def.params);
    let horizon = match def.fixed_horizon {
        Some(t) => t,
        None => resolve_horizon(
            &def.params,
            &def.sat,
            &def.step,
            &def.controller,
            default_omega_ref(),
            default_epsilon(),
            dt,
        )?,
    };
    let grid = Grid::from_step(0.0, horizon, dt);
    let omega_ref = default_omega_ref();
    let exact = run_strategy(
        &def.params,
        &def.sat,
        &def.step,
        ControlStrategy::BvpExact,
        &def.controller,
        omega_ref,
        &grid,
    )?;
    let approx_strategy = if def.sat.is_constant() {
        ControlStrategy::Feedback
    } else {
        ControlStrategy::Zeta
    };
    let approx = run_strategy(
        &def.params,
        &def.sat,
        &def.step,
        approx_strategy,
        &def.controller,
        omega_ref,
        &grid,
    )?;
    let j1 = objective_energy(&def.sat, &def.controller, &exact);
    let j2 = objective_energy(&def.sat, &def.controller, &approx);
    let report = EnergyReport::new(j1, j2, horizon);
    Ok(TableRow {
        label: def.label.clone(),
        t_horizon: horizon,
        j1,
        j2,
        delta_j: report.delta_j,
        rel_err_pct: report.rel_err * 100.0,
    })
}

/// Runs a suite with one worker per row; rows are independent pure solves,
/// and the outcome list keeps the definition order.
pub fn run_suite(suite: TableSuite) -> Result<Vec<RowOutcome>, ScenarioError> {
    let defs = suite_defs(suite)?;
    let mut out = Vec::with_capacity(defs.len());
    std::thread::scope(|s| {
        let handles: Vec<_> = defs.iter().map(|d| s.spawn(move || run_row(d))).collect();
        for (def, handle) in defs.iter().zip(handles) {
            let row = handle.join().expect("suite row worker panicked");
            out.push(RowOutcome { label: def.label.clone(), row });
        }
    });
    Ok(out)
}
