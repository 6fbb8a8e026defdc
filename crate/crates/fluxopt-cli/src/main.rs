//! Command line front end over the `fluxopt` library: steady operating
//! points, scenario simulation with CSV/JSON output, the bundled comparison
//! suites, the instant-of-step loss ratios and the tabulated `zeta` rule.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags, bad
//! scenario JSON, unknown presets), 3 when a solver fails on a valid
//! configuration.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use fluxopt::motor::MotorParams;
use fluxopt::numerics::Grid;
use fluxopt::presets;
use fluxopt::saturation::SaturationCurve;
use fluxopt::scenario::{
    self, HorizonSpec, SaturationSpec, ScenarioError, ScenarioSpec, TableSuite, TABLE_CSV_HEADER,
};
use fluxopt::simulate::{self, ControlStrategy, SimulateError};
use fluxopt::speedloop::SpeedLoopConfig;
use fluxopt::steady::{self, SteadyError, ZetaTable};
use fluxopt::transient::{self, LoadStep, TransientError};

#[derive(Parser)]
#[command(name = "fluxopt", version, about = "Energy-optimal magnetizing current for an induction machine under load-torque steps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the loss-optimal steady operating point for one load torque.
    Steady(SteadyArgs),
    /// Run one scenario from JSON: a trajectory CSV per strategy plus a
    /// summary JSON.
    Simulate(SimulateArgs),
    /// Run a bundled comparison suite and print its rows as CSV.
    Table(TableArgs),
    /// Compare the closed-form instant-of-step loss ratios against
    /// simulation over a grid of step ratios.
    Ratio(RatioArgs),
    /// Dump the saturated stationarity rule i_sd = zeta(i_sq) as CSV.
    ZetaTable(ZetaTableArgs),
}

/// Failure sorted by exit code: configuration problems exit 2, solver
/// failures on valid configurations exit 3.
#[derive(Debug)]
enum CliError {
    Config(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) => m,
        }
    }
}

/// Simulation errors keep their stage-naming `Display` text; validation
/// style rejections count as configuration, everything else as solver.
impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match &e {
            SimulateError::SpeedLoop(_)
            | SimulateError::Curve(_)
            | SimulateError::Unsupported(_)
            | SimulateError::Transient(TransientError::InvalidStep(_)) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Simulate(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SteadyError> for CliError {
    fn from(e: SteadyError) -> Self {
        match e {
            SteadyError::NegativeTorque { .. } => CliError::Config(e.to_string()),
            SteadyError::NoRoot { .. } => CliError::Solver(e.to_string()),
        }
    }
}

/// Motor selection: a bundled preset by name or a full inline parameter
/// set. `FLUXOPT_PRESET_DIR` redirects the preset lookup.
#[derive(Args)]
struct MotorArgs {
    /// Preset name (DRS71S4, DRS112M4, DRS160M4 bundled).
    #[arg(long, conflicts_with_all = ["rs", "rr", "lm", "j_inertia", "i_sd_nom", "t_rated"])]
    motor: Option<String>,
    /// Stator resistance, ohm.
    #[arg(long)]
    rs: Option<f64>,
    /// Rotor resistance (stator-referred), ohm.
    #[arg(long)]
    rr: Option<f64>,
    /// Unsaturated main inductance, H.
    #[arg(long)]
    lm: Option<f64>,
    /// Total inertia at the shaft, kg m^2.
    #[arg(long)]
    j_inertia: Option<f64>,
    /// Pole pairs.
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Nominal magnetizing current, A.
    #[arg(long)]
    i_sd_nom: Option<f64>,
    /// Rated torque, N m.
    #[arg(long)]
    t_rated: Option<f64>,
}

impl MotorArgs {
    fn resolve(&self) -> Result<MotorParams, CliError> {
        if let Some(name) = &self.motor {
            return presets::resolve(name).map_err(|e| CliError::Config(e.to_string()));
        }
        match (self.rs, self.rr, self.lm, self.j_inertia, self.i_sd_nom, self.t_rated) {
            (Some(rs), Some(rr), Some(lm), Some(j_inertia), Some(i_sd_nom), Some(t_rated)) => {
                let params = MotorParams {
                    rs,
                    rr,
                    lm,
                    j_inertia,
                    p: self.p,
                    i_sd_nom,
                    t_rated,
                    name: "inline".into(),
                };
                params.validate().map_err(|e| CliError::Config(e.to_string()))?;
                Ok(params)
            }
            _ => Err(CliError::Config(
                "pass --motor <preset> or the full inline set \
                 --rs --rr --lm --j-inertia --i-sd-nom --t-rated"
                    .into(),
            )),
        }
    }
}

fn named_curve(name: &str, params: &MotorParams) -> Result<SaturationCurve, CliError> {
    Ok(SaturationSpec::Named(name.to_string()).resolve(params)?)
}

#[derive(Args)]
struct SteadyArgs {
    #[command(flatten)]
    motor: MotorArgs,
    /// Load torque, N m; defaults to the motor's rated torque.
    #[arg(long)]
    torque: Option<f64>,
    /// Saturation model: 'constant' or 'affine_default'.
    #[arg(long, default_value = "constant")]
    saturation: String,
}

fn run_steady(args: &SteadyArgs) -> Result<(), CliError> {
    let params = args.motor.resolve()?;
    let sat = named_curve(&args.saturation, &params)?;
    let t_m = args.torque.unwrap_or(params.t_rated);
    let point = steady::optimal_point(&params, &sat, t_m)?;
    println!("motor = {}", params.name);
    println!("gamma = {:.5}", steady::gamma(&params));
    println!("T_m = {:.5} N.m", point.t_m);
    println!("i_sd_opt = {:.5} A", point.i_sd);
    println!("i_sq_opt = {:.5} A", point.i_sq);
    println!("phi_r = {:.5} Wb", point.phi_r);
    println!("P_loss = {:.5} W", point.p_loss);
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the scenario's output_dir, defaults to '.'.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step override, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Auto-horizon settling threshold override (switches a fixed horizon
    /// back to auto).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Strategy override, repeatable: nominal, feedback, step, zeta,
    /// bvp_exact.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Replace the controller with the analytic speed loop at this natural
    /// frequency, rad/s.
    #[arg(long, requires = "z")]
    w0: Option<f64>,
    /// Damping ratio for --w0.
    #[arg(long, requires = "w0")]
    z: Option<f64>,
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("could not read {}: {e}", args.config.display()))
    })?;
    let mut spec = ScenarioSpec::from_json(&text)?;
    if let Some(dir) = &args.out {
        spec.output_dir = Some(dir.clone());
    }
    if args.dt.is_some() {
        spec.dt = args.dt;
    }
    if let Some(epsilon) = args.epsilon {
        spec.horizon = HorizonSpec::Auto { epsilon };
    }
    if !args.strategies.is_empty() {
        spec.strategies = args
            .strategies
            .iter()
            .map(|s| ControlStrategy::from_str(s))
            .collect::<Result<_, _>>()
            .map_err(CliError::Config)?;
    }
    if let (Some(w0), Some(z)) = (args.w0, args.z) {
        spec.controller = SpeedLoopConfig::Analytic { w0, z };
    }
    let outcome = scenario::run_scenario(&spec)?;
    let dir = spec.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("could not create {}: {e}", dir.display())))?;
    for run in &outcome.runs {
        let path = dir.join(format!("{}.csv", run.strategy.name()));
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Config(format!("could not create {}: {e}", path.display())))?;
        run.trajectory
            .write_csv(io_buf(file))
            .map_err(|e| CliError::Config(format!("could not write {}: {e}", path.display())))?;
    }
    let mut summary = serde_json::to_string_pretty(&scenario::summary_value(&outcome))
        .expect("summary serializes");
    summary.push('\n');
    let path = dir.join("summary.json");
    fs::write(&path, &summary)
        .map_err(|e| CliError::Config(format!("could not write {}: {e}", path.display())))?;
    print!("{summary}");
    Ok(())
}

fn io_buf(file: fs::File) -> std::io::BufWriter<fs::File> {
    std::io::BufWriter::new(file)
}

#[derive(Args)]
struct TableArgs {
    /// Suite name: table1 .. table5.
    #[arg(long)]
    suite: String,
    /// Also write <suite>.csv into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_table(args: &TableArgs) -> Result<(), CliError> {
    let suite = TableSuite::from_str(&args.suite).map_err(CliError::Config)?;
    let outcomes = scenario::run_suite(suite)?;
    let mut lines = vec![TABLE_CSV_HEADER.to_string()];
    let mut failed = Vec::new();
    for outcome in &outcomes {
        match &outcome.row {
            Ok(row) => lines.push(row.csv_line()),
            Err(e) => {
                eprintln!("row {}: {e}", outcome.label);
                failed.push(outcome.label.clone());
            }
        }
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("could not create {}: {e}", dir.display())))?;
        let path = dir.join(format!("{}.csv", suite.name()));
        fs::write(&path, &text)
            .map_err(|e| CliError::Config(format!("could not write {}: {e}", path.display())))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Solver(format!(
            "{}/{} rows failed: {}",
            failed.len(),
            outcomes.len(),
            failed.join(", ")
        )))
    }
}

#[derive(Args)]
struct RatioArgs {
    #[command(flatten)]
    motor: MotorArgs,
    /// Step ratio k = (T_m + delta_T_m)/T_m, repeatable; the default grid
    /// covers both directions.
    #[arg(long = "k")]
    k: Vec<f64>,
}

fn run_ratio(args: &RatioArgs) -> Result<(), CliError> {
    let params = args.motor.resolve()?;
    let ks = if args.k.is_empty() {
        vec![0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 5.0, 10.0]
    } else {
        args.k.clone()
    };
    println!("k,analytic,simulated");
    for &k in &ks {
        if !(k.is_finite() && k >= 0.0) {
            return Err(CliError::Config(format!("k must be finite and >= 0, got {k}")));
        }
        let (analytic, simulated) = ratio_pair(&params, k)?;
        println!("{:.11e},{:.11e},{:.11e}", k, analytic, simulated);
    }
    Ok(())
}

/// Closed-form instant-of-step ratio next to the same ratio read off the
/// first sample of a feedback-strategy simulation. Drops charge against the
/// pre-step steady loss, rises against the total post-step loss power.
fn ratio_pair(params: &MotorParams, k: f64) -> Result<(f64, f64), CliError> {
    let analytic = if k <= 1.0 {
        transient::peak_ratio_decrease(params, k)
    } else {
        transient::peak_ratio_increase(params, k)
    };
    let sat = SaturationCurve::constant(params.lm);
    let t_m = 0.5 * params.t_rated;
    let step = LoadStep::new(t_m, (k - 1.0) * t_m).map_err(|e| CliError::Config(e.to_string()))?;
    let dt = simulate::default_dt(params);
    // Only the first sample matters; a few steps keep the run trivial.
    let grid = Grid::from_step(0.0, 10.0 * dt, dt);
    let traj = simulate::run_strategy(
        &params.clone(),
        &sat,
        &step,
        ControlStrategy::Feedback,
        &SpeedLoopConfig::Ideal,
        60.0,
        &grid,
    )?;
    let first = &traj.samples[0];
    let simulated = if k <= 1.0 {
        let pre = steady::optimal_point(params, &sat, t_m)?;
        first.delta_p / pre.p_loss
    } else {
        first.delta_p / first.p_dyn
    };
    Ok((analytic, simulated))
}

#[derive(Args)]
struct ZetaTableArgs {
    #[command(flatten)]
    motor: MotorArgs,
    /// Saturation model: 'constant' or 'affine_default'.
    #[arg(long, default_value = "affine_default")]
    saturation: String,
    /// Upper end of the tabulated i_sq range, A; defaults to twice the
    /// nominal magnetizing current.
    #[arg(long)]
    max_i_sq: Option<f64>,
    /// Node count of the table.
    #[arg(long, default_value_t = 41)]
    points: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_zeta_table(args: &ZetaTableArgs) -> Result<(), CliError> {
    let params = args.motor.resolve()?;
    let sat = named_curve(&args.saturation, &params)?;
    let i_sq_max = args.max_i_sq.unwrap_or(2.0 * params.i_sd_nom);
    if !(i_sq_max.is_finite() && i_sq_max > 0.0) {
        return Err(CliError::Config(format!("--max-i-sq must be positive, got {i_sq_max}")));
    }
    if args.points < 2 {
        return Err(CliError::Config(format!("--points must be >= 2, got {}", args.points)));
    }
    let table = ZetaTable::build(&params, &sat, i_sq_max, args.points)?;
    let mut text = String::from("i_sq,i_sd\n");
    for (i_sq, i_sd) in table.nodes() {
        text.push_str(&format!("{:.11e},{:.11e}\n", i_sq, i_sd));
    }
    match &args.out {
        Some(path) => fs::write(path, &text)
            .map_err(|e| CliError::Config(format!("could not write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Steady(args) => run_steady(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Table(args) => run_table(args),
        Command::Ratio(args) => run_ratio(args),
        Command::ZetaTable(args) => run_zeta_table(args),
    }
}

fn main() -> ExitCode {
    // The CSV subcommands stream to stdout and are meant to be piped; restore
    // the default SIGPIPE disposition so `fluxopt table | head` dies quietly
    // instead of panicking on the broken pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
