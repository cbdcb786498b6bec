//! Command-line front end.
//!
//! Exit codes: 0 all requested work passed, 1 a numerical check failed,
//! 2 configuration or usage error, 3 numerical failure while solving.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::expr::Expr;
use crate::fraccalc::{
    composition_residuals, frac_integral_power, frac_integral_quad, graded_grid, hilfer_deriv_power,
    hilfer_deriv_quad_many, HilferOrder, SampledFn,
};
use crate::solver::{
    closed_form_example, contraction_constant, convert_initial, solve, ImpulsiveSchedule, ImpulsiveSystem, InitialForm,
    MeshSpec, Mode, PiecewiseTrajectory, WeightedInitialCondition,
};
use crate::special::{ml_laplace_residual, MLParams};
use crate::stability::{check_envelope_dominance, verify_lyapunov, EnvelopeParam, LyapunovSpec, StabilityCertificate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const CSV_HEADER: &str = "t,x,weighted_x,segment_kind,segment_index";

#[derive(Debug, Parser)]
#[command(
    name = "hilfer",
    version,
    about = "Impulsive Hilfer fractional systems: simulation and stability checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the system in a JSON config and write its trajectory as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the mesh points per interval.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Write the worked example (mu = 0.4, x0 = 1) for several nu, plus its closed form.
    ReproduceExample {
        /// Comma-separated list of nu values.
        #[arg(long, default_value = "0.25,0.5,0.75,1")]
        nu: String,
        #[arg(long, default_value = "example_traces")]
        out: PathBuf,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run the contraction, Lyapunov and envelope checks requested by a config.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        envelope_param: Option<EnvelopeArg>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run the built-in oracle suites.
    Selftest {
        #[arg(long, default_value_t = 128)]
        points: usize,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeArg {
    #[default]
    Lambda,
    Nu,
}

impl From<EnvelopeArg> for EnvelopeParam {
    fn from(a: EnvelopeArg) -> Self {
        match a {
            EnvelopeArg::Lambda => EnvelopeParam::Lambda,
            EnvelopeArg::Nu => EnvelopeParam::Nu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    ClosedForm,
    Composition,
    Laplace,
}

/// Failure carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    NonInstantaneous,
    Instantaneous,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub mu: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub t_points: Vec<f64>,
    #[serde(default)]
    pub p_points: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormConfig {
    Integral,
    #[default]
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub form: FormConfig,
    pub value: f64,
}

fn default_points() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_points")]
    pub points_per_interval: usize,
    #[serde(default)]
    pub grading: Option<f64>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            points_per_interval: default_points(),
            grading: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionConfig {
    pub lipschitz: f64,
    #[serde(default)]
    pub impulse_lipschitz: Vec<f64>,
    #[serde(default)]
    pub p: Option<f64>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub v: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_stride")]
    pub grid_stride: usize,
}

fn default_trajectory_file() -> String {
    "trajectory.csv".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_trajectory_file")]
    pub trajectory: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory: default_trajectory_file(),
        }
    }
}

/// JSON run configuration; see `schema/run_config.schema.json`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: ModeConfig,
    pub order: OrderConfig,
    pub schedule: ScheduleConfig,
    pub g: String,
    #[serde(default)]
    pub impulse_maps: Vec<String>,
    pub initial: InitialConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub contraction: Option<ContractionConfig>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default)]
    pub envelope_param: EnvelopeArg,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Validated configuration, ready for numerical work.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub system: ImpulsiveSystem,
    pub mesh: MeshSpec,
    pub lyapunov: Option<LyapunovSpec>,
}

fn parse_expr(src: &str, what: &str) -> Result<Expr, CliError> {
    src.parse::<Expr>()
        .map_err(|e| CliError::config(format!("{what}: {e}")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every field and builds the solver inputs.
    pub fn prepare(self, points: Option<usize>) -> Result<Prepared, CliError> {
        let order =
            HilferOrder::new(self.order.mu, self.order.nu).map_err(|e| CliError::config(format!("order: {e}")))?;
        let mode = match self.mode {
            ModeConfig::NonInstantaneous => Mode::NonInstantaneous,
            ModeConfig::Instantaneous => Mode::Instantaneous,
        };
        let s = &self.schedule;
        let schedule = ImpulsiveSchedule::new(mode, s.t_points.clone(), s.p_points.clone(), s.horizon)
            .map_err(|e| CliError::config(e.to_string()))?;
        let g = parse_expr(&self.g, "g")?;
        let maps = self
            .impulse_maps
            .iter()
            .enumerate()
            .map(|(i, m)| parse_expr(m, &format!("impulse map {i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let initial = WeightedInitialCondition {
            form: match self.initial.form {
                FormConfig::Integral => InitialForm::Integral,
                FormConfig::Weighted => InitialForm::Weighted,
            },
            value: self.initial.value,
        };
        let x0 = match initial.form {
            InitialForm::Weighted => initial.value,
            InitialForm::Integral => {
                convert_initial(initial, order.lam())
                    .map_err(|e| CliError::config(format!("initial: {e}")))?
                    .value
            }
        };
        let system =
            ImpulsiveSystem::new(mode, order, schedule, g, maps, x0).map_err(|e| CliError::config(e.to_string()))?;
        let mesh = MeshSpec::new(points.unwrap_or(self.mesh.points_per_interval), self.mesh.grading)
            .map_err(|e| CliError::config(e.to_string()))?;
        let lyapunov = match &self.lyapunov {
            None => None,
            Some(l) => {
                if l.grid_stride == 0 {
                    return Err(CliError::config("lyapunov.grid_stride must be at least 1"));
                }
                let v = parse_expr(&l.v, "lyapunov.v")?;
                Some(
                    LyapunovSpec::new(v, l.alpha1, l.alpha2, l.alpha3, l.alpha4, l.a, l.b)
                        .map_err(|e| CliError::config(e.to_string()))?,
                )
            }
        };
        if let Some(c) = &self.contraction {
            if !(c.lipschitz >= 0.0) || c.impulse_lipschitz.iter().any(|v| !(*v >= 0.0)) {
                return Err(CliError::config("contraction constants must be non-negative"));
            }
        }
        if self.output.trajectory.is_empty() {
            return Err(CliError::config("output.trajectory must not be empty"));
        }
        Ok(Prepared {
            config: self,
            system,
            mesh,
            lyapunov,
        })
    }
}

// ---------------------------------------------------------------------------
// output

/// CSV text for a trajectory, one row per stored node.
pub fn trajectory_csv(traj: &PiecewiseTrajectory) -> String {
    let mut out = String::with_capacity(96 * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in traj.samples() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{}",
            s.t,
            s.x,
            s.weighted_x,
            s.kind.name(),
            s.index
        );
    }
    out
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, content).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// commands

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out: dir,
            points,
        } => cmd_simulate(&config, &dir, points, out),
        Command::ReproduceExample { nu, out: dir, points } => cmd_reproduce_example(&nu, &dir, points, out),
        Command::Check {
            config,
            envelope_param,
            points,
        } => cmd_check(&config, envelope_param, points, out),
        Command::Selftest { points, suite } => cmd_selftest(points, suite, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn cmd_simulate(config: &Path, dir: &Path, points: Option<usize>, out: &mut dyn Write) -> Result<i32, CliError> {
    let prepared = RunConfig::load(config)?.prepare(points)?;
    let traj = solve(&prepared.system, &prepared.mesh).map_err(|e| CliError::numeric(e.to_string()))?;
    let path = dir.join(&prepared.config.output.trajectory);
    write_file(&path, &trajectory_csv(&traj))?;
    let _ = writeln!(out, "wrote {} ({} rows)", path.display(), traj.samples().len());
    Ok(EXIT_OK)
}

/// The worked example: μ = 0.4, g = t, tᵢ = i, pᵢ = i + 1/2, φᵢ = t - i x + y, x₀ = 1 on (0, 2.5].
pub fn example_system(nu: f64) -> Result<ImpulsiveSystem, CliError> {
    let order = HilferOrder::new(0.4, nu).map_err(|e| CliError::config(format!("nu = {nu}: {e}")))?;
    let schedule = ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0, 2.0], vec![0.5, 1.5, 2.5], 2.5)
        .map_err(|e| CliError::config(e.to_string()))?;
    let maps = (0..2)
        .map(|i| parse_expr(&format!("t - {i}*x + y"), "impulse map"))
        .collect::<Result<Vec<_>, _>>()?;
    ImpulsiveSystem::new(
        Mode::NonInstantaneous,
        order,
        schedule,
        parse_expr("t", "g")?,
        maps,
        1.0,
    )
    .map_err(|e| CliError::config(e.to_string()))
}

pub fn parse_nu_list(text: &str) -> Result<Vec<f64>, CliError> {
    let list = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::config(format!("cannot parse nu value {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err(CliError::config("the nu list is empty"));
    }
    if let Some(nu) = list.iter().find(|nu| !(0.0..=1.0).contains(*nu)) {
        return Err(CliError::config(format!("nu = {nu} outside [0, 1]")));
    }
    Ok(list)
}

/// File name of the trace for one ν.
pub fn trace_file_name(nu: f64) -> String {
    format!("trace_nu_{nu}.csv")
}

pub const CLOSED_FORM_FILE: &str = "closed_form.csv";

fn cmd_reproduce_example(
    nu_text: &str,
    dir: &Path,
    points: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let nus = parse_nu_list(nu_text)?;
    let mesh = MeshSpec::new(points.unwrap_or(64), None).map_err(|e| CliError::config(e.to_string()))?;
    let systems = nus
        .iter()
        .map(|&nu| example_system(nu))
        .collect::<Result<Vec<_>, _>>()?;
    // independent trajectories, solved concurrently; files are written afterwards
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = systems
            .iter()
            .map(|sys| scope.spawn(move || solve(sys, &mesh)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    for (nu, traj) in nus.iter().zip(results) {
        let traj = traj.map_err(|e| CliError::numeric(format!("nu = {nu}: {e}")))?;
        let path = dir.join(trace_file_name(*nu));
        write_file(&path, &trajectory_csv(&traj))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    // closed form at the nodes of the ν = 1 mesh
    let reference = solve(&example_system(1.0)?, &mesh).map_err(|e| CliError::numeric(e.to_string()))?;
    let order = reference.order;
    let mut times: Vec<f64> = reference.samples().iter().map(|s| s.t).filter(|&t| t > 0.0).collect();
    times.dedup();
    let mut csv = String::from("t,x\n");
    for t in times {
        let x = closed_form_example(t, order, 1.0).map_err(|e| CliError::numeric(e.to_string()))?;
        let _ = writeln!(csv, "{t:.16e},{x:.16e}");
    }
    let path = dir.join(CLOSED_FORM_FILE);
    write_file(&path, &csv)?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(EXIT_OK)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_check(
    config: &Path,
    envelope_param: Option<EnvelopeArg>,
    points: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let prepared = RunConfig::load(config)?.prepare(points)?;
    let cfg = &prepared.config;
    if cfg.contraction.is_none() && prepared.lyapunov.is_none() {
        return Err(CliError::config(
            "nothing to check: the config has neither a contraction nor a lyapunov section",
        ));
    }
    let sys = &prepared.system;
    let mut report = String::new();
    let mut all_ok = true;

    if let Some(c) = &cfg.contraction {
        let r = contraction_constant(
            c.lipschitz,
            &c.impulse_lipschitz,
            sys.order,
            &sys.schedule,
            sys.mode,
            c.p,
        )
        .map_err(|e| CliError::config(format!("contraction: {e}")))?;
        all_ok &= r.contraction;
        let _ = writeln!(report, "contraction");
        let _ = writeln!(report, "  K = {:.6} ({:.16e})", r.k, r.k);
        let _ = writeln!(report, "  p_used = {:.16e}", r.p_used);
        let _ = writeln!(report, "  term max I_i = {:.16e}", r.terms[0]);
        let _ = writeln!(report, "  term first interval = {:.16e}", r.terms[1]);
        let _ = writeln!(report, "  term later intervals = {:.16e}", r.terms[2]);
        let _ = writeln!(report, "  contraction (K < 1): {}", verdict(r.contraction));
    }

    if let Some(lyap) = &prepared.lyapunov {
        let stride = cfg.lyapunov.as_ref().map_or(1, |l| l.grid_stride);
        let traj = solve(sys, &prepared.mesh).map_err(|e| CliError::numeric(e.to_string()))?;
        let lr = verify_lyapunov(sys, &traj, lyap, stride).map_err(|e| CliError::numeric(e.to_string()))?;
        let _ = writeln!(report, "lyapunov");
        for c in &lr.checks {
            if c.points == 0 {
                let _ = writeln!(report, "  {:<28} no points to check: {}", c.name, verdict(c.passed));
                continue;
            }
            let _ = writeln!(
                report,
                "  {:<28} worst margin {:+.6e} at t = {:.6} over {} points (tol {:.0e}): {}",
                c.name,
                c.worst_margin,
                c.at,
                c.points,
                c.tolerance,
                verdict(c.passed)
            );
        }
        all_ok &= lr.passed;
        let param = envelope_param.unwrap_or(cfg.envelope_param).into();
        let cert = StabilityCertificate::new(lyap.clone(), sys.order, &sys.schedule, sys.mode, param)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        let cert = check_envelope_dominance(&traj, &cert, &sys.schedule, sys.mode)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        all_ok &= cert.verdict;
        let _ = writeln!(report, "envelope");
        let _ = writeln!(
            report,
            "  h = {:.16e}, gamma = {:.16e}, intervals = {}",
            cert.h, cert.gamma, cert.interval_count_checked
        );
        let _ = writeln!(
            report,
            "  dominance margin = {:+.6e}: {}",
            cert.margin,
            verdict(cert.verdict)
        );
    }
    let _ = writeln!(report, "overall: {}", verdict(all_ok));
    let _ = out.write_all(report.as_bytes());
    Ok(if all_ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

// ---------------------------------------------------------------------------
// self-test suites

/// One comparison within a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub label: String,
    pub error: f64,
    /// Error on the doubled mesh, where the suite has one.
    pub refined: Option<f64>,
    pub tolerance: f64,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(SuiteRow::passed)
    }
}

pub const CLOSED_FORM_TOL: f64 = 5e-3;
pub const COMPOSITION_TOL: f64 = 1e-2;
pub const LAPLACE_TOL: f64 = 1e-6;

const SUITE_TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Samples `s^{δ-1}` on a graded mesh over `[0, 1]`.
pub fn power_samples(delta: f64, points: usize, grading: f64) -> Result<SampledFn, CliError> {
    let grid = graded_grid(0.0, 1.0, points, grading);
    let f = if delta >= 1.0 {
        SampledFn::from_fn(grid, |s| s.powf(delta - 1.0))
    } else {
        SampledFn::from_weighted(grid, delta, |_| 1.0)
    };
    f.map_err(|e| CliError::numeric(e.to_string()))
}

/// Max error of `I^μ` and `D^{μ,ν}` applied to `s^{δ-1}` against their closed
/// forms at fixed times, over the standard grid of orders and exponents.
/// The power `s^{λ-1}` must map to 0 under the derivative.
pub fn suite_closed_form(points: usize) -> Result<SuiteReport, CliError> {
    let num = |e: crate::fraccalc::FracError| CliError::numeric(e.to_string());
    let mut rows = Vec::new();
    for mu in [0.3, 0.4, 0.7] {
        for nu in [0.0, 0.5, 1.0] {
            let order = HilferOrder::new(mu, nu).map_err(num)?;
            let lam = order.lam();
            let integral_error = |n: usize, delta: f64| -> Result<f64, CliError> {
                let f = power_samples(delta, n, 1.0 / lam)?;
                let mut worst: f64 = 0.0;
                for t in SUITE_TIMES {
                    let want = frac_integral_power(mu, delta, t, 0.0).map_err(num)?;
                    worst = worst.max((frac_integral_quad(mu, &f, t).map_err(num)? - want).abs());
                }
                Ok(worst)
            };
            let deriv_error = |n: usize, delta: f64| -> Result<f64, CliError> {
                let f = power_samples(delta, n, 1.0 / lam)?;
                let got = hilfer_deriv_quad_many(order, &f, &SUITE_TIMES).map_err(num)?;
                let mut worst: f64 = 0.0;
                for (t, v) in SUITE_TIMES.into_iter().zip(got) {
                    let want = hilfer_deriv_power(order, delta, t, 0.0).map_err(num)?;
                    worst = worst.max((v - want).abs());
                }
                Ok(worst)
            };
            for delta in [0.7, 1.0, 1.5, 2.0] {
                rows.push(SuiteRow {
                    label: format!("I^{mu} s^{:.1} (nu={nu})", delta - 1.0),
                    error: integral_error(points, delta)?,
                    refined: Some(integral_error(2 * points, delta)?),
                    tolerance: CLOSED_FORM_TOL,
                });
                // below λ the power leaves the weighted space
                if delta >= lam {
                    rows.push(SuiteRow {
                        label: format!("D^({mu},{nu}) s^{:.1}", delta - 1.0),
                        error: deriv_error(points, delta)?,
                        refined: Some(deriv_error(2 * points, delta)?),
                        tolerance: CLOSED_FORM_TOL,
                    });
                }
            }
            rows.push(SuiteRow {
                label: format!("D^({mu},{nu}) s^(lambda-1) = 0"),
                error: deriv_error(points, lam)?,
                refined: Some(deriv_error(2 * points, lam)?),
                tolerance: CLOSED_FORM_TOL,
            });
        }
    }
    Ok(SuiteReport {
        name: "closed-form",
        rows,
    })
}

/// Both composition residuals for polynomials on `[0, 1]`, worst over the
/// check times.
pub fn suite_composition(points: usize) -> Result<SuiteReport, CliError> {
    let num = |e: crate::fraccalc::FracError| CliError::numeric(e.to_string());
    type Poly = (&'static str, fn(f64) -> f64);
    let polys: [Poly; 3] = [
        ("1+s", |s| 1.0 + s),
        ("s^2", |s| s * s),
        ("1-2s+3s^3", |s| 1.0 - 2.0 * s + 3.0 * s * s * s),
    ];
    let mut rows = Vec::new();
    for (mu, nu) in [(0.4, 1.0), (0.4, 0.5), (0.7, 0.5), (0.3, 0.0)] {
        let order = HilferOrder::new(mu, nu).map_err(num)?;
        for (name, p) in polys {
            let residual = |n: usize| -> Result<(f64, f64), CliError> {
                let f = SampledFn::from_fn(graded_grid(0.0, 1.0, n, 1.0 / order.lam()), p).map_err(num)?;
                let mut worst = (0.0f64, 0.0f64);
                for t in SUITE_TIMES {
                    let (a, b) = composition_residuals(order, &f, t).map_err(num)?;
                    worst = (worst.0.max(a), worst.1.max(b));
                }
                Ok(worst)
            };
            let (coarse, fine) = (residual(points)?, residual(2 * points)?);
            rows.push(SuiteRow {
                label: format!("D I f - f, f={name} ({mu},{nu})"),
                error: coarse.0,
                refined: Some(fine.0),
                tolerance: COMPOSITION_TOL,
            });
            rows.push(SuiteRow {
                label: format!("I D f - f + corr, f={name} ({mu},{nu})"),
                error: coarse.1,
                refined: Some(fine.1),
                tolerance: COMPOSITION_TOL,
            });
        }
    }
    Ok(SuiteReport {
        name: "composition",
        rows,
    })
}

/// Laplace-transform residuals of `t^{λ-1} E_{μ,λ}(-γ t^μ)`.
pub fn suite_laplace() -> Result<SuiteReport, CliError> {
    let cases = [
        (1.0, 1.0, 1.0, 2.0, 40.0),
        (0.4, 1.0, 1.0, 1.0, 60.0),
        (0.5, 0.5, 0.0, 1.0, 60.0),
    ];
    let mut rows = Vec::new();
    for (mu, lam, gamma, s, horizon) in cases {
        let p = MLParams::new(mu, lam).map_err(|e| CliError::numeric(e.to_string()))?;
        let r = ml_laplace_residual(p, gamma, s, horizon).map_err(|e| CliError::numeric(e.to_string()))?;
        rows.push(SuiteRow {
            label: format!("mu={mu} lam={lam} gamma={gamma} s={s} T={horizon}"),
            error: r,
            refined: None,
            tolerance: LAPLACE_TOL,
        });
    }
    Ok(SuiteReport { name: "laplace", rows })
}

fn cmd_selftest(points: usize, suite: Option<Suite>, out: &mut dyn Write) -> Result<i32, CliError> {
    if points < MeshSpec::MIN_POINTS {
        return Err(CliError::config(format!(
            "--points must be at least {}",
            MeshSpec::MIN_POINTS
        )));
    }
    let wanted = |s: Suite| suite.is_none_or(|w| w == s);
    let mut reports = Vec::new();
    if wanted(Suite::ClosedForm) {
        reports.push(suite_closed_form(points)?);
    }
    if wanted(Suite::Composition) {
        reports.push(suite_composition(points)?);
    }
    if wanted(Suite::Laplace) {
        reports.push(suite_laplace()?);
    }
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<12} {:<44} {:>12} {:>12} {:>8}  result",
        "suite",
        "case",
        format!("err(N={points})"),
        "err(2N)",
        "tol"
    );
    for r in &reports {
        for row in &r.rows {
            let refined = row.refined.map_or("-".to_string(), |v| format!("{v:.3e}"));
            let _ = writeln!(
                text,
                "{:<12} {:<44} {:>12.3e} {:>12} {:>8.0e}  {}",
                r.name,
                row.label,
                row.error,
                refined,
                row.tolerance,
                verdict(row.passed())
            );
        }
    }
    for r in &reports {
        let _ = writeln!(text, "suite {}: {}", r.name, verdict(r.passed()));
    }
    let ok = reports.iter().all(SuiteReport::passed);
    let _ = writeln!(text, "overall: {}", verdict(ok));
    let _ = out.write_all(text.as_bytes());
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}
