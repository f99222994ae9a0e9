//! Command-line front end: `mesh`, `solve`, `convergence` and `check`.

use crate::error::{EsfemError, Result};
use crate::experiments::{
    elliptic_convergence_test, emit_plot_script, run_convergence_study, write_csv,
    write_report, ConvergenceConfig, ErrorAccumulator, ErrorTable,
};
use crate::geometry::Problem;
use crate::mesh::{write_mesh, EvolvingMesh, MAX_LEVEL};
use crate::timestepping::{
    bdf_delta, bdf_gamma, check_algebraic_stability, integrate_observed, radau_iia,
    zero_stability, IntegrateOptions, Integrator, NonlinearSolveConfig, SemiDiscrete,
    StartValues, INTEGRATOR_GRAMMAR,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const SOLVE_SCHEMA: &str = "\
CONFIG (JSON, every field optional):
  {
    \"level\": 2,                  icosphere refinement level, 0..=8
    \"integrator\": \"be\",          be | bdf<k> | libdf<k> (k = 1..5) | radau<s> (s = 1..3)
    \"tau\": 0.00625,              step size; must divide T
    \"T\": 1.0,                    final time
    \"lift_quadrature\": false,    evaluate the load at nodes projected onto the surface
    \"start\": \"radau2\",           BDF start values: radau2 | exact
    \"nonlinear\": {\"strategy\": \"newton\", \"rel_tol\": 1e-10, \"max_iter\": 50},
    \"problem\": {
      \"surface\": {\"kind\": \"oscillating_ellipsoid\", \"amplitude\": 0.25, \"period\": 1.0},
      \"coefficient\": \"gaussian\"            or {\"constant\": c},
      \"solution\": {\"decaying_product\": {\"rate\": 6.0}}
                  or {\"affine\": {\"gradient\": [g1, g2, g3], \"offset\": c}},
      \"forcing\": \"manufactured\"            or \"zero\"
    }
  }
The report `solve.json` is written to --out-dir.";

const CONVERGENCE_SCHEMA: &str = "\
CONFIG (JSON, every field optional; command-line flags override it):
  {
    \"levels\": {\"start\": 1, \"end\": 4},  row indices; mesh level of a row unless fixed_level is set
    \"tau0\": 0.1,                     step of the first row
    \"tau_refinement\": 4,             step divisor between consecutive rows
    \"integrator\": \"be\",
    \"T\": 1.0,
    \"lift_quadrature\": false,
    \"fixed_level\": null,             set to run a temporal study on that mesh level
    \"reference\": {\"integrator\": \"radau3\", \"refinement\": 8},
                                     temporal studies: reference step = finest step / refinement
    \"start\": \"radau2\",
    \"nonlinear\": {\"strategy\": \"newton\", \"rel_tol\": 1e-10, \"max_iter\": 50},
    \"problem\": { ... as for `solve` }
  }
Writes convergence.csv, convergence.gp (gnuplot) and convergence.json to --out-dir;
with --elliptic the files are named elliptic.*.";

#[derive(Debug, Parser)]
#[command(name = "esfem", version, about = "Evolving surface finite elements for a quasilinear parabolic problem")]
pub struct Cli {
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for independent levels; never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress progress and table output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the icosphere mesh evolved to time t.
    Mesh(MeshArgs),
    /// Run one (level, integrator, tau) solve and write a JSON report.
    #[command(after_help = SOLVE_SCHEMA)]
    Solve(SolveArgs),
    /// Run a convergence study and write CSV, plot script and JSON report.
    #[command(after_help = CONVERGENCE_SCHEMA)]
    Convergence(ConvergenceArgs),
    /// Print coefficients and stability checks of an integrator.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Refinement level.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=MAX_LEVEL as i64))]
    pub level: u8,
    /// Time at which the surface is sampled.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Output path; defaults to mesh_l<level>.txt in --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON configuration (see below).
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// JSON configuration (see below).
    pub config: Option<PathBuf>,
    /// Integrator spec.
    #[arg(long)]
    pub integrator: Option<Integrator>,
    /// Step divisor between consecutive rows.
    #[arg(long)]
    pub tau_refinement: Option<usize>,
    /// Keep the mesh at this level and study the temporal error.
    #[arg(long)]
    pub fixed_level: Option<usize>,
    /// Row range, e.g. 1..4 (inclusive).
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<RangeInclusive<usize>>,
    /// Step of the first row.
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Run the stationary elliptic test instead.
    #[arg(long)]
    pub elliptic: bool,
    /// Surface time of the elliptic test.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Integrator spec.
    #[arg(value_name = "INTEGRATOR", help = format!("One of {INTEGRATOR_GRAMMAR}"))]
    pub integrator: String,
}

fn parse_levels(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected FIRST..LAST, got '{s}'"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let first = a.trim().parse().map_err(|_| format!("bad level '{a}'"))?;
    let last = b.trim().parse().map_err(|_| format!("bad level '{b}'"))?;
    Ok(first..=last)
}

/// Configuration of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub level: usize,
    pub integrator: Integrator,
    pub tau: f64,
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: f64,
    pub lift_quadrature: bool,
    pub start: StartValues,
    pub nonlinear: NonlinearSolveConfig,
    pub problem: Problem,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            level: 2,
            integrator: Integrator::BackwardEuler,
            tau: 0.00625,
            t_end: 1.0,
            lift_quadrature: false,
            start: StartValues::default(),
            nonlinear: NonlinearSolveConfig::default(),
            problem: Problem::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFailure {
    pub step: Option<usize>,
    pub time: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: SolveConfig,
    pub dof: usize,
    pub steps: usize,
    pub nonlinear_iterations: usize,
    pub err_linf_l2: f64,
    pub err_l2_h1: f64,
    /// `|α_N − I_h u(T)|_M`.
    pub final_error_l2: f64,
    pub failure: Option<SolveFailure>,
}

pub fn exit_code(e: &EsfemError) -> i32 {
    match e {
        EsfemError::Io(_) => EXIT_IO,
        EsfemError::InvalidArgument(_) | EsfemError::DimensionMismatch { .. } => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Standard-output sink honouring `--quiet`.
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| EsfemError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                EsfemError::InvalidArgument(format!("{}: {e}", p.display()))
            })
        }
    }
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| EsfemError::Io(format!("cannot serialise: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn cmd_mesh(args: &MeshArgs, out_dir: &Path, console: &Console) -> Result<i32> {
    let level = args.level as usize;
    let mesh = EvolvingMesh::icosphere(level, Default::default())?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("mesh_l{level}.txt")));
    let at = mesh.at(args.t);
    write_mesh(&path, &at.positions, at.triangles)?;
    console.say(format!(
        "level {level}  t {}  vertices {}  faces {}  h {:.6e}  admissibility {:.6}",
        args.t,
        mesh.n_vertices(),
        at.triangles.len(),
        at.mesh_size()?,
        at.admissibility()?
    ));
    console.say(format!("wrote {}", path.display()));
    Ok(EXIT_OK)
}

pub fn run_solve(config: &SolveConfig) -> Result<SolveReport> {
    if config.level > MAX_LEVEL {
        return Err(EsfemError::InvalidArgument(format!(
            "level must lie in 0..={MAX_LEVEL}, got {}",
            config.level
        )));
    }
    config.problem.surface.validate()?;
    let mesh = EvolvingMesh::icosphere(config.level, config.problem.surface)?;
    let sys =
        SemiDiscrete::new(config.problem, &mesh).with_lifted_quadrature(config.lift_quadrature);
    let options = IntegrateOptions {
        nonlinear: config.nonlinear,
        start: config.start,
    };
    let init = sys.interpolate_exact(0.0);
    let mut acc = ErrorAccumulator::new(&mesh, config.tau);
    let mut last = (0, 0.0);
    let mut final_error = 0.0;
    let mut measure_error = None;
    let outcome = integrate_observed(
        &sys,
        config.integrator,
        config.tau,
        config.t_end,
        &init,
        &options,
        |n, t, alpha| {
            last = (n, t);
            let target = sys.interpolate_exact(t);
            let measured = acc.push(n, t, alpha, &target).and_then(|_| {
                let m = sys.mass(&sys.at(t))?;
                crate::assembly::discrete_norm_m(&m, &crate::linalg::sub(alpha, &target))
            });
            match measured {
                Ok(e) => final_error = e,
                Err(e) => {
                    measure_error.get_or_insert(e);
                }
            }
        },
    );
    if let Some(e) = measure_error {
        return Err(e);
    }
    let mut report = SolveReport {
        config: config.clone(),
        dof: mesh.n_vertices(),
        steps: last.0,
        nonlinear_iterations: 0,
        err_linf_l2: acc.linf_l2(),
        err_l2_h1: acc.l2_h1(),
        final_error_l2: final_error,
        failure: None,
    };
    match outcome {
        Ok(summary) => report.nonlinear_iterations = summary.nonlinear_iterations,
        Err(e) if !e.is_numerical() => return Err(e),
        Err(e) => {
            let (step, time) = match &e {
                EsfemError::StepFailed { step, time, .. } => (Some(*step), Some(*time)),
                _ => (None, None),
            };
            report.failure = Some(SolveFailure {
                step,
                time,
                error: e.to_string(),
            });
        }
    }
    Ok(report)
}

pub fn cmd_solve(args: &SolveArgs, out_dir: &Path, console: &Console) -> Result<i32> {
    let config: SolveConfig = read_json(args.config.as_deref())?;
    let report = run_solve(&config)?;
    let path = out_dir.join("solve.json");
    write_json(&report, &path)?;
    match &report.failure {
        None => {
            console.say(format!(
                "{} level {} tau {}: L∞(L²) {:.6e}  L²(H¹) {:.6e}  final L² {:.6e}",
                config.integrator,
                config.level,
                config.tau,
                report.err_linf_l2,
                report.err_l2_h1,
                report.final_error_l2
            ));
            console.say(format!("wrote {}", path.display()));
            Ok(EXIT_OK)
        }
        Some(f) => {
            eprintln!("solve failed: {}", f.error);
            Ok(EXIT_NUMERICAL)
        }
    }
}

fn render_table(table: &ErrorTable) -> String {
    let mut s = format!(
        "{:>5} {:>7} {:>12} {:>12} {:>14} {:>7} {:>14} {:>7}\n",
        "level", "dof", "h", "tau", "err_linf_l2", "eoc", "err_l2_h1", "eoc"
    );
    let eoc = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_default();
    for r in &table.rows {
        s.push_str(&format!(
            "{:>5} {:>7} {:>12.5e} {:>12.5e} {:>14.6e} {:>7} {:>14.6e} {:>7}\n",
            r.level,
            r.dof,
            r.h,
            r.tau,
            r.err_linf_l2,
            eoc(r.eoc_linf_l2),
            r.err_l2_h1,
            eoc(r.eoc_l2_h1)
        ));
    }
    s
}

pub fn convergence_config(args: &ConvergenceArgs) -> Result<ConvergenceConfig> {
    let mut config: ConvergenceConfig = read_json(args.config.as_deref())?;
    if let Some(i) = args.integrator {
        config.integrator = i;
    }
    if let Some(r) = args.tau_refinement {
        config.tau_refinement = r;
    }
    if let Some(l) = args.fixed_level {
        config.fixed_level = Some(l);
    }
    if let Some(l) = &args.levels {
        config.levels = l.clone();
    }
    if let Some(t) = args.tau0 {
        config.tau0 = t;
    }
    if let Some(t) = args.t_end {
        config.t_end = t;
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_convergence(args: &ConvergenceArgs, out_dir: &Path, console: &Console) -> Result<i32> {
    let config = convergence_config(args)?;
    let (stem, table) = if args.elliptic {
        ("elliptic", elliptic_convergence_test(config.levels.clone(), args.t)?)
    } else {
        ("convergence", run_convergence_study(&config)?)
    };
    write_csv(&table, &out_dir.join(format!("{stem}.csv")))?;
    emit_plot_script(&table, &out_dir.join(format!("{stem}.gp")))?;
    write_report(&config, &table, &out_dir.join(format!("{stem}.json")))?;
    console.say(render_table(&table));
    if let Some((a, b)) = table.final_eocs() {
        console.say(format!("final EOCs: {a:.3} {b:.3}"));
    }
    match &table.failure {
        None => Ok(EXIT_OK),
        Some(f) => {
            eprintln!("level {} failed: {}", f.level, f.error);
            Ok(if f.numerical { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.12}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn check_report(integrator: Integrator) -> Result<(bool, String)> {
    let mut s = format!("{integrator} (order {})\n", integrator.order());
    let pass = match integrator {
        Integrator::BackwardEuler | Integrator::Bdf(_) | Integrator::LinearlyImplicitBdf(_) => {
            let k = match integrator {
                Integrator::Bdf(k) | Integrator::LinearlyImplicitBdf(k) => k,
                _ => 1,
            };
            s += &format!("delta: {}\n", fmt_list(&bdf_delta(k)?));
            s += &format!("gamma: {}\n", fmt_list(&bdf_gamma(k)?));
            let z = zero_stability(k)?;
            s += &format!("root moduli: {}\n", fmt_list(&z.moduli));
            s += &format!(
                "zero stability: {}\n",
                if z.stable { "PASS" } else { "FAIL" }
            );
            z.stable
        }
        Integrator::Radau(stages) => {
            let t = radau_iia(stages)?;
            for (i, row) in t.a.iter().enumerate() {
                s += &format!("c{} = {:.12} | {}\n", i + 1, t.c[i], fmt_list(row));
            }
            s += &format!("b = {}\n", fmt_list(&t.b));
            let stiff = t.is_stiffly_accurate(1e-14);
            s += &format!("stiffly accurate: {}\n", if stiff { "PASS" } else { "FAIL" });
            let defects = t.quadrature_order_defects();
            let order_ok = defects.iter().all(|d| d.abs() < 1e-12);
            s += &format!(
                "quadrature order defects: {} {}\n",
                fmt_list(&defects),
                if order_ok { "PASS" } else { "FAIL" }
            );
            let alg = check_algebraic_stability(&t);
            s += &format!("algebraic stability eigenvalues: {}\n", fmt_list(&alg.eigenvalues));
            s += &format!(
                "algebraic stability: {}\n",
                if alg.stable { "PASS" } else { "FAIL" }
            );
            stiff && order_ok && alg.stable && t.is_invertible()
        }
    };
    s += if pass { "PASS" } else { "FAIL" };
    Ok((pass, s))
}

pub fn cmd_check(args: &CheckArgs, console: &Console) -> Result<i32> {
    let integrator: Integrator = args.integrator.parse()?;
    let (pass, text) = check_report(integrator)?;
    console.say(text);
    Ok(if pass { EXIT_OK } else { EXIT_NUMERICAL })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let console = Console { quiet: cli.quiet };
    if !matches!(cli.command, Command::Check(_)) {
        fs::create_dir_all(&cli.out_dir)?;
    }
    match &cli.command {
        Command::Mesh(a) => cmd_mesh(a, &cli.out_dir, &console),
        Command::Solve(a) => cmd_solve(a, &cli.out_dir, &console),
        Command::Convergence(a) => cmd_convergence(a, &cli.out_dir, &console),
        Command::Check(a) => cmd_check(a, &console),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let work = || match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    match cli.threads {
        None => work(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                eprintln!("error: cannot start {n} threads: {e}");
                EXIT_USAGE
            }
        },
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("1..4").unwrap(), 1..=4);
        assert_eq!(parse_levels("2..=5").unwrap(), 2..=5);
        assert!(parse_levels("3").is_err());
        assert!(parse_levels("a..2").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&EsfemError::Io("x".into())), EXIT_IO);
        assert_eq!(exit_code(&EsfemError::InvalidArgument("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code(&EsfemError::NonlinearSolveFailed {
                iterations: 1,
                trace: vec![]
            }),
            EXIT_NUMERICAL
        );
    }

    #[test]
    fn check_reports() {
        for spec in ["be", "bdf1", "bdf5", "libdf3", "radau1", "radau2", "radau3"] {
            let (pass, text) = check_report(spec.parse().unwrap()).unwrap();
            assert!(pass, "{spec}: {text}");
            assert!(text.ends_with("PASS"));
        }
        let (_, text) = check_report(Integrator::Radau(2)).unwrap();
        assert!(text.contains("algebraic stability eigenvalues"));
        let (_, text) = check_report(Integrator::Bdf(5)).unwrap();
        assert!(text.contains("root moduli"));
    }

    #[test]
    fn solve_config_json() {
        let c: SolveConfig = serde_json::from_str(r#"{"integrator": "radau2", "T": 0.5}"#).unwrap();
        assert_eq!(c.integrator, Integrator::Radau(2));
        assert_eq!(c.t_end, 0.5);
        assert_eq!(c.level, 2);
        let err = serde_json::from_str::<SolveConfig>(r#"{"integrator": "rk4"}"#).unwrap_err();
        assert!(err.to_string().contains("bdf<k>"));
        assert!(serde_json::from_str::<SolveConfig>(r#"{"levle": 2}"#).is_err());
    }
}
