//! `gpme`: command-line front door to the graph GPME solvers. Loads
//! graphs, nonlinearities and node functions from files or inline specs,
//! dispatches resolve/evolve/check runs, and emits JSON results plus
//! plot-ready CSV.
//!
//! Exit codes: 0 success, 1 domain refusal (hypothesis violations, flag
//! contradictions, non-convergence, required truncation, failed check
//! suites), 2 I/O, parse or usage errors. Every failure writes one JSON
//! diagnostic line {code, reason, context} to stderr.

mod logging;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use gpme_core::error::{GpmeError, Result};
use gpme_core::evolution::{
    classic_regime_check, classic_regime_check_lazy, evolve, evolve_lazy, evolve_mild, Forcing,
};
use gpme_core::graph::{family, Graph, LazyGraph, WithoutFlags};
use gpme_core::node_function::NodeFunction;
use gpme_core::nonlinearity::Nonlinearity;
use gpme_core::resolvent::{
    solve_componentwise, solve_exhaustion, ResolventProblem, SolverOptions,
};
use gpme_core::verification::{run_suite, Suite};

use output::{EvolveOutput, ResolveOutput};

#[derive(Parser)]
#[command(
    name = "gpme",
    version,
    about = "Nonlinear diffusion (generalized porous medium equation) on weighted graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the resolvent equation (id + λΔΦ)u = g
    Resolve(ResolveArgs),
    /// Run the implicit-Euler scheme for ∂ₜu + ΔΦu = f on [0, T]
    Evolve(EvolveArgs),
    /// Run a named randomized verification suite
    Check(CheckArgs),
    /// Convert a result JSON into plot-ready CSV
    EmitPlot(EmitPlotArgs),
}

/// Exactly one graph source: a finite graph file or a built-in lazy
/// family.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// Finite graph JSON file {"nodes":[{"id","mu","kappa"}],"edges":[...]}
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
    /// Built-in lazy family: name (half_line, integer_lattice_1d,
    /// binary_tree, star_infinite) or JSON spec {"family":...,...}
    #[arg(long, value_name = "NAME|JSON")]
    family: Option<String>,
}

#[derive(Args)]
struct ResolveArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Nonlinearity spec, e.g. '{"family":"power_law","m":2}'
    #[arg(long, value_name = "JSON")]
    phi: String,
    /// Resolvent parameter λ > 0
    #[arg(long)]
    lambda: f64,
    /// Right-hand side g (.json or .csv node function)
    #[arg(long, value_name = "FILE")]
    g: PathBuf,
    /// Relative residual tolerance of the inner solver
    #[arg(long, default_value_t = 1e-10)]
    residual_tol: f64,
    /// Exhaustion stopping tolerance (families only)
    #[arg(long, default_value_t = 1e-10)]
    exhaustion_tol: f64,
    /// Exhaustion level cap (families only)
    #[arg(long, default_value_t = 80)]
    max_level: usize,
    /// Node-count budget for exhaustion truncations (families only)
    #[arg(long, default_value_t = 20_000)]
    node_budget: usize,
    /// Withhold the family's hypothesis flags (exercises refusal paths)
    #[arg(long, requires = "family")]
    no_assert_flags: bool,
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Nonlinearity spec, e.g. '{"family":"power_law","m":2}'
    #[arg(long, value_name = "JSON")]
    phi: String,
    /// Initial datum u0 (.json or .csv node function)
    #[arg(long, value_name = "FILE")]
    u0: PathBuf,
    /// Forcing JSON file ({"kind":"zero"|"constant"|"piecewise_constant",...});
    /// zero when omitted
    #[arg(long, value_name = "FILE")]
    forcing: Option<PathBuf>,
    /// Final time T > 0
    #[arg(long, value_name = "T")]
    t_final: f64,
    /// Time step bound ε > 0
    #[arg(long)]
    epsilon: f64,
    /// Refine ε until consecutive trajectories agree within --mild-tol
    /// (finite graphs only)
    #[arg(long)]
    mild: bool,
    /// Trajectory agreement tolerance for --mild
    #[arg(long, default_value_t = 1e-6)]
    mild_tol: f64,
    /// Relative residual tolerance of the inner solver
    #[arg(long, default_value_t = 1e-10)]
    residual_tol: f64,
    /// Per-step exhaustion stopping tolerance (families only)
    #[arg(long, default_value_t = 1e-10)]
    exhaustion_tol: f64,
    /// Exhaustion level cap (families only)
    #[arg(long, default_value_t = 80)]
    max_level: usize,
    /// Node-count budget for exhaustion truncations (families only)
    #[arg(long, default_value_t = 20_000)]
    node_budget: usize,
    /// Withhold the family's hypothesis flags (exercises refusal paths)
    #[arg(long, requires = "family")]
    no_assert_flags: bool,
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Suite: accretivity, contractivity, comparison, mass, exhaustion,
    /// heat-order
    suite: String,
    /// Seed of the case generator (no ambient entropy is ever used)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of cases (suite-specific default when omitted)
    #[arg(long)]
    cases: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    /// Pick from the input kind: solution for resolvent results,
    /// trajectory for evolution results
    Auto,
    /// node,value rows of a resolvent solution
    Solution,
    /// t,node,value rows over all evolution states
    Trajectory,
    /// t,l1_norm,mass rows of the evolution summary
    Norms,
}

#[derive(Args)]
struct EmitPlotArgs {
    /// Result JSON produced by resolve or evolve
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// What to emit
    #[arg(long, value_enum, default_value_t = PlotKind::Auto)]
    what: PlotKind,
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        GpmeError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => fs::write(path, content).map_err(|e| {
            GpmeError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        }),
    }
}

fn load_node_function(path: &Path) -> Result<NodeFunction> {
    let text = read_file(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => NodeFunction::from_csv_str(&text),
        Some("json") => NodeFunction::from_json_str(&text),
        other => Err(GpmeError::InvalidArgument(format!(
            "node function files must end in .json or .csv, got `{}`",
            other.unwrap_or("")
        ))),
    }
}

fn load_family(spec: &str, no_assert_flags: bool) -> Result<Box<dyn LazyGraph>> {
    let fam = family::from_cli_spec(spec)?;
    logging::info(format!("family graph: {}", fam.describe()));
    if no_assert_flags {
        Ok(Box::new(WithoutFlags(fam)))
    } else {
        Ok(fam)
    }
}

fn solver_options(residual_tol: f64, node_budget: usize) -> Result<SolverOptions> {
    if !(residual_tol.is_finite() && residual_tol > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "--residual-tol must be positive, got {residual_tol}"
        )));
    }
    Ok(SolverOptions {
        residual_tol,
        node_budget,
        ..SolverOptions::default()
    })
}

fn cmd_resolve(args: &ResolveArgs) -> Result<()> {
    let nl = Nonlinearity::from_spec_str(&args.phi)?;
    let phi_echo: serde_json::Value = serde_json::from_str(&nl.spec_json())?;
    let data = load_node_function(&args.g)?;
    logging::debug(format!(
        "lambda {}, data support size {}",
        args.lambda,
        data.support_size()
    ));
    let opts = solver_options(args.residual_tol, args.node_budget)?;
    let sol = match (&args.source.graph, &args.source.family) {
        (Some(path), None) => {
            let g = Graph::from_json_str(&read_file(path)?)?;
            logging::info(format!("finite graph with {} nodes", g.len()));
            solve_componentwise(
                &ResolventProblem {
                    graph: &g,
                    nl: &nl,
                    lambda: args.lambda,
                    g: &data,
                },
                &opts,
            )?
        }
        (None, Some(spec)) => {
            let fam = load_family(spec, args.no_assert_flags)?;
            solve_exhaustion(
                fam.as_ref(),
                &nl,
                args.lambda,
                &data,
                args.exhaustion_tol,
                args.max_level,
                &opts,
            )?
        }
        _ => unreachable!("clap enforces exactly one graph source"),
    };
    logging::info(format!(
        "solved: residual {:.3e} in {} iterations",
        sol.residual_l1, sol.iterations
    ));
    let out = ResolveOutput::build(args.lambda, phi_echo, &sol);
    write_output(args.out.as_ref(), &output::to_json_line(&out))
}

fn load_forcing(path: Option<&PathBuf>) -> Result<Forcing> {
    match path {
        None => Ok(Forcing::Zero),
        Some(p) => Forcing::from_json_str(&read_file(p)?),
    }
}

fn cmd_evolve(args: &EvolveArgs) -> Result<()> {
    let nl = Nonlinearity::from_spec_str(&args.phi)?;
    let phi_echo: serde_json::Value = serde_json::from_str(&nl.spec_json())?;
    let u0 = load_node_function(&args.u0)?;
    let forcing = load_forcing(args.forcing.as_ref())?;
    logging::debug(format!(
        "t_final {}, epsilon {}, u0 support size {}",
        args.t_final,
        args.epsilon,
        u0.support_size()
    ));
    let opts = solver_options(args.residual_tol, args.node_budget)?;
    let out = match (&args.source.graph, &args.source.family) {
        (Some(path), None) => {
            let g = Graph::from_json_str(&read_file(path)?)?;
            logging::info(format!("finite graph with {} nodes", g.len()));
            let r = if args.mild {
                evolve_mild(
                    &g,
                    &nl,
                    &u0,
                    &forcing,
                    args.t_final,
                    args.epsilon,
                    args.mild_tol,
                    &opts,
                )?
            } else {
                evolve(&g, &nl, &u0, &forcing, args.t_final, args.epsilon, &opts)?
            };
            logging::info(format!("evolved {} steps", r.per_step.len()));
            EvolveOutput::build(phi_echo, &r, classic_regime_check(&g, &nl).into(), &g)?
        }
        (None, Some(spec)) => {
            if args.mild {
                return Err(GpmeError::InvalidArgument(
                    "--mild needs a finite graph (--graph)".into(),
                ));
            }
            let fam = load_family(spec, args.no_assert_flags)?;
            let r = evolve_lazy(
                fam.as_ref(),
                &nl,
                &u0,
                &forcing,
                args.t_final,
                args.epsilon,
                args.exhaustion_tol,
                args.max_level,
                &opts,
            )?;
            logging::info(format!("evolved {} steps", r.per_step.len()));
            EvolveOutput::build(
                phi_echo,
                &r,
                classic_regime_check_lazy(fam.as_ref(), &nl).into(),
                fam.as_ref(),
            )?
        }
        _ => unreachable!("clap enforces exactly one graph source"),
    };
    write_output(args.out.as_ref(), &output::to_json_line(&out))
}

/// Runs a suite and reports counts on stdout. Property violations exit 1,
/// infrastructure failures propagate as errors.
fn cmd_check(args: &CheckArgs) -> Result<bool> {
    let suite = Suite::from_name(&args.suite)?;
    let cases = args.cases.unwrap_or_else(|| suite.default_cases());
    logging::info(format!(
        "running suite {} with seed {} over {} cases",
        suite.name(),
        args.seed,
        cases
    ));
    let rep = run_suite(suite, args.seed, cases)?;
    println!("{}", rep.summary_line());
    for note in &rep.failure_notes {
        println!("  {note}");
    }
    Ok(rep.passed())
}

fn cmd_emit_plot(args: &EmitPlotArgs) -> Result<()> {
    let text = read_file(&args.input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .unwrap_or("")
        .to_string();
    let csv = match (kind.as_str(), args.what) {
        (output::RESOLVE_KIND, PlotKind::Auto | PlotKind::Solution) => {
            let out: ResolveOutput = serde_json::from_value(value)?;
            output::solution_csv(&out)?
        }
        (output::EVOLVE_KIND, PlotKind::Auto | PlotKind::Trajectory) => {
            let out: EvolveOutput = serde_json::from_value(value)?;
            output::trajectory_csv(&out)?
        }
        (output::EVOLVE_KIND, PlotKind::Norms) => {
            let out: EvolveOutput = serde_json::from_value(value)?;
            output::norms_csv(&out)?
        }
        (k, what) => {
            return Err(GpmeError::InvalidArgument(format!(
                "cannot emit {what:?} from a result of kind `{k}`"
            )))
        }
    };
    write_output(args.out.as_ref(), &csv)
}

fn error_code(e: &GpmeError) -> (&'static str, i32) {
    match e {
        GpmeError::HypothesisViolation { .. } => ("hypothesis_violation", 1),
        GpmeError::FlagContradiction { .. } => ("flag_contradiction", 1),
        GpmeError::NoConvergence { .. } => ("no_convergence", 1),
        GpmeError::TruncationRequired(_) => ("truncation_required", 1),
        GpmeError::UnknownNode(_) => ("unknown_node", 2),
        GpmeError::InvalidGraph(_) => ("invalid_graph", 2),
        GpmeError::InvalidNonlinearity(_) => ("invalid_nonlinearity", 2),
        GpmeError::InvalidArgument(_) => ("invalid_argument", 2),
        GpmeError::Parse(_) => ("parse_error", 2),
        GpmeError::Io(_) => ("io_error", 2),
    }
}

fn fail(context: &str, e: &GpmeError) -> i32 {
    let (code, exit) = error_code(e);
    eprintln!(
        "{}",
        serde_json::json!({
            "code": code,
            "reason": e.to_string(),
            "context": context,
        })
    );
    exit
}

fn main() {
    let cli = Cli::parse();
    let (context, outcome) = match &cli.cmd {
        Cmd::Resolve(args) => ("resolve", cmd_resolve(args)),
        Cmd::Evolve(args) => ("evolve", cmd_evolve(args)),
        Cmd::Check(args) => match cmd_check(args) {
            Ok(true) => ("check", Ok(())),
            Ok(false) => {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "code": "suite_failure",
                        "reason": format!("suite {} reported failures", args.suite),
                        "context": "check",
                    })
                );
                std::process::exit(1);
            }
            Err(e) => ("check", Err(e)),
        },
        Cmd::EmitPlot(args) => ("emit-plot", cmd_emit_plot(args)),
    };
    if let Err(e) = outcome {
        std::process::exit(fail(context, &e));
    }
}
