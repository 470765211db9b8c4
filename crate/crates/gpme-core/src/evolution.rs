//! Time discretization and the implicit-Euler scheme for
//! ∂ₜu + ΔΦu = f: ε-discretizations of the forcing, ε-approximate
//! trajectories, mild solutions via grid refinement, and the contraction
//! estimate as a runtime check.
//!
//! Each step solves (id + λ_kΔΦ)u_k = u_{k−1} + λ_k f_k through the
//! resolvent module. Steps are solved to an absolute residual proportional
//! to λ_k, so that the whole trajectory accumulates at most O(T) times the
//! per-unit-time tolerance; this is what keeps the discrete contraction
//! defect below 10⁻⁸ regardless of the number of steps.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GpmeError, Result};
use crate::graph::{Graph, LazyGraph};
use crate::laplacian::LaplacianContext;
use crate::node_function::{LpNorm, Measure, NodeFunction};
use crate::nonlinearity::Nonlinearity;
use crate::num::KahanSum;
use crate::resolvent::{
    solve_exhaustion, solve_finite, ResolventProblem, ResolventSolution, SolverOptions,
};

/// Per-unit-time relative residual target of evolution steps.
const STEP_TOL: f64 = 1e-10;

/// One piece of a piecewise-constant forcing, active on (start, end].
#[derive(Clone, Debug)]
pub struct ForcingPiece {
    pub start: f64,
    pub end: f64,
    pub value: NodeFunction,
}

/// The forcing term f of the Cauchy problem.
pub enum Forcing {
    Zero,
    Constant(NodeFunction),
    /// Pieces must start at 0 and be contiguous; piece k is active on
    /// (start_k, end_k].
    PiecewiseConstant(Vec<ForcingPiece>),
    /// Arbitrary sampler t ↦ f(t). Discretization quality is estimated by
    /// midpoint quadrature and refused when it exceeds ε.
    Sampled(Box<dyn Fn(f64) -> NodeFunction + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Forcing::Zero"),
            Forcing::Constant(v) => write!(f, "Forcing::Constant({v:?})"),
            Forcing::PiecewiseConstant(p) => write!(f, "Forcing::PiecewiseConstant({p:?})"),
            Forcing::Sampled(_) => write!(f, "Forcing::Sampled(..)"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceSpec {
    start: f64,
    end: f64,
    value: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ForcingSpec {
    Zero,
    Constant { value: BTreeMap<String, f64> },
    PiecewiseConstant { pieces: Vec<PieceSpec> },
}

fn map_to_fn(map: BTreeMap<String, f64>) -> Result<NodeFunction> {
    NodeFunction::from_pairs(map)
}

fn fn_to_map(f: &NodeFunction) -> BTreeMap<String, f64> {
    f.iter().map(|(id, v)| (id.to_string(), v)).collect()
}

impl Forcing {
    /// Validated piecewise-constant forcing: nonempty, first piece starts
    /// at 0, pieces contiguous with positive length.
    ///
    /// # Errors
    /// Any violation of the above.
    pub fn piecewise(pieces: Vec<ForcingPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(GpmeError::InvalidArgument(
                "piecewise forcing needs at least one piece".into(),
            ));
        }
        if pieces[0].start != 0.0 {
            return Err(GpmeError::InvalidArgument(format!(
                "first forcing piece must start at 0, starts at {}",
                pieces[0].start
            )));
        }
        for pair in pieces.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(GpmeError::InvalidArgument(format!(
                    "forcing pieces must be contiguous: piece ends at {} but the next starts at {}",
                    pair[0].end, pair[1].start
                )));
            }
        }
        for p in &pieces {
            if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
                return Err(GpmeError::InvalidArgument(format!(
                    "forcing piece has an empty or non-finite interval ({}, {}]",
                    p.start, p.end
                )));
            }
        }
        Ok(Forcing::PiecewiseConstant(pieces))
    }

    /// f(t).
    ///
    /// # Errors
    /// t outside the covered interval of a piecewise forcing.
    pub fn at(&self, t: f64) -> Result<NodeFunction> {
        match self {
            Forcing::Zero => Ok(NodeFunction::zero()),
            Forcing::Constant(v) => Ok(v.clone()),
            Forcing::PiecewiseConstant(pieces) => {
                if t <= pieces[0].start {
                    return Ok(pieces[0].value.clone());
                }
                for p in pieces {
                    if t > p.start && t <= p.end {
                        return Ok(p.value.clone());
                    }
                }
                Err(GpmeError::InvalidArgument(format!(
                    "forcing is not defined at t = {t}"
                )))
            }
            Forcing::Sampled(f) => Ok(f(t)),
        }
    }

    /// Exact global sign classification (nonnegative, nonpositive), when
    /// the representation allows one. Sampled forcings answer None and are
    /// classified from their grid samples instead.
    fn sign_class(&self) -> Option<(bool, bool)> {
        match self {
            Forcing::Zero => Some((true, true)),
            Forcing::Constant(v) => Some((v.is_nonnegative(), v.is_nonpositive())),
            Forcing::PiecewiseConstant(pieces) => Some((
                pieces.iter().all(|p| p.value.is_nonnegative()),
                pieces.iter().all(|p| p.value.is_nonpositive()),
            )),
            Forcing::Sampled(_) => None,
        }
    }

    /// Parses `{"kind":"zero"}`, `{"kind":"constant","value":{...}}` or
    /// `{"kind":"piecewise_constant","pieces":[{"start":..,"end":..,
    /// "value":{...}},...]}`.
    ///
    /// # Errors
    /// Malformed JSON or invalid piece layout.
    pub fn from_json_str(s: &str) -> Result<Self> {
        match serde_json::from_str::<ForcingSpec>(s)? {
            ForcingSpec::Zero => Ok(Forcing::Zero),
            ForcingSpec::Constant { value } => Ok(Forcing::Constant(map_to_fn(value)?)),
            ForcingSpec::PiecewiseConstant { pieces } => {
                let mut out = Vec::with_capacity(pieces.len());
                for p in pieces {
                    out.push(ForcingPiece {
                        start: p.start,
                        end: p.end,
                        value: map_to_fn(p.value)?,
                    });
                }
                Forcing::piecewise(out)
            }
        }
    }

    /// Serializes the exact kinds; sampled forcings have no serial form.
    ///
    /// # Errors
    /// Sampled forcing.
    pub fn to_json_string(&self) -> Result<String> {
        let spec = match self {
            Forcing::Zero => ForcingSpec::Zero,
            Forcing::Constant(v) => ForcingSpec::Constant {
                value: fn_to_map(v),
            },
            Forcing::PiecewiseConstant(pieces) => ForcingSpec::PiecewiseConstant {
                pieces: pieces
                    .iter()
                    .map(|p| PieceSpec {
                        start: p.start,
                        end: p.end,
                        value: fn_to_map(&p.value),
                    })
                    .collect(),
            },
            Forcing::Sampled(_) => {
                return Err(GpmeError::InvalidArgument(
                    "sampled forcings cannot be serialized".into(),
                ))
            }
        };
        Ok(serde_json::to_string(&spec).expect("forcing spec serializes"))
    }
}

/// A time grid 0 = t₀ < t₁ < … < tₙ = T of steps ≤ ε together with the
/// right-endpoint forcing samples f_k = f(t_k), k = 1..n, and the
/// (estimated) sampling error Σ_k ∫ ‖f(t) − f_k‖₁ dt, which is ≤ ε by
/// construction (exactly 0 for zero/constant/aligned piecewise forcing).
#[derive(Clone, Debug)]
pub struct EpsilonDiscretization {
    pub epsilon: f64,
    pub grid: Vec<f64>,
    pub f_samples: Vec<NodeFunction>,
    pub integral_error_estimate: f64,
}

impl EpsilonDiscretization {
    /// Number of implicit-Euler steps.
    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// λ_k = t_k − t_{k−1} for the 1-based step k.
    pub fn lambda(&self, k: usize) -> f64 {
        self.grid[k] - self.grid[k - 1]
    }

    fn final_time(&self) -> f64 {
        *self.grid.last().expect("grid is nonempty")
    }

    /// The nested half-step refinement: every interval is split at its
    /// midpoint, so coarse time t_k is exactly fine time t'_{2k} and the
    /// coarse/fine trajectories can be compared without interpolation.
    ///
    /// # Errors
    /// Sampling failures of the forcing.
    pub fn refine_half(&self, f: &Forcing, mu: &(impl Measure + ?Sized)) -> Result<Self> {
        let mut grid = Vec::with_capacity(2 * self.grid.len() - 1);
        for pair in self.grid.windows(2) {
            grid.push(pair[0]);
            grid.push(pair[0] + 0.5 * (pair[1] - pair[0]));
        }
        grid.push(self.final_time());
        build_discretization(f, grid, self.epsilon / 2.0, mu)
    }
}

fn sample_grid_times(f: &Forcing, grid: &[f64]) -> Result<Vec<NodeFunction>> {
    grid[1..].iter().map(|&t| f.at(t)).collect()
}

fn piecewise_interval_error(
    pieces: &[ForcingPiece],
    a: f64,
    b: f64,
    f_b: &NodeFunction,
    mu: &(impl Measure + ?Sized),
) -> Result<f64> {
    let mut acc = 0.0;
    for p in pieces {
        let lo = p.start.max(a);
        let hi = p.end.min(b);
        if hi > lo {
            acc += (hi - lo) * p.value.sub(f_b).norm(LpNorm::L1, mu)?;
        }
    }
    Ok(acc)
}

fn build_discretization(
    f: &Forcing,
    grid: Vec<f64>,
    epsilon: f64,
    mu: &(impl Measure + ?Sized),
) -> Result<EpsilonDiscretization> {
    let f_samples = sample_grid_times(f, &grid)?;
    let integral_error_estimate = match f {
        Forcing::Zero | Forcing::Constant(_) => 0.0,
        Forcing::PiecewiseConstant(pieces) => {
            let mut acc = 0.0;
            for (k, pair) in grid.windows(2).enumerate() {
                acc += piecewise_interval_error(pieces, pair[0], pair[1], &f_samples[k], mu)?;
            }
            acc
        }
        Forcing::Sampled(sample) => {
            let mut acc = 0.0;
            for (k, pair) in grid.windows(2).enumerate() {
                let mid = pair[0] + 0.5 * (pair[1] - pair[0]);
                let err = sample(mid).sub(&f_samples[k]).norm(LpNorm::L1, mu)?;
                acc += (pair[1] - pair[0]) * err;
            }
            acc
        }
    };
    if integral_error_estimate > epsilon {
        return Err(GpmeError::InvalidArgument(format!(
            "forcing sampling error estimate {integral_error_estimate:.3e} exceeds epsilon \
             {epsilon:.3e}; decrease epsilon"
        )));
    }
    Ok(EpsilonDiscretization {
        epsilon,
        grid,
        f_samples,
        integral_error_estimate,
    })
}

/// Builds the canonical ε-discretization: a uniform grid of at most ε-wide
/// steps over [0,T], refined with the breakpoints of a piecewise-constant
/// forcing so its sampling error vanishes exactly.
///
/// # Errors
/// Nonpositive T or ε, sampled forcings whose quadrature estimate exceeds
/// ε.
pub fn discretize(
    f: &Forcing,
    t_final: f64,
    epsilon: f64,
    mu: &(impl Measure + ?Sized),
) -> Result<EpsilonDiscretization> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "final time must be positive and finite, got {t_final}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let mut n = (t_final / epsilon).ceil().max(1.0) as usize;
    // ceil works in exact arithmetic; one more step absorbs the rounding
    // case where T/n still exceeds ε by an ulp.
    if t_final / n as f64 > epsilon {
        n += 1;
    }
    let mut grid: Vec<f64> = (0..=n).map(|k| t_final * k as f64 / n as f64).collect();
    if let Forcing::PiecewiseConstant(pieces) = f {
        Forcing::piecewise(pieces.clone())?;
        if pieces.last().expect("validated nonempty").end < t_final {
            return Err(GpmeError::InvalidArgument(format!(
                "piecewise forcing ends at {} but the run lasts until {t_final}",
                pieces.last().expect("validated nonempty").end
            )));
        }
        for p in pieces {
            for b in [p.start, p.end] {
                if b > 0.0 && b < t_final && !grid.contains(&b) {
                    grid.push(b);
                }
            }
        }
        grid.sort_by(|a, b| a.partial_cmp(b).expect("grid times are finite"));
    }
    build_discretization(f, grid, epsilon, mu)
}

/// One implicit-Euler step: solves (id + λ_kΔΦ)u_k = u_prev + λ_k·f_k.
///
/// # Errors
/// Propagated from the resolvent solve.
pub fn step(
    graph: &Graph,
    nl: &Nonlinearity,
    u_prev: &NodeFunction,
    lambda_k: f64,
    f_k: &NodeFunction,
    opts: &SolverOptions,
) -> Result<ResolventSolution> {
    let rhs = u_prev.add_scaled(lambda_k, f_k);
    solve_finite(
        &ResolventProblem {
            graph,
            nl,
            lambda: lambda_k,
            g: &rhs,
        },
        opts,
    )
}

/// Summary of one step's inner solve.
#[derive(Clone, Debug)]
pub struct StepDiagnostics {
    pub residual_l1: f64,
    pub iterations: usize,
    pub truncation_level: Option<usize>,
}

/// An ε-approximate trajectory: `states[k]` is the value on the k-th grid
/// point (piecewise-constant in time between them). `delta_estimate` holds
/// the observed coarse-vs-fine differences when the trajectory came out of
/// a refinement run.
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub discretization: EpsilonDiscretization,
    pub states: Vec<NodeFunction>,
    pub per_step: Vec<StepDiagnostics>,
    pub delta_estimate: Option<Vec<f64>>,
}

impl EvolutionResult {
    /// State at the final time T.
    pub fn final_state(&self) -> &NodeFunction {
        self.states.last().expect("trajectory contains u0")
    }
}

fn step_options(
    base: &SolverOptions,
    lambda_k: f64,
    rhs_norm: f64,
    n_nodes: usize,
) -> SolverOptions {
    let mut opts = base.clone();
    if opts.residual_tol_abs.is_none() {
        let scale = rhs_norm.max(1.0);
        let target = base.residual_tol.min(STEP_TOL) * lambda_k * scale;
        // Floor at the summation noise of the residual evaluation itself.
        let floor = f64::EPSILON * n_nodes as f64 * scale;
        opts.residual_tol_abs = Some(target.max(floor));
        opts.scalar_tol = base.scalar_tol.min(4.0 * f64::EPSILON);
    }
    opts
}

fn check_u0(graph: &Graph, u0: &NodeFunction) -> Result<()> {
    for id in u0.support() {
        graph.index_of(id)?;
    }
    Ok(())
}

fn evolve_on(
    graph: &Graph,
    nl: &Nonlinearity,
    u0: &NodeFunction,
    disc: EpsilonDiscretization,
    opts: &SolverOptions,
) -> Result<EvolutionResult> {
    check_u0(graph, u0)?;
    let mut states = Vec::with_capacity(disc.n_steps() + 1);
    let mut per_step = Vec::with_capacity(disc.n_steps());
    states.push(u0.clone().canonicalized());
    for k in 1..=disc.n_steps() {
        let lambda_k = disc.lambda(k);
        let f_k = &disc.f_samples[k - 1];
        let rhs = states[k - 1].add_scaled(lambda_k, f_k);
        let rhs_norm = rhs.norm(LpNorm::L1, graph)?;
        let sol = solve_finite(
            &ResolventProblem {
                graph,
                nl,
                lambda: lambda_k,
                g: &rhs,
            },
            &step_options(opts, lambda_k, rhs_norm, graph.len()),
        )
        .map_err(|e| match e {
            GpmeError::NoConvergence { detail, residual } => GpmeError::NoConvergence {
                detail: format!("step {k} (t = {}): {detail}", disc.grid[k]),
                residual,
            },
            other => other,
        })?;
        per_step.push(StepDiagnostics {
            residual_l1: sol.residual_l1,
            iterations: sol.iterations,
            truncation_level: None,
        });
        states.push(sol.u);
    }
    Ok(EvolutionResult {
        discretization: disc,
        states,
        per_step,
        delta_estimate: None,
    })
}

/// Runs the implicit-Euler scheme on a finite graph over [0,T] with step
/// ≤ ε. Finite graphs satisfy H1–H3 trivially, so no sign condition is
/// required of the data.
///
/// # Errors
/// Invalid parameters, discretization failures, per-step solver failures
/// (tagged with the step index).
pub fn evolve(
    graph: &Graph,
    nl: &Nonlinearity,
    u0: &NodeFunction,
    f: &Forcing,
    t_final: f64,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<EvolutionResult> {
    let disc = discretize(f, t_final, epsilon, graph)?;
    evolve_on(graph, nl, u0, disc, opts)
}

/// Implicit Euler on a lazy graph: every step is an exhaustion solve.
///
/// Mirrors the existence theory's case split: data where u0 and all
/// forcing values share one sign are always admissible; sign-changing data
/// additionally needs one of the asserted hypotheses H1/H2/H3. For sampled
/// forcings the sign classification uses the grid samples (the exact kinds
/// are classified globally).
///
/// # Errors
/// Hypothesis refusal, discretization failures, per-step exhaustion
/// failures.
#[allow(clippy::too_many_arguments)]
pub fn evolve_lazy(
    g: &dyn LazyGraph,
    nl: &Nonlinearity,
    u0: &NodeFunction,
    f: &Forcing,
    t_final: f64,
    epsilon: f64,
    exhaustion_tol: f64,
    max_level: usize,
    opts: &SolverOptions,
) -> Result<EvolutionResult> {
    for id in u0.support() {
        if !g.contains(id) {
            return Err(GpmeError::UnknownNode(id.to_string()));
        }
    }
    let disc = discretize(f, t_final, epsilon, g)?;

    let (f_nonneg, f_nonpos) = f.sign_class().unwrap_or_else(|| {
        (
            disc.f_samples.iter().all(|s| s.is_nonnegative()),
            disc.f_samples.iter().all(|s| s.is_nonpositive()),
        )
    });
    let sign_ok = (u0.is_nonnegative() && f_nonneg) || (u0.is_nonpositive() && f_nonpos);
    let flags = g.flags();
    let h3 = flags.uniform_deg_bound.is_some() && nl.maps_l1_into_l1();
    if !sign_ok && !(flags.locally_finite || flags.uniform_mu_lower_bound.is_some() || h3) {
        return Err(GpmeError::HypothesisViolation {
            hypothesis: "H1/H2/H3".into(),
            detail: "sign-changing data requires at least one of H1 (locally finite), H2 \
                     (uniform mu lower bound) or H3 (uniform Deg bound with phi mapping l1 into \
                     l1); none is asserted for this graph"
                .into(),
        });
    }

    let mut states = Vec::with_capacity(disc.n_steps() + 1);
    let mut per_step = Vec::with_capacity(disc.n_steps());
    states.push(u0.clone().canonicalized());
    for k in 1..=disc.n_steps() {
        let lambda_k = disc.lambda(k);
        let rhs = states[k - 1].add_scaled(lambda_k, &disc.f_samples[k - 1]);
        let rhs_norm = rhs.norm(LpNorm::L1, g)?;
        let sol = solve_exhaustion(
            g,
            nl,
            lambda_k,
            &rhs,
            exhaustion_tol,
            max_level,
            &step_options(opts, lambda_k, rhs_norm, rhs.support_size().max(1)),
        )?;
        per_step.push(StepDiagnostics {
            residual_l1: sol.residual_l1,
            iterations: sol.iterations,
            truncation_level: sol.truncation_level,
        });
        states.push(sol.u);
    }
    Ok(EvolutionResult {
        discretization: disc,
        states,
        per_step,
        delta_estimate: None,
    })
}

/// Refines ε → ε/2 → … (nested grids) until the two most recent
/// trajectories differ by at most `tol` in ℓ¹, uniformly over the coarse
/// grid times. Reports the final (finest) trajectory with the observed
/// difference sequence as the empirical δ(ε).
///
/// # Errors
/// As [`evolve`]; refinement cap of 10 halvings reached (the error carries
/// the difference history).
#[allow(clippy::too_many_arguments)]
pub fn evolve_mild(
    graph: &Graph,
    nl: &Nonlinearity,
    u0: &NodeFunction,
    f: &Forcing,
    t_final: f64,
    epsilon: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<EvolutionResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "refinement tolerance must be positive, got {tol}"
        )));
    }
    let mut coarse = evolve(graph, nl, u0, f, t_final, epsilon, opts)?;
    let mut history = Vec::new();
    for _ in 0..10 {
        let fine_disc = coarse.discretization.refine_half(f, graph)?;
        let mut fine = evolve_on(graph, nl, u0, fine_disc, opts)?;
        let mut diff: f64 = 0.0;
        for (k, coarse_state) in coarse.states.iter().enumerate() {
            let d = coarse_state
                .sub(&fine.states[2 * k])
                .norm(LpNorm::L1, graph)?;
            diff = diff.max(d);
        }
        history.push(diff);
        if diff <= tol {
            fine.delta_estimate = Some(history);
            return Ok(fine);
        }
        coarse = fine;
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Err(GpmeError::NoConvergence {
        detail: format!(
            "10 grid halvings did not bring consecutive trajectories within {tol:.3e}; \
             difference history: {history:?}"
        ),
        residual: last,
    })
}

/// Largest violation of the contraction estimate between two runs on the
/// same grid: max over grid pairs t₁ < t₂ of
/// ‖u(t₂)−û(t₂)‖₁ − ‖u(t₁)−û(t₁)‖₁ − ∫_{t₁}^{t₂} ‖f−f̂‖₁ dt,
/// with the integral evaluated from the grids' forcing samples (exact for
/// aligned piecewise-constant forcing). Nonpositive up to solver residuals
/// by the ℓ¹ contraction theory.
///
/// # Errors
/// Mismatched grids.
pub fn contraction_gap(
    r1: &EvolutionResult,
    r2: &EvolutionResult,
    mu: &(impl Measure + ?Sized),
) -> Result<f64> {
    if r1.discretization.grid != r2.discretization.grid {
        return Err(GpmeError::InvalidArgument(
            "contraction gap needs both runs on the same grid".into(),
        ));
    }
    let n = r1.discretization.n_steps();
    let mut d = Vec::with_capacity(n + 1);
    for k in 0..=n {
        d.push(r1.states[k].sub(&r2.states[k]).norm(LpNorm::L1, mu)?);
    }
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    prefix.push(0.0);
    for k in 1..=n {
        let df = r1.discretization.f_samples[k - 1]
            .sub(&r2.discretization.f_samples[k - 1])
            .norm(LpNorm::L1, mu)?;
        acc.add(r1.discretization.lambda(k) * df);
        prefix.push(acc.value());
    }
    // gap = max_{k1<k2} (d[k2] − d[k1] − (I[k2] − I[k1])), linear scan.
    let mut best_tail = prefix[0] - d[0];
    let mut gap = f64::NEG_INFINITY;
    for k in 1..=n {
        gap = gap.max(d[k] - prefix[k] + best_tail);
        best_tail = best_tail.max(prefix[k] - d[k]);
    }
    Ok(gap)
}

/// Outcome of the mild-equals-classic certification.
#[derive(Clone, Debug)]
pub struct ClassicReport {
    pub certified: bool,
    pub deg_bound: Option<f64>,
    pub mu_lower_bound: Option<f64>,
    pub note: String,
}

/// Finite graphs: mild solutions are classic for every admissible φ (the
/// two hypotheses — bounded Deg and a continuous Φ on ℓ¹ — hold trivially).
pub fn classic_regime_check(graph: &Graph, _nl: &Nonlinearity) -> ClassicReport {
    let ctx = LaplacianContext::new(graph);
    ClassicReport {
        certified: true,
        deg_bound: Some(ctx.deg_weighted_sup()),
        mu_lower_bound: (0..graph.len()).map(|i| graph.mu_at(i)).reduce(f64::min),
        note: "finite graph: mild solutions are classic for every admissible nonlinearity".into(),
    }
}

/// Lazy graphs: certification needs the asserted Deg bound and μ lower
/// bound plus a nonlinearity whose Φ is Lipschitz near 0 on ℓ¹ (power law
/// m ≥ 1, or an asserted global Lipschitz constant).
pub fn classic_regime_check_lazy(g: &dyn LazyGraph, nl: &Nonlinearity) -> ClassicReport {
    let flags = g.flags();
    let lipschitz_ok =
        nl.power_exponent().map(|m| m >= 1.0).unwrap_or(false) || nl.global_lipschitz().is_some();
    let certified =
        flags.uniform_deg_bound.is_some() && flags.uniform_mu_lower_bound.is_some() && lipschitz_ok;
    let note = if certified {
        "asserted Deg and mu bounds with a Lipschitz-controlled nonlinearity: mild solutions \
         are classic"
            .into()
    } else if flags.uniform_deg_bound.is_none() || flags.uniform_mu_lower_bound.is_none() {
        "unverifiable: no asserted uniform Deg bound / mu lower bound".into()
    } else {
        "nonlinearity is not certifiably Lipschitz near 0 (fast-diffusion power laws are not)"
            .to_string()
    };
    ClassicReport {
        certified,
        deg_bound: flags.uniform_deg_bound,
        mu_lower_bound: flags.uniform_mu_lower_bound,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::family;
    use crate::node_function::UnitMeasure;
    use crate::oracle;

    fn heat_pair() -> Graph {
        Graph::new(
            vec![("a", 1.0, 0.0), ("b", 1.0, 0.0)],
            vec![("a", "b", 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn uniform_grid_and_zero_forcing() {
        let disc = discretize(&Forcing::Zero, 1.0, 0.25, &UnitMeasure).unwrap();
        assert_eq!(disc.grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(disc.f_samples.iter().all(|f| f.is_zero()));
        assert_eq!(disc.integral_error_estimate, 0.0);

        let c = Forcing::Constant(NodeFunction::delta("a", 2.0));
        let disc = discretize(&c, 1.0, 0.25, &UnitMeasure).unwrap();
        assert_eq!(disc.grid.len(), 5);
        assert_eq!(disc.integral_error_estimate, 0.0);
    }

    #[test]
    fn breakpoints_enter_the_grid() {
        let f = Forcing::piecewise(vec![
            ForcingPiece {
                start: 0.0,
                end: 0.4,
                value: NodeFunction::delta("a", 1.0),
            },
            ForcingPiece {
                start: 0.4,
                end: 1.0,
                value: NodeFunction::delta("a", -2.0),
            },
        ])
        .unwrap();
        let disc = discretize(&f, 1.0, 0.25, &UnitMeasure).unwrap();
        assert!(disc.grid.contains(&0.4));
        assert_eq!(disc.integral_error_estimate, 0.0);
        // Right-endpoint sampling: the sample at 0.4 belongs to the piece
        // ending there.
        let idx = disc.grid.iter().position(|&t| t == 0.4).unwrap();
        assert_eq!(disc.f_samples[idx - 1].get("a"), 1.0);
    }

    #[test]
    fn sampled_forcing_quadrature_gate() {
        let f = Forcing::Sampled(Box::new(|t: f64| NodeFunction::delta("a", t.sin())));
        // Coarse epsilon: quadrature error ~ ε²·|f'|·T/ε is far below ε.
        assert!(discretize(&f, 1.0, 0.1, &UnitMeasure).is_ok());
        // A wildly oscillating sampler cannot meet a tiny epsilon.
        let wild = Forcing::Sampled(Box::new(|t: f64| {
            NodeFunction::delta("a", (1e4 * t).sin() * 1e4)
        }));
        assert!(discretize(&wild, 1.0, 1e-3, &UnitMeasure).is_err());
    }

    #[test]
    fn refinement_is_exactly_nested() {
        let disc = discretize(&Forcing::Zero, 1.0, 0.3, &UnitMeasure).unwrap();
        let fine = disc.refine_half(&Forcing::Zero, &UnitMeasure).unwrap();
        assert_eq!(fine.n_steps(), 2 * disc.n_steps());
        for (k, &t) in disc.grid.iter().enumerate() {
            assert_eq!(fine.grid[2 * k], t);
        }
    }

    #[test]
    fn step_examples() {
        let opts = SolverOptions::default();
        let iso = Graph::new(vec![("a", 1.0, 0.0)], Vec::<(&str, &str, f64)>::new()).unwrap();
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let u_prev = NodeFunction::delta("a", 1.5);
        let sol = step(&iso, &nl, &u_prev, 0.5, &NodeFunction::zero(), &opts).unwrap();
        assert!((sol.u.get("a") - 1.5).abs() < 1e-10);

        let g = heat_pair();
        let heat = Nonlinearity::power_law(1.0).unwrap();
        let sol = step(
            &g,
            &heat,
            &NodeFunction::delta("a", 3.0),
            1.0,
            &NodeFunction::zero(),
            &opts,
        )
        .unwrap();
        assert!((sol.u.get("a") - 2.0).abs() < 1e-9);
        assert!((sol.u.get("b") - 1.0).abs() < 1e-9);

        let sol = step(
            &g,
            &nl,
            &NodeFunction::zero(),
            1.0,
            &NodeFunction::zero(),
            &opts,
        )
        .unwrap();
        assert!(sol.u.is_zero());
    }

    #[test]
    fn zero_everything_stays_zero() {
        let g = heat_pair();
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let r = evolve(
            &g,
            &nl,
            &NodeFunction::zero(),
            &Forcing::Zero,
            1.0,
            0.25,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(r.states.iter().all(|s| s.is_zero()));
    }

    #[test]
    fn mass_is_conserved_without_killing() {
        let g = Graph::new(
            vec![("a", 0.5, 0.0), ("b", 1.0, 0.0), ("c", 2.0, 0.0)],
            vec![("a", "b", 1.0), ("b", "c", 0.7)],
        )
        .unwrap();
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let u0 = NodeFunction::from_pairs([("a", 2.0), ("c", 0.25)]).unwrap();
        let r = evolve(
            &g,
            &nl,
            &u0,
            &Forcing::Zero,
            1.0,
            0.1,
            &SolverOptions::default(),
        )
        .unwrap();
        let mass = |f: &NodeFunction| f.iter().map(|(id, v)| v * g.mu(id).unwrap()).sum::<f64>();
        let m0 = mass(&u0);
        for s in &r.states {
            assert!((mass(s) - m0).abs() <= 1e-8 * (1.0 + m0.abs()));
        }
        // Sign preservation along the trajectory.
        assert!(r.states.iter().all(|s| s.is_nonnegative()));
    }

    #[test]
    fn mild_refinement_trivial_and_heat() {
        let g = heat_pair();
        let nl = Nonlinearity::power_law(1.0).unwrap();
        let r = evolve_mild(
            &g,
            &nl,
            &NodeFunction::zero(),
            &Forcing::Zero,
            1.0,
            0.5,
            1e-12,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.delta_estimate.as_deref(), Some(&[0.0][..]));

        // Heat equation: differences shrink roughly linearly in epsilon.
        let u0 = NodeFunction::delta("a", 1.0);
        let r = evolve_mild(
            &g,
            &nl,
            &u0,
            &Forcing::Zero,
            1.0,
            0.25,
            1e-4,
            &SolverOptions::default(),
        )
        .unwrap();
        let hist = r.delta_estimate.clone().unwrap();
        for pair in hist.windows(2) {
            assert!(pair[1] < pair[0]);
            let ratio = pair[0] / pair[1];
            assert!(ratio > 1.5 && ratio < 2.5, "ratio {ratio}");
        }
        // And the refined trajectory is close to the true semigroup.
        let op = oracle::assemble_dense(&g).unwrap();
        let exact = oracle::expm_apply(&op, 1.0, &u0).unwrap();
        let err = r.final_state().sub(&exact).norm(LpNorm::L1, &g).unwrap();
        assert!(err < 1e-2, "err {err}");
    }

    #[test]
    fn contraction_examples() {
        let g = heat_pair();
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let opts = SolverOptions::default();
        let u0 = NodeFunction::delta("a", 1.0);
        let r1 = evolve(&g, &nl, &u0, &Forcing::Zero, 1.0, 0.2, &opts).unwrap();
        // Identical runs: all distances vanish.
        let gap = contraction_gap(&r1, &r1, &g).unwrap();
        assert!(gap <= 0.0);

        // Equal forcing, different data: distances nonincreasing in time.
        let v0 = NodeFunction::from_pairs([("a", 0.25), ("b", -0.5)]).unwrap();
        let r2 = evolve(&g, &nl, &v0, &Forcing::Zero, 1.0, 0.2, &opts).unwrap();
        let gap = contraction_gap(&r1, &r2, &g).unwrap();
        assert!(gap <= 1e-8, "gap {gap}");

        // Different constant forcings: the integral term absorbs the
        // drift.
        let f1 = Forcing::Constant(NodeFunction::delta("a", 0.5));
        let r3 = evolve(&g, &nl, &u0, &f1, 1.0, 0.2, &opts).unwrap();
        let gap = contraction_gap(&r1, &r3, &g).unwrap();
        assert!(gap <= 1e-8, "gap {gap}");

        let coarse = evolve(&g, &nl, &u0, &Forcing::Zero, 1.0, 0.5, &opts).unwrap();
        assert!(contraction_gap(&r1, &coarse, &g).is_err());
    }

    #[test]
    fn lazy_evolution_and_refusal() {
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let hl = family::from_cli_spec("half_line").unwrap();
        let u0 = NodeFunction::delta("0", 1.0);
        let r = evolve_lazy(
            hl.as_ref(),
            &nl,
            &u0,
            &Forcing::Zero,
            0.5,
            0.25,
            1e-9,
            60,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.states.len(), 3);
        assert!(r.per_step.iter().all(|d| d.truncation_level.is_some()));
        assert!(r.states.iter().all(|s| s.is_nonnegative()));
    }

    #[test]
    fn classic_regime_reports() {
        let g = heat_pair();
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let rep = classic_regime_check(&g, &nl);
        assert!(rep.certified);
        assert_eq!(rep.deg_bound, Some(1.0));

        let hl = family::from_cli_spec("half_line").unwrap();
        let rep = classic_regime_check_lazy(hl.as_ref(), &nl);
        assert!(rep.certified);
        assert_eq!(rep.deg_bound, Some(2.0));

        let fde = Nonlinearity::power_law(0.5).unwrap();
        let rep = classic_regime_check_lazy(hl.as_ref(), &fde);
        assert!(!rep.certified);
    }

    #[test]
    fn forcing_round_trip_and_validation() {
        let f = Forcing::piecewise(vec![
            ForcingPiece {
                start: 0.0,
                end: 0.5,
                value: NodeFunction::delta("a", 1.0),
            },
            ForcingPiece {
                start: 0.5,
                end: 1.0,
                value: NodeFunction::zero(),
            },
        ])
        .unwrap();
        let json = f.to_json_string().unwrap();
        let back = Forcing::from_json_str(&json).unwrap();
        assert_eq!(back.at(0.3).unwrap().get("a"), 1.0);
        assert_eq!(back.at(0.5).unwrap().get("a"), 1.0);
        assert_eq!(back.at(0.7).unwrap().get("a"), 0.0);

        assert!(Forcing::from_json_str(r#"{"kind":"zero"}"#).is_ok());
        // Gap between pieces.
        assert!(Forcing::piecewise(vec![
            ForcingPiece {
                start: 0.0,
                end: 0.4,
                value: NodeFunction::zero(),
            },
            ForcingPiece {
                start: 0.5,
                end: 1.0,
                value: NodeFunction::zero(),
            },
        ])
        .is_err());
    }
}
