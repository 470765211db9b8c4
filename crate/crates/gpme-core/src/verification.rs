//! Seeded randomized verification suites: reproducible generators for
//! graphs and node functions, one case function per analytic guarantee,
//! and a suite runner shared by the CLI `check` subcommand and the
//! acceptance harness. All randomness flows from a caller-supplied seed
//! through ChaCha8, so identical invocations are byte-identical.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GpmeError, Result};
use crate::evolution::{contraction_gap, evolve, Forcing};
use crate::graph::{exhaustion_from, family, Graph};
use crate::laplacian::{dirichlet_commutation_check, LaplacianContext};
use crate::node_function::{BracketSpace, LpNorm, Measure, NodeFunction, UnitMeasure};
use crate::nonlinearity::Nonlinearity;
use crate::num::KahanSum;
use crate::oracle;
use crate::resolvent::{
    comparison_check, solve_finite, solve_truncation, ResolventProblem, SolverOptions,
};

/// Sign constraint for generated node functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignMode {
    Any,
    NonNegative,
    NonPositive,
}

/// Random finite graph: a recursive tree over 1..=max_nodes nodes (each
/// node wired to a uniformly chosen predecessor) plus ~n/3 random chords,
/// weights in [0.2, 2), μ in [0.5, 2), κ sparse in [0, 1) unless zeroed.
/// With `connected` unset, a quarter of the tree edges are dropped.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
    connected: bool,
    zero_kappa: bool,
) -> Graph {
    let n = rng.random_range(1..=max_nodes.max(1));
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mu = rng.random_range(0.5..2.0);
        let kappa = if !zero_kappa && rng.random_bool(0.3) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        };
        nodes.push((format!("n{i}"), mu, kappa));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for i in 1..n {
        let p = rng.random_range(0..i);
        if connected || !rng.random_bool(0.25) {
            seen.insert((p, i));
            edges.push((format!("n{p}"), format!("n{i}"), rng.random_range(0.2..2.0)));
        }
    }
    for _ in 0..n / 3 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            edges.push((format!("n{a}"), format!("n{b}"), rng.random_range(0.2..2.0)));
        }
    }
    Graph::new(nodes, edges).expect("generator invariants satisfy graph validation")
}

/// Random node function over a graph's nodes: each node carries a value
/// with probability ~0.6, drawn uniformly in (−scale, scale) and then
/// clamped to the requested sign.
pub fn random_function(
    rng: &mut ChaCha8Rng,
    graph: &Graph,
    sign: SignMode,
    scale: f64,
) -> NodeFunction {
    let mut f = NodeFunction::zero();
    for id in graph.node_ids() {
        if rng.random_bool(0.6) {
            let v: f64 = rng.random_range(-scale..scale);
            let v = match sign {
                SignMode::Any => v,
                SignMode::NonNegative => v.abs(),
                SignMode::NonPositive => -v.abs(),
            };
            f.set(id, v).expect("generated values are finite");
        }
    }
    f
}

fn mass(f: &NodeFunction, g: &Graph) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (id, v) in f.iter() {
        acc.add(v * g.mu(id).ok_or_else(|| GpmeError::UnknownNode(id.into()))?);
    }
    Ok(acc.value())
}

const ACCRETIVITY_LAMBDAS: [f64; 3] = [1e-3, 1.0, 1e3];
const ACCRETIVITY_EXPONENTS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// One ℓ¹-accretivity case: worst normalized margin
/// accretivity_residual/(1+‖u−v‖₁) over λ ∈ {10⁻³,1,10³} and
/// m ∈ {0.5,1,2,4}. Nonnegative up to roundoff.
pub fn accretivity_case(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = random_graph(rng, 30, false, false);
    let u = random_function(rng, &g, SignMode::Any, 3.0);
    let v = random_function(rng, &g, SignMode::Any, 3.0);
    let ctx = LaplacianContext::new(&g);
    let duv = u.sub(&v).norm(LpNorm::L1, &g)?;
    let mut worst = f64::INFINITY;
    for m in ACCRETIVITY_EXPONENTS {
        let nl = Nonlinearity::power_law(m)?;
        for lambda in ACCRETIVITY_LAMBDAS {
            let r = ctx.accretivity_residual(&nl, &u, &v, lambda)?;
            worst = worst.min(r / (1.0 + duv));
        }
    }
    Ok(worst)
}

/// Outcome of one resolvent-contractivity case.
#[derive(Clone, Copy, Debug)]
pub struct ContractivityOutcome {
    /// ‖g‖₁ + 10⁻⁸(1+‖g‖₁) − ‖u‖₁; negative means violation.
    pub norm_margin: f64,
    /// Solver met its own residual contract.
    pub residual_ok: bool,
}

/// One resolvent solve with random graph, power law, and λ: checks the
/// contraction ‖u‖₁ ≤ ‖g‖₁ and the residual stopping contract.
pub fn contractivity_case(rng: &mut ChaCha8Rng) -> Result<ContractivityOutcome> {
    let g = random_graph(rng, 30, false, false);
    let m = ACCRETIVITY_EXPONENTS[rng.random_range(0..4)];
    let nl = Nonlinearity::power_law(m)?;
    let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
    let data = random_function(rng, &g, SignMode::Any, 2.0);
    let opts = SolverOptions::default();
    let sol = solve_finite(
        &ResolventProblem {
            graph: &g,
            nl: &nl,
            lambda,
            g: &data,
        },
        &opts,
    )?;
    let gn = data.norm(LpNorm::L1, &g)?;
    let un = sol.u.norm(LpNorm::L1, &g)?;
    Ok(ContractivityOutcome {
        norm_margin: gn + 1e-8 * (1.0 + gn) - un,
        residual_ok: sol.residual_l1 <= opts.residual_tol * gn.max(1.0),
    })
}

/// One sign-preservation case on a random connected graph: g ≥ 0, g ≢ 0
/// must give u > 0 everywhere; −g must give u < 0 everywhere.
pub fn positivity_case(rng: &mut ChaCha8Rng) -> Result<bool> {
    let g = random_graph(rng, 30, true, false);
    let m = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let nl = Nonlinearity::power_law(m)?;
    let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
    let mut data = random_function(rng, &g, SignMode::NonNegative, 2.0);
    if data.is_zero() {
        data.set(g.id_of(0), rng.random_range(0.1..2.0))?;
    }
    let opts = SolverOptions::default();
    let sol = solve_finite(
        &ResolventProblem {
            graph: &g,
            nl: &nl,
            lambda,
            g: &data,
        },
        &opts,
    )?;
    let pos = (0..g.len()).all(|i| sol.u.get(g.id_of(i)) > 0.0);
    let neg_data = data.scaled(-1.0);
    let sol = solve_finite(
        &ResolventProblem {
            graph: &g,
            nl: &nl,
            lambda,
            g: &neg_data,
        },
        &opts,
    )?;
    let neg = (0..g.len()).all(|i| sol.u.get(g.id_of(i)) < 0.0);
    Ok(pos && neg)
}

/// One comparison-principle case: g₁ = g₂ + (random nonnegative bump)
/// must give u₁ ≥ u₂ − 10⁻¹⁰ pointwise.
pub fn comparison_case(rng: &mut ChaCha8Rng) -> Result<bool> {
    let g = random_graph(rng, 30, false, false);
    let m = ACCRETIVITY_EXPONENTS[rng.random_range(0..4)];
    let nl = Nonlinearity::power_law(m)?;
    let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
    let g2 = random_function(rng, &g, SignMode::Any, 2.0);
    let bump = random_function(rng, &g, SignMode::NonNegative, 1.0);
    let g1 = g2.add_scaled(1.0, &bump);
    comparison_check(&g, &nl, lambda, &g1, &g2, 1e-10, &SolverOptions::default())
}

/// One mass-conservation case (κ ≡ 0, f ≡ 0): max over steps of the
/// normalized drift |Σu_kμ − Σu₀μ| / (1 + Σ|u₀|μ).
pub fn mass_case(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = random_graph(rng, 20, false, true);
    let m = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let nl = Nonlinearity::power_law(m)?;
    let u0 = random_function(rng, &g, SignMode::Any, 2.0);
    let r = evolve(
        &g,
        &nl,
        &u0,
        &Forcing::Zero,
        1.0,
        0.2,
        &SolverOptions::default(),
    )?;
    let m0 = mass(&u0, &g)?;
    let scale = 1.0 + u0.norm(LpNorm::L1, &g)?;
    let mut worst: f64 = 0.0;
    for s in &r.states {
        worst = worst.max((mass(s, &g)? - m0).abs() / scale);
    }
    Ok(worst)
}

/// One paired-trajectory case on a shared grid: the contraction gap of two
/// runs with random data and random constant forcings. ≤ 0 up to solver
/// residuals.
pub fn contraction_case(rng: &mut ChaCha8Rng) -> Result<f64> {
    let zero_kappa = rng.random_bool(0.5);
    let g = random_graph(rng, 20, false, zero_kappa);
    let m = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let nl = Nonlinearity::power_law(m)?;
    let u0 = random_function(rng, &g, SignMode::Any, 2.0);
    let v0 = random_function(rng, &g, SignMode::Any, 2.0);
    let f1 = Forcing::Constant(random_function(rng, &g, SignMode::Any, 1.0));
    let f2 = Forcing::Constant(random_function(rng, &g, SignMode::Any, 1.0));
    let opts = SolverOptions::default();
    let r1 = evolve(&g, &nl, &u0, &f1, 1.0, 0.25, &opts)?;
    let r2 = evolve(&g, &nl, &v0, &f2, 1.0, 0.25, &opts)?;
    contraction_gap(&r1, &r2, &g)
}

/// One Dirichlet-commutation case: restriction commutes with the linear
/// Laplacian on functions supported in the subset; returns the sup
/// discrepancy.
pub fn commutation_case(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = random_graph(rng, 30, false, false);
    let mut a: Vec<_> = (0..g.len())
        .filter(|_| rng.random_bool(0.6))
        .map(|i| g.id_of(i).to_string())
        .collect();
    if a.is_empty() {
        a.push(g.id_of(rng.random_range(0..g.len())).to_string());
    }
    let mut v = NodeFunction::zero();
    for id in &a {
        if rng.random_bool(0.7) {
            v.set(id.clone(), rng.random_range(-2.0..2.0))?;
        }
    }
    dirichlet_commutation_check(&g, &a, &v)
}

/// Outcome of one bracket-limit case.
#[derive(Clone, Copy, Debug)]
pub struct BracketLimitOutcome {
    /// |limit approximation at λ=10⁻³ − closed form| / |closed form|.
    pub relative_error: f64,
    /// Difference quotients nonincreasing as λ decreases (convexity).
    pub monotone: bool,
}

/// One bracket-limit case: random k with values of magnitude in [0.1, 3)
/// and z with |z| ≤ 3; compares the λ→0 difference quotients against the
/// closed-form ℓ¹ bracket. Draws whose closed form nearly cancels are
/// resampled (relative error is ill-conditioned there, not wrong).
pub fn bracket_limit_case(rng: &mut ChaCha8Rng) -> Result<BracketLimitOutcome> {
    let ids: Vec<String> = (0..8).map(|i| format!("x{i}")).collect();
    let lambdas = [1.0, 0.1, 0.01, 1e-3];
    for _ in 0..64 {
        let mut k = NodeFunction::zero();
        for id in &ids {
            if rng.random_bool(0.5) {
                let mag: f64 = rng.random_range(0.1..3.0);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                k.set(id.clone(), sign * mag)?;
            }
        }
        if k.is_zero() {
            continue;
        }
        let mut z = NodeFunction::zero();
        for id in &ids {
            if rng.random_bool(0.7) {
                z.set(id.clone(), rng.random_range(-3.0..3.0))?;
            }
        }
        if z.is_zero() {
            continue;
        }
        let exact = NodeFunction::bracket_plus(&z, &k, BracketSpace::L1, &UnitMeasure)?;
        let scale = k.norm(LpNorm::L1, &UnitMeasure)? * z.norm(LpNorm::L1, &UnitMeasure)?;
        if exact.abs() < 1e-6 * scale {
            continue;
        }
        let seq = oracle::bracket_by_limit(&z, &k, &UnitMeasure, &lambdas)?;
        let monotone = seq.windows(2).all(|p| p[1] <= p[0] + 1e-9 * scale.max(1.0));
        let relative_error = (seq[lambdas.len() - 1] - exact).abs() / exact.abs();
        return Ok(BracketLimitOutcome {
            relative_error,
            monotone,
        });
    }
    Err(GpmeError::InvalidArgument(
        "bracket-limit generator failed to produce a well-conditioned draw".into(),
    ))
}

/// One heat-consistency case: errors of implicit Euler at ε = 0.05 and
/// ε/2 against the exact semigroup at T = 1 on a random connected graph.
/// None when the fine error sits below the noise floor (the ratio is then
/// meaningless).
pub fn heat_order_case(rng: &mut ChaCha8Rng) -> Result<Option<(f64, f64)>> {
    let g = random_graph(rng, 50, true, false);
    let nl = Nonlinearity::power_law(1.0)?;
    let mut u0 = random_function(rng, &g, SignMode::Any, 2.0);
    if u0.is_zero() {
        u0.set(g.id_of(0), 1.0)?;
    }
    let op = oracle::assemble_dense(&g)?;
    let exact = oracle::expm_apply(&op, 1.0, &u0)?;
    let opts = SolverOptions::default();
    let e = |eps: f64| -> Result<f64> {
        let r = evolve(&g, &nl, &u0, &Forcing::Zero, 1.0, eps, &opts)?;
        r.final_state().sub(&exact).norm(LpNorm::L1, &g)
    };
    let e_coarse = e(0.05)?;
    let e_fine = e(0.025)?;
    if e_fine < 1e-9 {
        return Ok(None);
    }
    Ok(Some((e_coarse, e_fine)))
}

/// Outcome of the canonical exhaustion scenario.
#[derive(Clone, Copy, Debug)]
pub struct ExhaustionOutcome {
    /// Truncated solutions nondecreasing in the level at every node
    /// (slack 10⁻¹⁰).
    pub monotone: bool,
    /// ‖u₃ − u₂‖₁.
    pub first_gap: f64,
    /// ‖u₂₀ − u₁₉‖₁.
    pub last_gap: f64,
}

/// The half-line exhaustion scenario: g = δ₀, m = 2, λ = 1, truncations
/// to the first 2..=20 nodes. Deterministic.
pub fn exhaustion_scenario() -> Result<ExhaustionOutcome> {
    let hl = family::from_cli_spec("half_line")?;
    let nl = Nonlinearity::power_law(2.0)?;
    let data = NodeFunction::delta("0", 1.0);
    // Solve well below the slack so the true (tiny) level gaps are not
    // swamped by solver error.
    let opts = SolverOptions {
        residual_tol: 1e-13,
        ..SolverOptions::default()
    };
    let levels = exhaustion_from(hl.as_ref(), &["0".to_string()], 20)?;
    let mut sols = Vec::new();
    for level in &levels[1..] {
        sols.push(solve_truncation(hl.as_ref(), &nl, 1.0, &data, level, &opts)?.u);
    }
    let mut monotone = true;
    let mut gaps = Vec::new();
    for pair in sols.windows(2) {
        monotone &= pair[1].ge_up_to(&pair[0], 1e-10);
        gaps.push(pair[1].sub(&pair[0]).norm(LpNorm::L1, &UnitMeasure)?);
    }
    Ok(ExhaustionOutcome {
        monotone,
        first_gap: gaps[0],
        last_gap: *gaps.last().expect("19 levels give 18 gaps"),
    })
}

/// The named randomized suites behind `check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Accretivity,
    Contractivity,
    Comparison,
    Mass,
    Exhaustion,
    HeatOrder,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Accretivity,
        Suite::Contractivity,
        Suite::Comparison,
        Suite::Mass,
        Suite::Exhaustion,
        Suite::HeatOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Accretivity => "accretivity",
            Suite::Contractivity => "contractivity",
            Suite::Comparison => "comparison",
            Suite::Mass => "mass",
            Suite::Exhaustion => "exhaustion",
            Suite::HeatOrder => "heat-order",
        }
    }

    /// Parses a CLI suite name.
    ///
    /// # Errors
    /// Unknown name.
    pub fn from_name(name: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                GpmeError::InvalidArgument(format!(
                    "unknown suite `{name}`; expected one of accretivity, contractivity, \
                     comparison, mass, exhaustion, heat-order"
                ))
            })
    }

    pub fn default_cases(self) -> usize {
        match self {
            Suite::Accretivity => 1000,
            Suite::Contractivity => 500,
            Suite::Comparison => 200,
            Suite::Mass => 100,
            Suite::Exhaustion => 1,
            Suite::HeatOrder => 20,
        }
    }
}

/// Aggregated result of one suite run.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub seed: u64,
    pub cases_requested: usize,
    pub cases_run: usize,
    pub skipped: usize,
    pub failures: usize,
    /// Suite-specific extremal statistic (see `extremal_label`).
    pub extremal: Option<f64>,
    pub extremal_label: &'static str,
    /// First few failure descriptions.
    pub failure_notes: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, cases_requested: usize, extremal_label: &'static str) -> Self {
        SuiteReport {
            suite: suite.name(),
            seed,
            cases_requested,
            cases_run: 0,
            skipped: 0,
            failures: 0,
            extremal: None,
            extremal_label,
            failure_notes: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, stat: f64, worse: impl Fn(f64, f64) -> bool, note: String) {
        self.cases_run += 1;
        match self.extremal {
            Some(e) if !worse(stat, e) => {}
            _ => self.extremal = Some(stat),
        }
        if !ok {
            self.failures += 1;
            if self.failure_notes.len() < 5 {
                self.failure_notes.push(note);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let extremal = match self.extremal {
            Some(e) => format!("{}: {:.3e}", self.extremal_label, e),
            None => "no cases evaluated".to_string(),
        };
        let skipped = if self.skipped > 0 {
            format!(", {} skipped", self.skipped)
        } else {
            String::new()
        };
        format!(
            "{}: {}/{} passed{} ({})",
            self.suite,
            self.cases_run - self.failures,
            self.cases_run,
            skipped,
            extremal
        )
    }
}

/// Runs `cases` independent draws of the named suite from the given seed.
/// Zero cases is a vacuous pass. Failures are counted, not short-circuited.
///
/// # Errors
/// Infrastructure failures (generator or solver breakdowns), as opposed to
/// property violations, which are reported in the `SuiteReport`.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smaller = |a: f64, b: f64| a < b;
    let larger = |a: f64, b: f64| a > b;
    match suite {
        Suite::Accretivity => {
            let mut rep = SuiteReport::new(suite, seed, cases, "worst normalized margin");
            for i in 0..cases {
                let margin = accretivity_case(&mut rng)?;
                rep.record(
                    margin >= -1e-10,
                    margin,
                    smaller,
                    format!("case {i}: normalized margin {margin:.3e} < -1e-10"),
                );
            }
            Ok(rep)
        }
        Suite::Contractivity => {
            let mut rep = SuiteReport::new(suite, seed, cases, "worst norm margin");
            for i in 0..cases {
                let out = contractivity_case(&mut rng)?;
                rep.record(
                    out.norm_margin >= 0.0 && out.residual_ok,
                    out.norm_margin,
                    smaller,
                    format!(
                        "case {i}: norm margin {:.3e}, residual contract {}",
                        out.norm_margin,
                        if out.residual_ok { "met" } else { "missed" }
                    ),
                );
            }
            Ok(rep)
        }
        Suite::Comparison => {
            let mut rep = SuiteReport::new(suite, seed, cases, "failing cases");
            for i in 0..cases {
                let ok = comparison_case(&mut rng)?;
                rep.record(
                    ok,
                    if ok { 0.0 } else { 1.0 },
                    larger,
                    format!("case {i}: u1 dropped below u2 - 1e-10"),
                );
            }
            Ok(rep)
        }
        Suite::Mass => {
            let mut rep = SuiteReport::new(suite, seed, cases, "worst normalized drift");
            for i in 0..cases {
                let drift = mass_case(&mut rng)?;
                rep.record(
                    drift <= 1e-8,
                    drift,
                    larger,
                    format!("case {i}: normalized mass drift {drift:.3e} > 1e-8"),
                );
            }
            Ok(rep)
        }
        Suite::Exhaustion => {
            let mut rep = SuiteReport::new(suite, seed, cases, "final level gap");
            if cases > 0 {
                let out = exhaustion_scenario()?;
                let ok = out.monotone && out.last_gap < out.first_gap;
                rep.record(
                    ok,
                    out.last_gap,
                    larger,
                    format!(
                        "half-line scenario: monotone {}, gaps {:.3e} -> {:.3e}",
                        out.monotone, out.first_gap, out.last_gap
                    ),
                );
            }
            Ok(rep)
        }
        Suite::HeatOrder => {
            let mut rep = SuiteReport::new(suite, seed, cases, "worst measured order");
            for i in 0..cases {
                match heat_order_case(&mut rng)? {
                    None => rep.skipped += 1,
                    Some((e_coarse, e_fine)) => {
                        let order = (e_coarse / e_fine).log2();
                        rep.record(
                            (0.8..=1.2).contains(&order),
                            order,
                            |a, b| (a - 1.0).abs() > (b - 1.0).abs(),
                            format!("case {i}: measured order {order:.3} outside [0.8, 1.2]"),
                        );
                    }
                }
            }
            Ok(rep)
        }
    }
}
