//! Python bindings for the solver core. Node functions cross the boundary
//! as plain dicts mapping node id to value; graphs and nonlinearities are
//! opaque handles around their Rust counterparts.
//!
//! Domain refusals (hypothesis violations, non-convergence) surface as
//! ValueError with the solver's diagnostic message.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gpme_core::evolution::{self, Forcing};
use gpme_core::laplacian::LaplacianContext;
use gpme_core::node_function::{BracketSpace, LpNorm, Measure, NodeFunction, UnitMeasure};
use gpme_core::resolvent::{solve_componentwise, ResolventProblem, SolverOptions};

fn err(e: gpme_core::GpmeError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_node_function(values: BTreeMap<String, f64>) -> PyResult<NodeFunction> {
    NodeFunction::from_pairs(values).map_err(err)
}

fn to_dict(f: &NodeFunction) -> BTreeMap<String, f64> {
    f.iter().map(|(id, v)| (id.to_string(), v)).collect()
}

fn parse_norm(p: &str) -> PyResult<LpNorm> {
    match p {
        "l1" => Ok(LpNorm::L1),
        "l2" => Ok(LpNorm::L2),
        "linf" => Ok(LpNorm::LInf),
        other => Err(PyValueError::new_err(format!(
            "unknown norm {other:?}, expected one of \"l1\", \"l2\", \"linf\""
        ))),
    }
}

fn parse_space(p: &str) -> PyResult<BracketSpace> {
    match p {
        "l1" => Ok(BracketSpace::L1),
        "l2" => Ok(BracketSpace::L2),
        other => Err(PyValueError::new_err(format!(
            "unknown bracket space {other:?}, expected \"l1\" or \"l2\""
        ))),
    }
}

/// Finite weighted graph with node measure and killing term.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: gpme_core::graph::Graph,
}

#[pymethods]
impl PyGraph {
    /// Builds a graph from node and edge lists. Nodes are
    /// (id, mu, kappa) triples, edges (u, v, weight) with positive weight.
    #[new]
    fn new(nodes: Vec<(String, f64, f64)>, edges: Vec<(String, String, f64)>) -> PyResult<Self> {
        let inner = gpme_core::graph::Graph::new(nodes, edges).map_err(err)?;
        Ok(PyGraph { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = gpme_core::graph::Graph::from_json_str(s).map_err(err)?;
        Ok(PyGraph { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn node_ids(&self) -> Vec<String> {
        self.inner
            .node_ids()
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn mu(&self, id: &str) -> PyResult<f64> {
        Measure::mu(&self.inner, id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown node {id:?}")))
    }

    /// Weighted degree plus killing at a node, (deg, Deg) where the second
    /// entry is normalized by the node measure.
    fn degree(&self, id: &str) -> PyResult<(f64, f64)> {
        self.inner.degree(id).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={})", self.inner.len())
    }
}

/// Nonlinearity Φ acting pointwise through a strictly increasing scalar
/// function with φ(0) = 0.
#[pyclass(name = "Nonlinearity", frozen)]
struct PyNonlinearity {
    inner: gpme_core::nonlinearity::Nonlinearity,
}

#[pymethods]
impl PyNonlinearity {
    /// φ(s) = s·|s|^{m−1}: porous medium for m > 1, fast diffusion for
    /// m < 1, the heat equation at m = 1.
    #[staticmethod]
    fn power_law(m: f64) -> PyResult<Self> {
        let inner = gpme_core::nonlinearity::Nonlinearity::power_law(m).map_err(err)?;
        Ok(PyNonlinearity { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = gpme_core::nonlinearity::Nonlinearity::from_spec_str(s).map_err(err)?;
        Ok(PyNonlinearity { inner })
    }

    fn to_json(&self) -> String {
        self.inner.spec_json()
    }

    fn phi(&self, s: f64) -> f64 {
        self.inner.phi(s)
    }

    fn psi(&self, s: f64) -> f64 {
        self.inner.psi(s)
    }

    fn __repr__(&self) -> String {
        format!("Nonlinearity({})", self.inner.spec_json())
    }
}

/// ℓᵖ norm of a node function against the graph measure, or counting
/// measure when graph is omitted. p is "l1", "l2", or "linf".
#[pyfunction]
#[pyo3(signature = (f, p = "l1", graph = None))]
fn norm(f: BTreeMap<String, f64>, p: &str, graph: Option<&PyGraph>) -> PyResult<f64> {
    let f = to_node_function(f)?;
    let p = parse_norm(p)?;
    match graph {
        Some(g) => f.norm(p, &g.inner).map_err(err),
        None => f.norm(p, &UnitMeasure).map_err(err),
    }
}

/// One-sided bracket ⟨z,k⟩₊ in ℓ¹ or ℓ². Uses the graph measure when given,
/// counting measure otherwise.
#[pyfunction]
#[pyo3(signature = (z, k, space = "l1", graph = None))]
fn bracket_plus(
    z: BTreeMap<String, f64>,
    k: BTreeMap<String, f64>,
    space: &str,
    graph: Option<&PyGraph>,
) -> PyResult<f64> {
    let z = to_node_function(z)?;
    let k = to_node_function(k)?;
    let space = parse_space(space)?;
    match graph {
        Some(g) => NodeFunction::bracket_plus(&z, &k, space, &g.inner).map_err(err),
        None => NodeFunction::bracket_plus(&z, &k, space, &UnitMeasure).map_err(err),
    }
}

/// Applies the nonlinear operator ΔΦ to u, returning the node function
/// x ↦ (deg(x)·φ(u(x)) − Σ_y w(x,y)·φ(u(y)))/μ(x).
#[pyfunction]
fn apply_delta_phi(
    graph: &PyGraph,
    nl: &PyNonlinearity,
    u: BTreeMap<String, f64>,
) -> PyResult<BTreeMap<String, f64>> {
    let u = to_node_function(u)?;
    let lap = LaplacianContext::new(&graph.inner);
    let out = lap.apply_delta_phi(&nl.inner, &u).map_err(err)?;
    Ok(to_dict(&out))
}

/// Mass Σ f(x)·μ(x) over the graph.
#[pyfunction]
fn mass(f: BTreeMap<String, f64>, graph: &PyGraph) -> PyResult<f64> {
    let f = to_node_function(f)?;
    let ones = f.map_values(|_| 1.0);
    NodeFunction::dot_mu(&f, &ones, &graph.inner).map_err(err)
}

fn solver_options(residual_tol: f64) -> PyResult<SolverOptions> {
    if !(residual_tol.is_finite() && residual_tol > 0.0) {
        return Err(PyValueError::new_err(format!(
            "residual_tol must be positive and finite, got {residual_tol}"
        )));
    }
    Ok(SolverOptions {
        residual_tol,
        ..SolverOptions::default()
    })
}

/// Solves the resolvent equation (id + λΔΦ)u = g. Returns a dict with
/// keys "u", "v" (= Φu), "residual_l1", "iterations".
#[pyfunction]
#[pyo3(signature = (graph, nl, lam, g, residual_tol = 1e-10))]
fn resolve<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    nl: &PyNonlinearity,
    lam: f64,
    g: BTreeMap<String, f64>,
    residual_tol: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let g_fn = to_node_function(g)?;
    let problem = ResolventProblem {
        graph: &graph.inner,
        nl: &nl.inner,
        lambda: lam,
        g: &g_fn,
    };
    let sol = solve_componentwise(&problem, &solver_options(residual_tol)?).map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("u", to_dict(&sol.u))?;
    out.set_item("v", to_dict(&sol.v))?;
    out.set_item("residual_l1", sol.residual_l1)?;
    out.set_item("iterations", sol.iterations)?;
    Ok(out)
}

/// Runs implicit Euler for ∂ₜu + ΔΦu = f from u0 over [0, t_final] with
/// step size at most epsilon. The forcing is either None (f ≡ 0) or a
/// constant-in-time node function given as a dict. Returns a dict with
/// keys "grid" (time points) and "states" (one dict per time point).
#[pyfunction]
#[pyo3(signature = (graph, nl, u0, t_final, epsilon, forcing = None, residual_tol = 1e-10))]
#[allow(clippy::too_many_arguments)]
fn evolve<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    nl: &PyNonlinearity,
    u0: BTreeMap<String, f64>,
    t_final: f64,
    epsilon: f64,
    forcing: Option<BTreeMap<String, f64>>,
    residual_tol: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let u0 = to_node_function(u0)?;
    let f = match forcing {
        Some(values) => Forcing::Constant(to_node_function(values)?),
        None => Forcing::Zero,
    };
    let result = evolution::evolve(
        &graph.inner,
        &nl.inner,
        &u0,
        &f,
        t_final,
        epsilon,
        &solver_options(residual_tol)?,
    )
    .map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("grid", result.discretization.grid.clone())?;
    out.set_item(
        "states",
        result.states.iter().map(to_dict).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

#[pymodule]
fn gpme_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyNonlinearity>()?;
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(bracket_plus, m)?)?;
    m.add_function(wrap_pyfunction!(apply_delta_phi, m)?)?;
    m.add_function(wrap_pyfunction!(mass, m)?)?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}
