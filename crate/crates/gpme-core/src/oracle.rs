//! Independent reference computations for tests and acceptance checks:
//! dense matrix assembly of Δ, a heat-semigroup solver via symmetric
//! eigendecomposition, a brute-force single-node resolvent and the
//! defining-limit evaluation of the bracket.
//!
//! Nothing here shares arithmetic kernels with the production solvers:
//! sums are plain left-to-right folds (no compensation), the scalar solve
//! is a grid scan plus naive bisection (no Newton, no sign-aware
//! bracketing) and the semigroup comes from an eigendecomposition rather
//! than time stepping. Agreement between the two code paths is therefore
//! evidence, not tautology.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GpmeError, Result};
use crate::graph::Graph;
use crate::node_function::{Measure, NodeFunction};
use crate::nonlinearity::Nonlinearity;
use crate::NodeId;

/// Upper size limit for dense assembly.
pub const DENSE_NODE_CAP: usize = 2000;

/// Dense matrix representation of Δ in a fixed node order.
pub struct DenseOperator {
    ids: Vec<NodeId>,
    mu: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Matrix-vector product M·v for v given as a node function.
    ///
    /// # Errors
    /// Support outside the node order.
    pub fn apply(&self, v: &NodeFunction) -> Result<NodeFunction> {
        let x = self.to_vector(v)?;
        let y = &self.matrix * x;
        Ok(self.unpack(&y))
    }

    fn to_vector(&self, v: &NodeFunction) -> Result<DVector<f64>> {
        for id in v.support() {
            if !self.ids.iter().any(|k| k == id) {
                return Err(GpmeError::UnknownNode(id.to_string()));
            }
        }
        Ok(DVector::from_iterator(
            self.ids.len(),
            self.ids.iter().map(|id| v.get(id)),
        ))
    }

    fn unpack(&self, y: &DVector<f64>) -> NodeFunction {
        let mut out = NodeFunction::zero();
        for (i, id) in self.ids.iter().enumerate() {
            if y[i] != 0.0 {
                out.set(id.clone(), y[i]).expect("finite entries");
            }
        }
        out
    }
}

/// Materializes Δ entry by entry: M[i][i] = (Σ_j w(i,j) + κ(i))/μ(i) and
/// M[i][j] = −w(i,j)/μ(i).
///
/// # Errors
/// More than [`DENSE_NODE_CAP`] nodes.
pub fn assemble_dense(g: &Graph) -> Result<DenseOperator> {
    let n = g.len();
    if n > DENSE_NODE_CAP {
        return Err(GpmeError::InvalidArgument(format!(
            "dense assembly capped at {DENSE_NODE_CAP} nodes, graph has {n}"
        )));
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mu = g.mu_at(i);
        let mut row_weight = 0.0;
        for &(j, w) in g.neighbors(i) {
            row_weight += w;
            m[(i, j)] = -w / mu;
        }
        m[(i, i)] = (row_weight + g.kappa_at(i)) / mu;
    }
    Ok(DenseOperator {
        ids: g.node_ids().to_vec(),
        mu: (0..n).map(|i| g.mu_at(i)).collect(),
        matrix: m,
    })
}

/// e^{−tM}·u₀ for the assembled Δ.
///
/// Δ = D_μ⁻¹A with A symmetric, so S = D_μ^{−1/2} A D_μ^{−1/2} is symmetric
/// with the same spectrum and e^{−tΔ} = D^{−1/2} e^{−tS} D^{1/2}; e^{−tS}
/// comes from an eigendecomposition of (the symmetrized) S.
///
/// # Errors
/// t negative or support outside the node order.
pub fn expm_apply(op: &DenseOperator, t: f64, u0: &NodeFunction) -> Result<NodeFunction> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "semigroup time must be nonnegative, got {t}"
        )));
    }
    let n = op.ids.len();
    let sqrt_mu: Vec<f64> = op.mu.iter().map(|m| m.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = op.matrix[(i, j)] * sqrt_mu[i] / sqrt_mu[j];
        }
    }
    // μ_i·(w/μ_i) is not exactly w in floats; symmetrize the remainder away.
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);

    let x = op.to_vector(u0)?;
    let x_sym = DVector::from_iterator(n, (0..n).map(|i| x[i] * sqrt_mu[i]));
    let coeffs = eig.eigenvectors.transpose() * x_sym;
    let damped = DVector::from_iterator(
        n,
        (0..n).map(|i| coeffs[i] * (-t * eig.eigenvalues[i]).exp()),
    );
    let y_sym = &eig.eigenvectors * damped;
    let y = DVector::from_iterator(n, (0..n).map(|i| y_sym[i] / sqrt_mu[i]));
    Ok(op.unpack(&y))
}

/// Solves the single-node resolvent equation u + λ(κ/μ)φ(u) = g by an
/// expanding bracket, a 1000-cell grid scan and plain bisection down to a
/// width of 10⁻¹²·max(1,|u|).
pub fn brute_resolvent_1d(kappa: f64, mu: f64, nl: &Nonlinearity, lambda: f64, g: f64) -> f64 {
    let c = lambda * kappa / mu;
    let f = |u: f64| u + c * nl.phi(u) - g;
    if f(0.0) == 0.0 {
        return 0.0;
    }

    let mut bound = 1.0 + g.abs();
    while f(-bound) > 0.0 || f(bound) < 0.0 {
        bound *= 2.0;
    }

    let mut lo = -bound;
    let mut hi = bound;
    let cells = 1000;
    for k in 0..cells {
        let a = -bound + 2.0 * bound * (k as f64) / (cells as f64);
        let b = -bound + 2.0 * bound * ((k + 1) as f64) / (cells as f64);
        if f(a) <= 0.0 && f(b) >= 0.0 {
            lo = a;
            hi = b;
            break;
        }
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * mid.abs().max(1.0) {
            break;
        }
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn l1_naive(f: &NodeFunction, mu: &(impl Measure + ?Sized)) -> Result<f64> {
    let mut acc = 0.0;
    for (id, v) in f.iter() {
        let m = mu
            .mu(id)
            .ok_or_else(|| GpmeError::UnknownNode(id.to_string()))?;
        acc += v.abs() * m;
    }
    Ok(acc)
}

/// Difference quotients ‖k‖₁·λ⁻¹(‖k+λz‖₁−‖k‖₁) along the given λ sequence.
/// By convexity of the norm the quotient is nondecreasing in λ, so a
/// decreasing λ sequence yields a nonincreasing output converging to the
/// closed-form bracket as λ↓0.
///
/// # Errors
/// k ≡ 0 (the bracket normalization degenerates), empty or nonpositive λ.
pub fn bracket_by_limit(
    z: &NodeFunction,
    k: &NodeFunction,
    mu: &(impl Measure + ?Sized),
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    if k.is_zero() {
        return Err(GpmeError::InvalidArgument(
            "bracket limit needs k with nonzero norm".into(),
        ));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(GpmeError::InvalidArgument(
            "lambda sequence must be nonempty and positive".into(),
        ));
    }
    let norm_k = l1_naive(k, mu)?;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let shifted = k.add_scaled(lambda, z);
        let quotient = (l1_naive(&shifted, mu)? - norm_k) / lambda;
        out.push(norm_k * quotient);
    }
    Ok(out)
}
