//! Solvers and verification tools for the generalized porous medium equation
//!
//! ∂ₜu + ΔΦu = f
//!
//! on weighted graphs G = (X, w, κ, μ), where Δ is the (weighted, killed)
//! graph Laplacian and Φ is the canonical extension of a strictly increasing
//! scalar nonlinearity φ with φ(0) = 0 and φ(ℝ) = ℝ.
//!
//! The crate is organized around the constructive existence machinery for
//! this equation:
//!
//! * [`graph`]: finite weighted graphs, lazy (countably infinite) graphs,
//!   Dirichlet subgraphs and exhaustions.
//! * [`node_function`]: finitely supported functions on nodes, measure-aware
//!   ℓᵖ norms, sign decompositions and the one-sided bracket ⟨z,k⟩₊.
//! * [`nonlinearity`]: the pair (φ, ψ = φ⁻¹), power-law families and custom
//!   expression-defined nonlinearities.
//! * [`laplacian`]: Δ, Dirichlet Laplacians, Green's identity and the
//!   composite operator 𝓛 = ΔΦ.
//! * [`resolvent`]: the nonlinear resolvent (id + λΔΦ)u = g on finite graphs
//!   and, via Dirichlet exhaustion, on infinite graphs.
//! * [`evolution`]: ε-discretizations, implicit Euler stepping, mild
//!   solutions by grid refinement, and the ℓ¹ contraction estimate.
//! * [`oracle`]: independent reference computations (dense assembly, matrix
//!   exponentials, brute-force scalar solves) used by tests.
//! * [`verification`]: seeded random instances and the randomized invariant
//!   suites exposed through the CLI `check` subcommand.

pub mod error;
pub mod evolution;
pub mod graph;
pub mod laplacian;
pub mod node_function;
pub mod nonlinearity;
pub mod oracle;
pub mod resolvent;
pub mod verification;

mod expr;
mod num;

pub use error::{GpmeError, Result};

/// Node identifiers are opaque strings; graphs map them to dense indices
/// internally, with the ordering fixed at construction.
pub type NodeId = String;
