//! Serial result shapes written by `resolve` and `evolve` and read back by
//! `emit-plot`. All maps are ordered, so identical inputs produce
//! byte-identical files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use gpme_core::error::{GpmeError, Result};
use gpme_core::evolution::{ClassicReport, EvolutionResult};
use gpme_core::node_function::{LpNorm, Measure, NodeFunction};
use gpme_core::resolvent::ResolventSolution;

pub const RESOLVE_KIND: &str = "resolvent_solution";
pub const EVOLVE_KIND: &str = "evolution_result";

fn fn_to_map(f: &NodeFunction) -> BTreeMap<String, f64> {
    f.iter().map(|(id, v)| (id.to_string(), v)).collect()
}

fn mass(f: &NodeFunction, mu: &(impl Measure + ?Sized)) -> Result<f64> {
    let mut acc = 0.0;
    for (id, v) in f.iter() {
        acc += v * mu.mu(id).ok_or_else(|| GpmeError::UnknownNode(id.into()))?;
    }
    Ok(acc)
}

#[derive(Serialize, Deserialize)]
pub struct ResolveOutput {
    pub kind: String,
    pub lambda: f64,
    pub phi: serde_json::Value,
    pub u: BTreeMap<String, f64>,
    pub v: BTreeMap<String, f64>,
    pub residual_l1: f64,
    pub iterations: usize,
    pub truncation_level: Option<usize>,
    pub monotone_certificate: Option<bool>,
}

impl ResolveOutput {
    pub fn build(lambda: f64, phi: serde_json::Value, sol: &ResolventSolution) -> Self {
        ResolveOutput {
            kind: RESOLVE_KIND.to_string(),
            lambda,
            phi,
            u: fn_to_map(&sol.u),
            v: fn_to_map(&sol.v),
            residual_l1: sol.residual_l1,
            iterations: sol.iterations,
            truncation_level: sol.truncation_level,
            monotone_certificate: sol.monotone_certificate,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct StateSummary {
    pub t: f64,
    pub l1_norm: f64,
    pub mass: f64,
}

#[derive(Serialize, Deserialize)]
pub struct StepRecord {
    pub residual_l1: f64,
    pub iterations: usize,
    pub truncation_level: Option<usize>,
}

#[derive(Serialize, Deserialize)]
pub struct ClassicOut {
    pub certified: bool,
    pub deg_bound: Option<f64>,
    pub mu_lower_bound: Option<f64>,
    pub note: String,
}

impl From<ClassicReport> for ClassicOut {
    fn from(r: ClassicReport) -> Self {
        ClassicOut {
            certified: r.certified,
            deg_bound: r.deg_bound,
            mu_lower_bound: r.mu_lower_bound,
            note: r.note,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct EvolveOutput {
    pub kind: String,
    pub phi: serde_json::Value,
    pub t_final: f64,
    pub epsilon: f64,
    pub grid: Vec<f64>,
    pub integral_error_estimate: f64,
    pub states: Vec<BTreeMap<String, f64>>,
    pub summary: Vec<StateSummary>,
    pub per_step: Vec<StepRecord>,
    pub delta_estimate: Option<Vec<f64>>,
    pub classic_regime: ClassicOut,
}

impl EvolveOutput {
    pub fn build(
        phi: serde_json::Value,
        r: &EvolutionResult,
        classic: ClassicOut,
        mu: &(impl Measure + ?Sized),
    ) -> Result<Self> {
        let mut summary = Vec::with_capacity(r.states.len());
        for (k, s) in r.states.iter().enumerate() {
            summary.push(StateSummary {
                t: r.discretization.grid[k],
                l1_norm: s.norm(LpNorm::L1, mu)?,
                mass: mass(s, mu)?,
            });
        }
        Ok(EvolveOutput {
            kind: EVOLVE_KIND.to_string(),
            phi,
            t_final: *r.discretization.grid.last().expect("nonempty grid"),
            epsilon: r.discretization.epsilon,
            grid: r.discretization.grid.clone(),
            integral_error_estimate: r.discretization.integral_error_estimate,
            states: r.states.iter().map(fn_to_map).collect(),
            summary,
            per_step: r
                .per_step
                .iter()
                .map(|d| StepRecord {
                    residual_l1: d.residual_l1,
                    iterations: d.iterations,
                    truncation_level: d.truncation_level,
                })
                .collect(),
            delta_estimate: r.delta_estimate.clone(),
            classic_regime: classic,
        })
    }
}

/// Pretty JSON plus trailing newline, the one serialization used for all
/// structured outputs.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

fn csv_into_string(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr
        .into_inner()
        .map_err(|e| GpmeError::InvalidArgument(format!("csv buffer error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| GpmeError::Parse(format!("csv output not utf-8: {e}")))
}

/// `node,value` rows of the resolvent solution u.
pub fn solution_csv(out: &ResolveOutput) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["node", "value"]).map_err(csv_err)?;
    for (id, v) in &out.u {
        wtr.serialize((id, v)).map_err(csv_err)?;
    }
    csv_into_string(wtr)
}

/// Long-format `t,node,value` rows over all grid states (stored entries
/// only; absent nodes are zero).
pub fn trajectory_csv(out: &EvolveOutput) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["t", "node", "value"]).map_err(csv_err)?;
    for (k, state) in out.states.iter().enumerate() {
        for (id, v) in state {
            wtr.serialize((out.grid[k], id, v)).map_err(csv_err)?;
        }
    }
    csv_into_string(wtr)
}

/// `t,l1_norm,mass` rows of the per-state summaries.
pub fn norms_csv(out: &EvolveOutput) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["t", "l1_norm", "mass"])
        .map_err(csv_err)?;
    for s in &out.summary {
        wtr.serialize((s.t, s.l1_norm, s.mass)).map_err(csv_err)?;
    }
    csv_into_string(wtr)
}

fn csv_err(e: csv::Error) -> GpmeError {
    GpmeError::Parse(format!("csv write error: {e}"))
}
