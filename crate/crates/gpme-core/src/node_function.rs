//! Finitely supported real-valued functions on graph nodes.
//!
//! A [`NodeFunction`] stores a sparse map id → value; absent nodes are zero.
//! Norms are taken against a node measure μ supplied by a [`Measure`]
//! implementor (usually a graph). Values below any threshold are never
//! rounded away automatically: the comparison-principle checks are
//! sign-exact, so canonicalization removes exact zeros only.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{GpmeError, Result};
use crate::num::{sgn, KahanSum};
use crate::NodeId;

/// Source of the node measure μ used by ℓ¹/ℓ² norms.
///
/// Returns `None` for unknown node ids; norm computations turn that into an
/// [`GpmeError::UnknownNode`] error.
pub trait Measure {
    fn mu(&self, x: &str) -> Option<f64>;
}

/// The counting measure μ ≡ 1.
pub struct UnitMeasure;

impl Measure for UnitMeasure {
    fn mu(&self, _x: &str) -> Option<f64> {
        Some(1.0)
    }
}

impl<F: Fn(&str) -> Option<f64>> Measure for F {
    fn mu(&self, x: &str) -> Option<f64> {
        self(x)
    }
}

/// Exponent for node-function norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpNorm {
    L1,
    L2,
    LInf,
}

/// Norm underlying the one-sided bracket ⟨z,k⟩₊; only ℓ¹ and ℓ² have
/// closed forms here.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketSpace {
    L1,
    L2,
}

/// Finitely supported function on nodes. Cloning is cheap enough for the
/// graph sizes this crate targets; all arithmetic returns new values.
#[derive(Clone, Debug, Default)]
pub struct NodeFunction {
    values: BTreeMap<NodeId, f64>,
}

impl NodeFunction {
    /// The zero function.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a function from (id, value) pairs.
    ///
    /// # Errors
    /// Rejects non-finite values and repeated ids.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<NodeId>,
    {
        let mut values = BTreeMap::new();
        for (id, val) in pairs {
            let id = id.into();
            if !val.is_finite() {
                return Err(GpmeError::InvalidArgument(format!(
                    "non-finite value {val} at node `{id}`"
                )));
            }
            if values.insert(id.clone(), val).is_some() {
                return Err(GpmeError::InvalidArgument(format!(
                    "node `{id}` listed twice"
                )));
            }
        }
        Ok(Self { values })
    }

    /// Multiple of the indicator of a single node.
    pub fn delta(id: impl Into<NodeId>, value: f64) -> Self {
        let mut values = BTreeMap::new();
        values.insert(id.into(), value);
        Self { values }
    }

    /// Sets a single value.
    ///
    /// # Errors
    /// Rejects non-finite values.
    pub fn set(&mut self, id: impl Into<NodeId>, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(GpmeError::InvalidArgument(format!(
                "non-finite value {value}"
            )));
        }
        self.values.insert(id.into(), value);
        Ok(())
    }

    /// Value at a node (zero when absent).
    pub fn get(&self, id: &str) -> f64 {
        self.values.get(id).copied().unwrap_or(0.0)
    }

    /// Stored entries in ascending id order (may include explicit zeros).
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Ids carrying a nonzero value, ascending.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.values
            .iter()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| k.as_str())
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        self.values.values().filter(|v| **v != 0.0).count()
    }

    /// True when the function is identically zero.
    pub fn is_zero(&self) -> bool {
        self.values.values().all(|v| *v == 0.0)
    }

    /// True when every value is ≥ 0.
    pub fn is_nonnegative(&self) -> bool {
        self.values.values().all(|v| *v >= 0.0)
    }

    /// True when every value is ≤ 0.
    pub fn is_nonpositive(&self) -> bool {
        self.values.values().all(|v| *v <= 0.0)
    }

    /// Removes exactly-zero entries. Equality comparison does this
    /// implicitly; arithmetic results are not canonicalized automatically.
    pub fn canonicalize(&mut self) {
        self.values.retain(|_, v| *v != 0.0);
    }

    /// Canonicalized copy.
    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Pointwise sum.
    pub fn add(&self, other: &NodeFunction) -> NodeFunction {
        self.combine(other, |a, b| a + b)
    }

    /// Pointwise difference self − other.
    pub fn sub(&self, other: &NodeFunction) -> NodeFunction {
        self.combine(other, |a, b| a - b)
    }

    /// Pointwise self + c·other.
    pub fn add_scaled(&self, c: f64, other: &NodeFunction) -> NodeFunction {
        self.combine(other, |a, b| a + c * b)
    }

    /// Pointwise scaling.
    pub fn scaled(&self, c: f64) -> NodeFunction {
        NodeFunction {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), c * v))
                .collect(),
        }
    }

    /// Applies a scalar map pointwise over stored entries. The map must fix
    /// zero for the sparse representation to stay meaningful.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> NodeFunction {
        NodeFunction {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), f(*v)))
                .collect(),
        }
    }

    fn combine(&self, other: &NodeFunction, f: impl Fn(f64, f64) -> f64) -> NodeFunction {
        let mut values = BTreeMap::new();
        for id in self.values.keys().chain(other.values.keys()) {
            if !values.contains_key(id) {
                values.insert(id.clone(), f(self.get(id), other.get(id)));
            }
        }
        NodeFunction { values }
    }

    /// ℓᵖ norm against the measure μ.
    ///
    /// p=1: Σ|f|μ; p=2: (Σ f²μ)^{1/2}; p=∞: sup|f| (measure-free).
    ///
    /// # Errors
    /// Fails if a supported node is unknown to the measure.
    pub fn norm(&self, p: LpNorm, mu: &(impl Measure + ?Sized)) -> Result<f64> {
        match p {
            LpNorm::LInf => Ok(self.values.values().fold(0.0f64, |acc, v| acc.max(v.abs()))),
            LpNorm::L1 => {
                let mut acc = KahanSum::new();
                for (id, v) in self.iter() {
                    if v != 0.0 {
                        acc.add(v.abs() * self.mu_of(mu, id)?);
                    }
                }
                Ok(acc.value())
            }
            LpNorm::L2 => {
                let mut acc = KahanSum::new();
                for (id, v) in self.iter() {
                    if v != 0.0 {
                        acc.add(v * v * self.mu_of(mu, id)?);
                    }
                }
                Ok(acc.value().sqrt())
            }
        }
    }

    fn mu_of(&self, mu: &(impl Measure + ?Sized), id: &str) -> Result<f64> {
        mu.mu(id)
            .ok_or_else(|| GpmeError::UnknownNode(id.to_string()))
    }

    /// μ-weighted inner product Σ z·k·μ.
    pub fn dot_mu(z: &NodeFunction, k: &NodeFunction, mu: &(impl Measure + ?Sized)) -> Result<f64> {
        let mut acc = KahanSum::new();
        for (id, zv) in z.iter() {
            let kv = k.get(id);
            if zv != 0.0 && kv != 0.0 {
                acc.add(zv * kv * mu.mu(id).ok_or_else(|| GpmeError::UnknownNode(id.into()))?);
            }
        }
        Ok(acc.value())
    }

    /// One-sided bracket ⟨z,k⟩₊ = ‖k‖ lim_{λ→0⁺} λ⁻¹(‖k+λz‖−‖k‖).
    ///
    /// Closed forms: in ℓ² this is the plain inner product Σ z·k·μ; in ℓ¹ it
    /// is ‖k‖₁·( Σ_{k(x)=0} |z(x)|μ(x) + Σ_{k(x)≠0} z(x)·sgn(k(x))·μ(x) )
    /// with sgn(0)=0. For k ≡ 0 both reduce to 0.
    pub fn bracket_plus(
        z: &NodeFunction,
        k: &NodeFunction,
        p: BracketSpace,
        mu: &(impl Measure + ?Sized),
    ) -> Result<f64> {
        match p {
            BracketSpace::L2 => Self::dot_mu(z, k, mu),
            BracketSpace::L1 => {
                let norm_k = k.norm(LpNorm::L1, mu)?;
                let mut acc = KahanSum::new();
                for (id, zv) in z.iter() {
                    if zv == 0.0 {
                        continue;
                    }
                    let m = mu.mu(id).ok_or_else(|| GpmeError::UnknownNode(id.into()))?;
                    let kv = k.get(id);
                    if kv == 0.0 {
                        acc.add(zv.abs() * m);
                    } else {
                        acc.add(zv * sgn(kv) * m);
                    }
                }
                Ok(norm_k * acc.value())
            }
        }
    }

    /// Splits into positive and negative parts, g = g⁺ + g⁻ with
    /// g⁺ = max{0,g} ≥ 0 and g⁻ = min{0,g} ≤ 0.
    pub fn sign_split(&self) -> SignParts {
        SignParts {
            positive: self.map_values(|v| v.max(0.0)),
            negative: self.map_values(|v| v.min(0.0)),
        }
    }

    /// True when self(x) ≥ other(x) − tol at every node.
    pub fn ge_up_to(&self, other: &NodeFunction, tol: f64) -> bool {
        self.values
            .keys()
            .chain(other.values.keys())
            .all(|id| self.get(id) >= other.get(id) - tol)
    }

    /// Serializes as a JSON object id → value.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.values).expect("finite map serializes")
    }

    /// Parses a JSON object id → value.
    ///
    /// # Errors
    /// Malformed JSON or non-finite values.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let values: BTreeMap<NodeId, f64> = serde_json::from_str(s)?;
        Self::from_pairs(values)
    }

    /// Serializes as CSV with header `node,value`, ascending id order.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node", "value"]).expect("in-memory write");
        for (id, v) in self.iter() {
            // Debug formatting round-trips f64 exactly (switches to exponent
            // notation for extreme magnitudes).
            w.write_record([id, &format!("{v:?}")])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    /// Parses CSV with header `node,value`.
    ///
    /// # Errors
    /// Missing or wrong header, malformed rows, non-numeric values.
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        let headers = r
            .headers()
            .map_err(|e| GpmeError::Parse(format!("csv header: {e}")))?;
        if headers.len() != 2 || &headers[0] != "node" || &headers[1] != "value" {
            return Err(GpmeError::Parse(
                "csv header must be exactly `node,value`".into(),
            ));
        }
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| GpmeError::Parse(format!("csv row: {e}")))?;
            if rec.len() != 2 {
                return Err(GpmeError::Parse(format!(
                    "csv row has {} fields, expected 2",
                    rec.len()
                )));
            }
            let val: f64 = rec[1]
                .parse()
                .map_err(|_| GpmeError::Parse(format!("non-numeric value `{}`", &rec[1])))?;
            pairs.push((rec[0].to_string(), val));
        }
        Self::from_pairs(pairs)
    }
}

/// Equality up to canonicalization: explicitly stored zeros are ignored.
impl PartialEq for NodeFunction {
    fn eq(&self, other: &Self) -> bool {
        self.values
            .keys()
            .chain(other.values.keys())
            .all(|id| self.get(id) == other.get(id))
    }
}

impl fmt::Display for NodeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json_string())
    }
}

/// Positive/negative part decomposition of a node function.
#[derive(Clone, Debug, PartialEq)]
pub struct SignParts {
    pub positive: NodeFunction,
    pub negative: NodeFunction,
}
