//! Built-in lazy-graph families: `half_line`, `integer_lattice_1d`,
//! `binary_tree` and `star_infinite`.
//!
//! All families use constant μ and κ. The first three have a constant edge
//! weight; the star must decay its weights (geometrically, with the given
//! ratio) so that the center keeps a finite total weight, as the summability
//! assumption (A3) requires.

use serde::{Deserialize, Serialize};

use crate::error::{GpmeError, Result};
use crate::graph::{HFlags, LazyGraph, Neighbors};
use crate::NodeId;

fn default_w() -> f64 {
    1.0
}

fn default_mu() -> f64 {
    1.0
}

fn default_ratio() -> f64 {
    0.5
}

/// JSON family configuration, e.g. `{"family":"half_line","w":1.0}` or
/// `{"family":"star_infinite","w0":1.0,"ratio":0.5}`. Omitted parameters
/// default to w = w0 = μ = 1, κ = 0, ratio = 0.5.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum FamilySpec {
    HalfLine {
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        kappa: f64,
    },
    #[serde(rename = "integer_lattice_1d")]
    IntegerLattice1d {
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        kappa: f64,
    },
    BinaryTree {
        #[serde(default = "default_w")]
        w: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        kappa: f64,
    },
    StarInfinite {
        #[serde(default = "default_w")]
        w0: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        kappa: f64,
    },
}

fn check_common(w: f64, mu: f64, kappa: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "family weight must be positive and finite, got {w}"
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "family mu must be positive and finite, got {mu}"
        )));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(GpmeError::InvalidArgument(format!(
            "family kappa must be nonnegative and finite, got {kappa}"
        )));
    }
    Ok(())
}

/// Instantiates a family from its JSON configuration.
///
/// # Errors
/// Unknown family names, malformed JSON, parameters out of range.
pub fn from_spec_str(s: &str) -> Result<Box<dyn LazyGraph>> {
    let spec: FamilySpec = serde_json::from_str(s)?;
    match spec {
        FamilySpec::HalfLine { w, mu, kappa } => {
            check_common(w, mu, kappa)?;
            Ok(Box::new(HalfLine { w, mu, kappa }))
        }
        FamilySpec::IntegerLattice1d { w, mu, kappa } => {
            check_common(w, mu, kappa)?;
            Ok(Box::new(IntegerLattice1d { w, mu, kappa }))
        }
        FamilySpec::BinaryTree { w, mu, kappa } => {
            check_common(w, mu, kappa)?;
            Ok(Box::new(BinaryTree { w, mu, kappa }))
        }
        FamilySpec::StarInfinite {
            w0,
            ratio,
            mu,
            kappa,
        } => {
            check_common(w0, mu, kappa)?;
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(GpmeError::InvalidArgument(format!(
                    "star weight ratio must lie in (0,1) for summable weights, got {ratio}"
                )));
            }
            Ok(Box::new(StarInfinite {
                w0,
                ratio,
                mu,
                kappa,
            }))
        }
    }
}

/// Accepts either a bare family name (with default parameters) or the full
/// JSON configuration.
///
/// # Errors
/// As [`from_spec_str`].
pub fn from_cli_spec(s: &str) -> Result<Box<dyn LazyGraph>> {
    let t = s.trim();
    if t.starts_with('{') {
        from_spec_str(t)
    } else {
        from_spec_str(&format!("{{\"family\":\"{t}\"}}"))
    }
}

/// Parses an id as a canonical decimal integer (no leading zeros, no sign
/// games), so that ids round-trip uniquely.
fn parse_canonical_int(id: &str) -> Option<i64> {
    let v: i64 = id.parse().ok()?;
    if v.to_string() == id {
        Some(v)
    } else {
        None
    }
}

/// Half-line 0 — 1 — 2 — …, constant weight.
pub struct HalfLine {
    w: f64,
    mu: f64,
    kappa: f64,
}

impl HalfLine {
    fn parse(&self, x: &str) -> Result<i64> {
        parse_canonical_int(x)
            .filter(|v| *v >= 0)
            .ok_or_else(|| GpmeError::UnknownNode(x.to_string()))
    }
}

impl LazyGraph for HalfLine {
    fn root(&self) -> NodeId {
        "0".into()
    }

    fn contains(&self, x: &str) -> bool {
        self.parse(x).is_ok()
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        let k = self.parse(x)?;
        let mut list = Vec::new();
        if k > 0 {
            list.push(((k - 1).to_string(), self.w));
        }
        list.push(((k + 1).to_string(), self.w));
        Ok(Neighbors::Finite(list))
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        let (a, b) = (self.parse(x)?, self.parse(y)?);
        Ok(if (a - b).abs() == 1 { self.w } else { 0.0 })
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        let k = self.parse(x)?;
        Ok(if k == 0 { self.w } else { 2.0 * self.w })
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.kappa)
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.mu)
    }

    fn flags(&self) -> HFlags {
        HFlags {
            locally_finite: true,
            uniform_mu_lower_bound: Some(self.mu),
            uniform_deg_bound: Some((2.0 * self.w + self.kappa) / self.mu),
        }
    }

    fn describe(&self) -> String {
        format!(
            "half_line (w={}, mu={}, kappa={})",
            self.w, self.mu, self.kappa
        )
    }
}

/// Two-sided integer lattice … — −1 — 0 — 1 — …, constant weight.
pub struct IntegerLattice1d {
    w: f64,
    mu: f64,
    kappa: f64,
}

impl IntegerLattice1d {
    fn parse(&self, x: &str) -> Result<i64> {
        parse_canonical_int(x).ok_or_else(|| GpmeError::UnknownNode(x.to_string()))
    }
}

impl LazyGraph for IntegerLattice1d {
    fn root(&self) -> NodeId {
        "0".into()
    }

    fn contains(&self, x: &str) -> bool {
        self.parse(x).is_ok()
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        let k = self.parse(x)?;
        Ok(Neighbors::Finite(vec![
            ((k - 1).to_string(), self.w),
            ((k + 1).to_string(), self.w),
        ]))
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        let (a, b) = (self.parse(x)?, self.parse(y)?);
        Ok(if (a - b).abs() == 1 { self.w } else { 0.0 })
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| 2.0 * self.w)
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.kappa)
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.mu)
    }

    fn flags(&self) -> HFlags {
        HFlags {
            locally_finite: true,
            uniform_mu_lower_bound: Some(self.mu),
            uniform_deg_bound: Some((2.0 * self.w + self.kappa) / self.mu),
        }
    }

    fn describe(&self) -> String {
        format!(
            "integer_lattice_1d (w={}, mu={}, kappa={})",
            self.w, self.mu, self.kappa
        )
    }
}

/// Infinite rooted binary tree with heap-style ids: root "1", children of k
/// are 2k and 2k+1.
pub struct BinaryTree {
    w: f64,
    mu: f64,
    kappa: f64,
}

impl BinaryTree {
    fn parse(&self, x: &str) -> Result<i64> {
        parse_canonical_int(x)
            .filter(|v| *v >= 1)
            .ok_or_else(|| GpmeError::UnknownNode(x.to_string()))
    }
}

impl LazyGraph for BinaryTree {
    fn root(&self) -> NodeId {
        "1".into()
    }

    fn contains(&self, x: &str) -> bool {
        self.parse(x).is_ok()
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        let k = self.parse(x)?;
        let mut list = Vec::new();
        if k > 1 {
            list.push(((k / 2).to_string(), self.w));
        }
        list.push(((2 * k).to_string(), self.w));
        list.push(((2 * k + 1).to_string(), self.w));
        Ok(Neighbors::Finite(list))
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        let (a, b) = (self.parse(x)?, self.parse(y)?);
        let (lo, hi) = (a.min(b), a.max(b));
        Ok(if hi / 2 == lo && hi != lo {
            self.w
        } else {
            0.0
        })
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        let k = self.parse(x)?;
        Ok(if k == 1 { 2.0 * self.w } else { 3.0 * self.w })
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.kappa)
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        self.parse(x).map(|_| self.mu)
    }

    fn flags(&self) -> HFlags {
        HFlags {
            locally_finite: true,
            uniform_mu_lower_bound: Some(self.mu),
            uniform_deg_bound: Some((3.0 * self.w + self.kappa) / self.mu),
        }
    }

    fn describe(&self) -> String {
        format!(
            "binary_tree (w={}, mu={}, kappa={})",
            self.w, self.mu, self.kappa
        )
    }
}

/// Star with center "c" and infinitely many leaves "l0", "l1", …; the
/// weight of the k-th spoke is w0·ratio^k, so the center's total weight is
/// w0/(1−ratio). The center is not locally finite, which makes this the
/// canonical test case for the forward-neighbor exhaustion.
pub struct StarInfinite {
    w0: f64,
    ratio: f64,
    mu: f64,
    kappa: f64,
}

impl StarInfinite {
    fn parse_leaf(&self, x: &str) -> Option<i64> {
        let rest = x.strip_prefix('l')?;
        parse_canonical_int(rest).filter(|v| *v >= 0)
    }

    fn spoke_weight(&self, k: i64) -> f64 {
        self.w0 * self.ratio.powi(k as i32)
    }
}

impl LazyGraph for StarInfinite {
    fn root(&self) -> NodeId {
        "c".into()
    }

    fn contains(&self, x: &str) -> bool {
        x == "c" || self.parse_leaf(x).is_some()
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        if x == "c" {
            return Ok(Neighbors::Infinite(Box::new(
                (0i64..).map(|k| (format!("l{k}"), self.spoke_weight(k))),
            )));
        }
        match self.parse_leaf(x) {
            Some(k) => Ok(Neighbors::Finite(vec![("c".into(), self.spoke_weight(k))])),
            None => Err(GpmeError::UnknownNode(x.to_string())),
        }
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        let leaf_of = |a: &str, b: &str| -> Result<Option<i64>> {
            if a == "c" {
                match self.parse_leaf(b) {
                    Some(k) => Ok(Some(k)),
                    None if b == "c" => Ok(None),
                    None => Err(GpmeError::UnknownNode(b.to_string())),
                }
            } else if !self.contains(a) {
                Err(GpmeError::UnknownNode(a.to_string()))
            } else {
                Ok(None)
            }
        };
        if let Some(k) = leaf_of(x, y)? {
            return Ok(self.spoke_weight(k));
        }
        if let Some(k) = leaf_of(y, x)? {
            return Ok(self.spoke_weight(k));
        }
        Ok(0.0)
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        if x == "c" {
            return Ok(self.w0 / (1.0 - self.ratio));
        }
        match self.parse_leaf(x) {
            Some(k) => Ok(self.spoke_weight(k)),
            None => Err(GpmeError::UnknownNode(x.to_string())),
        }
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        if self.contains(x) {
            Ok(self.kappa)
        } else {
            Err(GpmeError::UnknownNode(x.to_string()))
        }
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        if self.contains(x) {
            Ok(self.mu)
        } else {
            Err(GpmeError::UnknownNode(x.to_string()))
        }
    }

    fn flags(&self) -> HFlags {
        let center_deg = (self.w0 / (1.0 - self.ratio) + self.kappa) / self.mu;
        let leaf_deg = (self.w0 + self.kappa) / self.mu;
        HFlags {
            locally_finite: false,
            uniform_mu_lower_bound: Some(self.mu),
            uniform_deg_bound: Some(center_deg.max(leaf_deg)),
        }
    }

    fn describe(&self) -> String {
        format!(
            "star_infinite (w0={}, ratio={}, mu={}, kappa={})",
            self.w0, self.ratio, self.mu, self.kappa
        )
    }
}
