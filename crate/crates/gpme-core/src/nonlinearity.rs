//! The scalar nonlinearity φ, its inverse ψ, and their canonical extensions
//! Φ, Ψ to node functions.
//!
//! φ must be strictly increasing with φ(0) = 0 and φ(ℝ) = ℝ. The power-law
//! family φ(s) = s|s|^{m−1} covers the porous medium equation (m > 1), the
//! fast diffusion equation (m < 1) and the heat equation (m = 1). Custom
//! nonlinearities are given as expression strings for φ and ψ; the library
//! refuses to invert φ numerically at construction (the per-node root
//! finding inside the resolvent already handles implicit inversion).

use serde::{Deserialize, Serialize};

use crate::error::{GpmeError, Result};
use crate::expr::Expr;
use crate::node_function::NodeFunction;
use crate::num::sgn;

/// Equation class tag derived from the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Porous medium equation, power law with m > 1.
    Pme,
    /// Fast diffusion equation, power law with m < 1.
    Fde,
    /// Heat equation, power law with m = 1.
    Heat,
    /// User-supplied φ/ψ pair.
    Custom,
}

#[derive(Clone, Debug)]
enum Family {
    PowerLaw {
        m: f64,
    },
    Custom {
        phi: Expr,
        psi: Expr,
        phi_prime: Option<Expr>,
        global_lipschitz: Option<f64>,
        spec: CustomSpec,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CustomSpec {
    phi: String,
    psi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi_prime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    global_lipschitz: Option<f64>,
}

/// JSON configuration accepted by [`Nonlinearity::from_spec_str`]:
/// `{"family":"power_law","m":2.0}` or
/// `{"family":"custom","phi":"s*abs(s)","psi":"sgn(s)*abs(s)^0.5", ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum Spec {
    PowerLaw { m: f64 },
    Custom(CustomSpec),
}

/// Strictly increasing scalar nonlinearity with inverse.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    family: Family,
}

/// Signed power with exact handling of integral exponents.
fn signed_pow(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    sgn(s) * abs_pow(s.abs(), p)
}

fn abs_pow(a: f64, p: f64) -> f64 {
    if p == 1.0 {
        a
    } else if p.fract() == 0.0 && p.abs() <= 32.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

impl Nonlinearity {
    /// Power law φ(s) = s|s|^{m−1}, ψ(s) = s|s|^{1/m−1}.
    ///
    /// # Errors
    /// m must be positive and finite.
    pub fn power_law(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(GpmeError::InvalidNonlinearity(format!(
                "power-law exponent must be positive and finite, got {m}"
            )));
        }
        let nl = Nonlinearity {
            family: Family::PowerLaw { m },
        };
        nl.validate()?;
        Ok(nl)
    }

    /// Custom nonlinearity from expression strings in the variable `s`
    /// (operators + - * / ^, functions abs, sgn).
    ///
    /// ψ must be supplied by the caller and is checked against φ on sample
    /// points; surjectivity φ(ℝ) = ℝ is user-asserted.
    ///
    /// # Errors
    /// Parse failures, φ(0) ≠ 0, non-monotone samples, or ψ∘φ ≠ id.
    pub fn custom(
        phi: &str,
        psi: &str,
        phi_prime: Option<&str>,
        global_lipschitz: Option<f64>,
    ) -> Result<Self> {
        let spec = CustomSpec {
            phi: phi.to_string(),
            psi: psi.to_string(),
            phi_prime: phi_prime.map(str::to_string),
            global_lipschitz,
        };
        let nl = Nonlinearity {
            family: Family::Custom {
                phi: Expr::parse(phi)?,
                psi: Expr::parse(psi)?,
                phi_prime: phi_prime.map(Expr::parse).transpose()?,
                global_lipschitz,
                spec,
            },
        };
        nl.validate()?;
        Ok(nl)
    }

    /// Parses the JSON configuration syntax.
    pub fn from_spec_str(s: &str) -> Result<Self> {
        let spec: Spec = serde_json::from_str(s)?;
        match spec {
            Spec::PowerLaw { m } => Self::power_law(m),
            Spec::Custom(c) => {
                Self::custom(&c.phi, &c.psi, c.phi_prime.as_deref(), c.global_lipschitz)
            }
        }
    }

    /// JSON configuration describing this nonlinearity.
    pub fn spec_json(&self) -> String {
        let spec = match &self.family {
            Family::PowerLaw { m } => Spec::PowerLaw { m: *m },
            Family::Custom { spec, .. } => Spec::Custom(spec.clone()),
        };
        serde_json::to_string(&spec).expect("spec serializes")
    }

    /// φ(s).
    pub fn phi(&self, s: f64) -> f64 {
        match &self.family {
            Family::PowerLaw { m } => signed_pow(s, *m),
            Family::Custom { phi, .. } => phi.eval(s),
        }
    }

    /// ψ(s) = φ⁻¹(s).
    pub fn psi(&self, s: f64) -> f64 {
        match &self.family {
            Family::PowerLaw { m } => signed_pow(s, 1.0 / *m),
            Family::Custom { psi, .. } => psi.eval(s),
        }
    }

    /// φ'(s) when available. For power laws the value at 0 is the honest
    /// limit (0, 1 or +∞ depending on m).
    pub fn phi_prime(&self, s: f64) -> Option<f64> {
        match &self.family {
            Family::PowerLaw { m } => Some(if s == 0.0 {
                if *m > 1.0 {
                    0.0
                } else if *m == 1.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                m * abs_pow(s.abs(), m - 1.0)
            }),
            Family::Custom { phi_prime, .. } => phi_prime.as_ref().map(|e| e.eval(s)),
        }
    }

    /// ψ'(s) when available; for custom families derived from φ' via
    /// ψ' = 1/(φ'∘ψ). Used only to accelerate scalar solves.
    pub fn psi_prime(&self, s: f64) -> Option<f64> {
        match &self.family {
            Family::PowerLaw { m } => Some(if s == 0.0 {
                if *m > 1.0 {
                    f64::INFINITY
                } else if *m == 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (1.0 / m) * abs_pow(s.abs(), 1.0 / m - 1.0)
            }),
            Family::Custom { phi_prime, .. } => {
                let d = phi_prime.as_ref()?.eval(self.psi(s));
                if d.is_finite() && d > 0.0 {
                    Some(1.0 / d)
                } else {
                    None
                }
            }
        }
    }

    /// Power-law exponent, if this is a power law.
    pub fn power_exponent(&self) -> Option<f64> {
        match &self.family {
            Family::PowerLaw { m } => Some(*m),
            Family::Custom { .. } => None,
        }
    }

    /// Equation class.
    pub fn regime(&self) -> Regime {
        match &self.family {
            Family::PowerLaw { m } if *m > 1.0 => Regime::Pme,
            Family::PowerLaw { m } if *m < 1.0 => Regime::Fde,
            Family::PowerLaw { .. } => Regime::Heat,
            Family::Custom { .. } => Regime::Custom,
        }
    }

    /// User-asserted global Lipschitz constant for φ, if any.
    pub fn global_lipschitz(&self) -> Option<f64> {
        match &self.family {
            Family::PowerLaw { m } if *m == 1.0 => Some(1.0),
            Family::PowerLaw { .. } => None,
            Family::Custom {
                global_lipschitz, ..
            } => *global_lipschitz,
        }
    }

    /// Whether Φ certifiably maps ℓ¹ into ℓ¹ (the second half of hypothesis
    /// H3). True for power laws with m ≥ 1 (|φ(s)| ≤ |s| near 0) and for
    /// custom nonlinearities with an asserted global Lipschitz constant;
    /// false otherwise: an FDE power law with m < 1 genuinely fails it.
    pub fn maps_l1_into_l1(&self) -> bool {
        match &self.family {
            Family::PowerLaw { m } => *m >= 1.0,
            Family::Custom {
                global_lipschitz, ..
            } => global_lipschitz.is_some(),
        }
    }

    /// Canonical extension Φ: (Φu)(x) = φ(u(x)). Support is preserved since
    /// φ(0) = 0.
    pub fn extend(&self, u: &NodeFunction) -> NodeFunction {
        u.map_values(|s| self.phi(s))
    }

    /// Canonical extension Ψ of the inverse.
    pub fn extend_inverse(&self, v: &NodeFunction) -> NodeFunction {
        v.map_values(|s| self.psi(s))
    }

    /// Construction-time sanity checks on sample points: φ(0) = 0 exactly,
    /// strict monotonicity, and ψ(φ(s)) = s within 1e-12 relative.
    fn validate(&self) -> Result<()> {
        if self.phi(0.0) != 0.0 {
            return Err(GpmeError::InvalidNonlinearity(format!(
                "phi(0) must be 0 exactly, got {}",
                self.phi(0.0)
            )));
        }
        let samples = sample_grid();
        let mut prev: Option<(f64, f64)> = None;
        for &s in &samples {
            let p = self.phi(s);
            if !p.is_finite() {
                return Err(GpmeError::InvalidNonlinearity(format!(
                    "phi({s}) is not finite"
                )));
            }
            if let Some((s0, p0)) = prev {
                if p <= p0 {
                    return Err(GpmeError::InvalidNonlinearity(format!(
                        "phi not strictly increasing: phi({s0}) = {p0}, phi({s}) = {p}"
                    )));
                }
            }
            prev = Some((s, p));
            let back = self.psi(p);
            let tol = 1e-12 * s.abs().max(1e-300);
            if (back - s).abs() > tol {
                return Err(GpmeError::InvalidNonlinearity(format!(
                    "psi(phi({s})) = {back}, expected {s} within 1e-12 relative"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric sample grid spanning [−1e6, 1e6] on a log scale, plus zero.
fn sample_grid() -> Vec<f64> {
    let mut pos = Vec::new();
    let mut x = 1e-6;
    while x <= 1e6 {
        pos.push(x);
        x *= 10.0;
    }
    pos.extend([0.5, 2.0, 3.0, 42.0]);
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut grid: Vec<f64> = pos.iter().map(|v| -v).rev().collect();
    grid.push(0.0);
    grid.extend(&pos);
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_is_identity() {
        let nl = Nonlinearity::power_law(1.0).unwrap();
        for s in [-3.0, 0.0, 0.25, 7.0] {
            assert_eq!(nl.phi(s), s);
            assert_eq!(nl.psi(s), s);
        }
        assert_eq!(nl.regime(), Regime::Heat);
    }

    #[test]
    fn quadratic_power_law() {
        let nl = Nonlinearity::power_law(2.0).unwrap();
        assert_eq!(nl.phi(-3.0), -9.0);
        assert_eq!(nl.psi(-9.0), -3.0);
        assert_eq!(nl.regime(), Regime::Pme);
    }

    #[test]
    fn quartic_power_law_example_values() {
        // φ(s) = s|s|³: φ(2) = 16, φ(4) = 256, φ(3) = 81.
        let nl = Nonlinearity::power_law(4.0).unwrap();
        assert_eq!(nl.phi(2.0), 16.0);
        assert_eq!(nl.phi(4.0), 256.0);
        assert_eq!(nl.phi(-3.0), -81.0);
    }

    #[test]
    fn fde_regime() {
        let nl = Nonlinearity::power_law(0.5).unwrap();
        assert_eq!(nl.regime(), Regime::Fde);
        assert_eq!(nl.psi(2.0), 4.0);
    }

    #[test]
    fn rejects_nonpositive_exponent() {
        assert!(Nonlinearity::power_law(0.0).is_err());
        assert!(Nonlinearity::power_law(-1.0).is_err());
    }

    #[test]
    fn extend_preserves_support() {
        let nl = Nonlinearity::power_law(2.0).unwrap();
        let u = NodeFunction::from_pairs([("a", 1.0), ("b", -2.0)]).unwrap();
        let v = nl.extend(&u);
        assert_eq!(v.get("a"), 1.0);
        assert_eq!(v.get("b"), -4.0);
        assert_eq!(nl.extend_inverse(&v), u);
    }

    #[test]
    fn custom_cubic() {
        let nl = Nonlinearity::custom(
            "s*abs(s)^2",
            "sgn(s)*abs(s)^(1/3)",
            Some("3*abs(s)^2"),
            None,
        )
        .unwrap();
        assert!((nl.phi(2.0) - 8.0).abs() < 1e-12);
        assert!((nl.psi(-8.0) + 2.0).abs() < 1e-12);
        assert!((nl.psi_prime(8.0).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn custom_requires_consistent_inverse() {
        let bad = Nonlinearity::custom("s*abs(s)", "s", None, None);
        assert!(bad.is_err());
        let not_monotone = Nonlinearity::custom("s*s", "sgn(s)*abs(s)^0.5", None, None);
        assert!(not_monotone.is_err());
    }

    #[test]
    fn spec_round_trip() {
        let nl = Nonlinearity::from_spec_str("{\"family\":\"power_law\",\"m\":2.0}").unwrap();
        assert_eq!(nl.power_exponent(), Some(2.0));
        let again = Nonlinearity::from_spec_str(&nl.spec_json()).unwrap();
        assert_eq!(again.power_exponent(), Some(2.0));
        assert!(Nonlinearity::from_spec_str("{\"family\":\"exp\"}").is_err());
    }
}
