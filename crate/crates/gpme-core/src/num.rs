//! Small numeric helpers shared by the production code paths.
//!
//! The oracle module deliberately does not use these (it carries its own
//! plain summation) so that reference values are computed independently.

/// Sign function with sgn(0) = 0, as used by the ℓ¹ bracket formula.
#[inline]
pub(crate) fn sgn(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Compensated (Kahan) accumulator. Invariant-level tests run at 1e-12
/// absolute tolerances, so plain left-to-right sums are not good enough.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator, in iteration order.
#[inline]
pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}
