//! Max-shifted log-sum-exp helpers.
//!
//! Carleman weights `e^{2φ/h}` overflow `f64` long before the interesting
//! `h` range is reached, so every weighted integral in this crate is carried
//! in log domain and only ratios of such integrals are ever exponentiated.

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(x_i) over a slice; NEG_INFINITY entries are skipped.
///
/// The reduction is sequential so the result does not depend on any thread
/// partitioning of the caller.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs
        .iter()
        .filter(|x| **x != f64::NEG_INFINITY)
        .map(|x| (x - m).exp())
        .sum();
    m + sum.ln()
}
