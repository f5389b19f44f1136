//! Binning-free statistics on the empirical distribution function of a
//! PIT-transformed sample.
//!
//! All functions take the sorted transformed sample `z_1 <= ... <= z_n` in
//! [0, 1] and evaluate the discrete closed forms of the supremum statistics
//! (D+, D-, Kolmogorov D, Kuiper V) and of the quadratic statistics
//! (Cramér-von Mises W², Anderson-Darling A², Watson U²).

use crate::error::{GofError, Result};
use crate::numeric::CompensatedSum;

/// Clamp applied to z before the logarithms of A².
pub const AD_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupremumStats {
    pub d_plus: f64,
    pub d_minus: f64,
    pub d: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticStats {
    pub w2: f64,
    pub a2: f64,
    pub u2: f64,
    /// Set when some z hit 0 or 1 and was clamped for A².
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfStatistics {
    pub d_plus: f64,
    pub d_minus: f64,
    pub d: f64,
    pub v: f64,
    pub w2: f64,
    pub a2: f64,
    pub u2: f64,
    pub clamped: bool,
}

pub(crate) fn check_sorted_unit(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(GofError::pre("empty sample"));
    }
    for (i, &v) in z.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(GofError::pre(format!("z[{i}] = {v} outside [0, 1]")));
        }
        if i > 0 && z[i - 1] > v {
            return Err(GofError::pre(format!("z not sorted at index {i}")));
        }
    }
    Ok(())
}

pub fn supremum_stats(z: &[f64]) -> Result<SupremumStats> {
    check_sorted_unit(z)?;
    let n = z.len() as f64;
    let mut d_plus = 0.0f64;
    let mut d_minus = 0.0f64;
    for (i, &zi) in z.iter().enumerate() {
        let i = i as f64;
        d_plus = d_plus.max((i + 1.0) / n - zi);
        d_minus = d_minus.max(zi - i / n);
    }
    Ok(SupremumStats {
        d_plus,
        d_minus,
        d: d_plus.max(d_minus),
        v: d_plus + d_minus,
    })
}

pub fn quadratic_stats(z: &[f64]) -> Result<QuadraticStats> {
    check_sorted_unit(z)?;
    let len = z.len();
    let n = len as f64;

    let mut w = CompensatedSum::new();
    let mut mean = CompensatedSum::new();
    for (i, &zi) in z.iter().enumerate() {
        let c = (2.0 * i as f64 + 1.0) / (2.0 * n);
        w.add((zi - c) * (zi - c));
        mean.add(zi);
    }
    let w2 = w.value() + 1.0 / (12.0 * n);
    let zbar = mean.value() / n;
    let u2 = w2 - n * (zbar - 0.5) * (zbar - 0.5);

    let mut clamped = false;
    let mut clamp = |v: f64| {
        if !(AD_EPSILON..=1.0 - AD_EPSILON).contains(&v) {
            clamped = true;
            v.clamp(AD_EPSILON, 1.0 - AD_EPSILON)
        } else {
            v
        }
    };
    let mut a = CompensatedSum::new();
    for i in 0..len {
        let lo = clamp(z[i]);
        let hi = clamp(z[len - 1 - i]);
        a.add((2.0 * i as f64 + 1.0) * (lo.ln() + (-hi).ln_1p()));
    }
    let a2 = -n - a.value() / n;

    Ok(QuadraticStats {
        w2,
        a2,
        u2,
        clamped,
    })
}

pub fn edf_statistics(z: &[f64]) -> Result<EdfStatistics> {
    let s = supremum_stats(z)?;
    let q = quadratic_stats(z)?;
    Ok(EdfStatistics {
        d_plus: s.d_plus,
        d_minus: s.d_minus,
        d: s.d,
        v: s.v,
        w2: q.w2,
        a2: q.a2,
        u2: q.u2,
        clamped: q.clamped,
    })
}
