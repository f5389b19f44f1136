//! Neyman smooth test with Legendre polynomials orthonormal on [0, 1].

use crate::error::{GofError, Result};

pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SmoothConfig {
    k: usize,
}

impl SmoothConfig {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&k) {
            return Err(GofError::pre(format!("smooth test order k = {k} outside 1..={MAX_ORDER}")));
        }
        Ok(SmoothConfig { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Writes π_0(z), ..., π_k(z) into `out` (length k + 1), where
/// π_i(z) = sqrt(2i + 1) P_i(2z − 1) and P_i is the Legendre polynomial.
pub fn legendre_all(k: usize, z: f64, out: &mut [f64]) {
    let x = 2.0 * z - 1.0;
    let mut p_prev = 1.0;
    let mut p = x;
    out[0] = 1.0;
    if k >= 1 {
        out[1] = 3f64.sqrt() * x;
    }
    for i in 1..k {
        let fi = i as f64;
        let next = ((2.0 * fi + 1.0) * x * p - fi * p_prev) / (fi + 1.0);
        p_prev = p;
        p = next;
        out[i + 1] = (2.0 * fi + 3.0).sqrt() * p;
    }
}

/// Orthonormal shifted Legendre polynomial of order `i` at `z`.
pub fn legendre_pi(i: usize, z: f64) -> f64 {
    let mut buf = vec![0.0; i + 1];
    legendre_all(i, z, &mut buf);
    buf[i]
}

/// N_k = (1/n) Σ_{i=1..k} (Σ_j π_i(z_j))².
pub fn neyman_statistic(z: &[f64], cfg: SmoothConfig) -> Result<f64> {
    if z.is_empty() {
        return Err(GofError::pre("empty sample"));
    }
    let k = cfg.k;
    let mut sums = [0.0f64; MAX_ORDER + 1];
    let mut buf = [0.0f64; MAX_ORDER + 1];
    for (j, &zj) in z.iter().enumerate() {
        if !(0.0..=1.0).contains(&zj) {
            return Err(GofError::pre(format!("z[{j}] = {zj} outside [0, 1]")));
        }
        legendre_all(k, zj, &mut buf);
        for i in 1..=k {
            sums[i] += buf[i];
        }
    }
    let n = z.len() as f64;
    Ok(sums[1..=k].iter().map(|s| s * s).sum::<f64>() / n)
}
