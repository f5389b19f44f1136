//! Multivariate normality statistics: Mardia skewness b1 and kurtosis b2,
//! and a tensor-product Neyman smooth statistic.

use crate::error::{GofError, Result};
use crate::hypothesis::{std_normal_cdf, MvGaussian};
use crate::sample::Sample;
use crate::smooth::{legendre_all, SmoothConfig, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MardiaStats {
    pub b1: f64,
    pub b2: f64,
}

/// Where the centring mean and covariance come from.
#[derive(Debug, Clone, Copy)]
pub enum MardiaMode<'a> {
    /// Simple hypothesis: mean and covariance of the null Gaussian.
    Known(&'a MvGaussian),
    /// Sample mean and (1/n) sample covariance.
    Estimated,
}

fn standardized(sample: &Sample, mode: MardiaMode<'_>) -> Result<Sample> {
    let d = sample.dim();
    if d < 2 {
        return Err(GofError::Dimension { expected: 2, got: d });
    }
    match mode {
        MardiaMode::Known(g) => g.whiten(sample),
        MardiaMode::Estimated => {
            let n = sample.n() as f64;
            let mut mean = vec![0.0; d];
            for p in sample.points() {
                for c in 0..d {
                    mean[c] += p[c] / n;
                }
            }
            let mut cov = vec![0.0; d * d];
            for p in sample.points() {
                for a in 0..d {
                    for b in 0..d {
                        cov[a * d + b] += (p[a] - mean[a]) * (p[b] - mean[b]) / n;
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    let avg = 0.5 * (cov[a * d + b] + cov[b * d + a]);
                    cov[a * d + b] = avg;
                    cov[b * d + a] = avg;
                }
            }
            MvGaussian::new(mean, cov)?.whiten(sample)
        }
    }
}

/// b1 = (1/n²) Σ_{i,j} g_ij³ and b2 = (1/n) Σ_i g_ii² with
/// g_ij = (x_i − μ)ᵀ Σ⁻¹ (x_j − μ).
///
/// b1 is evaluated through the third-moment tensor of the whitened points,
/// b1 = Σ_{abc} (mean_i y_ia y_ib y_ic)², which is O(n d³) instead of O(n²).
pub fn mardia_statistics(sample: &Sample, mode: MardiaMode<'_>) -> Result<MardiaStats> {
    let y = standardized(sample, mode)?;
    let d = y.dim();
    let n = y.n() as f64;
    let mut m3 = vec![0.0; d * d * d];
    let mut b2 = 0.0;
    for p in y.points() {
        let r2: f64 = p.iter().map(|v| v * v).sum();
        b2 += r2 * r2;
        for a in 0..d {
            for b in a..d {
                let ab = p[a] * p[b];
                for c in b..d {
                    m3[(a * d + b) * d + c] += ab * p[c];
                }
            }
        }
    }
    let mut b1 = 0.0;
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                let m = m3[(a * d + b) * d + c] / n;
                // number of distinct index permutations of (a, b, c)
                let mult = if a == b && b == c {
                    1.0
                } else if a == b || b == c {
                    3.0
                } else {
                    6.0
                };
                b1 += mult * m * m;
            }
        }
    }
    Ok(MardiaStats { b1, b2: b2 / n })
}

/// Multi-indices α with 1 <= |α| <= k over `dim` coordinates, in
/// lexicographic order.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, k: usize, prefix: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            if used >= 1 {
                out.push(prefix.clone());
            }
            return;
        }
        for a in 0..=(k - used) {
            prefix.push(a);
            rec(dim, k, prefix, used + a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, k, &mut Vec::with_capacity(dim), 0, &mut out);
    out
}

/// Tensor-product smooth statistic: whiten by the null Gaussian, transform
/// each coordinate by Φ, and sum (1/n)(Σ_j Π_c π_{α_c}(u_jc))² over all
/// multi-indices of total order 1..=k. Asymptotically χ² with
/// `multi_indices(dim, k).len()` degrees of freedom.
pub fn neyman_multivariate(sample: &Sample, h: &MvGaussian, cfg: SmoothConfig) -> Result<f64> {
    let y = h.whiten(sample)?;
    let d = y.dim();
    let k = cfg.k();
    let terms = multi_indices(d, k);
    let mut sums = vec![0.0; terms.len()];
    let mut table = vec![0.0; d * (MAX_ORDER + 1)];
    for p in y.points() {
        for c in 0..d {
            let u = std_normal_cdf(p[c]);
            legendre_all(k, u, &mut table[c * (MAX_ORDER + 1)..(c + 1) * (MAX_ORDER + 1)]);
        }
        for (s, alpha) in sums.iter_mut().zip(&terms) {
            let mut prod = 1.0;
            for (c, &a) in alpha.iter().enumerate() {
                prod *= table[c * (MAX_ORDER + 1) + a];
            }
            *s += prod;
        }
    }
    Ok(sums.iter().map(|s| s * s).sum::<f64>() / y.n() as f64)
}
