use crate::error::{GofError, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix
/// stored row-major.
pub fn cholesky(a: &[f64], dim: usize) -> Result<Vec<f64>> {
    if a.len() != dim * dim {
        return Err(GofError::pre("covariance must be dim x dim"));
    }
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(GofError::SingularCovariance);
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    // reject numerically singular factors
    let dmax = (0..dim).map(|i| l[i * dim + i]).fold(0.0, f64::max);
    let dmin = (0..dim).map(|i| l[i * dim + i]).fold(f64::INFINITY, f64::min);
    if dmin <= dmax * 1e-12 {
        return Err(GofError::SingularCovariance);
    }
    Ok(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &[f64], dim: usize, b: &mut [f64]) {
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * dim + k] * b[k];
        }
        b[i] = s / l[i * dim + i];
    }
}
