use crate::error::{GofError, Result};
use crate::hypothesis::UnivariateModel;

/// A set of `n` observation points of common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    /// Builds a sample from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GofError::pre("sample dimension must be positive"));
        }
        if data.is_empty() {
            return Err(GofError::pre("sample must contain at least one point"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(GofError::pre(format!(
                "buffer length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GofError::pre(format!(
                "coordinate {} of point {} is not finite",
                i % dim,
                i / dim
            )));
        }
        Ok(Sample { dim, data })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(1, values)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GofError::pre(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Coordinates of a univariate sample.
    pub fn values(&self) -> Result<&[f64]> {
        self.require_dim(1)?;
        Ok(&self.data)
    }

    pub fn require_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(GofError::Dimension {
                expected: dim,
                got: self.dim,
            });
        }
        Ok(())
    }

    /// One univariate sample per coordinate.
    pub fn marginals(&self) -> Vec<Sample> {
        (0..self.dim)
            .map(|c| Sample {
                dim: 1,
                data: self.points().map(|p| p[c]).collect(),
            })
            .collect()
    }

    pub fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Sample {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.points().zip(data.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Sample {
            dim: self.dim,
            data,
        }
    }
}

/// Coordinates of a univariate sample in non-decreasing order. Ties are kept.
pub fn order_statistic(sample: &Sample) -> Result<Vec<f64>> {
    let mut v = sample.values()?.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Probability integral transform `z = F(x)` of every point.
pub fn pit(sample: &Sample, model: &dyn UnivariateModel) -> Result<Sample> {
    let (lo, hi) = model.support();
    let xs = sample.values()?;
    let mut out = Vec::with_capacity(xs.len());
    for (index, &x) in xs.iter().enumerate() {
        if x < lo || x > hi {
            return Err(GofError::Domain {
                index,
                value: x,
                lo,
                hi,
            });
        }
        let z = model.cdf(x);
        if !(0.0..=1.0).contains(&z) {
            return Err(GofError::HypothesisIntegrity { x, value: z });
        }
        out.push(z);
    }
    Ok(Sample { dim: 1, data: out })
}

/// PIT followed by sorting; the common entry point of the univariate tests.
pub fn sorted_pit(sample: &Sample, model: &dyn UnivariateModel) -> Result<Vec<f64>> {
    let mut z = pit(sample, model)?.data;
    z.sort_by(f64::total_cmp);
    Ok(z)
}
