//! χ² tests on histograms.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{GofError, Result};
use crate::hypothesis::UnivariateModel;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chi2Mode {
    /// Σ (Y_i − t_i)² / δ_i² with caller-supplied variances, dof = B.
    Gaussian,
    /// Poisson counts, δ_i² = t_i, dof = B.
    Pearson,
    /// Fixed total N, t_i = N p_i, dof = B − 1.
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinningPolicy {
    EqualWidth,
    EqualProbability,
}

/// Bin counts with their null expectations. Multi-dimensional histograms
/// are rectangular grids; `counts` is then row-major over the axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    axes: Vec<Vec<f64>>,
    counts: Vec<u64>,
    expectations: Vec<f64>,
    probabilities: Option<Vec<f64>>,
    variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Value {
    pub value: f64,
    pub dof: usize,
}

impl Histogram {
    /// Counts with expectations t_i (Gaussian/Pearson form).
    pub fn new(counts: Vec<u64>, expectations: Vec<f64>) -> Result<Self> {
        if counts.len() != expectations.len() || counts.is_empty() {
            return Err(GofError::pre(format!(
                "{} counts vs {} expectations",
                counts.len(),
                expectations.len()
            )));
        }
        Ok(Histogram {
            axes: Vec::new(),
            counts,
            expectations,
            probabilities: None,
            variances: None,
        })
    }

    /// Counts with bin probabilities p_i; expectations become N p_i.
    pub fn multinomial(counts: Vec<u64>, probabilities: Vec<f64>) -> Result<Self> {
        if counts.len() != probabilities.len() || counts.is_empty() {
            return Err(GofError::pre(format!(
                "{} counts vs {} probabilities",
                counts.len(),
                probabilities.len()
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GofError::pre(format!("bin probabilities sum to {total}, not 1")));
        }
        let n: u64 = counts.iter().sum();
        let expectations = probabilities.iter().map(|p| n as f64 * p).collect();
        Ok(Histogram {
            axes: Vec::new(),
            counts,
            expectations,
            probabilities: Some(probabilities),
            variances: None,
        })
    }

    pub fn with_variances(mut self, variances: Vec<f64>) -> Result<Self> {
        if variances.len() != self.counts.len() {
            return Err(GofError::pre("one variance per bin required"));
        }
        self.variances = Some(variances);
        Ok(self)
    }

    fn with_axes(mut self, axes: Vec<Vec<f64>>) -> Self {
        self.axes = axes;
        self
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn expectations(&self) -> &[f64] {
        &self.expectations
    }

    pub fn probabilities(&self) -> Option<&[f64]> {
        self.probabilities.as_deref()
    }

    /// Bin edges per axis; empty when built from bare counts.
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn chi2_statistic(h: &Histogram, mode: Chi2Mode) -> Result<Chi2Value> {
    for (index, &t) in h.expectations.iter().enumerate() {
        if !(t > 0.0) || !t.is_finite() {
            return Err(GofError::InvalidBin { index, value: t });
        }
    }
    let b = h.bins();
    match mode {
        Chi2Mode::Gaussian => {
            let var = h
                .variances
                .as_ref()
                .ok_or_else(|| GofError::pre("gaussian mode needs per-bin variances"))?;
            let mut value = 0.0;
            for i in 0..b {
                if !(var[i] > 0.0) {
                    return Err(GofError::InvalidBin { index: i, value: var[i] });
                }
                let d = h.counts[i] as f64 - h.expectations[i];
                value += d * d / var[i];
            }
            Ok(Chi2Value { value, dof: b })
        }
        Chi2Mode::Pearson => Ok(Chi2Value {
            value: pearson_sum(&h.counts, &h.expectations),
            dof: b,
        }),
        Chi2Mode::Multinomial => {
            if h.probabilities.is_none() {
                return Err(GofError::pre("multinomial mode needs bin probabilities"));
            }
            if b < 2 {
                return Err(GofError::pre("multinomial mode needs at least two bins"));
            }
            Ok(Chi2Value {
                value: pearson_sum(&h.counts, &h.expectations),
                dof: b - 1,
            })
        }
    }
}

fn pearson_sum(counts: &[u64], expectations: &[f64]) -> f64 {
    counts
        .iter()
        .zip(expectations)
        .map(|(&c, &t)| {
            let d = c as f64 - t;
            d * d / t
        })
        .sum()
}

/// Asymptotic χ²_dof upper-tail probability. An approximation; calibrated
/// p-values come from [`crate::calibrate`].
pub fn asymptotic_p_value(value: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64).map_err(|e| GofError::Numeric(e.to_string()))?;
    Ok(dist.sf(value))
}

/// Bin count B = round(2 n^{2/5}), at least 1.
pub fn bin_count_rule(n: usize) -> usize {
    let b = (2.0 * (n as f64).powf(0.4)).round() as usize;
    b.max(1)
}

/// Edges for `bins` bins of a univariate model under the given policy.
pub fn bin_edges(model: &dyn UnivariateModel, bins: usize, policy: BinningPolicy) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(GofError::pre("need at least one bin"));
    }
    let (lo, hi) = model.support();
    let b = bins as f64;
    match policy {
        BinningPolicy::EqualWidth => {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(GofError::Policy(
                    "equal-width binning needs a bounded support".into(),
                ));
            }
            Ok((0..=bins)
                .map(|i| {
                    if i == bins {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / b
                    }
                })
                .collect())
        }
        BinningPolicy::EqualProbability => {
            let mut edges = Vec::with_capacity(bins + 1);
            edges.push(lo);
            for i in 1..bins {
                let q = model.quantile(i as f64 / b).ok_or_else(|| {
                    GofError::Policy("equal-probability binning needs a quantile function".into())
                })?;
                edges.push(q);
            }
            edges.push(hi);
            Ok(edges)
        }
    }
}

/// Bins a univariate sample. Bins are half-open `[e_i, e_{i+1})` with the
/// last bin closed; a point on an interior edge falls in the right bin.
pub fn bin_uniform(
    sample: &Sample,
    model: &dyn UnivariateModel,
    bins: usize,
    policy: BinningPolicy,
) -> Result<Histogram> {
    let xs = sample.values()?;
    let edges = bin_edges(model, bins, policy)?;
    let counts = count_into(xs, &edges)?;
    let probabilities = match policy {
        BinningPolicy::EqualProbability => vec![1.0 / bins as f64; bins],
        BinningPolicy::EqualWidth => edges
            .windows(2)
            .map(|w| model.cdf(w[1]) - model.cdf(w[0]))
            .collect(),
    };
    Ok(Histogram::multinomial(counts, probabilities)?.with_axes(vec![edges]))
}

fn bin_index(x: f64, edges: &[f64]) -> Option<usize> {
    let bins = edges.len() - 1;
    if x < edges[0] || x > edges[bins] {
        return None;
    }
    let interior = &edges[1..bins];
    Some(interior.partition_point(|&e| e <= x))
}

fn count_into(xs: &[f64], edges: &[f64]) -> Result<Vec<u64>> {
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for (index, &x) in xs.iter().enumerate() {
        let k = bin_index(x, edges).ok_or(GofError::Domain {
            index,
            value: x,
            lo: edges[0],
            hi: edges[bins],
        })?;
        counts[k] += 1;
    }
    Ok(counts)
}

/// Rectangular-grid histogram of a d-dimensional sample. `probabilities`
/// gives the null probability of each cell, row-major over the axes.
pub fn bin_grid(sample: &Sample, axes: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Histogram> {
    sample.require_dim(axes.len())?;
    for (a, e) in axes.iter().enumerate() {
        if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(GofError::pre(format!("edges of axis {a} must be strictly increasing")));
        }
    }
    let cells: usize = axes.iter().map(|e| e.len() - 1).product();
    let mut counts = vec![0u64; cells];
    for (index, p) in sample.points().enumerate() {
        let mut cell = 0usize;
        for (c, edges) in axes.iter().enumerate() {
            let k = bin_index(p[c], edges).ok_or(GofError::Domain {
                index,
                value: p[c],
                lo: edges[0],
                hi: edges[edges.len() - 1],
            })?;
            cell = cell * (edges.len() - 1) + k;
        }
        counts[cell] += 1;
    }
    Ok(Histogram::multinomial(counts, probabilities)?.with_axes(axes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{Exponential, Gaussian, Uniform};

    #[test]
    fn pearson_examples() {
        let h = Histogram::new(vec![10, 10], vec![10.0, 10.0]).unwrap();
        assert_eq!(chi2_statistic(&h, Chi2Mode::Pearson).unwrap(), Chi2Value { value: 0.0, dof: 2 });
        let h = Histogram::new(vec![12, 8], vec![10.0, 10.0]).unwrap();
        let c = chi2_statistic(&h, Chi2Mode::Pearson).unwrap();
        assert!((c.value - 0.8).abs() < 1e-12);
        assert_eq!(c.dof, 2);
    }

    #[test]
    fn multinomial_example() {
        let h = Histogram::multinomial(vec![25; 4], vec![0.25; 4]).unwrap();
        assert_eq!(h.expectations(), &[25.0; 4]);
        assert_eq!(
            chi2_statistic(&h, Chi2Mode::Multinomial).unwrap(),
            Chi2Value { value: 0.0, dof: 3 }
        );
    }

    #[test]
    fn gaussian_mode_uses_variances() {
        let h = Histogram::new(vec![12, 8], vec![10.0, 10.0])
            .unwrap()
            .with_variances(vec![4.0, 16.0])
            .unwrap();
        let c = chi2_statistic(&h, Chi2Mode::Gaussian).unwrap();
        assert!((c.value - (1.0 + 0.25)).abs() < 1e-12);
        assert_eq!(c.dof, 2);
        let bare = Histogram::new(vec![1], vec![1.0]).unwrap();
        assert!(chi2_statistic(&bare, Chi2Mode::Gaussian).is_err());
    }

    #[test]
    fn invalid_bins_are_errors() {
        let h = Histogram::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            chi2_statistic(&h, Chi2Mode::Pearson),
            Err(GofError::InvalidBin { index: 1, .. })
        ));
        let h = Histogram::new(vec![1, 2], vec![-1.0, 3.0]).unwrap();
        assert!(matches!(
            chi2_statistic(&h, Chi2Mode::Pearson),
            Err(GofError::InvalidBin { index: 0, .. })
        ));
        assert!(Histogram::multinomial(vec![1, 2], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn bin_count_rule_examples() {
        assert_eq!(bin_count_rule(100), 13);
        assert_eq!(bin_count_rule(1), 2);
        assert_eq!(bin_count_rule(32), 8);
    }

    #[test]
    fn equal_width_uniform() {
        let s = Sample::univariate(vec![0.2, 0.7]).unwrap();
        let h = bin_uniform(&s, &Uniform::unit(), 2, BinningPolicy::EqualWidth).unwrap();
        assert_eq!(h.counts(), &[1, 1]);
    }

    #[test]
    fn edge_points_go_right_and_last_bin_is_closed() {
        let s = Sample::univariate(vec![0.0, 0.5, 1.0]).unwrap();
        let h = bin_uniform(&s, &Uniform::unit(), 2, BinningPolicy::EqualWidth).unwrap();
        assert_eq!(h.counts(), &[1, 2]);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn equal_probability_exponential_edges() {
        let e = Exponential::new(1.0).unwrap();
        let edges = bin_edges(&e, 4, BinningPolicy::EqualProbability).unwrap();
        let expect = [0.0, -(0.75f64.ln()), 2f64.ln(), 4f64.ln()];
        for (a, b) in edges.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(edges[4], f64::INFINITY);
    }

    #[test]
    fn unbounded_equal_width_is_policy_error() {
        let g = Gaussian::new(0.0, 1.0).unwrap();
        let s = Sample::univariate(vec![0.0]).unwrap();
        assert!(matches!(
            bin_uniform(&s, &g, 4, BinningPolicy::EqualWidth),
            Err(GofError::Policy(_))
        ));
    }

    #[test]
    fn counts_conserved() {
        let mut rng = crate::rng::RandomStream::new(3, 0);
        use crate::hypothesis::Sampler;
        let g = Gaussian::new(0.0, 1.0).unwrap();
        let s = g.draw(1000, &mut rng).unwrap();
        let h = bin_uniform(&s, &g, 13, BinningPolicy::EqualProbability).unwrap();
        assert_eq!(h.total(), 1000);
        assert!((h.probabilities().unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_histogram() {
        let s = Sample::from_points(&[vec![0.1, 0.1], vec![0.6, 0.1], vec![0.6, 0.9], vec![1.0, 1.0]])
            .unwrap();
        let axes = vec![vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]];
        let h = bin_grid(&s, axes, vec![0.25; 4]).unwrap();
        assert_eq!(h.counts(), &[1, 0, 1, 2]);
        let c = chi2_statistic(&h, Chi2Mode::Multinomial).unwrap();
        assert_eq!(c.dof, 3);
        assert!((c.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_tail() {
        // χ²_2 survival function is exp(-x/2)
        let p = asymptotic_p_value(3.0, 2).unwrap();
        assert!((p - (-1.5f64).exp()).abs() < 1e-12);
    }
}
