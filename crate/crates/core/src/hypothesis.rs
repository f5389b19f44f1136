//! Null-hypothesis models: univariate cdf/sampler pairs, the multivariate
//! Gaussian, and empirical reference samples.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{GofError, Result};
use crate::numeric::{cholesky, forward_substitute};
use crate::rng::RandomStream;
use crate::sample::Sample;

/// Anything that draws observation points from a random stream.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;

    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]);

    /// Stable identity used in cache digests and report headers.
    fn label(&self) -> String;

    fn draw(&self, n: usize, rng: &mut RandomStream) -> Result<Sample> {
        let dim = self.dim();
        let mut data = vec![0.0; n * dim];
        for p in data.chunks_exact_mut(dim) {
            self.draw_point(rng, p);
        }
        Sample::from_flat(dim, data)
    }
}

/// A continuous univariate null model.
pub trait UnivariateModel: Sampler {
    /// Distribution function. Implementations clamp to [0, 1].
    fn cdf(&self, x: f64) -> f64;

    /// Closed support interval, possibly unbounded.
    fn support(&self) -> (f64, f64);

    /// Inverse cdf, when available in closed form.
    fn quantile(&self, _p: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GofError::pre(format!("invalid uniform interval [{lo}, {hi}]")));
        }
        Ok(Uniform { lo, hi })
    }

    pub fn unit() -> Self {
        Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl Sampler for Uniform {
    fn dim(&self) -> usize {
        1
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        out[0] = self.lo + (self.hi - self.lo) * rng.uniform();
    }
    fn label(&self) -> String {
        if self.lo == 0.0 && self.hi == 1.0 {
            "uniform01".into()
        } else {
            format!("uniform({},{})", self.lo, self.hi)
        }
    }
}

impl UnivariateModel for Uniform {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    fn quantile(&self, p: f64) -> Option<f64> {
        Some(self.lo + (self.hi - self.lo) * p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exponential {
    rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(GofError::pre(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Exponential { rate })
    }
}

impl Sampler for Exponential {
    fn dim(&self) -> usize {
        1
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        out[0] = -(1.0 - rng.uniform()).ln() / self.rate;
    }
    fn label(&self) -> String {
        format!("exp({})", self.rate)
    }
}

impl UnivariateModel for Exponential {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-(-self.rate * x).exp_m1()).clamp(0.0, 1.0)
        }
    }
    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn quantile(&self, p: f64) -> Option<f64> {
        Some(-(-p).ln_1p() / self.rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: f64,
    sd: f64,
    normal: Normal,
}

impl Gaussian {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let normal = Normal::new(mean, sd)
            .map_err(|e| GofError::pre(format!("invalid gaussian({mean}, {sd}): {e}")))?;
        Ok(Gaussian { mean, sd, normal })
    }
}

impl Sampler for Gaussian {
    fn dim(&self) -> usize {
        1
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = self.mean + self.sd * z;
    }
    fn label(&self) -> String {
        format!("gauss1d({},{})", self.mean, self.sd)
    }
}

impl UnivariateModel for Gaussian {
    fn cdf(&self, x: f64) -> f64 {
        self.normal.cdf(x).clamp(0.0, 1.0)
    }
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn quantile(&self, p: f64) -> Option<f64> {
        let x = self.normal.inverse_cdf(p);
        if !x.is_finite() {
            return Some(x);
        }
        // one Newton step; the library inverse is good to ~1e-11 only
        let d = self.normal.pdf(x);
        Some(if d > 0.0 { x - (self.cdf(x) - p) / d } else { x })
    }
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Multivariate Gaussian with known mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MvGaussian {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
}

impl MvGaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(GofError::pre("gaussian mean must be non-empty"));
        }
        for i in 0..dim {
            for j in 0..i {
                if cov.get(i * dim + j) != cov.get(j * dim + i) {
                    return Err(GofError::pre("covariance must be symmetric"));
                }
            }
        }
        let chol = cholesky(&cov, dim)?;
        Ok(MvGaussian { mean, cov, chol })
    }

    pub fn standard(dim: usize) -> Self {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = 1.0;
        }
        MvGaussian::new(vec![0.0; dim], cov).expect("identity covariance")
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    /// Maps `x` to `L^{-1}(x - mean)`, so that the null becomes N(0, I).
    pub fn whiten_point(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), m) in out.iter_mut().zip(x).zip(&self.mean) {
            *o = xi - m;
        }
        forward_substitute(&self.chol, self.mean.len(), out);
    }

    pub fn whiten(&self, sample: &Sample) -> Result<Sample> {
        sample.require_dim(self.mean.len())?;
        Ok(sample.map_points(|x, out| self.whiten_point(x, out)))
    }
}

impl Sampler for MvGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        let dim = self.mean.len();
        let mut z = [0.0f64; 16];
        let mut zv;
        let z: &mut [f64] = if dim <= 16 {
            &mut z[..dim]
        } else {
            zv = vec![0.0; dim];
            &mut zv
        };
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..dim {
            let mut s = self.mean[i];
            for k in 0..=i {
                s += self.chol[i * dim + k] * z[k];
            }
            out[i] = s;
        }
    }
    fn label(&self) -> String {
        let f = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!("gauss{}d(mean=[{}],cov=[{}])", self.dim(), f(&self.mean), f(&self.cov))
    }
}

/// An empirical reference sample used as the null model.
///
/// The points are shuffled once with a fixed seed and split in two halves:
/// the first half is the simulation sample of the energy test, the second
/// half is the pool from which pseudo-experiments are drawn without
/// replacement. Keeping the two halves disjoint avoids coincident data and
/// simulation points in the null replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    sim: Sample,
    pool: Sample,
    digest: String,
}

impl ReferenceSample {
    pub fn new(sample: Sample, shuffle_seed: u64) -> Result<Self> {
        let n = sample.n();
        if n < 4 {
            return Err(GofError::pre("reference sample needs at least 4 points"));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = RandomStream::new(shuffle_seed, 0);
        for i in (1..n).rev() {
            let j = rng.below(i + 1);
            idx.swap(i, j);
        }
        let dim = sample.dim();
        let take = |ids: &[usize]| {
            let mut data = Vec::with_capacity(ids.len() * dim);
            for &i in ids {
                data.extend_from_slice(sample.point(i));
            }
            Sample::from_flat(dim, data)
        };
        let half = n / 2;
        let digest = crate::calibrate::digest_hex(
            sample
                .as_flat()
                .iter()
                .flat_map(|v| v.to_bits().to_le_bytes())
                .collect::<Vec<u8>>()
                .as_slice(),
        );
        Ok(ReferenceSample {
            sim: take(&idx[..half])?,
            pool: take(&idx[half..])?,
            digest: format!("{}:{}", &digest[..16], shuffle_seed),
        })
    }

    pub fn sim(&self) -> &Sample {
        &self.sim
    }

    pub fn pool(&self) -> &Sample {
        &self.pool
    }
}

impl Sampler for ReferenceSample {
    fn dim(&self) -> usize {
        self.pool.dim()
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        out.copy_from_slice(self.pool.point(rng.below(self.pool.n())));
    }
    fn label(&self) -> String {
        format!("sample({})", self.digest)
    }
    fn draw(&self, n: usize, rng: &mut RandomStream) -> Result<Sample> {
        let m = self.pool.n();
        if n > m {
            return Err(GofError::pre(format!(
                "reference pool has {m} points, cannot draw {n} without replacement"
            )));
        }
        // partial Fisher-Yates
        let mut idx: Vec<usize> = (0..m).collect();
        let dim = self.pool.dim();
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            let j = i + rng.below(m - i);
            idx.swap(i, j);
            data.extend_from_slice(self.pool.point(idx[i]));
        }
        Sample::from_flat(dim, data)
    }
}

/// The null hypotheses understood by the test driver and the CLI.
#[derive(Clone)]
pub enum Hypothesis {
    Univariate(Arc<dyn UnivariateModel>),
    Gaussian(MvGaussian),
    Reference(ReferenceSample),
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Hypothesis {
    pub fn uniform01() -> Self {
        Hypothesis::Univariate(Arc::new(Uniform::unit()))
    }

    pub fn univariate_model(&self) -> Option<&dyn UnivariateModel> {
        match self {
            Hypothesis::Univariate(m) => Some(m.as_ref()),
            _ => None,
        }
    }

    /// Parses `uniform01`, `exp(rate)`, `gauss1d(mean,sd)`,
    /// `gauss2d` / `gauss2d(mx,my,sxx,sxy,syy)`. `sample:<path>` is handled
    /// by the caller because it needs file access and a shuffle seed.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(i) => {
                if !spec.ends_with(')') {
                    return Err(GofError::Parse(format!("unbalanced parentheses in `{spec}`")));
                }
                let inner = &spec[i + 1..spec.len() - 1];
                let args = inner
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| GofError::Parse(format!("bad number `{s}` in `{spec}`")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (&spec[..i], args)
            }
            None => (spec, Vec::new()),
        };
        let arity = |k: usize| -> Result<()> {
            if args.len() != k {
                Err(GofError::Parse(format!("`{name}` takes {k} arguments, got {}", args.len())))
            } else {
                Ok(())
            }
        };
        match name {
            "uniform01" => {
                arity(0)?;
                Ok(Hypothesis::uniform01())
            }
            "uniform" => {
                arity(2)?;
                Ok(Hypothesis::Univariate(Arc::new(Uniform::new(args[0], args[1])?)))
            }
            "exp" => {
                if args.is_empty() {
                    return Ok(Hypothesis::Univariate(Arc::new(Exponential::new(1.0)?)));
                }
                arity(1)?;
                Ok(Hypothesis::Univariate(Arc::new(Exponential::new(args[0])?)))
            }
            "gauss1d" => {
                if args.is_empty() {
                    return Ok(Hypothesis::Univariate(Arc::new(Gaussian::new(0.0, 1.0)?)));
                }
                arity(2)?;
                Ok(Hypothesis::Univariate(Arc::new(Gaussian::new(args[0], args[1])?)))
            }
            "gauss2d" => {
                if args.is_empty() {
                    return Ok(Hypothesis::Gaussian(MvGaussian::standard(2)));
                }
                arity(5)?;
                Ok(Hypothesis::Gaussian(MvGaussian::new(
                    vec![args[0], args[1]],
                    vec![args[2], args[3], args[3], args[4]],
                )?))
            }
            _ => Err(GofError::Parse(format!(
                "unknown hypothesis `{spec}`; available: uniform01, uniform(a,b), exp(rate), \
                 gauss1d(mean,sd), gauss2d(mx,my,sxx,sxy,syy), sample:<path>"
            ))),
        }
    }
}

impl Sampler for Hypothesis {
    fn dim(&self) -> usize {
        match self {
            Hypothesis::Univariate(m) => m.dim(),
            Hypothesis::Gaussian(g) => g.dim(),
            Hypothesis::Reference(r) => r.dim(),
        }
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        match self {
            Hypothesis::Univariate(m) => m.draw_point(rng, out),
            Hypothesis::Gaussian(g) => g.draw_point(rng, out),
            Hypothesis::Reference(r) => r.draw_point(rng, out),
        }
    }
    fn label(&self) -> String {
        match self {
            Hypothesis::Univariate(m) => m.label(),
            Hypothesis::Gaussian(g) => g.label(),
            Hypothesis::Reference(r) => r.label(),
        }
    }
    fn draw(&self, n: usize, rng: &mut RandomStream) -> Result<Sample> {
        match self {
            Hypothesis::Univariate(m) => m.draw(n, rng),
            Hypothesis::Gaussian(g) => g.draw(n, rng),
            Hypothesis::Reference(r) => r.draw(n, rng),
        }
    }
}
