//! Energy goodness-of-fit test.
//!
//! Data points carry charge −1/n and simulation points charge +1/m. The
//! statistic is the potential energy φ = φ₁ + φ₂ with
//!
//! ```text
//! φ₁ =  1/n²  Σ_{i<j} R(|x_i − x_j|)
//! φ₂ = −1/(nm) Σ_{i,j} R(|x_i − y_j|)
//! ```
//!
//! for a monotonically decreasing correlation function R. Distances below
//! the cutoff `d_min` are replaced by `d_min`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::calibrate::{build_null, NullDistribution};
use crate::error::{GofError, Result};
use crate::hypothesis::{MvGaussian, Sampler};
use crate::numeric::CompensatedSum;
use crate::rng::{derive_seed, RandomStream};
use crate::sample::Sample;

/// Rows per block in the pair loops. Fixed so that the reduction order, and
/// therefore the result, does not depend on the number of workers.
const ROW_BLOCK: usize = 32;

pub const DEFAULT_KAPPA: f64 = 0.1;
pub const SHORT_RANGE_KAPPA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Power,
    Log,
    Gaussian,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Power => "power",
            KernelFamily::Log => "log",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    kappa: f64,
    s: f64,
    d_min: f64,
}

impl Kernel {
    /// R(r) = r^{−κ}.
    pub fn power(kappa: f64, d_min: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(GofError::pre(format!("kappa must be positive, got {kappa}")));
        }
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(GofError::pre("power kernel needs d_min > 0"));
        }
        Ok(Kernel {
            family: KernelFamily::Power,
            kappa,
            s: 0.0,
            d_min,
        })
    }

    /// R(r) = −ln r.
    pub fn log(d_min: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(GofError::pre("log kernel needs d_min > 0"));
        }
        Ok(Kernel {
            family: KernelFamily::Log,
            kappa: 0.0,
            s: 0.0,
            d_min,
        })
    }

    /// R(r) = exp(−r² / 2s²).
    pub fn gaussian(s: f64, d_min: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(GofError::pre(format!("gaussian width must be positive, got {s}")));
        }
        if !(d_min >= 0.0 && d_min.is_finite()) {
            return Err(GofError::pre("d_min must be non-negative"));
        }
        Ok(Kernel {
            family: KernelFamily::Gaussian,
            kappa: 0.0,
            s,
            d_min,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn describe(&self) -> String {
        match self.family {
            KernelFamily::Power => format!("power(kappa={},dmin={})", self.kappa, self.d_min),
            KernelFamily::Log => format!("log(dmin={})", self.d_min),
            KernelFamily::Gaussian => format!("gaussian(s={},dmin={})", self.s, self.d_min),
        }
    }

    /// Kernel value at distance `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.max(self.d_min);
        match self.family {
            KernelFamily::Power => r.powf(-self.kappa),
            KernelFamily::Log => -r.ln(),
            KernelFamily::Gaussian => (-r * r / (2.0 * self.s * self.s)).exp(),
        }
    }

    /// Kernel value from a squared distance; avoids the square root in the
    /// pair loops.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        let r2 = r2.max(self.d_min * self.d_min);
        match self.family {
            KernelFamily::Power => r2.powf(-0.5 * self.kappa),
            KernelFamily::Log => -0.5 * r2.ln(),
            KernelFamily::Gaussian => (-r2 / (2.0 * self.s * self.s)).exp(),
        }
    }
}

pub fn kernel_eval(k: &Kernel, r: f64) -> f64 {
    k.eval(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub phi1: f64,
    pub phi2: f64,
    pub phi: f64,
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn energy_statistic(data: &Sample, sim: &Sample, kernel: &Kernel) -> Result<EnergyValue> {
    sim.require_dim(data.dim())?;
    let n = data.n();
    let m = sim.n();
    if n < 2 {
        return Err(GofError::pre("energy statistic needs at least two data points"));
    }
    let blocks: Vec<(CompensatedSum, CompensatedSum)> = (0..n)
        .step_by(ROW_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut dd = CompensatedSum::new();
            let mut ds = CompensatedSum::new();
            for i in start..(start + ROW_BLOCK).min(n) {
                let xi = data.point(i);
                for j in i + 1..n {
                    dd.add(kernel.eval_sq(dist_sq(xi, data.point(j))));
                }
                for y in sim.points() {
                    ds.add(kernel.eval_sq(dist_sq(xi, y)));
                }
            }
            (dd, ds)
        })
        .collect();
    let mut dd = CompensatedSum::new();
    let mut ds = CompensatedSum::new();
    for (a, b) in &blocks {
        dd.merge(a);
        ds.merge(b);
    }
    let (nf, mf) = (n as f64, m as f64);
    let phi1 = dd.value() / (nf * nf);
    let phi2 = -ds.value() / (nf * mf);
    if !(phi1.is_finite() && phi2.is_finite()) {
        return Err(GofError::Numeric(format!("non-finite energy ({phi1}, {phi2})")));
    }
    Ok(EnergyValue {
        phi1,
        phi2,
        phi: phi1 + phi2,
    })
}

/// Nearest-neighbour distance of every point, O(m²).
pub fn nearest_neighbour_distances(sample: &Sample) -> Vec<f64> {
    let m = sample.n();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = sample.point(i);
            let mut best = f64::INFINITY;
            for j in 0..m {
                if j != i {
                    best = best.min(dist_sq(xi, sample.point(j)));
                }
            }
            best.sqrt()
        })
        .collect()
}

/// Default cutoff: mean nearest-neighbour distance over the densest decile
/// (the tenth of points with the smallest neighbour distance).
pub fn default_dmin(sim: &Sample) -> Result<f64> {
    if sim.n() < 2 {
        return Err(GofError::pre("need two simulation points for a default d_min"));
    }
    let mut nn = nearest_neighbour_distances(sim);
    nn.sort_by(f64::total_cmp);
    let take = nn.len().div_ceil(10);
    let d = nn[..take].iter().sum::<f64>() / take as f64;
    if d > 0.0 {
        Ok(d)
    } else {
        // duplicated simulation points; fall back to the overall mean
        let mean = nn.iter().sum::<f64>() / nn.len() as f64;
        if mean > 0.0 {
            Ok(mean)
        } else {
            Err(GofError::Numeric("simulation points all coincide".into()))
        }
    }
}

/// Default Gaussian width: three times the mean nearest-neighbour distance.
pub fn default_gaussian_s(sim: &Sample) -> Result<f64> {
    if sim.n() < 2 {
        return Err(GofError::pre("need two simulation points for a default width"));
    }
    let nn = nearest_neighbour_distances(sim);
    let s = 3.0 * nn.iter().sum::<f64>() / nn.len() as f64;
    if s > 0.0 {
        Ok(s)
    } else {
        Err(GofError::Numeric("simulation points all coincide".into()))
    }
}

/// Null model for the energy test.
#[derive(Clone)]
pub struct MultivariateHypothesis {
    pub sampler: Arc<dyn Sampler>,
    /// Pre-drawn simulation sample; drawn from `sampler` when absent.
    pub reference: Option<Sample>,
    /// When set, data and simulation points are whitened by this Gaussian
    /// before distances are taken.
    pub standardize: Option<MvGaussian>,
}

impl MultivariateHypothesis {
    pub fn new(sampler: Arc<dyn Sampler>) -> Self {
        MultivariateHypothesis {
            sampler,
            reference: None,
            standardize: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SimProtocol {
    /// Every replica is scored against the same simulation sample.
    #[default]
    Fixed,
    /// Every replica draws its own simulation sample.
    Fresh,
}

/// An energy test bound to one simulation sample.
#[derive(Debug, Clone)]
pub struct EnergyTest {
    kernel: Kernel,
    sim: Sample,
    standardize: Option<MvGaussian>,
}

impl EnergyTest {
    /// `sim` is given in raw coordinates.
    pub fn new(kernel: Kernel, sim: Sample, standardize: Option<MvGaussian>) -> Result<Self> {
        let sim = match &standardize {
            Some(g) => g.whiten(&sim)?,
            None => sim,
        };
        Ok(EnergyTest {
            kernel,
            sim,
            standardize,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// The simulation sample in the coordinates distances are taken in.
    pub fn sim(&self) -> &Sample {
        &self.sim
    }

    pub fn evaluate(&self, data: &Sample) -> Result<EnergyValue> {
        match &self.standardize {
            Some(g) => energy_statistic(&g.whiten(data)?, &self.sim, &self.kernel),
            None => energy_statistic(data, &self.sim, &self.kernel),
        }
    }
}

/// Simulation sample for a hypothesis: the reference when present,
/// otherwise `m` points drawn from a stream derived from `seed`.
pub fn simulation_sample(h: &MultivariateHypothesis, m: usize, seed: u64) -> Result<Sample> {
    match &h.reference {
        Some(r) => {
            r.require_dim(h.dim())?;
            Ok(r.clone())
        }
        None => h
            .sampler
            .draw(m, &mut RandomStream::new(derive_seed(seed, "sim"), 0)),
    }
}

/// Monte Carlo distribution of φ under the null: `replicas` pseudo-data
/// samples of size `n`, scored against the simulation sample (fixed
/// protocol) or against a fresh simulation sample of size `m` each.
#[allow(clippy::too_many_arguments)]
pub fn energy_null_distribution(
    h: &MultivariateHypothesis,
    n: usize,
    m: usize,
    kernel: &Kernel,
    replicas: usize,
    seed: u64,
    protocol: SimProtocol,
) -> Result<NullDistribution> {
    let test = EnergyTest::new(*kernel, simulation_sample(h, m, seed)?, h.standardize.clone())?;
    let config = format!(
        "energy;{};n={n};m={m};protocol={protocol:?};h0={}",
        kernel.describe(),
        h.sampler.label()
    );
    build_null("energy", &config, replicas, seed, |rng| {
        let data = h.sampler.draw(n, rng)?;
        match protocol {
            SimProtocol::Fixed => Ok(test.evaluate(&data)?.phi),
            SimProtocol::Fresh => {
                let sim = h.sampler.draw(m, rng)?;
                let fresh = EnergyTest::new(*kernel, sim, h.standardize.clone())?;
                Ok(fresh.evaluate(&data)?.phi)
            }
        }
    })
}
