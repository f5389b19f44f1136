//! Catalog of test statistics and the driver that binds a statistic to a
//! null hypothesis, evaluates it, and calibrates it by Monte Carlo.

use std::fmt;
use std::sync::Arc;

use crate::binned::{bin_count_rule, bin_uniform, chi2_statistic, BinningPolicy, Chi2Mode};
use crate::calibrate::{build_null, p_value, NullCache, NullDistribution, Tail};
use crate::edf::{quadratic_stats, supremum_stats};
use crate::energy::{
    default_dmin, default_gaussian_s, EnergyTest, Kernel, KernelFamily, SimProtocol, DEFAULT_KAPPA,
};
use crate::error::{GofError, Result};
use crate::hypothesis::{Hypothesis, MvGaussian, Sampler, UnivariateModel};
use crate::multinormal::{mardia_statistics, neyman_multivariate, MardiaMode};
use crate::region::{region_statistic, RegionWeights};
use crate::rng::{derive_seed, RandomStream};
use crate::sample::{sorted_pit, Sample};
use crate::smooth::{neyman_statistic, SmoothConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    pub family: KernelFamily,
    pub kappa: f64,
    /// Gaussian width; defaults to three mean nearest-neighbour distances.
    pub s: Option<f64>,
    /// Distance cutoff; defaults to the densest-decile neighbour distance
    /// for the singular families and to 0 for the Gaussian.
    pub d_min: Option<f64>,
    /// Simulation sample size; defaults to 5n.
    pub m: Option<usize>,
    pub protocol: SimProtocol,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions {
            family: KernelFamily::Log,
            kappa: DEFAULT_KAPPA,
            s: None,
            d_min: None,
            m: None,
            protocol: SimProtocol::Fixed,
        }
    }
}

/// A test statistic together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    DPlus,
    DMinus,
    Kolmogorov,
    Kuiper,
    CramerVonMises,
    AndersonDarling,
    Watson,
    Chi2 {
        bins: Option<usize>,
        binning: BinningPolicy,
    },
    Neyman {
        k: usize,
    },
    Region {
        weights: RegionWeights,
        regions: usize,
    },
    Energy(EnergyOptions),
    MardiaSkewness,
    MardiaKurtosis,
    NeymanMultivariate {
        k: usize,
    },
}

pub const STATISTIC_NAMES: &[&str] = &[
    "dplus",
    "dminus",
    "ks",
    "kuiper",
    "cvm",
    "ad",
    "watson",
    "chi2",
    "neyman",
    "region3",
    "energy",
    "mardia-skew",
    "mardia-kurt",
    "neyman-mv",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| GofError::Parse(format!("bad value `{v}` for `{key}`")))
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::DPlus => "dplus",
            Statistic::DMinus => "dminus",
            Statistic::Kolmogorov => "ks",
            Statistic::Kuiper => "kuiper",
            Statistic::CramerVonMises => "cvm",
            Statistic::AndersonDarling => "ad",
            Statistic::Watson => "watson",
            Statistic::Chi2 { .. } => "chi2",
            Statistic::Neyman { .. } => "neyman",
            Statistic::Region { .. } => "region3",
            Statistic::Energy(_) => "energy",
            Statistic::MardiaSkewness => "mardia-skew",
            Statistic::MardiaKurtosis => "mardia-kurt",
            Statistic::NeymanMultivariate { .. } => "neyman-mv",
        }
    }

    /// Which tail of the null distribution counts as evidence against H₀.
    pub fn tail(&self) -> Tail {
        match self {
            Statistic::MardiaKurtosis => Tail::TwoSided,
            _ => Tail::Upper,
        }
    }

    pub fn is_univariate(&self) -> bool {
        !matches!(
            self,
            Statistic::Energy(_)
                | Statistic::MardiaSkewness
                | Statistic::MardiaKurtosis
                | Statistic::NeymanMultivariate { .. }
        )
    }

    /// Parses `name` or `name:key=value,key=value`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n, p),
            None => (spec, ""),
        };
        let mut st = match name {
            "dplus" => Statistic::DPlus,
            "dminus" => Statistic::DMinus,
            "ks" | "kolmogorov" => Statistic::Kolmogorov,
            "kuiper" => Statistic::Kuiper,
            "cvm" => Statistic::CramerVonMises,
            "ad" => Statistic::AndersonDarling,
            "watson" => Statistic::Watson,
            "chi2" => Statistic::Chi2 {
                bins: None,
                binning: BinningPolicy::EqualProbability,
            },
            "neyman" => Statistic::Neyman { k: 2 },
            "region3" => Statistic::Region {
                weights: RegionWeights::Unit,
                regions: 3,
            },
            "energy" => Statistic::Energy(EnergyOptions::default()),
            "mardia-skew" => Statistic::MardiaSkewness,
            "mardia-kurt" => Statistic::MardiaKurtosis,
            "neyman-mv" => Statistic::NeymanMultivariate { k: 2 },
            _ => {
                return Err(GofError::Parse(format!(
                    "unknown statistic `{name}`; available: {}",
                    STATISTIC_NAMES.join(", ")
                )))
            }
        };
        for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| GofError::Parse(format!("expected key=value, got `{kv}`")))?;
            st.set_param(k.trim(), v.trim())?;
        }
        st.validate()?;
        Ok(st)
    }

    /// Sets one named parameter, as given on the command line or in a
    /// study configuration.
    pub fn set_param(&mut self, key: &str, v: &str) -> Result<()> {
        let unknown = || GofError::Parse(format!("statistic does not take parameter `{key}`"));
        match self {
            Statistic::Chi2 { bins, binning } => match key {
                "bins" => *bins = Some(parse_num(key, v)?),
                "binning" => {
                    *binning = match v {
                        "width" => BinningPolicy::EqualWidth,
                        "prob" => BinningPolicy::EqualProbability,
                        _ => return Err(GofError::Parse(format!("binning must be width|prob, got `{v}`"))),
                    }
                }
                _ => return Err(unknown()),
            },
            Statistic::Neyman { k } | Statistic::NeymanMultivariate { k } => match key {
                "k" => *k = parse_num(key, v)?,
                _ => return Err(unknown()),
            },
            Statistic::Region { weights, regions } => match key {
                "weights" => {
                    *weights = match v {
                        "unit" => RegionWeights::Unit,
                        "chi" => RegionWeights::InverseExpectation,
                        _ => return Err(GofError::Parse(format!("weights must be unit|chi, got `{v}`"))),
                    }
                }
                "regions" => *regions = parse_num(key, v)?,
                _ => return Err(unknown()),
            },
            Statistic::Energy(o) => match key {
                "kernel" => {
                    o.family = match v {
                        "power" => KernelFamily::Power,
                        "log" => KernelFamily::Log,
                        "gaussian" => KernelFamily::Gaussian,
                        _ => {
                            return Err(GofError::Parse(format!(
                                "kernel must be power|log|gaussian, got `{v}`"
                            )))
                        }
                    }
                }
                "kappa" => o.kappa = parse_num(key, v)?,
                "s" => o.s = Some(parse_num(key, v)?),
                "dmin" => o.d_min = Some(parse_num(key, v)?),
                "m" => o.m = Some(parse_num(key, v)?),
                "protocol" => {
                    o.protocol = match v {
                        "fixed" => SimProtocol::Fixed,
                        "fresh" => SimProtocol::Fresh,
                        _ => return Err(GofError::Parse(format!("protocol must be fixed|fresh, got `{v}`"))),
                    }
                }
                _ => return Err(unknown()),
            },
            _ => return Err(unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Statistic::Neyman { k } | Statistic::NeymanMultivariate { k } => {
                SmoothConfig::new(*k)?;
            }
            Statistic::Region { regions, .. } if !(2..=crate::region::MAX_REGIONS).contains(regions) => {
                return Err(GofError::Parse(format!("regions must be in 2..=5, got {regions}")));
            }
            Statistic::Chi2 { bins: Some(0), .. } => {
                return Err(GofError::Parse("bins must be positive".into()));
            }
            Statistic::Energy(o) if o.m == Some(0) => {
                return Err(GofError::Parse("m must be positive".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for Statistic {
    /// Canonical `name:key=value,...` form; parses back to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Chi2 { bins, binning } => {
                let b = match binning {
                    BinningPolicy::EqualWidth => "width",
                    BinningPolicy::EqualProbability => "prob",
                };
                match bins {
                    Some(n) => write!(f, "chi2:bins={n},binning={b}"),
                    None => write!(f, "chi2:binning={b}"),
                }
            }
            Statistic::Neyman { k } => write!(f, "neyman:k={k}"),
            Statistic::NeymanMultivariate { k } => write!(f, "neyman-mv:k={k}"),
            Statistic::Region { weights, regions } => {
                let w = match weights {
                    RegionWeights::Unit => "unit",
                    RegionWeights::InverseExpectation => "chi",
                };
                write!(f, "region3:weights={w},regions={regions}")
            }
            Statistic::Energy(o) => {
                write!(f, "energy:kernel={}", o.family.name())?;
                if o.family == KernelFamily::Power {
                    write!(f, ",kappa={}", o.kappa)?;
                }
                if let Some(s) = o.s {
                    write!(f, ",s={s}")?;
                }
                if let Some(d) = o.d_min {
                    write!(f, ",dmin={d}")?;
                }
                if let Some(m) = o.m {
                    write!(f, ",m={m}")?;
                }
                if o.protocol == SimProtocol::Fresh {
                    write!(f, ",protocol=fresh")?;
                }
                Ok(())
            }
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Univariate(Arc<dyn UnivariateModel>),
    Energy {
        test: EnergyTest,
        m: usize,
    },
    Gaussian(MvGaussian),
}

impl fmt::Debug for dyn UnivariateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A statistic bound to a null hypothesis and a sample size. Energy tests
/// fix their simulation sample and resolved kernel at construction.
#[derive(Debug, Clone)]
pub struct GofTest {
    statistic: Statistic,
    hypothesis: Hypothesis,
    n: usize,
    prepared: Prepared,
    resolved: String,
}

impl GofTest {
    /// `seed` only matters for the energy test, whose simulation sample is
    /// drawn from a stream derived from it.
    pub fn new(statistic: Statistic, hypothesis: Hypothesis, n: usize, seed: u64) -> Result<Self> {
        statistic.validate()?;
        if n == 0 {
            return Err(GofError::pre("sample size must be positive"));
        }
        let (prepared, resolved) = match (&statistic, &hypothesis) {
            (Statistic::Energy(o), h) => {
                let (sim, standardize) = match h {
                    Hypothesis::Reference(r) => (r.sim().clone(), None),
                    Hypothesis::Gaussian(g) => {
                        let m = o.m.unwrap_or(5 * n);
                        (h.draw(m, &mut RandomStream::new(derive_seed(seed, "sim"), 0))?, Some(g.clone()))
                    }
                    Hypothesis::Univariate(_) => {
                        let m = o.m.unwrap_or(5 * n);
                        (h.draw(m, &mut RandomStream::new(derive_seed(seed, "sim"), 0))?, None)
                    }
                };
                let m = sim.n();
                let whitened = match &standardize {
                    Some(g) => g.whiten(&sim)?,
                    None => sim.clone(),
                };
                let kernel = match o.family {
                    KernelFamily::Power => Kernel::power(
                        o.kappa,
                        match o.d_min {
                            Some(d) => d,
                            None => default_dmin(&whitened)?,
                        },
                    )?,
                    KernelFamily::Log => Kernel::log(match o.d_min {
                        Some(d) => d,
                        None => default_dmin(&whitened)?,
                    })?,
                    KernelFamily::Gaussian => Kernel::gaussian(
                        match o.s {
                            Some(s) => s,
                            None => default_gaussian_s(&whitened)?,
                        },
                        o.d_min.unwrap_or(0.0),
                    )?,
                };
                let resolved = format!(
                    "energy;{};m={m};protocol={:?};standardized={}",
                    kernel.describe(),
                    o.protocol,
                    standardize.is_some()
                );
                (
                    Prepared::Energy {
                        test: EnergyTest::new(kernel, sim, standardize)?,
                        m,
                    },
                    resolved,
                )
            }
            (Statistic::MardiaSkewness | Statistic::MardiaKurtosis | Statistic::NeymanMultivariate { .. }, h) => {
                match h {
                    Hypothesis::Gaussian(g) => (Prepared::Gaussian(g.clone()), statistic.to_string()),
                    _ => {
                        return Err(GofError::Unsupported(format!(
                            "{} needs a Gaussian null hypothesis",
                            statistic.name()
                        )))
                    }
                }
            }
            (_, Hypothesis::Univariate(m)) => (Prepared::Univariate(m.clone()), statistic.to_string()),
            (_, h) => {
                return Err(GofError::Unsupported(format!(
                    "{} needs a univariate hypothesis, got {}",
                    statistic.name(),
                    h.label()
                )))
            }
        };
        Ok(GofTest {
            statistic,
            hypothesis,
            n,
            prepared,
            resolved,
        })
    }

    pub fn statistic(&self) -> &Statistic {
        &self.statistic
    }

    pub fn hypothesis(&self) -> &Hypothesis {
        &self.hypothesis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Resolved parameters (including defaults computed from the
    /// simulation sample) plus hypothesis identity and sample size. Keys
    /// the calibration cache.
    pub fn config(&self) -> String {
        format!(
            "{};h0={};n={}",
            self.resolved,
            self.hypothesis.label(),
            self.n
        )
    }

    pub fn energy_test(&self) -> Option<&EnergyTest> {
        match &self.prepared {
            Prepared::Energy { test, .. } => Some(test),
            _ => None,
        }
    }

    pub fn evaluate(&self, sample: &Sample) -> Result<f64> {
        sample.require_dim(self.hypothesis.dim())?;
        match &self.prepared {
            Prepared::Univariate(model) => self.evaluate_univariate(sample, model.as_ref()),
            Prepared::Energy { test, .. } => Ok(test.evaluate(sample)?.phi),
            Prepared::Gaussian(g) => match self.statistic {
                Statistic::MardiaSkewness => Ok(mardia_statistics(sample, MardiaMode::Known(g))?.b1),
                Statistic::MardiaKurtosis => Ok(mardia_statistics(sample, MardiaMode::Known(g))?.b2),
                Statistic::NeymanMultivariate { k } => {
                    neyman_multivariate(sample, g, SmoothConfig::new(k)?)
                }
                _ => unreachable!("gaussian-bound statistic"),
            },
        }
    }

    fn evaluate_univariate(&self, sample: &Sample, model: &dyn UnivariateModel) -> Result<f64> {
        if let Statistic::Chi2 { bins, binning } = self.statistic {
            let b = bins.unwrap_or_else(|| bin_count_rule(sample.n()));
            let h = bin_uniform(sample, model, b, binning)?;
            return Ok(chi2_statistic(&h, Chi2Mode::Multinomial)?.value);
        }
        let z = sorted_pit(sample, model)?;
        Ok(match self.statistic {
            Statistic::DPlus => supremum_stats(&z)?.d_plus,
            Statistic::DMinus => supremum_stats(&z)?.d_minus,
            Statistic::Kolmogorov => supremum_stats(&z)?.d,
            Statistic::Kuiper => supremum_stats(&z)?.v,
            Statistic::CramerVonMises => quadratic_stats(&z)?.w2,
            Statistic::AndersonDarling => quadratic_stats(&z)?.a2,
            Statistic::Watson => quadratic_stats(&z)?.u2,
            Statistic::Neyman { k } => neyman_statistic(&z, SmoothConfig::new(k)?)?,
            Statistic::Region { weights, regions } => region_statistic(&z, weights, regions)?.value,
            _ => unreachable!("univariate statistic"),
        })
    }

    /// Monte Carlo null distribution for samples of size `n` drawn from
    /// the hypothesis. Replica `r` uses stream `(seed, r)`.
    pub fn build_null(&self, replicas: usize, seed: u64) -> Result<NullDistribution> {
        let n = self.n;
        match &self.prepared {
            Prepared::Energy { test, m } if self.fresh_sim() => {
                let m = *m;
                build_null(self.statistic.name(), &self.config(), replicas, seed, |rng| {
                    let data = self.hypothesis.draw(n, rng)?;
                    let sim = self.hypothesis.draw(m, rng)?;
                    let fresh = EnergyTest::new(*test.kernel(), sim, self.standardizer())?;
                    Ok(fresh.evaluate(&data)?.phi)
                })
            }
            _ => build_null(self.statistic.name(), &self.config(), replicas, seed, |rng| {
                self.evaluate(&self.hypothesis.draw(n, rng)?)
            }),
        }
    }

    /// Like [`GofTest::build_null`] but reads and fills an on-disk cache.
    /// Returns the distribution and whether it came from the cache.
    pub fn build_null_cached(
        &self,
        replicas: usize,
        seed: u64,
        cache: Option<&NullCache>,
    ) -> Result<(NullDistribution, bool)> {
        let config = self.config();
        if let Some(c) = cache {
            if let Some(d) = c.load(&config, replicas, seed)? {
                return Ok((d, true));
            }
        }
        let d = self.build_null(replicas, seed)?;
        if let Some(c) = cache {
            c.store(&config, &d)?;
        }
        Ok((d, false))
    }

    fn fresh_sim(&self) -> bool {
        matches!(&self.statistic, Statistic::Energy(o) if o.protocol == SimProtocol::Fresh)
    }

    fn standardizer(&self) -> Option<MvGaussian> {
        match &self.hypothesis {
            Hypothesis::Gaussian(g) => Some(g.clone()),
            _ => None,
        }
    }

    /// Evaluates the statistic on `sample` and, when `null` is given,
    /// attaches the Monte Carlo p-value and the decision at `alpha`.
    pub fn outcome(
        &self,
        sample: &Sample,
        null: Option<&NullDistribution>,
        alpha: Option<f64>,
    ) -> Result<TestOutcome> {
        let value = self.evaluate(sample)?;
        let (p, replicas, seed) = match null {
            Some(d) => (Some(p_value(d, value, self.statistic.tail())?), d.replicas(), d.seed()),
            None => (None, 0, 0),
        };
        let reject_at = match (p, alpha) {
            (Some(p), Some(a)) => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(GofError::pre(format!("alpha = {a} outside (0, 1)")));
                }
                Some((a, p <= a))
            }
            _ => None,
        };
        Ok(TestOutcome {
            statistic_name: self.statistic.to_string(),
            value,
            p_value: p,
            replicas,
            seed,
            reject_at,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub statistic_name: String,
    pub value: f64,
    pub p_value: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// (α, reject) when both a p-value and a level are available.
    pub reject_at: Option<(f64, bool)>,
}

impl TestOutcome {
    /// Self-describing `key=value` record, one field per line.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("statistic={}\n", self.statistic_name));
        s.push_str(&format!("value={:?}\n", self.value));
        match self.p_value {
            Some(p) => s.push_str(&format!("p_value={p:?}\n")),
            None => s.push_str("p_value=\n"),
        }
        s.push_str(&format!("replicas={}\n", self.replicas));
        s.push_str(&format!("seed={}\n", self.seed));
        if let Some((a, r)) = self.reject_at {
            s.push_str(&format!("alpha={a:?}\n"));
            s.push_str(&format!("reject={r}\n"));
        }
        s
    }
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "statistic  {}", self.statistic_name)?;
        writeln!(f, "value      {:.6}", self.value)?;
        match self.p_value {
            Some(p) => writeln!(f, "p-value    {:.6} ({} replicas, seed {})", p, self.replicas, self.seed)?,
            None => writeln!(f, "p-value    (not calibrated)")?,
        }
        if let Some((a, r)) = self.reject_at {
            writeln!(
                f,
                "decision   {} H0 at alpha = {a}",
                if r { "reject" } else { "accept" }
            )?;
        }
        Ok(())
    }
}
