//! Monte Carlo null distributions, p-values and critical values.
//!
//! Replica `r` of a calibration run draws from `RandomStream::new(seed, r)`,
//! so a [`NullDistribution`] is a pure function of the statistic, the
//! hypothesis, `n`, `replicas` and `seed`, whatever the worker count.
//!
//! # Cache file format
//!
//! A null distribution is stored as UTF-8 text. The first line is a header
//!
//! ```text
//! #gofit-null v1 statistic=<name> replicas=<R> seed=<seed> digest=<sha256 hex>
//! ```
//!
//! followed by exactly `R` lines, each one replica value in ascending
//! order, written in Rust's shortest round-trip `f64` notation. Reading the
//! file back reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{GofError, Result};
use crate::rng::RandomStream;

const CACHE_MAGIC: &str = "#gofit-null v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tail {
    Upper,
    Lower,
    TwoSided,
}

impl Tail {
    pub fn name(self) -> &'static str {
        match self {
            Tail::Upper => "upper",
            Tail::Lower => "lower",
            Tail::TwoSided => "two_sided",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    statistic_name: String,
    values: Vec<f64>,
    seed: u64,
    config_digest: String,
}

impl NullDistribution {
    /// Builds a distribution from replica values in any order.
    pub fn new(
        statistic_name: impl Into<String>,
        mut values: Vec<f64>,
        seed: u64,
        config_digest: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(GofError::pre("null distribution needs at least one replica"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(GofError::Numeric("NaN replica value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(NullDistribution {
            statistic_name: statistic_name.into(),
            values,
            seed,
            config_digest: config_digest.into(),
        })
    }

    pub fn statistic_name(&self) -> &str {
        &self.statistic_name
    }

    /// Replica values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn replicas(&self) -> usize {
        self.values.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    /// Number of replica values `>= x`.
    pub fn count_at_least(&self, x: f64) -> usize {
        self.values.len() - self.values.partition_point(|&v| v < x)
    }

    /// Number of replica values `<= x`.
    pub fn count_at_most(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{CACHE_MAGIC} statistic={} replicas={} seed={} digest={}\n",
            self.statistic_name,
            self.values.len(),
            self.seed,
            self.config_digest
        );
        for v in &self.values {
            s.push_str(&format!("{v:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| GofError::Cache("empty file".into()))?;
        let rest = header
            .strip_prefix(CACHE_MAGIC)
            .ok_or_else(|| GofError::Cache(format!("bad header `{header}`")))?;
        let mut name = None;
        let mut replicas = None;
        let mut seed = None;
        let mut digest = None;
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| GofError::Cache(format!("bad header field `{field}`")))?;
            match k {
                "statistic" => name = Some(v.to_string()),
                "replicas" => replicas = v.parse::<usize>().ok(),
                "seed" => seed = v.parse::<u64>().ok(),
                "digest" => digest = Some(v.to_string()),
                _ => {}
            }
        }
        let (Some(name), Some(replicas), Some(seed), Some(digest)) = (name, replicas, seed, digest)
        else {
            return Err(GofError::Cache("incomplete header".into()));
        };
        let values = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| GofError::Cache(format!("bad value `{l}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != replicas {
            return Err(GofError::Cache(format!(
                "header says {replicas} replicas, file has {}",
                values.len()
            )));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(GofError::Cache("values not sorted".into()));
        }
        NullDistribution::new(name, values, seed, digest)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_text().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs `replicas` independent evaluations of `replica`, each with its own
/// stream `(seed, r)`, and collects the sorted values.
pub fn build_null<F>(
    statistic_name: &str,
    config: &str,
    replicas: usize,
    seed: u64,
    replica: F,
) -> Result<NullDistribution>
where
    F: Fn(&mut RandomStream) -> Result<f64> + Sync,
{
    if replicas == 0 {
        return Err(GofError::pre("replicas must be at least 1"));
    }
    let values = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomStream::new(seed, r);
            replica(&mut rng).map_err(|e| GofError::Replica {
                replica: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    NullDistribution::new(statistic_name, values, seed, digest_hex(config.as_bytes()))
}

/// Add-one Monte Carlo p-value.
pub fn p_value(dist: &NullDistribution, observed: f64, tail: Tail) -> Result<f64> {
    let r = dist.replicas();
    if r == 0 {
        return Err(GofError::pre("empty null distribution"));
    }
    let denom = (r + 1) as f64;
    let upper = (1 + dist.count_at_least(observed)) as f64 / denom;
    let lower = (1 + dist.count_at_most(observed)) as f64 / denom;
    Ok(match tail {
        Tail::Upper => upper,
        Tail::Lower => lower,
        Tail::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    })
}

/// Smallest replica count that resolves a test at level `alpha`.
pub fn resolution_guard(replicas: usize, alpha: f64) -> Result<()> {
    if alpha <= 0.05 && replicas < 100 {
        return Err(GofError::Resolution(format!(
            "{replicas} replicas are too few for alpha = {alpha}; use at least 100"
        )));
    }
    Ok(())
}

/// Empirical (1 − alpha)-quantile with the "higher" convention: the value
/// at index ceil((1 − alpha)(R − 1)) of the sorted replicas. When the cut
/// falls exactly on a value the larger neighbour is taken.
pub fn upper_quantile(dist: &NullDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GofError::pre(format!("alpha = {alpha} outside (0, 1)")));
    }
    let r = dist.replicas();
    let pos = (1.0 - alpha) * (r - 1) as f64;
    // absorb representation error in (1 − alpha)(R − 1)
    let idx = ((pos - 1e-9).ceil().max(0.0) as usize).min(r - 1);
    Ok(dist.values()[idx])
}

/// Monte Carlo critical value; requires `replicas * alpha >= 5`.
pub fn critical_value(dist: &NullDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GofError::pre(format!("alpha = {alpha} outside (0, 1)")));
    }
    if (dist.replicas() as f64) * alpha < 5.0 {
        return Err(GofError::Resolution(format!(
            "{} replicas x alpha {alpha} < 5 tail values",
            dist.replicas()
        )));
    }
    upper_quantile(dist, alpha)
}

/// On-disk store of null distributions keyed by configuration digest,
/// replica count and seed.
#[derive(Debug, Clone)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(NullCache { dir })
    }

    pub fn path_for(&self, config: &str, replicas: usize, seed: u64) -> PathBuf {
        let digest = digest_hex(config.as_bytes());
        self.dir
            .join(format!("{}-r{replicas}-s{seed}.null", &digest[..32]))
    }

    pub fn load(&self, config: &str, replicas: usize, seed: u64) -> Result<Option<NullDistribution>> {
        let path = self.path_for(config, replicas, seed);
        if !path.exists() {
            return Ok(None);
        }
        let dist = NullDistribution::read_from(&path)?;
        if dist.config_digest() != digest_hex(config.as_bytes()) || dist.seed() != seed {
            return Err(GofError::Cache(format!("{} does not match its key", path.display())));
        }
        Ok(Some(dist))
    }

    pub fn store(&self, config: &str, dist: &NullDistribution) -> Result<PathBuf> {
        let path = self.path_for(config, dist.replicas(), dist.seed());
        dist.write_to(&path)?;
        Ok(path)
    }
}
