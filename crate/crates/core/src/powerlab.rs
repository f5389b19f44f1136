//! Contamination models and the power-study harness.
//!
//! The background shapes are this library's own definitions of a mean
//! shift, a variance increase and a variance decrease on [0, 1], and of a
//! clustered blob, a ring and an elongated component around a standard
//! bivariate Gaussian. Every power table carries the formulas of the models
//! it used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::calibrate::{p_value, resolution_guard, NullDistribution};
use crate::error::{GofError, Result};
use crate::hypothesis::{Hypothesis, MvGaussian, Sampler};
use crate::rng::{derive_seed, RandomStream};
use crate::sample::Sample;
use crate::statistic::{GofTest, Statistic};

pub const DEFAULT_UNIVARIATE_FRACTION: f64 = 0.3;
pub const DEFAULT_BIVARIATE_FRACTION: f64 = 0.2;
pub const MIN_TRIALS: usize = 400;

/// A background distribution given by an inverse-cdf style closure.
struct Background {
    dim: usize,
    label: &'static str,
    draw: fn(&mut RandomStream, &mut [f64]),
}

impl Sampler for Background {
    fn dim(&self) -> usize {
        self.dim
    }
    fn draw_point(&self, rng: &mut RandomStream, out: &mut [f64]) {
        (self.draw)(rng, out)
    }
    fn label(&self) -> String {
        self.label.to_string()
    }
}

fn normal(rng: &mut RandomStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Named background shapes.
pub const MODEL_NAMES: &[&str] = &["A", "B", "C", "blob", "ring", "elongated"];

fn background(name: &str) -> Option<(Background, &'static str)> {
    let b = match name {
        "A" => (
            Background {
                dim: 1,
                label: "A",
                draw: |rng, o| o[0] = 0.5 * rng.uniform(),
            },
            "A: uniform on [0, 0.5] (mean shift)",
        ),
        "B" => (
            Background {
                dim: 1,
                label: "B",
                draw: |rng, o| o[0] = 0.5 * (1.0 + (2.0 * rng.uniform() - 1.0).cbrt()),
            },
            "B: density 3(2z-1)^2 on [0, 1], humps at both ends (variance increase)",
        ),
        "C" => (
            Background {
                dim: 1,
                label: "C",
                draw: |rng, o| o[0] = 0.25 + 0.25 * (rng.uniform() + rng.uniform()),
            },
            "C: triangular on [0.25, 0.75] peaked at 0.5 (variance decrease)",
        ),
        "blob" => (
            Background {
                dim: 2,
                label: "blob",
                draw: |rng, o| {
                    o[0] = 1.0 + 0.3 * normal(rng);
                    o[1] = 1.0 + 0.3 * normal(rng);
                },
            },
            "blob: N((1, 1), 0.3^2 I) (clustered offset)",
        ),
        "ring" => (
            Background {
                dim: 2,
                label: "ring",
                draw: |rng, o| {
                    let r = 2.0 + 0.1 * normal(rng);
                    let t = std::f64::consts::TAU * rng.uniform();
                    o[0] = r * t.cos();
                    o[1] = r * t.sin();
                },
            },
            "ring: radius 2 + N(0, 0.1^2), uniform angle",
        ),
        "elongated" => (
            Background {
                dim: 2,
                label: "elongated",
                draw: |rng, o| {
                    // sd 2 along the diagonal, 0.5 across it
                    let u = 2.0 * normal(rng);
                    let v = 0.5 * normal(rng);
                    let h = std::f64::consts::FRAC_1_SQRT_2;
                    o[0] = h * (u - v);
                    o[1] = h * (u + v);
                },
            },
            "elongated: N(0, R diag(4, 0.25) R^T), R = rotation by 45 degrees",
        ),
        _ => return None,
    };
    Some(b)
}

#[derive(Clone)]
pub struct ContaminationModel {
    pub name: String,
    pub formula: String,
    pub background: Arc<dyn Sampler>,
    pub fraction: f64,
}

impl std::fmt::Debug for ContaminationModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.name, self.fraction)
    }
}

impl ContaminationModel {
    pub fn new(
        name: impl Into<String>,
        formula: impl Into<String>,
        background: Arc<dyn Sampler>,
        fraction: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(GofError::pre(format!("fraction {fraction} outside [0, 1]")));
        }
        Ok(ContaminationModel {
            name: name.into(),
            formula: formula.into(),
            background,
            fraction,
        })
    }

    /// One of the built-in models in [`MODEL_NAMES`].
    pub fn named(name: &str, fraction: f64) -> Result<Self> {
        let (bg, formula) = background(name).ok_or_else(|| {
            GofError::Parse(format!(
                "unknown contamination model `{name}`; available: {}",
                MODEL_NAMES.join(", ")
            ))
        })?;
        Self::new(name, formula, Arc::new(bg), fraction)
    }

    /// Draws `n` points, each from the background with probability
    /// `fraction` and from `h0` otherwise.
    pub fn draw(&self, h0: &dyn Sampler, n: usize, rng: &mut RandomStream) -> Result<Sample> {
        let dim = h0.dim();
        if self.background.dim() != dim {
            return Err(GofError::Dimension {
                expected: dim,
                got: self.background.dim(),
            });
        }
        let mut data = vec![0.0; n * dim];
        for p in data.chunks_exact_mut(dim) {
            if rng.uniform() < self.fraction {
                self.background.draw_point(rng, p);
            } else {
                h0.draw_point(rng, p);
            }
        }
        Sample::from_flat(dim, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub statistic: String,
    pub contamination: String,
    pub fraction: f64,
    pub n: usize,
    pub alpha: f64,
    pub power: f64,
    pub sigma: f64,
    pub trials: usize,
    pub error: Option<String>,
}

impl PowerRow {
    fn failed(statistic: String, model: &ContaminationModel, n: usize, alpha: f64, e: String) -> Self {
        PowerRow {
            statistic,
            contamination: model.name.clone(),
            fraction: model.fraction,
            n,
            alpha,
            power: f64::NAN,
            sigma: f64::NAN,
            trials: 0,
            error: Some(e),
        }
    }

    /// Number of rejections behind the estimate.
    pub fn rejections(&self) -> usize {
        (self.power * self.trials as f64).round() as usize
    }
}

/// Two-proportion z statistic of `a` over `b` (pooled variance).
pub fn two_proportion_z(a: &PowerRow, b: &PowerRow) -> f64 {
    let (na, nb) = (a.trials as f64, b.trials as f64);
    let pooled = (a.power * na + b.power * nb) / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        if a.power == b.power {
            0.0
        } else {
            f64::INFINITY.copysign(a.power - b.power)
        }
    } else {
        (a.power - b.power) / se
    }
}

/// Rejection rate of `test` on `trials` contaminated samples, with the
/// critical region taken from a previously built null distribution.
pub fn power_with_null(
    test: &GofTest,
    null: &NullDistribution,
    model: &ContaminationModel,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<PowerRow> {
    if trials == 0 {
        return Err(GofError::pre("trials must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GofError::pre(format!("alpha = {alpha} outside (0, 1)")));
    }
    let n = test.n();
    let h0 = test.hypothesis();
    let tail = test.statistic().tail();
    let rejected = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::new(seed, t);
            let sample = model.draw(h0, n, &mut rng)?;
            let v = test.evaluate(&sample)?;
            Ok(p_value(null, v, tail)? <= alpha)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&r| r)
        .count();
    let power = rejected as f64 / trials as f64;
    Ok(PowerRow {
        statistic: test.statistic().to_string(),
        contamination: model.name.clone(),
        fraction: model.fraction,
        n,
        alpha,
        power,
        sigma: (power * (1.0 - power) / trials as f64).sqrt(),
        trials,
        error: None,
    })
}

/// Calibrates `test` under its null hypothesis, then estimates its power
/// against `model`. Calibration and trials use streams derived from `seed`.
pub fn estimate_power(
    test: &GofTest,
    model: &ContaminationModel,
    alpha: f64,
    trials: usize,
    calibration_replicas: usize,
    seed: u64,
) -> Result<PowerRow> {
    resolution_guard(calibration_replicas, alpha)?;
    let null = test.build_null(calibration_replicas, derive_seed(seed, "calibrate"))?;
    power_with_null(test, &null, model, alpha, trials, derive_seed(seed, "trials"))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct ContaminationSpec {
    pub model: String,
    pub fraction: Option<f64>,
}

/// Study description, read from TOML.
///
/// ```toml
/// seed = 1
/// hypothesis = "uniform01"
/// alpha = 0.05
/// trials = 400
/// calibration_replicas = 999
/// n = [100]
/// statistics = ["ks", "kuiper", "chi2", "neyman:k=2"]
///
/// [[contamination]]
/// model = "A"
/// fraction = 0.3
/// ```
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub hypothesis: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub trials: usize,
    pub calibration_replicas: usize,
    pub n: Vec<usize>,
    pub statistics: Vec<String>,
    pub contamination: Vec<ContaminationSpec>,
}

fn default_alpha() -> f64 {
    0.05
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig =
            toml::from_str(text).map_err(|e| GofError::Parse(format!("study config: {e}")))?;
        if cfg.n.is_empty() || cfg.statistics.is_empty() || cfg.contamination.is_empty() {
            return Err(GofError::Parse(
                "study config needs at least one n, statistic and contamination".into(),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub seed: u64,
    pub hypothesis: String,
    pub models: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub rows: Vec<PowerRow>,
}

pub const POWER_COLUMNS: &[&str] = &[
    "statistic",
    "contamination",
    "fraction",
    "n",
    "alpha",
    "power",
    "sigma",
    "trials",
    "error",
];

impl PowerTable {
    /// Tab-separated table with a `#` provenance header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# gofit power table");
        let _ = writeln!(s, "# version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# hypothesis={}", self.hypothesis);
        for (name, formula) in &self.models {
            let _ = writeln!(s, "# model {name}: {formula}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "# warning: {w}");
        }
        let _ = writeln!(s, "{}", POWER_COLUMNS.join("\t"));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                r.statistic,
                r.contamination,
                r.fraction,
                r.n,
                r.alpha,
                r.power,
                r.sigma,
                r.trials,
                r.error.as_deref().unwrap_or("")
            );
        }
        s
    }

    pub fn row(&self, statistic: &str, contamination: &str) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && r.contamination == contamination)
    }
}

/// Hypothesis from a study or CLI spec, including `sample:<path>`.
pub fn resolve_hypothesis(spec: &str, seed: u64) -> Result<Hypothesis> {
    match spec.strip_prefix("sample:") {
        Some(path) => {
            let sample = crate::eventfile::read_event_file(std::path::Path::new(path))?;
            Ok(Hypothesis::Reference(crate::hypothesis::ReferenceSample::new(
                sample,
                derive_seed(seed, "reference"),
            )?))
        }
        None => Hypothesis::parse(spec),
    }
}

/// Runs every (statistic, contamination, n) cell of a study. A failing
/// cell is recorded in its row and does not stop the others.
pub fn run_study(cfg: &StudyConfig) -> Result<PowerTable> {
    let h0 = resolve_hypothesis(&cfg.hypothesis, cfg.seed)?;
    let default_fraction = if h0.dim() == 1 {
        DEFAULT_UNIVARIATE_FRACTION
    } else {
        DEFAULT_BIVARIATE_FRACTION
    };
    let mut warnings = Vec::new();
    if cfg.trials < MIN_TRIALS {
        warnings.push(format!(
            "trials = {} < {MIN_TRIALS}; binomial sigma can exceed 0.025",
            cfg.trials
        ));
    }
    if let Err(e) = resolution_guard(cfg.calibration_replicas, cfg.alpha) {
        warnings.push(e.to_string());
    }

    let mut models = Vec::new();
    let mut formulas = BTreeMap::new();
    for c in &cfg.contamination {
        let m = ContaminationModel::named(&c.model, c.fraction.unwrap_or(default_fraction))?;
        formulas.insert(m.name.clone(), m.formula.clone());
        models.push(m);
    }

    // one calibrated test per (statistic, n), shared by all models
    let mut tests = Vec::new();
    for spec in &cfg.statistics {
        for &n in &cfg.n {
            let key = format!("{spec}/{n}");
            let built = Statistic::parse(spec).and_then(|st| {
                let test = GofTest::new(st, h0.clone(), n, derive_seed(cfg.seed, &format!("test/{key}")))?;
                let null = test.build_null(
                    cfg.calibration_replicas,
                    derive_seed(cfg.seed, &format!("null/{key}")),
                )?;
                Ok((test, null))
            });
            tests.push((spec.clone(), n, built));
        }
    }

    let mut cells = Vec::new();
    for (ti, _) in tests.iter().enumerate() {
        for (mi, _) in models.iter().enumerate() {
            cells.push((ti, mi));
        }
    }
    let rows: Vec<PowerRow> = cells
        .par_iter()
        .map(|&(ti, mi)| {
            let (spec, n, built) = &tests[ti];
            let model = &models[mi];
            let key = format!("cell/{spec}/{}/{}/{n}", model.name, model.fraction);
            match built {
                Ok((test, null)) => power_with_null(
                    test,
                    null,
                    model,
                    cfg.alpha,
                    cfg.trials,
                    derive_seed(cfg.seed, &key),
                )
                .unwrap_or_else(|e| {
                    PowerRow::failed(test.statistic().to_string(), model, *n, cfg.alpha, e.to_string())
                }),
                Err(e) => PowerRow::failed(spec.clone(), model, *n, cfg.alpha, e.to_string()),
            }
        })
        .collect();

    Ok(PowerTable {
        seed: cfg.seed,
        hypothesis: h0.label(),
        models: formulas,
        warnings,
        rows,
    })
}

/// The standard bivariate null used by the 2-D models.
pub fn bivariate_null() -> Hypothesis {
    Hypothesis::Gaussian(MvGaussian::standard(2))
}
