//! Command-line front end: `gofit test`, `gofit calibrate`, `gofit power`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::calibrate::{resolution_guard, NullCache};
use crate::error::{GofError, Result};
use crate::eventfile::read_event_file;
use crate::hypothesis::Sampler;
use crate::powerlab::{resolve_hypothesis, run_study, PowerTable, StudyConfig};
use crate::statistic::{GofTest, Statistic};

#[derive(Debug, Parser)]
#[command(name = "gofit", version, about = "Goodness-of-fit tests with Monte Carlo calibration")]
pub struct Cli {
    /// Worker threads for the replica farm; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test an event file against a null hypothesis.
    Test(TestArgs),
    /// Build (or reuse) a cached null distribution.
    Calibrate(CalibrateArgs),
    /// Run a power study described by a TOML file.
    Power(PowerArgs),
}

#[derive(Debug, Args)]
pub struct StatArgs {
    /// Statistic name, optionally with parameters: `energy:kernel=log`.
    #[arg(long)]
    pub stat: String,
    /// Null hypothesis: uniform01, exp(rate), gauss1d(m,s), gauss2d(...), sample:<path>.
    #[arg(long)]
    pub hypothesis: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 999)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Energy kernel: power, log or gaussian.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub dmin: Option<String>,
    /// Energy simulation sample size.
    #[arg(long)]
    pub m: Option<String>,
    /// Energy simulation protocol: fixed or fresh.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Neyman order.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub bins: Option<String>,
    /// Chi-square binning: width or prob.
    #[arg(long)]
    pub binning: Option<String>,
    /// Three-region weights: unit or chi.
    #[arg(long)]
    pub weights: Option<String>,
}

impl StatArgs {
    pub fn statistic(&self) -> Result<Statistic> {
        let mut st = Statistic::parse(&self.stat)?;
        let flags = [
            ("kernel", &self.kernel),
            ("kappa", &self.kappa),
            ("s", &self.s),
            ("dmin", &self.dmin),
            ("m", &self.m),
            ("protocol", &self.protocol),
            ("k", &self.k),
            ("bins", &self.bins),
            ("binning", &self.binning),
            ("weights", &self.weights),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                st.set_param(key, v)?;
            }
        }
        st.validate()?;
        Ok(st)
    }

    fn guard_warning(&self, err: &mut (dyn Write + Send)) -> Result<()> {
        if let Err(e) = resolution_guard(self.replicas, self.alpha) {
            writeln!(err, "warning: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Event file: one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub stat: StatArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Sample size the null distribution is built for.
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub stat: StatArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one SVG bar chart per contamination model.
    #[arg(long)]
    pub chart_dir: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        // --help and --version are not failures
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg).trim_end();
            return Err(GofError::Parse(msg.to_string()));
        }
    };
    run(cli, out, err)
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match cli.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| GofError::pre(e.to_string()))?;
            pool.install(|| dispatch(cli.command, out, err))
        }
        None => dispatch(cli.command, out, err),
    }
}

fn dispatch(cmd: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match cmd {
        Command::Test(a) => cmd_test(&a, out, err),
        Command::Calibrate(a) => cmd_calibrate(&a, out, err),
        Command::Power(a) => cmd_power(&a, out, err),
    }
}

pub fn cmd_test(a: &TestArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let s = &a.stat;
    let statistic = s.statistic()?;
    let sample = read_event_file(&a.data)?;
    let h0 = resolve_hypothesis(&s.hypothesis, s.seed)?;
    sample.require_dim(h0.dim())?;
    s.guard_warning(err)?;
    let test = GofTest::new(statistic, h0, sample.n(), s.seed)?;
    let cache = s.cache_dir.as_ref().map(NullCache::new).transpose()?;
    let (null, hit) = test.build_null_cached(s.replicas, s.seed, cache.as_ref())?;
    if hit {
        writeln!(err, "null distribution: cache hit")?;
    }
    let outcome = test.outcome(&sample, Some(&null), Some(s.alpha))?;
    write!(out, "{outcome}")?;
    if let Some(path) = &s.out {
        let record = format!(
            "command=test\nhypothesis={}\nn={}\nconfig_digest={}\n{}",
            test.hypothesis().label(),
            test.n(),
            null.config_digest(),
            outcome.to_record()
        );
        std::fs::write(path, record)?;
    }
    Ok(())
}

pub const DEFAULT_CACHE_DIR: &str = "gofit-cache";

pub fn cmd_calibrate(a: &CalibrateArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let s = &a.stat;
    let statistic = s.statistic()?;
    let h0 = resolve_hypothesis(&s.hypothesis, s.seed)?;
    s.guard_warning(err)?;
    let test = GofTest::new(statistic, h0, a.n, s.seed)?;
    let cache = NullCache::new(
        s.cache_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
    )?;
    let path = cache.path_for(&test.config(), s.replicas, s.seed);
    let (null, hit) = test.build_null_cached(s.replicas, s.seed, Some(&cache))?;
    writeln!(
        out,
        "{} {} ({} replicas, seed {}, digest {})",
        if hit { "cache hit:" } else { "wrote" },
        path.display(),
        null.replicas(),
        null.seed(),
        null.config_digest()
    )?;
    if let Some(p) = &s.out {
        null.write_to(p)?;
    }
    Ok(())
}

pub fn cmd_power(a: &PowerArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| {
        GofError::Parse(format!("cannot read study config {}: {e}", a.config.display()))
    })?;
    let cfg = StudyConfig::from_toml(&text)?;
    let table = run_study(&cfg)?;
    std::fs::write(&a.out, table.to_tsv())?;
    for w in &table.warnings {
        writeln!(err, "warning: {w}")?;
    }
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        writeln!(
            err,
            "cell {} / {}: {}",
            r.statistic,
            r.contamination,
            r.error.as_deref().unwrap_or_default()
        )?;
    }
    writeln!(out, "wrote {} rows to {}", table.rows.len(), a.out.display())?;
    if let Some(dir) = &a.chart_dir {
        // best effort
        match write_charts(&table, dir) {
            Ok(paths) => {
                for p in paths {
                    writeln!(out, "chart {}", p.display())?;
                }
            }
            Err(e) => writeln!(err, "warning: charts not written: {e}")?,
        }
    }
    Ok(())
}

/// One SVG bar chart of power per statistic for each contamination model
/// (and sample size, when the study has several).
pub fn write_charts(table: &PowerTable, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut groups: Vec<(String, usize)> = Vec::new();
    for r in &table.rows {
        let key = (r.contamination.clone(), r.n);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let multi_n = groups.iter().map(|g| g.1).collect::<std::collections::BTreeSet<_>>().len() > 1;
    let mut paths = Vec::new();
    for (model, n) in groups {
        let rows: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.contamination == model && r.n == n)
            .collect();
        let name = if multi_n {
            format!("power-{model}-n{n}.svg")
        } else {
            format!("power-{model}.svg")
        };
        let path = dir.join(sanitize(&name));
        std::fs::write(&path, bar_chart_svg(&format!("model {model}, n = {n}"), &rows))?;
        paths.push(path);
    }
    Ok(paths)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bar_chart_svg(title: &str, rows: &[&crate::powerlab::PowerRow]) -> String {
    let (bar, gap, left, top, height) = (36.0, 14.0, 50.0, 40.0, 240.0);
    let width = left + rows.len() as f64 * (bar + gap) + gap;
    let total_h = top + height + 110.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{total_h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s += &format!(
        "<text x=\"{left}\" y=\"20\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let y = top + height * (1.0 - v);
        s += &format!(
            "<line x1=\"{left}\" x2=\"{width}\" y1=\"{y}\" y2=\"{y}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n",
            left - 4.0,
            y + 4.0
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let x = left + gap + i as f64 * (bar + gap);
        let p = if r.power.is_finite() { r.power } else { 0.0 };
        let h = height * p;
        s += &format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"{bar}\" height=\"{h}\" fill=\"#4878a8\"/>\n",
            top + height - h
        );
        if r.sigma.is_finite() && r.sigma > 0.0 {
            let (y1, y2) = (
                top + height * (1.0 - (p + r.sigma).min(1.0)),
                top + height * (1.0 - (p - r.sigma).max(0.0)),
            );
            let cx = x + bar / 2.0;
            s += &format!("<line x1=\"{cx}\" x2=\"{cx}\" y1=\"{y1}\" y2=\"{y2}\" stroke=\"black\"/>\n");
        }
        let label = r.statistic.split(':').next().unwrap_or(&r.statistic);
        s += &format!(
            "<text transform=\"translate({},{}) rotate(60)\">{}</text>\n",
            x + bar / 2.0,
            top + height + 8.0,
            xml_escape(label)
        );
    }
    s += "</svg>\n";
    s
}
