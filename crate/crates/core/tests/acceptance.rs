//! Acceptance suite. Runs without the libtest harness so that each
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gofit::binned::asymptotic_p_value;
use gofit::edf::{quadratic_stats, supremum_stats, AD_EPSILON};
use gofit::hypothesis::ReferenceSample;
use gofit::powerlab::{bivariate_null, estimate_power, two_proportion_z, ContaminationModel};
use gofit::region::{region_statistic, RegionWeights};
use gofit::rng::derive_seed;
use gofit::{p_value, GofTest, Hypothesis, RandomStream, Sampler, Statistic};
use rayon::prelude::*;

const ALPHA: f64 = 0.05;
const SEED: u64 = 20_240_601;

type Step = (u32, fn(&mut Report));

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id} ({title}): {} - {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

// ---------------------------------------------------------------------------
// helpers

/// Kolmogorov survival function with the usual finite-n correction.
fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Sup distance between the EDF of `values` and a continuous cdf; ties are
/// handled by comparing both sides of each jump.
fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

fn sorted_uniform(rng: &mut RandomStream, n: usize, shape: u32) -> Vec<f64> {
    let mut z: Vec<f64> = (0..n)
        .map(|_| {
            let u = rng.uniform();
            match shape {
                0 => u,
                1 => u * u,
                2 => ((u * 20.0).floor() + 0.5) / 20.0, // heavy ties
                _ => 1.0 - (1.0 - u).powi(3),
            }
        })
        .collect();
    z.sort_by(f64::total_cmp);
    z
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE) || a == b
}

// ---------------------------------------------------------------------------
// criterion 1: closed forms against the defining integrals and suprema

/// Number of points ≤ t, by direct count.
fn count_le(z: &[f64], t: f64) -> usize {
    z.iter().filter(|&&x| x <= t).count()
}

fn count_lt(z: &[f64], t: f64) -> usize {
    z.iter().filter(|&&x| x < t).count()
}

/// D+ = sup (F_n − F), D− = sup (F − F_n), taken over both one-sided limits
/// at every jump and at the interval ends.
fn oracle_suprema(z: &[f64]) -> (f64, f64) {
    let n = z.len() as f64;
    let mut dp = 0.0f64;
    let mut dm = 0.0f64;
    for &t in z.iter().chain([0.0, 1.0].iter()) {
        let right = count_le(z, t) as f64 / n;
        let left = count_lt(z, t) as f64 / n;
        dp = dp.max(right - t).max(left - t);
        dm = dm.max(t - left).max(t - right);
    }
    (dp, dm)
}

/// Breakpoints 0 = b_0 ≤ … ≤ b_m = 1 with F_n constant on each piece.
fn pieces(z: &[f64]) -> Vec<(f64, f64, f64)> {
    let n = z.len() as f64;
    let mut pts = vec![0.0];
    pts.extend_from_slice(z);
    pts.push(1.0);
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], count_le(z, w[0]) as f64 / n))
        .collect()
}

/// n∫(F_n − z)² dz, n∫(F_n − z)²/(z(1−z)) dz and n∫(F_n − z − m)² dz,
/// integrated exactly on each piece where F_n = c.
fn oracle_integrals(z: &[f64]) -> (f64, f64, f64) {
    let n = z.len() as f64;
    let ps = pieces(z);
    let cube = |c: f64, a: f64, b: f64| ((c - a).powi(3) - (c - b).powi(3)) / 3.0;
    let mut w2 = 0.0;
    let mut a2 = 0.0;
    let mut mean = 0.0;
    for &(a, b, c) in &ps {
        w2 += cube(c, a, b);
        mean += c * (b - a) - (b * b - a * a) / 2.0;
        // (c − z)²/(z(1 − z)) = c²/z + (1 − c)²/(1 − z) − 1
        let mut piece = -(b - a);
        if c > 0.0 {
            piece += c * c * (b / a).ln();
        }
        if c < 1.0 {
            piece += (1.0 - c) * (1.0 - c) * ((1.0 - a) / (1.0 - b)).ln();
        }
        a2 += piece;
    }
    let mut u2 = 0.0;
    for &(a, b, c) in &ps {
        u2 += cube(c - mean, a, b);
    }
    (n * w2, n * a2, n * u2)
}

/// Exhaustive scan over ordered pairs of candidate cuts. A cut is a
/// position together with a side: points at the position fall left of
/// a `below` cut only when the side is inclusive.
fn oracle_region(z: &[f64], weights: RegionWeights) -> f64 {
    let n = z.len();
    let mut cuts: Vec<(f64, usize)> = vec![(0.0, count_lt(z, 0.0))];
    for &v in z {
        cuts.push((v, count_lt(z, v)));
        cuts.push((v, count_le(z, v)));
    }
    cuts.push((1.0, count_le(z, 1.0)));
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let term = |count: usize, prob: f64| -> Option<f64> {
        let expect = n as f64 * prob;
        let dev = count as f64 - expect;
        match weights {
            RegionWeights::Unit => Some(dev * dev),
            RegionWeights::InverseExpectation => (expect > 0.0).then(|| dev * dev / expect),
        }
    };
    let (start, end) = (cuts[0], cuts[cuts.len() - 1]);
    let mut best = f64::NEG_INFINITY;
    for (i, lo) in cuts.iter().enumerate() {
        for hi in &cuts[i..] {
            let t1 = term(lo.1 - start.1, lo.0 - start.0);
            let t2 = term(hi.1 - lo.1, hi.0 - lo.0);
            let t3 = term(end.1 - hi.1, end.0 - hi.0);
            if let (Some(a), Some(b), Some(c)) = (t1, t2, t3) {
                best = best.max(a + b + c);
            }
        }
    }
    best
}

fn criterion_1(report: &mut Report) {
    let t0 = Instant::now();
    let mut rng = RandomStream::new(SEED, 1);
    let mut worst = 0.0f64;
    let mut region_mismatch = 0;
    let mut failures = Vec::new();
    for sample in 0..200 {
        let n = 1 + rng.below(200);
        let z = sorted_uniform(&mut rng, n, (sample % 4) as u32);
        let sup = supremum_stats(&z).unwrap();
        let quad = quadratic_stats(&z).unwrap();
        let (dp, dm) = oracle_suprema(&z);
        let (w2, _, u2) = oracle_integrals(&z);
        // A² is defined on PIT values clamped to [ε, 1 − ε]
        let zc: Vec<f64> = z.iter().map(|v| v.clamp(AD_EPSILON, 1.0 - AD_EPSILON)).collect();
        let (_, a2, _) = oracle_integrals(&zc);
        let pairs = [
            ("D+", sup.d_plus, dp),
            ("D-", sup.d_minus, dm),
            ("D", sup.d, dp.max(dm)),
            ("V", sup.v, dp + dm),
            ("W2", quad.w2, w2),
            ("A2", quad.a2, a2),
            ("U2", quad.u2, u2),
        ];
        for (name, got, want) in pairs {
            let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
            if got != want {
                worst = worst.max(rel);
            }
            if !rel_close(got, want, 1e-8) {
                failures.push(format!("{name} n={n}: {got} vs {want}"));
            }
        }
        for w in [RegionWeights::Unit, RegionWeights::InverseExpectation] {
            let oracle = oracle_region(&z, w);
            let ok = match region_statistic(&z, w, 3) {
                Ok(r) => r.value == oracle,
                Err(_) => oracle == f64::NEG_INFINITY,
            };
            if !ok {
                region_mismatch += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = failures.is_empty() && region_mismatch == 0 && secs < 60.0;
    report.line(
        "1",
        "oracle equivalence",
        pass,
        format!(
            "200 samples, worst EDF relative error {worst:.2e} (tol 1e-8), \
             three-region mismatches {region_mismatch}, {secs:.1}s{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; first failure {}", failures[0])
            }
        ),
    );
}

// ---------------------------------------------------------------------------
// criteria 2 and 7: size and p-value uniformity

struct SizeRun {
    name: String,
    p_values: Vec<f64>,
}

fn size_run(spec: &str, h0: &Hypothesis, n: usize, replicas: usize, trials: usize) -> SizeRun {
    let statistic = Statistic::parse(spec).unwrap();
    let test = GofTest::new(statistic, h0.clone(), n, derive_seed(SEED, spec)).unwrap();
    let null = test
        .build_null(replicas, derive_seed(SEED, &format!("null/{spec}")))
        .unwrap();
    let tail = test.statistic().tail();
    let trial_seed = derive_seed(SEED, &format!("trials/{spec}"));
    let p_values = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::new(trial_seed, t);
            let sample = h0.draw(n, &mut rng).unwrap();
            p_value(&null, test.evaluate(&sample).unwrap(), tail).unwrap()
        })
        .collect();
    SizeRun {
        name: test.statistic().to_string(),
        p_values,
    }
}

const UNIVARIATE: &[&str] = &[
    "dplus",
    "dminus",
    "ks",
    "kuiper",
    "cvm",
    "ad",
    "watson",
    "chi2",
    "chi2:binning=width",
    "neyman:k=2",
    "neyman:k=4",
    "region3",
    "region3:weights=chi",
];
const BIVARIATE: &[&str] = &["mardia-skew", "mardia-kurt", "neyman-mv:k=2"];
// The size band is 3 binomial sigma of the trials alone, so the critical
// value must be much sharper than the trial count: with R ≈ trials the
// calibration noise would be as large as the trial noise.
const NULL_REPLICAS: usize = 99_999;
const ENERGY_NULL_REPLICAS: usize = 9_999;
const ENERGY: &[&str] = &["energy:kernel=log", "energy:kernel=power", "energy:kernel=gaussian"];

fn criterion_2(report: &mut Report) -> Vec<SizeRun> {
    let mut runs = Vec::new();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut energy_secs = 0.0;
    let t0 = Instant::now();
    let plan: Vec<(&str, Hypothesis, usize, usize, usize)> = UNIVARIATE
        .iter()
        .map(|s| (*s, Hypothesis::uniform01(), 100, NULL_REPLICAS, 10_000))
        .chain(BIVARIATE.iter().map(|s| (*s, bivariate_null(), 200, NULL_REPLICAS, 10_000)))
        .chain(ENERGY.iter().map(|s| (*s, bivariate_null(), 200, ENERGY_NULL_REPLICAS, 2_000)))
        .collect();
    for (spec, h0, n, replicas, trials) in plan {
        let t = Instant::now();
        let run = size_run(spec, &h0, n, replicas, trials);
        if spec.starts_with("energy") {
            energy_secs += t.elapsed().as_secs_f64();
        }
        let rate = run.p_values.iter().filter(|&&p| p <= ALPHA).count() as f64 / trials as f64;
        let sigma = (ALPHA * (1.0 - ALPHA) / trials as f64).sqrt();
        let ok = (rate - ALPHA).abs() <= 3.0 * sigma;
        pass &= ok;
        lines.push(format!(
            "    {:<28} n={n:<4} R={replicas:<5} trials={trials:<6} rate={rate:.4} ({:+.2} sigma){}",
            run.name,
            (rate - ALPHA) / sigma,
            if ok { "" } else { "  <-- outside 3 sigma" }
        ));
        runs.push(run);
    }
    report.line(
        "2",
        "size calibration",
        pass,
        format!(
            "{} statistics at alpha = 0.05, {:.0}s total, energy {:.0}s",
            runs.len(),
            t0.elapsed().as_secs_f64(),
            energy_secs
        ),
    );
    for l in lines {
        println!("{l}");
    }
    runs
}

fn criterion_7(report: &mut Report, runs: &[SizeRun]) {
    let mut pass = true;
    let mut worst = (String::new(), 1.0f64);
    for run in runs {
        let p = &run.p_values[..1000];
        let d = ks_distance(p, |x| x.clamp(0.0, 1.0));
        let pv = kolmogorov_sf(d, p.len());
        if pv < worst.1 {
            worst = (run.name.clone(), pv);
        }
        if pv < 0.01 {
            pass = false;
            println!("    {}: KS D = {d:.4}, p = {pv:.4}", run.name);
        }
    }
    report.line(
        "7",
        "p-value uniformity",
        pass,
        format!(
            "{} statistics, 1000 null p-values each; smallest KS p = {:.4} ({})",
            runs.len(),
            worst.1,
            worst.0
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 3: asymptotic distributions

fn null_values(spec: &str, n: usize, replicas: usize) -> Vec<f64> {
    let test = GofTest::new(Statistic::parse(spec).unwrap(), Hypothesis::uniform01(), n, 0).unwrap();
    test.build_null(replicas, derive_seed(SEED, &format!("asym/{spec}")))
        .unwrap()
        .values()
        .to_vec()
}

fn criterion_3(report: &mut Report) {
    let chi2 = null_values("chi2:bins=13", 10_000, 10_000);
    let d_chi2 = ks_distance(&chi2, |x| 1.0 - asymptotic_p_value(x, 12).unwrap());
    let n2 = null_values("neyman:k=2", 1000, 10_000);
    let d_n2 = ks_distance(&n2, |x| 1.0 - asymptotic_p_value(x, 2).unwrap());
    report.line(
        "3",
        "asymptotic consistency",
        d_chi2 <= 0.02 && d_n2 <= 0.02,
        format!(
            "multinomial chi2 (n=10^4, B=13) vs chi2_12: KS {d_chi2:.4}; \
             N2 (n=1000) vs chi2_2: KS {d_n2:.4}; tolerance 0.02, 10^4 replicas each"
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 4: directional power

fn criterion_4(report: &mut Report) {
    const TRIALS: usize = 2000;
    const REPLICAS: usize = 1999;
    let power = |spec: &str, h0: &Hypothesis, n: usize, model: &ContaminationModel| {
        let test = GofTest::new(Statistic::parse(spec).unwrap(), h0.clone(), n, derive_seed(SEED, spec)).unwrap();
        estimate_power(&test, model, ALPHA, TRIALS, REPLICAS, derive_seed(SEED, &format!("power/{spec}/{}", model.name)))
            .unwrap()
    };
    let uni = Hypothesis::uniform01();
    let mean_shift = ContaminationModel::named("A", 0.3).unwrap();
    let variance = ContaminationModel::named("B", 0.3).unwrap();
    let blob = ContaminationModel::named("blob", 0.2).unwrap();

    let mut pass = true;
    let mut lines = Vec::new();
    let mut compare = |label: &str, a: &gofit::powerlab::PowerRow, b: &gofit::powerlab::PowerRow| {
        let z = two_proportion_z(a, b);
        pass &= z > 2.0;
        lines.push(format!(
            "    {label}: {} {:.3} vs {} {:.3}, z = {z:.1}",
            a.statistic, a.power, b.statistic, b.power
        ));
    };

    let chi = power("chi2", &uni, 100, &mean_shift);
    for s in ["ks", "ad", "neyman:k=2"] {
        compare("(a) model A@0.3", &power(s, &uni, 100, &mean_shift), &chi);
    }
    let ks = power("ks", &uni, 100, &variance);
    for s in ["kuiper", "watson"] {
        compare("(b) model B@0.3", &power(s, &uni, 100, &variance), &ks);
    }
    let h2 = bivariate_null();
    let b1 = power("mardia-skew", &h2, 200, &blob);
    compare("(c) model blob@0.2", &power("energy:kernel=log", &h2, 200, &blob), &b1);

    report.line(
        "4",
        "directional power",
        pass,
        format!("n=100 (1-D) / n=200 (2-D), {TRIALS} trials, {REPLICAS} calibration replicas, z > 2 required"),
    );
    for l in lines {
        println!("{l}");
    }
}

// ---------------------------------------------------------------------------
// criterion 5: distorted sample against a Gaussian reference

fn criterion_5(report: &mut Report) {
    let mut rng = RandomStream::new(SEED, 5);
    let gauss = bivariate_null();
    let reference = ReferenceSample::new(gauss.draw(2000, &mut rng).unwrap(), derive_seed(SEED, "ref")).unwrap();
    // banana-shaped distortion of a Gaussian sample
    let data = gauss
        .draw(200, &mut rng)
        .unwrap()
        .map_points(|p, o| {
            o[0] = p[0];
            o[1] = 0.6 * p[1] + 0.35 * (p[0] * p[0] - 1.0);
        });
    let test = GofTest::new(
        Statistic::parse("energy:kernel=log").unwrap(),
        Hypothesis::Reference(reference),
        data.n(),
        SEED,
    )
    .unwrap();
    let null = test.build_null(1000, derive_seed(SEED, "fig")).unwrap();
    let outcome = test.outcome(&data, Some(&null), Some(ALPHA)).unwrap();
    let above_all = null.count_at_least(outcome.value) == 0;
    let p = outcome.p_value.unwrap();
    report.line(
        "5",
        "energy test on a distorted sample",
        above_all && p == 1.0 / 1001.0,
        format!(
            "phi = {:.5}, largest replica = {:.5}, p = {p:.6} (1/1001 = {:.6})",
            outcome.value,
            null.values()[null.values().len() - 1],
            1.0 / 1001.0
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 6: CLI determinism and worker-count invariance

fn gofit(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gofit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run gofit")
}

fn criterion_6(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = RandomStream::new(SEED, 6);
    let uni = gofit::eventfile::format_events(&Hypothesis::uniform01().draw(100, &mut rng).unwrap());
    std::fs::write(d.join("u.txt"), uni).unwrap();
    let biv = gofit::eventfile::format_events(&bivariate_null().draw(100, &mut rng).unwrap());
    std::fs::write(d.join("g.txt"), biv).unwrap();
    std::fs::write(
        d.join("study.toml"),
        "seed = 9\nhypothesis = \"uniform01\"\ntrials = 400\ncalibration_replicas = 199\n\
         n = [50]\nstatistics = [\"ks\", \"watson\"]\n[[contamination]]\nmodel = \"A\"\n\
         [[contamination]]\nmodel = \"C\"\n",
    )
    .unwrap();

    let mut problems = Vec::new();
    let mut checks = 0;
    let mut same = |label: &str, a: Vec<u8>, b: Vec<u8>| {
        checks += 1;
        if a != b || a.is_empty() {
            problems.push(label.to_string());
        }
    };

    // reruns with the same seed
    for (stat, data, h0) in [
        ("ks", "u.txt", "uniform01"),
        ("region3", "u.txt", "uniform01"),
        ("energy", "g.txt", "gauss2d"),
    ] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let rec = format!("rec-{stat}-{run}.txt");
            let out = gofit(
                &["test", "--data", data, "--hypothesis", h0, "--stat", stat, "--replicas", "199", "--seed", "3", "--out", &rec],
                d,
            );
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push((out.stdout, std::fs::read(d.join(&rec)).unwrap()));
        }
        let (a, b) = (outputs.remove(0), outputs.remove(0));
        same(&format!("test {stat} stdout"), a.0, b.0);
        same(&format!("test {stat} record"), a.1, b.1);
    }
    for run in 0..2 {
        let out = gofit(&["power", "--config", "study.toml", "--out", &format!("p{run}.tsv")], d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    same(
        "power table",
        std::fs::read(d.join("p0.tsv")).unwrap(),
        std::fs::read(d.join("p1.tsv")).unwrap(),
    );

    // calibration under different worker counts
    for (stat, h0, n) in [("ad", "uniform01", "100"), ("energy:kernel=power", "gauss2d", "100")] {
        let mut files = Vec::new();
        for jobs in ["1", "2", "8"] {
            let cache = format!("cache-{jobs}");
            let out_file = format!("null-{jobs}.txt");
            let out = gofit(
                &[
                    "--jobs", jobs, "calibrate", "--hypothesis", h0, "--stat", stat, "--n", n, "--replicas", "300",
                    "--seed", "17", "--cache-dir", &cache, "--out", &out_file,
                ],
                d,
            );
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            files.push(std::fs::read(d.join(&out_file)).unwrap());
        }
        same(&format!("calibrate {stat} jobs 1 vs 2"), files[0].clone(), files[1].clone());
        same(&format!("calibrate {stat} jobs 1 vs 8"), files[0].clone(), files[2].clone());
    }

    report.line(
        "6",
        "determinism",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{checks} byte-identical comparisons (reruns; --jobs 1/2/8)")
        } else {
            format!("differences in: {}", problems.join(", "))
        },
    );
}

/// `cargo test --test acceptance -- 1 5` runs only the listed criteria.
fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let want = |c: u32| selected.is_empty() || selected.contains(&c);
    let mut report = Report { failures: 0 };
    let mut ran = 0;
    let t0 = Instant::now();
    if want(1) {
        criterion_1(&mut report);
        ran += 1;
    }
    let runs = if want(2) || want(7) {
        let mut scratch = Report { failures: 0 };
        let runs = criterion_2(if want(2) { &mut report } else { &mut scratch });
        ran += want(2) as usize;
        runs
    } else {
        Vec::new()
    };
    let steps: [Step; 4] = [(3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6)];
    for (c, f) in steps {
        if want(c) {
            f(&mut report);
            ran += 1;
        }
    }
    if want(7) {
        criterion_7(&mut report, &runs);
        ran += 1;
    }
    println!(
        "acceptance: {} of {ran} criteria passed in {:.0}s",
        ran - report.failures,
        t0.elapsed().as_secs_f64()
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}
