//! Batch driver: configuration, suite execution, manifest and summary table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotic::{
    build_ak_and_verify, measure_commutator_decay, measure_flip_defect,
    measure_uniform_boundedness, polar_uk, verify_halfpower_inequality,
};
use crate::basis::{FockContext, DEFAULT_TOL_EXACT, DEFAULT_TOL_SPECTRAL, K_ORACLE};
use crate::error::{FockError, Result};
use crate::export::{write_defect_profile, write_gram_csv, write_report, write_series};
use crate::gauge::{build_isometries, telescoping_recovery, verify_lambda_round_trip};
use crate::gram::{gram_bruteforce, GramFamily};
use crate::op::{build_particle_number, level_spectrum, random_operator, Generators, Side};
use crate::report::{sorted_json, DecaySeries, VerificationReport};
use crate::verify::{relations_suite, verify_spectral_gap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Relations,
    Spectral,
    Asymptotic,
    Gauge,
    GramOracle,
    Halfpower,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Relations,
        Suite::Spectral,
        Suite::Asymptotic,
        Suite::Gauge,
        Suite::GramOracle,
        Suite::Halfpower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Relations => "relations",
            Suite::Spectral => "spectral",
            Suite::Asymptotic => "asymptotic",
            Suite::Gauge => "gauge",
            Suite::GramOracle => "gram-oracle",
            Suite::Halfpower => "halfpower",
        }
    }
}

impl FromStr for Suite {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| {
                FockError::InvalidParameter(format!(
                    "unknown suite '{s}' (expected one of {})",
                    Suite::ALL.map(|x| x.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub q_list: Vec<f64>,
    pub levels: usize,
    pub suites: Vec<Suite>,
    pub k_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tol_exact: Option<f64>,
    pub tol_spectral: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            q_list: vec![0.5],
            levels: 6,
            suites: vec![Suite::Relations],
            k_max: 2,
            trials: 1000,
            seed: 42,
            output_dir: PathBuf::from("qfock-out"),
            tol_exact: None,
            tol_spectral: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| FockError::InvalidParameter(format!("cannot parse {key} = '{}'", v.trim())))
}

/// Splits `[a, b, c]` or `a, b, c` into trimmed items.
pub fn parse_list(v: &str) -> Vec<String> {
    let v = v.trim();
    let v = v.strip_prefix('[').unwrap_or(v);
    let v = v.strip_suffix(']').unwrap_or(v);
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "n" => self.n = parse_value(key, value)?,
            "q" | "q_list" => {
                self.q_list = parse_list(value)
                    .iter()
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "levels" | "N" => self.levels = parse_value(key, value)?,
            "suites" => {
                self.suites = parse_list(value)
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?
            }
            "k_max" => self.k_max = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "output_dir" | "out" => self.output_dir = PathBuf::from(value.trim()),
            "tol_exact" => self.tol_exact = Some(parse_value(key, value)?),
            "tol_spectral" => self.tol_spectral = Some(parse_value(key, value)?),
            other => {
                return Err(FockError::InvalidParameter(format!(
                    "unknown config key '{other}'"
                )));
            }
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                FockError::InvalidParameter(format!(
                    "line {}: expected key = value, got '{line}'",
                    lineno + 1
                ))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.suites.is_empty() {
            return Err(FockError::InvalidParameter(
                "suites must be nonempty".into(),
            ));
        }
        if self.q_list.is_empty() {
            return Err(FockError::InvalidParameter(
                "q_list must be nonempty".into(),
            ));
        }
        for &q in &self.q_list {
            self.context(q)?;
        }
        fs::create_dir_all(&self.output_dir)?;
        Ok(())
    }

    pub fn context(&self, q: f64) -> Result<FockContext> {
        let ctx = FockContext::new(self.n, q, self.levels)?
            .with_seed(self.seed)
            .with_tolerances(
                self.tol_exact.unwrap_or(DEFAULT_TOL_EXACT),
                self.tol_spectral.unwrap_or(DEFAULT_TOL_SPECTRAL),
            )?;
        Ok(ctx)
    }
}

/// One written report or series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub kind: String,
    pub file: String,
    pub pass: bool,
    pub max_residual: Option<f64>,
    pub fit_rate: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub suite: Suite,
    pub q: Option<f64>,
    pub artifacts: Vec<Artifact>,
    pub errors: Vec<String>,
    pub skipped: Vec<String>,
    pub pass: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub runs: Vec<SuiteRun>,
    pub pass: bool,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        sorted_json(self)
    }
}

struct Collector<'a> {
    dir: &'a Path,
    prefix: String,
    run: SuiteRun,
}

impl<'a> Collector<'a> {
    fn stem(&self, name: &str) -> String {
        let clean: String = name
            .replace('†', "adj")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '+' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!("{}_{}", self.prefix, clean)
    }

    fn report(&mut self, r: &VerificationReport) -> Result<()> {
        let stem = self.stem(&r.name);
        let path = write_report(self.dir, &stem, r)?;
        self.run.artifacts.push(Artifact {
            name: r.name.clone(),
            kind: "report".into(),
            file: file_name(&path),
            pass: r.pass,
            max_residual: Some(r.max_residual),
            fit_rate: None,
            detail: r.failure_message(),
        });
        Ok(())
    }

    fn series(&mut self, s: &DecaySeries, pass: bool, detail: Option<String>) -> Result<()> {
        let stem = self.stem(&s.name);
        let (csv, _) = write_series(self.dir, &stem, s)?;
        self.run.artifacts.push(Artifact {
            name: s.name.clone(),
            kind: "series".into(),
            file: file_name(&csv),
            pass,
            max_residual: None,
            fit_rate: s.fit_rate,
            detail,
        });
        Ok(())
    }

    fn error(&mut self, context: &str, e: FockError) {
        self.run.errors.push(format!("{context}: {e}"));
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn q_tag(q: f64) -> String {
    format!("q{q:+.3}").replace('.', "p")
}

/// Runs every selected suite for every `q` and writes `manifest.json` into the output directory.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let dir = config.output_dir.as_path();
    let suites: BTreeSet<Suite> = config.suites.iter().copied().collect();
    let mut runs = Vec::new();
    for &suite in &suites {
        if suite == Suite::Halfpower {
            runs.push(run_suite(config, suite, None, dir));
            continue;
        }
        for &q in &config.q_list {
            runs.push(run_suite(config, suite, Some(q), dir));
        }
    }
    let pass = runs.iter().all(|r| r.pass);
    let manifest = RunManifest {
        config: config.clone(),
        runs,
        pass,
    };
    fs::write(dir.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}

fn run_suite(config: &RunConfig, suite: Suite, q: Option<f64>, dir: &Path) -> SuiteRun {
    let start = Instant::now();
    let prefix = match q {
        Some(q) => format!("{}_{}", suite.name(), q_tag(q)),
        None => suite.name().to_string(),
    };
    let mut c = Collector {
        dir,
        prefix,
        run: SuiteRun {
            suite,
            q,
            artifacts: Vec::new(),
            errors: Vec::new(),
            skipped: Vec::new(),
            pass: false,
            seconds: 0.0,
        },
    };
    let outcome = match q {
        None => halfpower_suite(config, &mut c),
        Some(q) => config
            .context(q)
            .and_then(|ctx| GramFamily::build(&ctx))
            .and_then(|gram| match suite {
                Suite::Relations => relations(&gram, &mut c),
                Suite::Spectral => spectral(&gram, &mut c),
                Suite::Asymptotic => asymptotic(config, &gram, &mut c),
                Suite::Gauge => gauge(config, &gram, &mut c),
                Suite::GramOracle => gram_oracle(&gram, &mut c),
                Suite::Halfpower => Ok(()),
            }),
    };
    if let Err(e) = outcome {
        c.error(suite.name(), e);
    }
    let mut run = c.run;
    run.pass = run.errors.is_empty() && run.artifacts.iter().all(|a| a.pass);
    run.seconds = start.elapsed().as_secs_f64();
    run
}

fn relations(gram: &GramFamily, c: &mut Collector) -> Result<()> {
    for r in relations_suite(gram)? {
        c.report(&r)?;
    }
    Ok(())
}

fn spectral(gram: &GramFamily, c: &mut Collector) -> Result<()> {
    match verify_spectral_gap(gram) {
        Ok(r) => c.report(&r)?,
        Err(e) => c.error("spectral_gap", e),
    }
    match build_isometries(gram) {
        Ok(iso) => {
            c.report(&iso.range)?;
            write_defect_profile(
                &c.dir.join(format!("{}.csv", c.stem("defect_profile"))),
                &iso,
            )?;
        }
        Err(e) => c.error("isometries", e),
    }
    let ctx = gram.ctx();
    let rho = build_particle_number(gram, Side::Left)?;
    let mut s = DecaySeries::new("rho_L_min_eigenvalue", "level");
    for k in 0..=ctx.levels() {
        let ev = level_spectrum(&rho, gram, k)?;
        s.push(k, ev[0].max(0.0), (k, k));
    }
    c.series(&s, true, None)
}

fn asymptotic(config: &RunConfig, gram: &GramFamily, c: &mut Collector) -> Result<()> {
    let ctx = gram.ctx();
    let k_max = config.k_max;
    match measure_commutator_decay(gram, 0, 0, k_max) {
        Ok(s) => {
            // at q = 0 the k = 0 commutator is 1; the free flip is exact from k = 1 on
            let pass = if ctx.q() == 0.0 {
                s.values.range(1..).all(|(_, &v)| v <= 1e-12)
            } else {
                s.is_strictly_decreasing()
            };
            let detail = (!pass).then(|| format!("values not decreasing: {:?}", s.values));
            c.series(&s, pass, detail)?;
        }
        Err(e) => c.error("commutator_decay", e),
    }
    for k in 1..=k_max.min(2) {
        match build_ak_and_verify(gram, k) {
            Ok(r) => c.report(&r)?,
            Err(e) => c.error(&format!("A_{k}"), e),
        }
    }
    for k in 0..=k_max {
        match polar_uk(gram, k) {
            Ok(p) => {
                let mut r = VerificationReport::new(format!("polar_U_{k}"), ctx.tol_exact());
                r.meta("min_sv", p.min_sv);
                r.record_global(p.reconstruction_residual, || {
                    format!("U_{k} − V_{k}|U_{k}|")
                });
                c.report(&r)?;
            }
            Err(e) => c.error(&format!("polar_U_{k}"), e),
        }
    }
    match measure_flip_defect(gram, k_max) {
        Ok(s) => {
            let pass = s.values_vec().iter().all(|v| v.is_finite());
            c.series(&s, pass, None)?;
        }
        Err(e) => c.error("flip_defect", e),
    }
    let g = Generators::build(gram)?;
    let x = g.left_quadratic(0, 0)?;
    match measure_uniform_boundedness(gram, &x, k_max.min(ctx.levels() / 2)) {
        Ok(s) => {
            let pass = s
                .metadata
                .get("bounded")
                .and_then(|v| v.as_bool())
                .unwrap_or(false);
            c.series(&s, pass, (!pass).then(|| "norm grows with k".to_string()))?;
        }
        Err(e) => c.error("uniform_boundedness", e),
    }
    Ok(())
}

fn gauge(config: &RunConfig, gram: &GramFamily, c: &mut Collector) -> Result<()> {
    let ctx = gram.ctx();
    c.report(&crate::verify::verify_gauge_invariance(gram, 8)?)?;
    let iso = match build_isometries(gram) {
        Ok(iso) => iso,
        Err(e) => {
            c.error("isometries", e);
            return Ok(());
        }
    };
    c.report(&iso.range)?;
    for t in 0..3 {
        let x = random_operator(ctx, 2, config.seed.wrapping_add(t));
        let mut r = verify_lambda_round_trip(&x, &iso, gram)?;
        r.name = format!("lambda_round_trip_{t}");
        c.report(&r)?;
    }
    match telescoping_recovery(gram, 0, 40) {
        Ok(s) => {
            // decreasing until round-off, then at most 1e-6 after 40 terms
            let above: Vec<f64> = s.values_vec().into_iter().filter(|&v| v > 1e-12).collect();
            let last = s.values.values().last().copied().unwrap_or(f64::INFINITY);
            let pass = above.windows(2).all(|w| w[1] < w[0]) && last <= 1e-6;
            let detail = (!pass).then(|| format!("final remainder {last:e}"));
            c.series(&s, pass, detail)?;
        }
        Err(e @ FockError::Divergent { .. }) => c.run.skipped.push(format!("telescoping: {e}")),
        Err(e) => c.error("telescoping", e),
    }
    Ok(())
}

fn gram_oracle(gram: &GramFamily, c: &mut Collector) -> Result<()> {
    let ctx = gram.ctx();
    let mut r = VerificationReport::new("gram_oracle", 1e-12);
    r.meta("n", ctx.n());
    r.meta("q", ctx.q());
    r.meta("N", ctx.levels());
    for k in 0..=ctx.levels().min(K_ORACLE) {
        let brute = gram_bruteforce(ctx, k)?;
        let res = (brute - gram.gram(k)).amax();
        r.record(k, res, || format!("level {k}"));
    }
    let mins = gram.min_eigs();
    let min = mins.iter().copied().fold(f64::INFINITY, f64::min);
    r.condition(
        "Gram positivity",
        min > 1e-6,
        format!("smallest eigenvalue {min:e}"),
    );
    r.meta("min_eigenvalues", &mins);
    for w in gram.warnings() {
        r.warn(w);
    }
    c.report(&r)?;
    write_gram_csv(&c.dir.join(c.stem("gram")), gram)?;
    Ok(())
}

fn halfpower_suite(config: &RunConfig, c: &mut Collector) -> Result<()> {
    let r = verify_halfpower_inequality(config.trials, 20, config.seed)?;
    c.report(&r)
}

/// Table with one row per suite run plus an overall line.
pub fn print_summary(manifest: &RunManifest) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>12} {:>12}  status",
        "suite", "q", "max resid", "fit rate"
    );
    for run in &manifest.runs {
        let q = run
            .q
            .map(|q| format!("{q:+.3}"))
            .unwrap_or_else(|| "-".into());
        let resid = run
            .artifacts
            .iter()
            .filter_map(|a| a.max_residual)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            });
        let rate = run.artifacts.iter().find_map(|a| a.fit_rate);
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>12} {:>12}  {}",
            run.suite.name(),
            q,
            fmt(resid),
            fmt(rate),
            if run.pass { "PASS" } else { "FAIL" }
        );
        for a in run.artifacts.iter().filter(|a| !a.pass) {
            let _ = writeln!(
                out,
                "    {}: {}",
                a.name,
                a.detail.as_deref().unwrap_or("failed")
            );
        }
        for e in &run.errors {
            let _ = writeln!(out, "    error: {e}");
        }
        for s in &run.skipped {
            let _ = writeln!(out, "    skipped: {s}");
        }
    }
    let _ = writeln!(
        out,
        "overall: {}",
        if manifest.pass { "PASS" } else { "FAIL" }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_and_lists() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "n = 3\nq_list = [0.3, -0.7] # two values\n\nsuites = relations, gram-oracle\nN = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.q_list, vec![0.3, -0.7]);
        assert_eq!(cfg.suites, vec![Suite::Relations, Suite::GramOracle]);
        assert_eq!(cfg.levels, 5);
        assert!(cfg.apply_text("bogus = 1").is_err());
        assert!(cfg.apply_text("suites = everything").is_err());
        assert!(cfg.apply_text("n 3").is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig {
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        cfg.q_list = vec![1.0];
        assert!(cfg.validate().is_err());
        cfg.q_list = vec![0.2];
        cfg.suites.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn free_relations_run_passes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n: 2,
            q_list: vec![0.0],
            levels: 6,
            suites: vec![Suite::Relations],
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let m = run(&cfg).unwrap();
        assert!(m.pass, "{}", print_summary(&m));
        for a in &m.runs[0].artifacts {
            if let Some(r) = a.max_residual {
                assert!(r <= 1e-12, "{}: {r}", a.name);
            }
        }
        assert!(dir.path().join("manifest.json").exists());
        let table = print_summary(&m);
        assert!(table.contains("relations") && table.contains("PASS"));
    }

    #[test]
    fn inner_errors_become_failures() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n: 2,
            q_list: vec![0.5],
            levels: 4,
            suites: vec![Suite::Asymptotic],
            k_max: 3,
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let m = run(&cfg).unwrap();
        assert!(!m.pass);
        assert!(!m.runs[0].errors.is_empty());
        assert!(print_summary(&m).contains("overall: FAIL"));
    }

    #[test]
    fn reruns_are_identical_up_to_timing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            q_list: vec![0.3],
            levels: 4,
            suites: vec![Suite::GramOracle, Suite::Halfpower],
            trials: 10,
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let strip = |mut m: RunManifest| {
            for r in &mut m.runs {
                r.seconds = 0.0;
            }
            m
        };
        let a = strip(run(&cfg).unwrap());
        let b = strip(run(&cfg).unwrap());
        assert_eq!(a, b);
    }
}
