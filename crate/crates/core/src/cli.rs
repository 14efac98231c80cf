//! Batch driver: runs per-module check suites and writes reports.
//!
//! Exit status: 0 all checks passed, 1 some check failed, 2 usage error,
//! 3 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::boolfock::{self, BooleanReport, BooleanSpace};
use crate::car::{self, CarReport, EvennessTest, SiteState};
use crate::error::{Error, Result};
use crate::exchange::{cesaro_csv, CesaroReport, MAX_ENUM};
use crate::freeprod;
use crate::fuzz::Fuzz;
use crate::haagerup::{cesaro_cluster, gram_psd_check, word_ball, FreeWord, HaagerupState};
use crate::numkernel::CMat;
use crate::qfock::{QSpace, QfockReport, MAX_DEGREE};
use crate::Index;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Largest q-Fock basis the suite will build.
const MAX_QFOCK_DIM: usize = 2000;
const MAX_BOOLEAN_SITES: usize = 64;
const FREEPROD_CASES: usize = 1000;
const OBSTRUCTION_CASES: usize = 10;
const COMMUTATION_PAIRS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Freeprod,
    Qfock,
    Car,
    Boolean,
    Haagerup,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Parser, Debug)]
#[command(name = "qexch", version, about = "Run finite-scale verification suites")]
pub struct Args {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Comma-separated deformation parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.9,-0.5,0,0.5,0.9")]
    pub q: Vec<f64>,
    /// Comma-separated Haagerup parameters; `inf` selects the trace.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,1,2")]
    pub lambda: Vec<String>,
    /// One-particle dimension for qfock and boolean; freeprod uses at most 4 sites.
    #[arg(long, default_value_t = 3)]
    pub sites: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
    #[arg(long, default_value_t = 7)]
    pub perm_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sites: usize,
    pub degree: usize,
    pub modes: usize,
    pub perm_max: usize,
    pub seed: u64,
    pub tol: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::RejectedInput(msg.into()))
}

fn parse_lambda(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match t.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => usage("lambda must be > 0 or inf"),
    }
}

impl SuiteConfig {
    pub fn from_args(a: Args) -> Result<Self> {
        if a.q.is_empty() || a.q.iter().any(|q| q.is_nan() || q.abs() >= 1.0) {
            return usage("q must lie in (-1,1)");
        }
        let lambda = a.lambda.iter().map(|s| parse_lambda(s)).collect::<Result<Vec<_>>>()?;
        if lambda.is_empty() {
            return usage("lambda must be > 0 or inf");
        }
        if a.perm_max < 2 || a.perm_max > MAX_ENUM {
            return usage(format!("perm_max must lie in 2..={MAX_ENUM}"));
        }
        if !(a.tol > 0.0 && a.tol.is_finite()) {
            return usage("tol must be > 0");
        }
        if a.sites == 0 || a.sites > MAX_BOOLEAN_SITES {
            return usage(format!("sites must lie in 1..={MAX_BOOLEAN_SITES}"));
        }
        if a.degree == 0 || a.degree > MAX_DEGREE {
            return usage(format!("degree must lie in 1..={MAX_DEGREE}"));
        }
        if a.modes < 2 || a.modes > car::MAX_AVERAGE_MODES {
            return usage(format!("modes must lie in 2..={}", car::MAX_AVERAGE_MODES));
        }
        if matches!(a.suite, Suite::Qfock | Suite::All) {
            let dim: usize = (0..=a.degree as u32).map(|n| a.sites.saturating_pow(n)).sum();
            if dim > MAX_QFOCK_DIM {
                return Err(Error::ResourceLimit(format!(
                    "q-Fock basis of size {dim} exceeds {MAX_QFOCK_DIM}"
                )));
            }
        }
        Ok(SuiteConfig {
            suite: a.suite,
            q: a.q,
            lambda,
            sites: a.sites,
            degree: a.degree,
            modes: a.modes,
            perm_max: a.perm_max,
            seed: a.seed,
            tol: a.tol,
            format: a.format,
            out: a.out,
        })
    }
}

/// Outcome of one suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    pub failures: Vec<String>,
    pub data: Value,
}

impl SuiteResult {
    fn new(suite: Suite, failures: Vec<String>, data: Value) -> Self {
        SuiteResult {
            suite,
            passed: failures.is_empty(),
            failures,
            data,
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn lambda_value(l: f64) -> Value {
    if l.is_infinite() {
        json!("inf")
    } else {
        json!(l)
    }
}

/// Runs the configured suite(s) in a fixed order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteResult>> {
    let order = [Suite::Freeprod, Suite::Qfock, Suite::Car, Suite::Boolean, Suite::Haagerup];
    let mut out = Vec::new();
    for s in order {
        if cfg.suite != Suite::All && cfg.suite != s {
            continue;
        }
        out.push(match s {
            Suite::Freeprod => freeprod_suite(cfg)?,
            Suite::Qfock => qfock_suite(cfg)?,
            Suite::Car => car_suite(cfg)?,
            Suite::Boolean => boolean_suite(cfg)?,
            Suite::Haagerup => haagerup_suite(cfg)?,
            Suite::All => unreachable!(),
        });
    }
    Ok(out)
}

fn freeprod_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let sites: Vec<Index> = (1..=cfg.sites.min(4) as Index).collect();
    let s = freeprod::fuzz_properties(&sites, FREEPROD_CASES, cfg.seed)?;
    let mut failures = Vec::new();
    if s.associativity_failures > 0 {
        failures.push(format!("associativity failed in {} cases", s.associativity_failures));
    }
    if s.adjoint_failures > 0 {
        failures.push(format!("adjoint antihomomorphism failed in {} cases", s.adjoint_failures));
    }
    if s.equivariance_failures > 0 {
        failures.push(format!("quotient equivariance failed in {} cases", s.equivariance_failures));
    }
    if s.quotient_max_gap > cfg.tol {
        failures.push(format!("quotient homomorphism gap {:e}", s.quotient_max_gap));
    }
    if s.eval_max_gap > cfg.tol {
        failures.push(format!("representation multiplicativity gap {:e}", s.eval_max_gap));
    }
    Ok(SuiteResult::new(Suite::Freeprod, failures, to_value(&s)))
}

fn qfock_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for (k, &q) in cfg.q.iter().enumerate() {
        let sp = QSpace::new(cfg.sites, cfg.degree, q)?;
        let mut fz = Fuzz::stream(cfg.seed, k as u64);
        let (mut comm, mut adj) = (0.0f64, 0.0f64);
        for _ in 0..COMMUTATION_PAIRS {
            let f = fz.cvec(cfg.sites);
            let g = fz.cvec(cfg.sites);
            comm = comm.max(sp.commutation_residual(&f, &g)?);
            adj = adj.max(sp.adjointness_residual(&f)?);
        }
        let eigs = sp.gram_min_eigs()?;
        if comm > cfg.tol {
            failures.push(format!("q={q}: commutation residual {comm:e}"));
        }
        if adj > cfg.tol {
            failures.push(format!("q={q}: adjointness residual {adj:e}"));
        }
        for (n, e) in eigs.iter().enumerate() {
            if *e <= 0.0 {
                failures.push(format!("q={q}: Gram block of degree {n} has min eigenvalue {e:e}"));
            }
        }
        reports.push(QfockReport {
            d: cfg.sites,
            n: cfg.degree,
            q,
            gram_min_eig: eigs,
            commutation_residual: comm,
            adjointness_residual: adj,
        });
    }
    Ok(SuiteResult::new(Suite::Qfock, failures, to_value(&reports)))
}

/// Gap a non-even site state must open under some transposition.
const NON_EVEN_MIN_GAP: f64 = 1e-3;

fn car_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let n = cfg.modes;
    let sys = car::jw_generators(n)?;
    let mut failures = Vec::new();
    let car_residual = sys.car_residual();
    let parity_residual = sys.parity_residual();
    if car_residual > cfg.tol {
        failures.push(format!("CAR residual {car_residual:e}"));
    }
    if parity_residual > cfg.tol {
        failures.push(format!("parity residual {parity_residual:e}"));
    }
    let cases = [("p=0", 0.0, 0.0), ("p=0.3", 0.3, 0.0), ("p=0.5", 0.5, 0.0), ("off-diagonal 0.3", 0.5, 0.3)];
    let mut evenness_tests = Vec::new();
    for (label, p, c) in cases {
        let site = SiteState::with_coherence(p, c)?;
        let even = site.is_even(1e-15);
        let gap = car::transposition_scan(&car::product_state(&site, n), &sys)?;
        if even && gap > cfg.tol {
            failures.push(format!("{label}: even product state moved by {gap:e}"));
        }
        if !even && gap < NON_EVEN_MIN_GAP {
            failures.push(format!("{label}: non-even product state moved only by {gap:e}"));
        }
        evenness_tests.push(EvennessTest {
            label: label.to_string(),
            even,
            max_gap: gap,
        });
    }
    let sites = [
        SiteState::with_coherence(0.1, 0.0)?,
        SiteState::with_coherence(0.6, 0.0)?,
        SiteState::with_coherence(0.95, 0.0)?,
    ];
    let mix = car::mixture_factorization_gap(&[0.2, 0.5, 0.3], &sites, n)?;
    if mix > cfg.tol {
        failures.push(format!("mixture factorization gap {mix:e}"));
    }
    if n <= 5 {
        let mut fz = Fuzz::stream(cfg.seed, 0);
        let dim = sys.dim();
        let x = fz.cmat(dim, dim);
        let ex = sys.fixed_point_expectation(&x)?;
        let idem = sys.fixed_point_expectation(&ex)?.max_abs_diff(&ex);
        let unital = sys.fixed_point_expectation(&CMat::identity(dim))?.max_abs_diff(&CMat::identity(dim));
        let e1 = sys.fixed_point_expectation(&sys.monomial(&[(1, true), (1, false)])?)?;
        let e2 = sys.fixed_point_expectation(&sys.monomial(&[(2, true), (2, false)])?)?;
        let st = car::symmetrize(&car::CarState::new(fz.density(dim))?, &sys)?;
        let pres = (st.expect(&ex) - st.expect(&x)).norm();
        for (name, v) in [
            ("idempotence", idem),
            ("unitality", unital),
            ("identical distribution", e1.max_abs_diff(&e2)),
            ("state preservation", pres),
        ] {
            if v > cfg.tol {
                failures.push(format!("fixed-point expectation {name} gap {v:e}"));
            }
        }
    }
    let report = CarReport {
        n,
        car_residual,
        parity_residual,
        evenness_tests,
        definetti_mixture_gap: mix,
    };
    Ok(SuiteResult::new(Suite::Car, failures, to_value(&report)))
}

fn boolean_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let d = cfg.sites;
    let space = BooleanSpace::new(d)?;
    let ops = boolfock::boolean_ops(&space);
    let rr = boolfock::relation_residuals(&ops);
    let mut failures = Vec::new();
    for (name, v) in [
        ("vacuum projection", rr.vacuum_projection),
        ("matrix units", rr.matrix_units),
        ("r products", rr.r_products),
        ("r squares", rr.r_squares),
    ] {
        if v != 0.0 {
            failures.push(format!("{name} residual {v:e}"));
        }
    }
    let span_rank = boolfock::ladder_span_rank(&ops);
    if span_rank != (d + 1) * (d + 1) {
        failures.push(format!("span rank {span_rank} < {}", (d + 1) * (d + 1)));
    }
    let mut fz = Fuzz::stream(cfg.seed, 0);
    let mut obstruction_cases = Vec::new();
    for _ in 0..OBSTRUCTION_CASES {
        let xi = boolfock::sample_xi(&mut fz, d, 0.1, 0.9);
        let site = fz.density(d);
        match boolfock::ce_obstruction(d, &xi, &site) {
            Ok(c) => obstruction_cases.push(c),
            Err(Error::Consistency(m)) => failures.push(m),
            Err(e) => return Err(e),
        }
    }
    let report = BooleanReport {
        d,
        relation_residuals: rr,
        span_rank,
        obstruction_cases,
    };
    Ok(SuiteResult::new(Suite::Boolean, failures, to_value(&report)))
}

#[derive(Serialize)]
struct GramSummary {
    lambda: Value,
    ball_radius: u64,
    generators: usize,
    min_eig: f64,
}

fn haagerup_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let mut failures = Vec::new();
    let mut data = Vec::new();
    let v = FreeWord::generator(1);
    let w = FreeWord::power(2, -1);
    let ball = word_ball(3, 2);
    for &l in &cfg.lambda {
        let st = if l.is_infinite() { HaagerupState::tracial() } else { HaagerupState::new(l)? };
        let e2 = if l.is_infinite() { 0.0 } else { (-2.0 * l).exp() };
        let mut rows: Vec<CesaroReport> = Vec::new();
        for n in 2..=cfg.perm_max {
            let r = cesaro_cluster(&st, &v, &w, n)?;
            let closed = (1.0 + (n as f64 - 1.0) * e2) / n as f64;
            let dev = (r.mean - Complex64::new(closed, 0.0)).norm();
            if dev > cfg.tol {
                failures.push(format!("lambda={l}, n={n}: mean deviates from closed form by {dev:e}"));
            }
            if r.gap > r.bound {
                failures.push(format!("lambda={l}, n={n}: gap {:e} exceeds bound {:e}", r.gap, r.bound));
            }
            if let Some(prev) = rows.last() {
                if r.gap > prev.gap {
                    failures.push(format!("lambda={l}, n={n}: gap increased"));
                }
            }
            rows.push(r);
        }
        let min_eig = gram_psd_check(&st, &ball)?;
        if min_eig < -cfg.tol {
            failures.push(format!("lambda={l}: Gram kernel min eigenvalue {min_eig:e}"));
        }
        data.push(json!({
            "lambda": lambda_value(l),
            "cesaro": to_value(&rows),
            "gram": to_value(&GramSummary {
                lambda: lambda_value(l),
                ball_radius: 2,
                generators: 3,
                min_eig,
            }),
        }));
    }
    Ok(SuiteResult::new(Suite::Haagerup, failures, Value::Array(data)))
}

/// Serializes results in the requested format.
pub fn render(results: &[SuiteResult], format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(results).expect("results serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let rows: Vec<CesaroReport> = results
                .iter()
                .filter(|r| r.suite == Suite::Haagerup)
                .filter_map(|r| r.data.as_array())
                .flatten()
                .filter_map(|d| serde_json::from_value::<Vec<CesaroReport>>(d["cesaro"].clone()).ok())
                .flatten()
                .collect();
            cesaro_csv(&rows)
        }
        Format::Text => {
            let mut s = String::new();
            for r in results {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                s.push_str(&format!("{}: {verdict}\n", suite_name(r.suite)));
                for f in &r.failures {
                    s.push_str(&format!("  {f}\n"));
                }
            }
            s
        }
    }
}

/// Writes [`render`] output to `out`, or stdout when `None`.
pub fn emit_report(results: &[SuiteResult], format: Format, out: Option<&Path>) -> std::io::Result<()> {
    let text = render(results, format);
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()
        }
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("QEXCH_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => usage("QEXCH_THREADS must be a positive integer"),
        },
        Err(_) => Ok(None),
    }
}

/// Full command-line entry point; returns the exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let cfg = match SuiteConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            return EXIT_USAGE;
        }
    };
    let run = || run_suite(&cfg);
    let results = match thread_cap() {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        Ok(None) => run(),
        Err(e) => {
            eprintln!("error: {}", message(&e));
            return EXIT_USAGE;
        }
    };
    let results = match results {
        Ok(r) => r,
        Err(e @ (Error::RejectedInput(_) | Error::ResourceLimit(_))) => {
            eprintln!("error: {}", message(&e));
            return EXIT_USAGE;
        }
        Err(e) => vec![SuiteResult::new(cfg.suite, vec![message(&e)], Value::Null)],
    };
    if let Err(e) = emit_report(&results, cfg.format, cfg.out.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_IO;
    }
    let failed: Vec<&SuiteResult> = results.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        return EXIT_PASS;
    }
    eprintln!("failing checks:");
    for r in failed {
        for f in &r.failures {
            eprintln!("  {}: {f}", suite_name(r.suite));
        }
    }
    EXIT_FAIL
}

fn suite_name(s: Suite) -> String {
    format!("{s:?}").to_lowercase()
}

fn message(e: &Error) -> String {
    match e {
        Error::RejectedInput(m) | Error::ResourceLimit(m) | Error::Consistency(m) => m.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &[&str]) -> Result<SuiteConfig> {
        let mut argv = vec!["qexch"];
        argv.extend_from_slice(extra);
        SuiteConfig::from_args(Args::try_parse_from(argv).unwrap())
    }

    #[test]
    fn validation_messages() {
        let e = cfg(&["--q", "1.5"]).unwrap_err();
        assert_eq!(message(&e), "q must lie in (-1,1)");
        assert!(cfg(&["--q", "-1"]).is_err());
        assert!(cfg(&["--lambda", "0"]).is_err());
        assert!(cfg(&["--lambda", "-2"]).is_err());
        assert_eq!(cfg(&["--lambda", "inf,1"]).unwrap().lambda, vec![f64::INFINITY, 1.0]);
        assert!(cfg(&["--perm-max", "11"]).is_err());
        assert!(cfg(&["--tol", "0"]).is_err());
        assert!(cfg(&["--q", "-0.5,0.25"]).is_ok());
        assert!(matches!(cfg(&["--sites", "9", "--degree", "8"]), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn empty_results_render() {
        assert_eq!(render(&[], Format::Json).trim(), "[]");
        assert_eq!(render(&[], Format::Csv).trim(), crate::exchange::CESARO_CSV_HEADER);
    }

    #[test]
    fn qfock_example() {
        let c = cfg(&["--suite", "qfock", "--q", "0.5", "--sites", "2", "--degree", "3"]).unwrap();
        let r = run_suite(&c).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].passed, "{:?}", r[0].failures);
        assert!(r[0].data[0]["commutation_residual"].as_f64().unwrap() < 1e-10);
        assert_eq!(r[0].data[0]["N"], 3);
    }

    #[test]
    fn haagerup_example() {
        let c = cfg(&["--suite", "haagerup", "--lambda", "1", "--perm-max", "7"]).unwrap();
        let r = run_suite(&c).unwrap();
        assert!(r[0].passed, "{:?}", r[0].failures);
        let rows = r[0].data[0]["cesaro"].as_array().unwrap();
        assert_eq!(rows.len(), 6);
        let csv = render(&r, Format::Csv);
        assert!(csv.starts_with("n,mean_re,mean_im,target_re,target_im,gap,bound\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn deterministic_json() {
        let c = cfg(&["--suite", "boolean", "--seed", "5"]).unwrap();
        let a = render(&run_suite(&c).unwrap(), Format::Json);
        let b = render(&run_suite(&c).unwrap(), Format::Json);
        assert_eq!(a, b);
    }

    #[test]
    fn text_summary() {
        let r = vec![SuiteResult::new(Suite::Car, vec!["x".into()], Value::Null)];
        assert_eq!(render(&r, Format::Text), "car: FAIL\n  x\n");
    }
}
