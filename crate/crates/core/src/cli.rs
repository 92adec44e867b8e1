//! Benchmark harness: convergence tables, self-verification and plot data.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use crate::engine::{
    build_test_density, conv1d, evaluate, evaluate_symmetric, sample_factor, saturation_epsilon0, AxisPoint,
    IsotropicGaussianPolyDensity, SeparatedDensity,
};
use crate::error::Error;
use crate::kernels::{direct_cubature, phi2, phi2_kummer, phi2m, BasisOrder, Dimension, GridSpec};
use crate::quad::{integral_phi2, qm_explicit, qm_poly, rm_explicit, rm_poly, DEQuadrature};
use crate::specfun::{erf, exp_integral_e1, gen_laguerre, kummer_1f1, EULER_GAMMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable that overrides the default thread count.
pub const THREADS_ENV: &str = "BIHARM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(try_from = "TableKey")]
pub enum TableId {
    /// Exact values along the first axis, M = 4, h = 0.025.
    T1,
    /// Errors and rates at (1, 0, …, 0), n = 5·10^k.
    #[default]
    T2,
    /// Same for n = 10⁵ … 10⁷.
    T3,
    /// Three-dimensional errors at (1, 1, 1).
    T4,
    Custom,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TableKey {
    Num(i64),
    Name(String),
}

impl TryFrom<TableKey> for TableId {
    type Error = String;
    fn try_from(k: TableKey) -> Result<Self, String> {
        match k {
            TableKey::Num(v) => v.to_string().parse(),
            TableKey::Name(s) => s.parse(),
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "1" => Ok(TableId::T1),
            "2" => Ok(TableId::T2),
            "3" => Ok(TableId::T3),
            "4" => Ok(TableId::T4),
            "custom" => Ok(TableId::Custom),
            other => Err(format!("unknown table '{other}', expected 1, 2, 3, 4 or custom")),
        }
    }
}

/// Parameters of one `table` run. Unset lists fall back to the selected table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub table: TableId,
    pub dims: Option<Vec<usize>>,
    pub orders: Option<Vec<u32>>,
    /// Inverse grid steps `1/h`.
    pub steps: Option<Vec<u32>>,
    pub x1: Option<Vec<f64>>,
    pub delta: f64,
    pub quad_a: f64,
    pub quad_b: f64,
    pub quad_tau: f64,
    pub quad_nodes: usize,
    pub radius: f64,
    pub out: Option<PathBuf>,
    pub plot_out: Option<PathBuf>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = DEQuadrature::default();
        Self {
            table: TableId::default(),
            dims: None,
            orders: None,
            steps: None,
            x1: None,
            delta: GridSpec::DEFAULT_D,
            quad_a: q.a,
            quad_b: q.b,
            quad_tau: q.tau,
            quad_nodes: q.len(),
            radius: GridSpec::DEFAULT_RADIUS,
            out: None,
            plot_out: None,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn for_table(table: TableId) -> Self {
        Self {
            table,
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn table_defaults(&self) -> (Vec<usize>, Vec<u32>, Vec<u32>, Vec<f64>) {
        let steps = vec![10, 20, 40, 80, 160];
        match self.table {
            TableId::T1 => (
                vec![5, 10, 100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000, 100_000_000],
                vec![4],
                vec![40],
                vec![0.0, 1.0, 2.0, 3.0, 4.0],
            ),
            TableId::T2 => (vec![5, 50, 500, 5_000, 50_000], vec![4, 3, 2, 1], steps, vec![1.0]),
            TableId::T3 => (vec![100_000, 1_000_000, 10_000_000], vec![4, 3], steps, vec![1.0]),
            TableId::T4 => (vec![3], vec![4, 3, 2, 1], steps, vec![1.0]),
            TableId::Custom => (vec![5], vec![4], vec![10, 20, 40], vec![1.0]),
        }
    }

    /// Validated list of jobs in output order.
    pub fn plan(&self) -> Result<Plan, CliError> {
        let cfg = |msg: String| Err(CliError::Config(msg));
        let (d_dims, d_orders, d_steps, d_x1) = self.table_defaults();
        let dims = self.dims.clone().unwrap_or(d_dims);
        let orders = self.orders.clone().unwrap_or(d_orders);
        let steps = self.steps.clone().unwrap_or(d_steps);
        let x1s = self.x1.clone().unwrap_or(d_x1);
        if dims.is_empty() || orders.is_empty() || steps.is_empty() || x1s.is_empty() {
            return cfg("dims, orders, steps and x1 must be non-empty".into());
        }
        if let Some(&n) = dims.iter().find(|&&n| n < 3 || n == 4) {
            return cfg(format!("dimension {n} is not supported (need n = 3 or n >= 5)"));
        }
        if orders.contains(&0) || steps.contains(&0) {
            return cfg("orders and steps must be positive".into());
        }
        for (name, v) in [
            ("delta", self.delta),
            ("quad-a", self.quad_a),
            ("quad-b", self.quad_b),
            ("quad-tau", self.quad_tau),
            ("radius", self.radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return cfg(format!("{name} must be positive, got {v}"));
            }
        }
        if self.threads == 0 {
            return cfg("threads must be >= 1".into());
        }
        let rule = DEQuadrature::with_nodes(self.quad_a, self.quad_b, self.quad_tau, self.quad_nodes)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let mut jobs = Vec::new();
        for &n in &dims {
            for &m in &orders {
                for &x1 in &x1s {
                    for &step in &steps {
                        let scaled = x1 * step as f64;
                        let k1 = scaled.round();
                        if !x1.is_finite() || (scaled - k1).abs() > 1e-9 * scaled.abs().max(1.0) {
                            return cfg(format!("x1 = {x1} is not a grid point for h = 1/{step}"));
                        }
                        jobs.push(Job {
                            n,
                            order: m,
                            step,
                            x1,
                            k1: k1 as i64,
                        });
                    }
                }
            }
        }
        Ok(Plan {
            jobs,
            rule,
            delta: self.delta,
            radius: self.radius,
            threads: self.threads,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub n: usize,
    pub order: u32,
    pub step: u32,
    pub x1: f64,
    pub k1: i64,
}

impl Job {
    pub fn h(&self) -> f64 {
        1.0 / self.step as f64
    }

    /// Exact potential of the test density at the job's point.
    pub fn exact(&self) -> f64 {
        let axes = if self.n == 3 { 3.0 } else { 1.0 };
        (-axes * self.x1 * self.x1).exp()
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub jobs: Vec<Job>,
    pub rule: DEQuadrature,
    pub delta: f64,
    pub radius: f64,
    pub threads: usize,
}

/// Cubature value for one job. n = 3 goes through the separated engine at
/// `(x₁, x₁, x₁)`, larger n through the symmetric path at `(x₁, 0, …, 0)`.
pub fn compute_job(job: &Job, delta: f64, radius: f64, rule: &DEQuadrature) -> crate::Result<f64> {
    let grid = GridSpec::new(job.h(), delta, radius)?;
    let order = BasisOrder::new(job.order)?;
    if job.n == 3 {
        let dens = build_test_density(3, &grid)?;
        Ok(evaluate(&dens, &[vec![job.k1; 3]], &grid, order, rule)?[0].value)
    } else {
        let dens = IsotropicGaussianPolyDensity::test_density(job.n)?;
        Ok(evaluate_symmetric(&dens, AxisPoint { k1: job.k1 }, &grid, order, rule)?.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub order: u32,
    pub h: f64,
    pub x1: f64,
    pub exact: f64,
    pub approx: f64,
    pub abs_err: f64,
    pub rel_err: Option<f64>,
    /// `log₂(abs_err(previous h) / abs_err(h))`, absent for the first step of a series.
    pub rate: Option<f64>,
}

impl RateRow {
    fn same_series(&self, other: &RateRow) -> bool {
        self.n == other.n && self.order == other.order && self.x1 == other.x1
    }
}

pub fn run_plan(plan: &Plan) -> Result<Vec<RateRow>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let values: Vec<crate::Result<f64>> = pool.install(|| {
        plan.jobs
            .par_iter()
            .map(|job| compute_job(job, plan.delta, plan.radius, &plan.rule))
            .collect()
    });

    let mut rows: Vec<RateRow> = Vec::with_capacity(values.len());
    for (job, value) in plan.jobs.iter().zip(values) {
        let approx = value?;
        let exact = job.exact();
        let abs_err = (approx - exact).abs();
        let mut row = RateRow {
            n: job.n,
            order: job.order,
            h: job.h(),
            x1: job.x1,
            exact,
            approx,
            abs_err,
            rel_err: (exact != 0.0).then(|| abs_err / exact.abs()),
            rate: None,
        };
        if let Some(prev) = rows.last().filter(|p| p.same_series(&row)) {
            row.rate = Some((prev.abs_err / row.abs_err).log2());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rows of a table run; also writes the CSV and plot files named in `cfg`.
pub fn run_table(cfg: &RunConfig) -> Result<Vec<RateRow>, CliError> {
    let rows = run_plan(&cfg.plan()?)?;
    if let Some(path) = &cfg.out {
        std::fs::write(path, to_csv(&rows)).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &cfg.plot_out {
        emit_plot_data(&rows, path)?;
    }
    Ok(rows)
}

/// `%.15e` in the C locale, e.g. `1.500000000000000e-06`.
pub fn format_sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.15e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub const CSV_HEADER: &str = "n,M,h,x1,exact,approx,abs_err,rel_err,rate";

pub fn to_csv(rows: &[RateRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(format_sci).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.order,
            format_sci(r.h),
            format_sci(r.x1),
            format_sci(r.exact),
            format_sci(r.approx),
            format_sci(r.abs_err),
            opt(r.rel_err),
            opt(r.rate),
        );
    }
    out
}

/// Two-column `h abs_err` blocks, one per series, separated by one blank line.
pub fn plot_data(rows: &[RateRow]) -> String {
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        if i > 0 && !rows[i - 1].same_series(r) {
            out.push('\n');
        }
        let _ = writeln!(out, "{} {}", format_sci(r.h), format_sci(r.abs_err));
    }
    out
}

pub fn emit_plot_data(rows: &[RateRow], path: &Path) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Config("no rows to plot".into()));
    }
    std::fs::write(path, plot_data(rows)).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Measured deviation; NaN when the check itself failed to run.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub checks: Vec<CheckResult>,
    pub seconds: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = write!(
                out,
                "{} {:<36} measured {:>10.3e}  tolerance {:>9.2e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
            if let Some(d) = &c.detail {
                let _ = write!(out, "  ({d})");
            }
            out.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(
            out,
            "{} checks, {failed} failed, {:.1} s",
            self.checks.len(),
            self.seconds
        );
        out
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn dim(n: usize) -> Dimension {
    Dimension::new(n).expect("n >= 3")
}

fn ord(m: u32) -> BasisOrder {
    BasisOrder::new(m).expect("M >= 1")
}

/// `|log₂(err/reference)|`: at most 1 means within a factor of two.
fn factor_distance(err: f64, reference: f64) -> f64 {
    (err / reference).log2().abs()
}

type CheckFn = fn() -> crate::Result<f64>;

fn quick_checks() -> Vec<(&'static str, f64, CheckFn)> {
    vec![
        ("erf vs Maclaurin series", 1e-15, || {
            let x: f64 = 0.5;
            let mut term = x;
            let mut s = 0.0;
            for k in 0..40 {
                s += term / (2 * k + 1) as f64;
                term *= -x * x / (k + 1) as f64;
            }
            Ok(rel(erf(x), 2.0 / std::f64::consts::PI.sqrt() * s))
        }),
        ("E1 vs series", 1e-14, || {
            let x: f64 = 0.7;
            let mut s = 0.0;
            let mut fact = 1.0;
            for k in 1..40 {
                fact *= k as f64;
                s += (-x).powi(k) / (k as f64 * fact);
            }
            Ok(rel(exp_integral_e1(x)?, -EULER_GAMMA - x.ln() - s))
        }),
        ("1F1 vs erf identity", 1e-14, || {
            let x: f64 = 1.3;
            let want = std::f64::consts::PI.sqrt() * erf(x) / (2.0 * x);
            Ok(rel(kummer_1f1(0.5, 1.5, -x * x)?, want))
        }),
        ("phi2 closed form vs 1F1", 1e-12, || {
            let mut worst: f64 = 0.0;
            for n in [3, 5, 6, 7, 10] {
                for r in [0.0, 0.5, 1.0, 2.0] {
                    worst = worst.max(rel(phi2(dim(n), r), phi2_kummer(dim(n), r)?));
                }
            }
            Ok(worst)
        }),
        ("ladder identity", 1e-13, || {
            let mut worst: f64 = 0.0;
            for n in [3, 5, 6, 10] {
                for m in [2u32, 3] {
                    for r in [0.0, 0.5, 1.0, 2.0] {
                        let z: f64 = r * r;
                        let diff = phi2m(dim(n), ord(m + 1), r) - phi2m(dim(n), ord(m), r);
                        let a = n as f64 / 2.0 - 1.0;
                        let want = (-z).exp() / 16.0 * gen_laguerre(m as usize - 2, a, z) / ((m - 1) * m) as f64;
                        worst = worst.max((diff - want).abs());
                    }
                }
            }
            Ok(worst)
        }),
        ("Q_M vs explicit polynomials", 1e-12, || {
            let mut worst: f64 = 0.0;
            for m in 1..=4 {
                for x in [-2.5, -0.3, 0.0, 0.8, 1.9] {
                    for t in [0.0, 0.4, 3.0, 50.0] {
                        worst = worst.max(rel(qm_poly(ord(m), x, t), qm_explicit(m, x, t)));
                    }
                }
            }
            Ok(worst)
        }),
        ("R_M vs explicit polynomials", 1e-12, || {
            let mut worst: f64 = 0.0;
            for m in 1..=4 {
                for x in [-2.5, -0.3, 0.8, 1.9] {
                    for t in [0.0, 0.4, 3.0, 50.0] {
                        worst = worst.max(rel(rm_poly(ord(m), x, t), rm_explicit(m, x, t)));
                    }
                }
            }
            Ok(worst)
        }),
        ("DE integral vs closed form", 1e-11, || {
            let rule = DEQuadrature::default();
            let mut worst: f64 = 0.0;
            for n in [3, 5, 6, 10, 100] {
                for r in [0.0, 0.5, 1.0, 2.0, 4.0] {
                    worst = worst.max(rel(integral_phi2(dim(n), r, &rule)?, phi2(dim(n), r)));
                }
            }
            Ok(worst)
        }),
        ("DE refinement stability", 1e-12, || {
            let rule = DEQuadrature::default();
            let fine = rule.refined();
            let mut worst: f64 = 0.0;
            for n in [3, 5, 10] {
                worst = worst.max(rel(
                    integral_phi2(dim(n), 1.0, &fine)?,
                    integral_phi2(dim(n), 1.0, &rule)?,
                ));
            }
            Ok(worst)
        }),
        ("DE tail certification", 0.0, || {
            // a rule stopping at t ~ 0.03 must be rejected
            let short = DEQuadrature::with_nodes(6.0, 5.0, 0.003, 150)?;
            Ok(match integral_phi2(dim(5), 1.0, &short) {
                Err(Error::QuadratureDivergence { .. }) => 0.0,
                _ => 1.0,
            })
        }),
        ("conv1d vs brute force", 1e-14, || {
            let d = 5.0;
            let t = 1.0;
            let grid = GridSpec::new(0.1, d, 6.5)?;
            let (lo, g) = sample_factor(&grid, |x| (-x * x).exp());
            let mut brute = 0.0;
            for (i, f) in g.iter().enumerate() {
                let m = (lo + i as i64 - 3) as f64;
                brute += f * (-m * m / (d * (1.0 + t))).exp();
            }
            brute /= (std::f64::consts::PI * d * (1.0 + t)).sqrt();
            Ok(rel(conv1d(&g, lo, t, d, ord(1), 3)?, brute))
        }),
        ("symmetric vs generic path", 1e-12, || {
            let grid = GridSpec::with_step(0.2)?;
            let rule = DEQuadrature::default();
            let mut worst: f64 = 0.0;
            for n in [5, 6] {
                let iso = IsotropicGaussianPolyDensity::test_density(n)?;
                let sep = iso.to_separated(&grid)?;
                let mut k = vec![0; n];
                k[0] = 5;
                let g = evaluate(&sep, &[k], &grid, ord(3), &rule)?[0].value;
                let s = evaluate_symmetric(&iso, AxisPoint { k1: 5 }, &grid, ord(3), &rule)?.value;
                worst = worst.max(rel(s, g));
            }
            Ok(worst)
        }),
        ("tensor vs direct, n = 3", 1e-10, || tensor_vs_direct(3, 0.1)),
        ("permutation is bitwise", 0.0, || {
            let grid = GridSpec::with_step(0.2)?;
            let dens = build_test_density(3, &grid)?;
            let rule = DEQuadrature::default();
            let a = evaluate(&dens, &[vec![1, 4, -2]], &grid, ord(2), &rule)?[0].value;
            let b = evaluate(&dens, &[vec![-2, 1, -4]], &grid, ord(2), &rule)?[0].value;
            Ok(if a.to_bits() == b.to_bits() {
                0.0
            } else {
                (a - b).abs().max(f64::MIN_POSITIVE)
            })
        }),
        ("saturation level", 1e-19, || {
            Ok(saturation_epsilon0(ord(1), 5.0, 5, 3)?.epsilon0)
        }),
        ("n = 5, M = 4, h = 1/10 vs 0.15e-5", 1.0, || {
            let job = Job {
                n: 5,
                order: 4,
                step: 10,
                x1: 1.0,
                k1: 10,
            };
            let v = compute_job(&job, 5.0, 6.5, &DEQuadrature::default())?;
            Ok(factor_distance((v - job.exact()).abs(), 0.15e-5))
        }),
        ("n = 3, M = 4, h = 1/10 vs 0.236e-6", 1.0, || {
            let job = Job {
                n: 3,
                order: 4,
                step: 10,
                x1: 1.0,
                k1: 10,
            };
            let v = compute_job(&job, 5.0, 6.5, &DEQuadrature::default())?;
            Ok(factor_distance((v - job.exact()).abs(), 0.236e-6))
        }),
    ]
}

fn full_checks() -> Vec<(&'static str, f64, CheckFn)> {
    vec![
        ("n = 1e4, x1 = 0 vs 0.258e-6", 1.0, || {
            let job = Job {
                n: 10_000,
                order: 4,
                step: 40,
                x1: 0.0,
                k1: 0,
            };
            let v = compute_job(&job, 5.0, 6.5, &DEQuadrature::default())?;
            Ok(factor_distance((v - job.exact()).abs() / job.exact(), 0.258e-6))
        }),
        ("tensor vs direct, n = 5", 1e-10, || tensor_vs_direct(5, 0.1)),
    ]
}

/// M = 1, where the radial and tensor bases coincide, on a narrow Gaussian.
fn tensor_vs_direct(n: usize, h: f64) -> crate::Result<f64> {
    let grid = GridSpec::new(h, 5.0, 2.1)?;
    let (lo, g) = sample_factor(&grid, |x| (-9.0 * x * x).exp());
    let dens = SeparatedDensity::product(lo, 1.0, vec![g; n])?;
    let f = |x: &[f64]| (-9.0 * x.iter().map(|v| v * v).sum::<f64>()).exp();
    let mut worst: f64 = 0.0;
    let points: Vec<Vec<i64>> = (0..3)
        .map(|i| (0..n).map(|j| ((i * 3 + j * 2) % 7) as i64 - 3).collect())
        .collect();
    let tensor = evaluate(&dens, &points, &grid, ord(1), &DEQuadrature::default())?;
    for (k, t) in points.iter().zip(&tensor) {
        let x: Vec<f64> = k.iter().map(|&v| h * v as f64).collect();
        worst = worst.max(rel(t.value, direct_cubature(f, &grid, ord(1), &x)?.value));
    }
    Ok(worst)
}

pub fn run_verify(level: VerifyLevel) -> VerifyReport {
    let start = Instant::now();
    let mut specs = quick_checks();
    if level == VerifyLevel::Full {
        specs.extend(full_checks());
    }
    let checks = specs
        .into_iter()
        .map(|(name, tolerance, run)| match run() {
            Ok(measured) => CheckResult {
                name,
                measured,
                tolerance,
                passed: measured <= tolerance,
                detail: None,
            },
            Err(e) => CheckResult {
                name,
                measured: f64::NAN,
                tolerance,
                passed: false,
                detail: Some(e.to_string()),
            },
        })
        .collect();
    VerifyReport {
        level,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "biharm",
    version,
    about = "Cubature of the n-dimensional biharmonic potential"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Errors and convergence rates for the reference density, as CSV.
    Table(TableArgs),
    /// Run the built-in consistency checks.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
    },
}

#[derive(Debug, Default, Args)]
pub struct TableArgs {
    /// 1, 2, 3, 4 or custom.
    #[arg(long)]
    pub table: Option<TableId>,
    /// TOML file with RunConfig fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<u32>>,
    /// Inverse grid steps 1/h.
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<u32>>,
    /// First coordinate of the evaluation points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub quad_a: Option<f64>,
    #[arg(long)]
    pub quad_b: Option<f64>,
    #[arg(long)]
    pub quad_tau: Option<f64>,
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two-column plot data file.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl TableArgs {
    /// Config file, then environment thread override, then flags.
    pub fn resolve(&self, env_threads: Option<&str>) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(t) = env_threads {
            cfg.threads = t
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV} = '{t}' is not a thread count")))?;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        take!(table, delta, quad_a, quad_b, quad_tau, quad_nodes, threads);
        take!(dims, orders, steps, x1, out, plot_out);
        Ok(cfg)
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_main<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match cli.command {
        Command::Table(args) => {
            let env = std::env::var(THREADS_ENV).ok().filter(|_| args.threads.is_none());
            let result = args.resolve(env.as_deref()).and_then(|cfg| {
                let rows = run_table(&cfg)?;
                if cfg.out.is_none() {
                    stdout
                        .write_all(to_csv(&rows).as_bytes())
                        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
                }
                Ok(())
            });
            match result {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "biharm: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Verify { level } => {
            let report = run_verify(level);
            let _ = stdout.write_all(report.render().as_bytes());
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
    }
}
