//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every verdict is printed. The
//! process exits non-zero when a criterion fails, except for failures listed
//! as documented gaps (see the README), which are still reported as FAIL.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use biharm_core::cli::{compute_job, Job};
use biharm_core::engine::{sample_factor, saturation_epsilon0};
use biharm_core::kernels::{direct_cubature, phi2, phi2m};
use biharm_core::quad::{integral_phi2, qm_explicit, qm_poly, rm_explicit, rm_poly};
use biharm_core::specfun::gen_laguerre;
use biharm_core::{
    evaluate, evaluate_symmetric, AxisPoint, BasisOrder, DEQuadrature, Dimension, GridSpec,
    IsotropicGaussianPolyDensity, SeparatedDensity,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Verdict {
    passed: bool,
    detail: String,
    /// Set when the only misses are a known, explained gap.
    gap: Option<String>,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
            gap: None,
        }
    }
}

fn dim(n: usize) -> Dimension {
    Dimension::new(n).unwrap()
}

fn ord(m: u32) -> BasisOrder {
    BasisOrder::new(m).unwrap()
}

fn within_factor_two(got: f64, want: f64) -> bool {
    got >= want / 2.0 && got <= want * 2.0
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn job_error(n: usize, m: u32, step: u32, x1: f64) -> f64 {
    let job = Job {
        n,
        order: m,
        step,
        x1,
        k1: (x1 * step as f64).round() as i64,
    };
    let v = compute_job(&job, 5.0, 6.5, &DEQuadrature::default()).expect("cubature");
    (v - job.exact()).abs()
}

fn criterion_1() -> Verdict {
    const STEPS: [u32; 5] = [10, 20, 40, 80, 160];
    // reference errors and rates, n = 5, by order
    let table: [(u32, [f64; 5], [f64; 4]); 4] = [
        (
            4,
            [0.15e-5, 0.70e-8, 0.29e-10, 0.15e-12, 0.38e-13],
            [7.77, 7.94, 7.55, 2.02],
        ),
        (
            3,
            [0.30e-4, 0.53e-6, 0.86e-8, 0.13e-9, 0.21e-11],
            [5.83, 5.96, 5.99, 5.97],
        ),
        (
            2,
            [0.74e-3, 0.49e-4, 0.31e-5, 0.20e-6, 0.12e-7],
            [3.91, 3.98, 3.99, 4.00],
        ),
        (
            1,
            [0.26e-1, 0.68e-2, 0.17e-2, 0.43e-3, 0.11e-3],
            [1.95, 1.99, 2.00, 2.00],
        ),
    ];
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut floor_only = true;
    let mut worst_rate: f64 = 0.0;
    for (m, errs, rates) in table {
        let got: Vec<f64> = STEPS.iter().map(|&s| job_error(5, m, s, 1.0)).collect();
        for (i, (&g, &w)) in got.iter().zip(&errs).enumerate() {
            if !within_factor_two(g, w) {
                misses.push(format!("M={m} 1/h={} err {g:.2e} vs {w:.2e}", STEPS[i]));
                // better than a reference value that is itself a roundoff floor
                floor_only &= g < w && w < 1e-12;
            }
        }
        for i in 1..5 {
            if got[i] > 1e-12 && errs[i] > 1e-12 {
                let rate = (got[i - 1] / got[i]).log2();
                let d = (rate - rates[i - 1]).abs();
                worst_rate = worst_rate.max(d);
                if d > 0.15 {
                    misses.push(format!("M={m} 1/h={} rate {rate:.2} vs {:.2}", STEPS[i], rates[i - 1]));
                    floor_only = false;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let on_time = secs < 30.0;
    let mut v = Verdict::new(
        misses.is_empty() && on_time,
        format!("worst rate deviation {worst_rate:.3}, {secs:.1} s"),
    );
    if !misses.is_empty() {
        v.detail = format!("{}; misses: {}", v.detail, misses.join("; "));
        if floor_only && on_time {
            v.gap = Some("error falls below the reference roundoff floor".into());
        }
    }
    v
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let e1 = job_error(50_000, 4, 40, 1.0);
    let coarse = job_error(10_000_000, 4, 20, 1.0);
    let e2 = job_error(10_000_000, 4, 40, 1.0);
    let rate = (coarse / e2).log2();
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        within_factor_two(e1, 0.47e-6) && within_factor_two(e2, 0.95e-4) && (rate - 7.91).abs() <= 0.2 && secs < 300.0,
        format!("n=5e4: {e1:.3e} (0.47e-6); n=1e7: {e2:.3e} (0.95e-4), rate {rate:.3} (7.91); {secs:.1} s"),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, want) in [
        (5, 0.129e-9),
        (100, 0.258e-8),
        (10_000, 0.258e-6),
        (1_000_000, 0.258e-4),
    ] {
        // exact value at the origin is 1, so absolute and relative errors coincide
        let got = job_error(n, 4, 40, 0.0);
        ok &= within_factor_two(got, want);
        parts.push(format!("n={n}: {got:.3e} ({want:.3e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < 300.0, format!("{}; {secs:.1} s", parts.join(", ")))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let m4 = job_error(3, 4, 10, 1.0);
    let rates = |m: u32| -> Vec<f64> {
        let errs: Vec<f64> = [10, 20, 40, 80, 160].iter().map(|&s| job_error(3, m, s, 1.0)).collect();
        errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    };
    let r1 = rates(1);
    let r2 = rates(2);
    let ok1 = r1
        .iter()
        .zip([1.96, 1.99, 2.00, 2.00])
        .all(|(g, w)| (g - w).abs() <= 0.05);
    let ok2 = r2
        .iter()
        .zip([3.92, 3.98, 3.99, 4.00])
        .all(|(g, w)| (g - w).abs() <= 0.05);
    let secs = start.elapsed().as_secs_f64();
    let fmt = |r: &[f64]| r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ");
    Verdict::new(
        within_factor_two(m4, 0.236e-6) && ok1 && ok2 && secs < 60.0,
        format!(
            "M=4 1/h=10: {m4:.3e} (0.236e-6); M=1 rates {}; M=2 rates {}; {secs:.1} s",
            fmt(&r1),
            fmt(&r2)
        ),
    )
}

fn criterion_5() -> Verdict {
    let rule = DEQuadrature::default();
    let mut worst: f64 = 0.0;
    for n in [5, 6, 10, 100] {
        for r in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let q = integral_phi2(dim(n), r, &rule).expect("quadrature");
            worst = worst.max(rel(q, phi2(dim(n), r)));
        }
    }
    Verdict::new(worst < 1e-11, format!("max relative deviation {worst:.3e} (< 1e-11)"))
}

fn criterion_6() -> Verdict {
    let rule = DEQuadrature::default();
    // radial and tensor bases coincide for M = 1; narrow Gaussian keeps the 5-D lattice sum small
    let grid = GridSpec::new(0.1, 5.0, 2.1).unwrap();
    let (lo, g) = sample_factor(&grid, |x| (-9.0 * x * x).exp());
    let dens = SeparatedDensity::product(lo, 1.0, vec![g; 5]).unwrap();
    let f = |x: &[f64]| (-9.0 * x.iter().map(|v| v * v).sum::<f64>()).exp();
    let points: Vec<Vec<i64>> = vec![
        vec![0, 0, 0, 0, 0],
        vec![1, 0, 0, 0, 0],
        vec![2, -1, 0, 1, 0],
        vec![-3, 2, 1, 0, -2],
        vec![5, 0, -4, 2, 1],
    ];
    let tensor = evaluate(&dens, &points, &grid, ord(1), &rule).unwrap();
    let mut worst_direct: f64 = 0.0;
    for (k, t) in points.iter().zip(&tensor) {
        let x: Vec<f64> = k.iter().map(|&v| 0.1 * v as f64).collect();
        let d = direct_cubature(f, &grid, ord(1), &x).unwrap().value;
        worst_direct = worst_direct.max(rel(t.value, d));
    }

    let grid = GridSpec::with_step(0.1).unwrap();
    let mut worst_sym: f64 = 0.0;
    for n in [5, 6, 8] {
        let iso = IsotropicGaussianPolyDensity::test_density(n).unwrap();
        let sep = iso.to_separated(&grid).unwrap();
        for m in [1, 4] {
            for k1 in [0, 10, 23] {
                let mut k = vec![0; n];
                k[0] = k1;
                let g = evaluate(&sep, &[k], &grid, ord(m), &rule).unwrap()[0].value;
                let s = evaluate_symmetric(&iso, AxisPoint { k1 }, &grid, ord(m), &rule)
                    .unwrap()
                    .value;
                worst_sym = worst_sym.max(rel(s, g));
            }
        }
    }
    Verdict::new(
        worst_direct < 1e-10 && worst_sym < 1e-12,
        format!("tensor vs direct {worst_direct:.3e} (< 1e-10); symmetric vs generic {worst_sym:.3e} (< 1e-12)"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: f64 = rng.random_range(-3.0..3.0);
        let t: f64 = rng.random_range(0.0..10.0);
        for m in 1..=4 {
            worst = worst.max(rel(qm_poly(ord(m), x, t), qm_explicit(m, x, t)));
            worst = worst.max(rel(rm_poly(ord(m), x, t), rm_explicit(m, x, t)));
        }
    }
    Verdict::new(
        worst < 1e-12,
        format!("max relative deviation {worst:.3e} over 100 points (< 1e-12)"),
    )
}

fn criterion_8() -> Verdict {
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
    Verdict::new(worst < 1e-13, format!("max absolute deviation {worst:.3e} (< 1e-13)"))
}

fn criterion_9() -> Verdict {
    let eps = saturation_epsilon0(ord(1), 5.0, 5, 3).unwrap().epsilon0;
    let leading = 10.0 * (-5.0 * PI * PI).exp();
    Verdict::new(
        eps < 1e-19,
        format!("epsilon0 = {eps:.3e} (< 1e-19; leading term {leading:.3e})"),
    )
}

fn criterion_10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_biharm");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(bin)
            .args(["table", "--table", "4", "--threads", "2", "--out"])
            .arg(&path)
            .env_remove("BIHARM_THREADS")
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
    Verdict::new(
        same,
        format!("two table-4 runs, {} bytes each, identical: {same}", outputs[0].len()),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        ("table preset 2, n = 5", criterion_1),
        ("large n via symmetric path", criterion_2),
        ("table preset 1", criterion_3),
        ("table preset 4, n = 3", criterion_4),
        ("quadrature vs closed form", criterion_5),
        ("oracle equivalence", criterion_6),
        ("polynomial fixtures", criterion_7),
        ("ladder identity", criterion_8),
        ("saturation level", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut hard_failures = 0;
    let total = Instant::now();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        let status = if v.passed { "PASS" } else { "FAIL" };
        match (&v.gap, v.passed) {
            (Some(gap), false) => println!("{status} [{}] {name}: {} [documented gap: {gap}]", i + 1, v.detail),
            (_, true) => println!("{status} [{}] {name}: {}", i + 1, v.detail),
            (None, false) => {
                hard_failures += 1;
                println!("{status} [{}] {name}: {}", i + 1, v.detail);
            }
        }
    }
    let elapsed: Duration = total.elapsed();
    println!("acceptance finished in {:.1} s", elapsed.as_secs_f64());
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
