//! Scalar special functions used by the closed-form kernels.
//!
//! Everything here is plain binary64. `erf` and the Gamma function come from
//! `libm`; the exponential integral, the lower incomplete Gamma function and
//! Kummer's function are summed here because the kernels need control over
//! their branches near the removable singularities.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Stopping rule for the series and continued fractions in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalAccuracy {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for EvalAccuracy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-15,
            max_terms: 500,
        }
    }
}

impl EvalAccuracy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || max_terms == 0 {
            return Err(Error::InvalidParameter(format!(
                "EvalAccuracy needs rel_tol > 0 and max_terms >= 1, got {rel_tol}, {max_terms}"
            )));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `erf(x) / x`, continuous at the origin.
pub fn erf_over_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        std::f64::consts::FRAC_2_SQRT_PI * (1.0 - x * x / 3.0)
    } else {
        erf(x) / x
    }
}

/// Exponential integral `E1(x) = ∫ₓ^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    exp_integral_e1_with(x, &EvalAccuracy::default())
}

pub fn exp_integral_e1_with(x: f64, acc: &EvalAccuracy) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("exp_integral_e1", format!("x = {x} must be positive")));
    }
    if x <= 1.0 {
        // -γ - ln x + Σ_{k≥1} (-1)^{k+1} x^k / (k·k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..=acc.max_terms {
            term *= -x / k as f64;
            let contrib = -term / k as f64;
            sum += contrib;
            if contrib.abs() <= acc.rel_tol * sum.abs() {
                return Ok(-EULER_GAMMA - x.ln() + sum);
            }
        }
        Err(Error::NonConvergence {
            func: "exp_integral_e1",
            terms: acc.max_terms,
        })
    } else {
        // modified Lentz on e^{-x} / (x + 1 - 1²/(x + 3 - 2²/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=acc.max_terms {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() <= acc.rel_tol {
                return Ok(h * (-x).exp());
            }
        }
        Err(Error::NonConvergence {
            func: "exp_integral_e1",
            terms: acc.max_terms,
        })
    }
}

/// Gamma function.
#[inline]
pub fn gamma(a: f64) -> f64 {
    libm::tgamma(a)
}

/// Lower incomplete Gamma function `γ(a, x) = ∫₀ˣ t^{a-1} e^{-t} dt`.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let acc = EvalAccuracy::default();
    if x < a + 1.0 {
        let s = gamma_series(a, x, &acc)?;
        Ok((a * x.ln() - x).exp() * s)
    } else {
        let cf = upper_gamma_cf(a, x, &acc)?;
        Ok(gamma(a) - (a * x.ln() - x).exp() * cf)
    }
}

/// `γ(a, x) / x^a`, which stays finite (→ 1/a) as `x → 0`.
pub fn lower_incomplete_gamma_scaled(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    let acc = EvalAccuracy::default();
    if x < a + 1.0 {
        Ok((-x).exp() * gamma_series(a, x, &acc)?)
    } else {
        let cf = upper_gamma_cf(a, x, &acc)?;
        Ok((libm::lgamma(a) - a * x.ln()).exp() - (-x).exp() * cf)
    }
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(
            "lower_incomplete_gamma",
            format!("need a > 0 and x >= 0, got a = {a}, x = {x}"),
        ));
    }
    Ok(())
}

/// Σ_{k≥0} x^k / (a (a+1) ... (a+k)).
fn gamma_series(a: f64, x: f64, acc: &EvalAccuracy) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..acc.max_terms {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() <= acc.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        func: "lower_incomplete_gamma",
        terms: acc.max_terms,
    })
}

/// Continued fraction h with Γ(a, x) = e^{-x} x^a h.
fn upper_gamma_cf(a: f64, x: f64, acc: &EvalAccuracy) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=acc.max_terms {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= acc.rel_tol {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        func: "lower_incomplete_gamma",
        terms: acc.max_terms,
    })
}

/// Kummer's confluent hypergeometric function ₁F₁(a; c; z).
///
/// Negative arguments go through Kummer's transformation
/// `₁F₁(a; c; z) = e^z ₁F₁(c - a; c; -z)` so that the summed series has
/// non-alternating terms whenever `c > a`.
pub fn kummer_1f1(a: f64, c: f64, z: f64) -> Result<f64> {
    kummer_1f1_with(a, c, z, &EvalAccuracy::default())
}

pub fn kummer_1f1_with(a: f64, c: f64, z: f64, acc: &EvalAccuracy) -> Result<f64> {
    if c <= 0.0 && c == c.round() {
        return Err(Error::domain(
            "kummer_1f1",
            format!("c = {c} is a non-positive integer"),
        ));
    }
    if !z.is_finite() || !a.is_finite() || !c.is_finite() {
        return Err(Error::domain("kummer_1f1", "non-finite argument"));
    }
    if z < 0.0 {
        Ok(z.exp() * kummer_series(c - a, c, -z, acc)?)
    } else {
        kummer_series(a, c, z, acc)
    }
}

fn kummer_series(a: f64, c: f64, z: f64, acc: &EvalAccuracy) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..acc.max_terms {
        let kf = k as f64;
        term *= (a + kf) / (c + kf) * z / (kf + 1.0);
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Past the hump the ratio is below one and the remaining tail is
        // bounded by the current term.
        let ratio = ((a + kf + 1.0) / (c + kf + 1.0) * z / (kf + 2.0)).abs();
        if ratio < 1.0 && term.abs() <= acc.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        func: "kummer_1f1",
        terms: acc.max_terms,
    })
}

/// Physicists' Hermite polynomial `H_k(x)`.
pub fn hermite(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for j in 1..k {
        let next = 2.0 * x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x), …, H_{len-1}(x)` in one pass.
pub fn hermite_table(len: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    out.push(1.0);
    if len > 1 {
        out.push(2.0 * x);
    }
    for j in 1..len.saturating_sub(1) {
        let next = 2.0 * x * out[j] - 2.0 * j as f64 * out[j - 1];
        out.push(next);
    }
}

/// Generalized Laguerre polynomial `L_k^{(γ)}(y)`.
pub fn gen_laguerre(k: usize, gamma: f64, y: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + gamma - y;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + gamma - y) * cur - (jf + gamma) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// erf by its Maclaurin series, summed until the terms stop registering.
    fn erf_maclaurin(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut pow = x; // x^{2k+1} / k!
        for k in 0..200 {
            let term = pow / (2 * k + 1) as f64 * if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += term;
            pow *= x * x / (k + 1) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(1.3), -erf(-1.3));
        let oracle = erf_maclaurin(1.0);
        assert_relative_eq!(oracle, 0.8427007929497149, max_relative = 1e-15);
        assert_relative_eq!(erf(1.0), oracle, max_relative = 1e-15);
        assert_relative_eq!(erf(0.37), erf_maclaurin(0.37), max_relative = 1e-15);
    }

    #[test]
    fn erf_over_x_is_continuous() {
        assert_relative_eq!(erf_over_x(0.0), 2.0 / PI.sqrt(), max_relative = 1e-16);
        assert_relative_eq!(erf_over_x(1e-9), 2.0 / PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(erf_over_x(2e-8), erf(2e-8) / 2e-8, max_relative = 1e-15);
    }

    #[test]
    fn e1_values() {
        // independent oracle: the log-plus-series form summed naively
        let series = |x: f64| {
            let mut s = 0.0;
            let mut fact = 1.0;
            for k in 1..60 {
                fact *= k as f64;
                s += (-x).powi(k) / (k as f64 * fact);
            }
            -EULER_GAMMA - x.ln() - s
        };
        assert_relative_eq!(series(1.0), 0.21938393439552029, max_relative = 1e-15);
        assert_relative_eq!(exp_integral_e1(1.0).unwrap(), 0.21938393439552029, max_relative = 1e-15);
        // continued-fraction branch against the same series (still fine at x = 2)
        assert_relative_eq!(exp_integral_e1(2.0).unwrap(), series(2.0), max_relative = 1e-13);
        let e5 = exp_integral_e1(5.0).unwrap();
        assert!(e5 > 0.0 && e5 < (-5.0f64).exp() / 5.0);
        let small = exp_integral_e1(1e-8).unwrap();
        assert!((small - (-EULER_GAMMA - 1e-8f64.ln())).abs() < 1e-7);
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(matches!(exp_integral_e1(0.0), Err(Error::Domain { .. })));
        assert!(matches!(exp_integral_e1(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn incomplete_gamma_values() {
        let x = 0.7;
        assert_relative_eq!(
            lower_incomplete_gamma(0.5, x * x).unwrap(),
            PI.sqrt() * erf(x),
            max_relative = 1e-14
        );
        // integer order: (k-1)! (1 - e^{-x} Σ_{j<k} x^j/j!)
        let expect = 2.0 * (1.0 - (-2.0f64).exp() * (1.0 + 2.0 + 2.0));
        assert_relative_eq!(lower_incomplete_gamma(3.0, 2.0).unwrap(), expect, max_relative = 1e-14);
        assert_eq!(lower_incomplete_gamma(2.5, 0.0).unwrap(), 0.0);
        assert!((lower_incomplete_gamma(0.5, 36.0).unwrap() / PI.sqrt() - 1.0).abs() <= 1e-15);
        assert!(lower_incomplete_gamma(0.0, 1.0).is_err());
        assert!(lower_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn scaled_gamma_limits() {
        assert_relative_eq!(lower_incomplete_gamma_scaled(1.5, 0.0).unwrap(), 1.0 / 1.5);
        for &(a, x) in &[(0.5, 0.3), (1.5, 2.0), (4.0, 9.0), (49.0, 16.0), (2.0, 60.0)] {
            let direct = lower_incomplete_gamma(a, x).unwrap() / x.powf(a);
            assert_relative_eq!(
                lower_incomplete_gamma_scaled(a, x).unwrap(),
                direct,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn kummer_values() {
        assert_eq!(kummer_1f1(0.3, 2.0, 0.0).unwrap(), 1.0);
        // ₁F₁(1/2; 3/2; -r²) = √π erf(r) / (2r)
        assert_relative_eq!(
            kummer_1f1(0.5, 1.5, -1.0).unwrap(),
            PI.sqrt() * erf(1.0) / 2.0,
            max_relative = 1e-15
        );
        // -¼ ₁F₁(-1/2; 3/2; -1) equals the erf form of the n = 3 Gaussian potential at r = 1
        let v = kummer_1f1(-0.5, 1.5, -1.0).unwrap();
        let phi = -(-1.0f64).exp() / 8.0 - PI.sqrt() / 16.0 * erf(1.0) * 3.0;
        assert_relative_eq!(-0.25 * v, phi, max_relative = 1e-14);
        assert!(matches!(kummer_1f1(1.0, -2.0, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn kummer_matches_plain_series_for_moderate_z() {
        let plain = |a: f64, c: f64, z: f64| {
            let (mut t, mut s) = (1.0, 1.0);
            for k in 0..200 {
                let kf = k as f64;
                t *= (a + kf) / (c + kf) * z / (kf + 1.0);
                s += t;
            }
            s
        };
        for &(a, c, z) in &[(0.5, 2.5, -0.8), (-1.5, 3.0, -2.0), (1.2, 4.5, 1.7), (3.0, 5.5, -3.0)] {
            assert_relative_eq!(kummer_1f1(a, c, z).unwrap(), plain(a, c, z), max_relative = 1e-12);
        }
    }

    #[test]
    fn kummer_reports_nonconvergence() {
        let acc = EvalAccuracy::new(1e-15, 3).unwrap();
        assert!(matches!(
            kummer_1f1_with(2.0, 2.5, 30.0, &acc),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.3), 1.0);
        assert_eq!(hermite(1, 2.5), 5.0);
        assert_eq!(hermite(2, 1.0), 2.0);
        let mut tab = Vec::new();
        hermite_table(9, 0.7, &mut tab);
        for (k, &v) in tab.iter().enumerate() {
            assert_eq!(v, hermite(k, 0.7));
        }
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(gen_laguerre(0, 0.4, 3.0), 1.0);
        assert_relative_eq!(gen_laguerre(1, 1.5, 2.0), 1.0 + 1.5 - 2.0);
        assert_relative_eq!(gen_laguerre(2, 0.0, 1.0), -0.5, max_relative = 1e-15);
    }

    /// Σ_i (-1)^i C(k+γ, k-i) y^i / i!
    fn laguerre_sum(k: usize, g: f64, y: f64) -> f64 {
        let binom = |top: f64, j: usize| (0..j).fold(1.0, |acc, i| acc * (top - i as f64) / (i + 1) as f64);
        let mut fact = 1.0;
        let mut s = 0.0;
        for i in 0..=k {
            if i > 0 {
                fact *= i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom(k as f64 + g, k - i) * y.powi(i as i32) / fact;
        }
        s
    }

    proptest! {
        #[test]
        fn erf_is_odd_monotone_bounded(x in -6.0f64..6.0, dx in 1e-3f64..1.0) {
            prop_assert_eq!(erf(-x), -erf(x));
            prop_assert!(erf(x).abs() <= 1.0);
            prop_assert!(erf(x + dx) >= erf(x));
        }

        #[test]
        fn kummer_transformation(a in -2.0f64..2.0, c in 1.0f64..6.0, z in -10.0f64..10.0) {
            let lhs = kummer_1f1(a, c, z).unwrap();
            let rhs = z.exp() * kummer_1f1(c - a, c, -z).unwrap();
            // the series cancels when a < 0; bound by the sum of absolute terms
            let cond = kummer_1f1(a.abs(), c, z.abs()).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(cond);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn hermite_derivative(k in 1usize..=8, x in -2.0f64..2.0) {
            let step = 1e-5;
            let fd = (hermite(k, x + step) - hermite(k, x - step)) / (2.0 * step);
            let exact = 2.0 * k as f64 * hermite(k - 1, x);
            let scale = exact.abs().max(hermite(k, x).abs()).max(1.0);
            prop_assert!((fd - exact).abs() <= 1e-7 * scale, "k={} fd={} exact={}", k, fd, exact);
        }

        #[test]
        fn laguerre_matches_binomial_sum(k in 0usize..=6, g in -0.9f64..4.0, y in 0.0f64..8.0) {
            let a = gen_laguerre(k, g, y);
            let b = laguerre_sum(k, g, y);
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} vs {}", a, b);
        }

        #[test]
        fn incomplete_gamma_monotone(a in 0.2f64..8.0, x in 0.0f64..30.0, dx in 0.01f64..2.0) {
            let lo = lower_incomplete_gamma(a, x).unwrap();
            let hi = lower_incomplete_gamma(a, x + dx).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-14));
        }
    }
}
