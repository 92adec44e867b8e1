//! Double-exponential trapezoidal rule for the `t`-integrals and the
//! Hermite-built polynomials `Q_M`, `R_M` that enter the separated kernels.
//!
//! The substitution is
//!
//! ```text
//! t = Φ(u) = exp(ab(u - e^{-u}) + a·exp(b(u - e^{-u})))
//! Φ'(u)   = Φ(u)·ab(1 + e^{-u})(1 + exp(b(u - e^{-u})))
//! ```
//!
//! and the rule samples `u_s = τ s` for `s` in `s_begin..s_end`. Node data is
//! kept in log form as well because `t` reaches `e^{85}` at the default
//! upper end and overflows quickly past it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::{BasisOrder, Dimension};
use crate::specfun::hermite_table;

/// Trapezoidal rule in `u` after the double-exponential substitution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DEQuadrature {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub s_begin: i64,
    pub s_end: i64,
}

impl Default for DEQuadrature {
    fn default() -> Self {
        Self {
            a: 6.0,
            b: 5.0,
            tau: 0.003,
            s_begin: 0,
            s_end: 300,
        }
    }
}

impl DEQuadrature {
    pub fn new(a: f64, b: f64, tau: f64, s_begin: i64, s_end: i64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(a) && ok(b) && ok(tau)) || s_begin >= s_end {
            return Err(Error::InvalidParameter(format!(
                "DE rule needs a, b, tau > 0 and s_begin < s_end; got a = {a}, b = {b}, tau = {tau}, s = {s_begin}..{s_end}"
            )));
        }
        Ok(Self {
            a,
            b,
            tau,
            s_begin,
            s_end,
        })
    }

    /// Nodes `s = 0..nodes` with the given `a`, `b`, `τ`.
    pub fn with_nodes(a: f64, b: f64, tau: f64, nodes: usize) -> Result<Self> {
        Self::new(a, b, tau, 0, nodes as i64)
    }

    /// Same `u`-interval with half the step and twice the nodes.
    pub fn refined(&self) -> Self {
        Self {
            tau: self.tau / 2.0,
            s_begin: 2 * self.s_begin,
            s_end: 2 * self.s_end - 1,
            ..*self
        }
    }

    pub fn len(&self) -> usize {
        (self.s_end - self.s_begin) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.s_end <= self.s_begin
    }

    pub fn nodes(&self) -> Vec<DENode> {
        (self.s_begin..self.s_end)
            .map(|s| DENode::at(self.tau * s as f64, self))
            .collect()
    }
}

/// One node of the rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DENode {
    pub u: f64,
    /// `t = Φ(u)`.
    pub t: f64,
    /// `Φ'(u)`.
    pub dt: f64,
    pub ln_t: f64,
    pub ln_dt: f64,
    /// `τ Φ(u) Φ'(u)`, the discrete `t dt`.
    pub weight: f64,
    /// `(1 + t)^{-1/2}`.
    pub damp: f64,
    pub tau: f64,
}

impl DENode {
    fn at(u: f64, rule: &DEQuadrature) -> Self {
        let (ln_t, ln_dt) = de_transform_ln(u, rule.a, rule.b);
        let t = ln_t.exp();
        let dt = ln_dt.exp();
        Self {
            u,
            t,
            dt,
            ln_t,
            ln_dt,
            weight: (rule.tau.ln() + ln_t + ln_dt).exp(),
            damp: (-0.5 * ln_1p_exp(ln_t)).exp(),
            tau: rule.tau,
        }
    }

    /// `ln τΦΦ'`.
    #[inline]
    pub fn ln_weight(&self) -> f64 {
        self.tau.ln() + self.ln_t + self.ln_dt
    }

    /// `ln(1 + t)`, exact for tiny and huge `t` alike.
    #[inline]
    pub fn ln_1pt(&self) -> f64 {
        ln_1p_exp(self.ln_t)
    }
}

/// `ln(1 + e^x)`.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 36.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `(Φ(u), Φ'(u))`; both become `+∞` once past the binary64 range.
pub fn de_transform(u: f64, a: f64, b: f64) -> (f64, f64) {
    let (ln_t, ln_dt) = de_transform_ln(u, a, b);
    (ln_t.exp(), ln_dt.exp())
}

/// `(ln Φ(u), ln Φ'(u))`.
pub fn de_transform_ln(u: f64, a: f64, b: f64) -> (f64, f64) {
    let inner = b * (u - (-u).exp());
    let ln_t = a * inner + a * inner.exp();
    let ln_ratio = (a * b).ln() + (-u).exp().ln_1p() + ln_1p_exp(inner);
    (ln_t, ln_t + ln_ratio)
}

/// Coefficients `(-1)^k / (k! 4^k)`, `k < M`.
fn series_coefficients(m: u32) -> impl Iterator<Item = f64> {
    let mut c = 1.0;
    (0..m).map(move |k| {
        if k > 0 {
            c *= -1.0 / (4.0 * k as f64);
        }
        c
    })
}

/// `Q_M(x, t) = Σ_{k<M} (-1)^k/(k! 4^k) (1+t)^{-k} H_{2k}(x/√(1+t))`.
pub fn qm_poly(order: BasisOrder, x: f64, t: f64) -> f64 {
    let mut buf = Vec::new();
    qm_poly_buf(order, x, t, &mut buf)
}

pub(crate) fn qm_poly_buf(order: BasisOrder, x: f64, t: f64, buf: &mut Vec<f64>) -> f64 {
    let m = order.get();
    if m == 1 {
        return 1.0;
    }
    let inv = 1.0 / (1.0 + t);
    let y = x * inv.sqrt();
    hermite_table(2 * m as usize - 1, y, buf);
    let mut pow = 1.0;
    let mut sum = 0.0;
    for (k, c) in series_coefficients(m).enumerate() {
        sum += c * pow * buf[2 * k];
        pow *= inv;
    }
    sum
}

/// `R_M(x, t) = Σ_{k<M} (-1)^k/(k! 4^k) (1+t)^{-k} S_{2k}(x/√(1+t))` with
/// `S_j(y) = y² H_j(y) - 2j y H_{j-1}(y) + j(j-1) H_{j-2}(y)`.
pub fn rm_poly(order: BasisOrder, x: f64, t: f64) -> f64 {
    let mut buf = Vec::new();
    rm_poly_buf(order, x, t, &mut buf)
}

pub(crate) fn rm_poly_buf(order: BasisOrder, x: f64, t: f64, buf: &mut Vec<f64>) -> f64 {
    let m = order.get();
    let inv = 1.0 / (1.0 + t);
    let y = x * inv.sqrt();
    hermite_table(2 * m as usize - 1, y, buf);
    let mut pow = 1.0;
    let mut sum = 0.0;
    for (k, c) in series_coefficients(m).enumerate() {
        let j = 2 * k;
        let mut s = y * y * buf[j];
        if j >= 1 {
            s -= 2.0 * j as f64 * y * buf[j - 1];
        }
        if j >= 2 {
            s += (j * (j - 1)) as f64 * buf[j - 2];
        }
        sum += c * pow * s;
        pow *= inv;
    }
    sum
}

/// Relative share of the accumulated sum a rule's last node may carry.
/// `Q_M` for `M <= 4` written out in powers of `x` and `1/(1+t)`.
///
/// # Panics
/// If `m` is not in `1..=4`.
pub fn qm_explicit(m: u32, x: f64, t: f64) -> f64 {
    let s = 1.0 + t;
    let q1 = 1.0;
    let q2 = -x * x / (s * s) + 1.0 / (2.0 * s) + 1.0;
    let q3 = q2 + x.powi(4) / (2.0 * s.powi(4)) - 3.0 * x * x / (2.0 * s.powi(3)) + 3.0 / (8.0 * s * s);
    let q4 = q3 - x.powi(6) / (6.0 * s.powi(6)) + 5.0 * x.powi(4) / (4.0 * s.powi(5))
        - 15.0 * x * x / (8.0 * s.powi(4))
        + 5.0 / (16.0 * s.powi(3));
    [q1, q2, q3, q4][m as usize - 1]
}

/// `R_M` for `M <= 4` written out in powers of `x` and `1/(1+t)`.
///
/// # Panics
/// If `m` is not in `1..=4`.
pub fn rm_explicit(m: u32, x: f64, t: f64) -> f64 {
    let s = 1.0 + t;
    let r1 = x * x / s;
    let r2 = -x.powi(4) / s.powi(3) + x * x / s + 5.0 * x * x / (2.0 * s * s) - 1.0 / (2.0 * s);
    let r3 = r2 + x.powi(6) / (2.0 * s.powi(5)) - 7.0 * x.powi(4) / (2.0 * s.powi(4))
        + 39.0 * x * x / (8.0 * s.powi(3))
        - 3.0 / (4.0 * s * s);
    let r4 = r3 - x.powi(8) / (6.0 * s.powi(7)) + 9.0 * x.powi(6) / (4.0 * s.powi(6))
        - 65.0 * x.powi(4) / (8.0 * s.powi(5))
        + 125.0 * x * x / (16.0 * s.powi(4))
        - 15.0 / (16.0 * s.powi(3));
    [r1, r2, r3, r4][m as usize - 1]
}

pub const TAIL_TOLERANCE: f64 = 1e-16;

pub(crate) fn check_tail(last: f64, total: f64) -> Result<()> {
    let ratio = if total == 0.0 {
        if last == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (last / total).abs()
    };
    if ratio > TAIL_TOLERANCE {
        return Err(Error::QuadratureDivergence { ratio });
    }
    Ok(())
}

/// Gaussian potential from its one-dimensional `t`-integral representation:
///
/// * `n >= 5`: `(1/16) ∫₀^∞ e^{-r²/(1+t)} (1+t)^{-n/2} t dt`
/// * `n = 3`: `-(1/8) ∫₀^∞ e^{-r²/(1+t)} [(1+t)^{-3/2} + t r² (1+t)^{-5/2}] dt`
pub fn integral_phi2(n: Dimension, r: f64, rule: &DEQuadrature) -> Result<f64> {
    let nn = n.get();
    if nn == 4 {
        return Err(Error::UnsupportedDimension(4));
    }
    let z = r * r;
    let half_n = nn as f64 / 2.0;
    let mut acc = crate::kernels::KahanSum::default();
    let mut last = 0.0;
    for node in rule.nodes() {
        let l1 = node.ln_1pt();
        let gauss = -z * (-l1).exp();
        let term = if nn == 3 {
            let base = node.tau.ln() + node.ln_dt + gauss;
            (base - 1.5 * l1).exp() + z * (base + node.ln_t - 2.5 * l1).exp()
        } else {
            (node.ln_weight() + gauss - half_n * l1).exp()
        };
        acc.add(term);
        last = term;
    }
    let total = acc.sum();
    check_tail(last, total)?;
    Ok(if nn == 3 { -total / 8.0 } else { total / 16.0 })
}

/// Tensor weight `a_k^{(M)}` of the grid convolution:
///
/// `(πD)^{-n/2} τ Σ_s Φ Φ' (1+t)^{-n/2} Π_j e^{-k_j²/(D(1+t))} Q_M(k_j/√D, t)`.
///
/// The `(1+t)^{-n/2}` factor belongs to the tensor kernel even though it is
/// easy to lose when the cubature is written out; without it the sum diverges.
pub fn tensor_weight(k: &[i64], order: BasisOrder, d: f64, rule: &DEQuadrature) -> Result<f64> {
    let n = k.len();
    if n < 5 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!("D must be positive, got {d}")));
    }
    let mut buf = Vec::new();
    let mut acc = crate::kernels::KahanSum::default();
    let mut last = 0.0;
    let mut abs_total = 0.0;
    let sqrt_d = d.sqrt();
    for node in rule.nodes() {
        let l1 = node.ln_1pt();
        let inv = (-l1).exp();
        // per dimension: (πD(1+t))^{-1/2} e^{-k²/(D(1+t))} Q_M(k/√D, t)
        let mut ln_mag = node.ln_weight();
        let mut sign = 1.0;
        for &kj in k {
            let kf = kj as f64;
            let q = qm_poly_buf(order, kf / sqrt_d, node.t, &mut buf);
            if q == 0.0 {
                sign = 0.0;
                break;
            }
            sign *= q.signum();
            ln_mag += -0.5 * ((PI * d).ln() + l1) - kf * kf / d * inv + q.abs().ln();
        }
        let term = if sign == 0.0 || ln_mag < -745.0 {
            0.0
        } else {
            sign * ln_mag.exp()
        };
        acc.add(term);
        abs_total += term.abs();
        last = term;
    }
    check_tail(last, abs_total)?;
    Ok(acc.sum())
}
