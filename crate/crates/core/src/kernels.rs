//! Closed-form biharmonic potentials of the radial generating functions and
//! the direct lattice-sum cubature built from them.
//!
//! `phi2(n, r)` is the potential of `e^{-|x|²}` and `phi2m(n, M, r)` the
//! potential of `L_{M-1}^{(n/2)}(|x|²) e^{-|x|²}`, both as functions of
//! `r = |x|`. The direct cubature is exact lattice summation and exists as an
//! oracle for the tensor engine in small dimensions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::{
    erf, erf_over_x, exp_integral_e1, gen_laguerre, kummer_1f1, lower_incomplete_gamma_scaled, EULER_GAMMA,
};

/// Space dimension, `n >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("dimension must be >= 3, got {n}")));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    fn half(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// Approximation order `2M` of the generating function, `M >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisOrder(u32);

impl BasisOrder {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("basis order M must be >= 1".into()));
        }
        Ok(Self(m))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

/// Uniform grid `hℤⁿ` with shape parameter `D` and a truncation radius for
/// every lattice sum taken over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub h: f64,
    pub d: f64,
    pub radius: f64,
}

impl GridSpec {
    pub const DEFAULT_D: f64 = 5.0;
    pub const DEFAULT_RADIUS: f64 = 6.5;

    pub fn new(h: f64, d: f64, radius: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(h) && ok(d) && ok(radius)) {
            return Err(Error::InvalidParameter(format!(
                "grid needs h, D, radius > 0; got h = {h}, D = {d}, radius = {radius}"
            )));
        }
        Ok(Self { h, d, radius })
    }

    /// Step `h` with `D = 5` and radius 6.5.
    pub fn with_step(h: f64) -> Result<Self> {
        Self::new(h, Self::DEFAULT_D, Self::DEFAULT_RADIUS)
    }

    /// Largest index `L` with `L·h <= radius`.
    pub fn max_index(&self) -> i64 {
        (self.radius / self.h * (1.0 + 1e-12)).floor() as i64
    }

    /// `(h√D)⁴`, the factor every cubature formula carries.
    pub fn h4d2(&self) -> f64 {
        let s = self.h * self.h * self.d;
        s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Direct,
    Tensor,
    TensorSymmetric,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Direct => "direct",
            Method::Tensor => "tensor",
            Method::TensorSymmetric => "tensor-symmetric",
        }
    }
}

/// One evaluated value of the approximate potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub point: Vec<f64>,
    pub value: f64,
    pub method: Method,
    pub order: u32,
    pub h: f64,
    pub d: f64,
}

/// Potential of the Gaussian `e^{-|x|²}` at `|x| = r`.
pub fn phi2(n: Dimension, r: f64) -> f64 {
    let z = r * r;
    match n.get() {
        3 => -(-z).exp() / 8.0 - (2.0 * z + 1.0) / 16.0 * PI.sqrt() * erf_over_x(r),
        4 => phi2_dim4(z),
        5 => {
            if z < 1.0 {
                // ₁F₁(1/2; 5/2; -z)/12 avoids the 1/z cancellation of the erf form
                kummer_1f1(0.5, 2.5, -z).expect("₁F₁ converges for |z| < 1") / 12.0
            } else {
                let e = (-z).exp() / z;
                (e + PI.sqrt() * erf(r) * (2.0 * z - 1.0) / (2.0 * r * z)) / 16.0
            }
        }
        6 => {
            if z < 1.0 {
                // (e^{-z} - 1 + z)/z² = Σ_{k≥0} (-z)^k/(k+2)!
                let mut term = 0.5;
                let mut sum = term;
                for k in 1..40 {
                    term *= -z / (k + 2) as f64;
                    sum += term;
                    if term.abs() < 1e-17 * sum.abs() {
                        break;
                    }
                }
                sum / 16.0
            } else {
                ((-z).exp() - 1.0 + z) / (16.0 * z * z)
            }
        }
        nn => {
            // ₁F₁((n-4)/2; n/2; -z) reduced through the contiguous relation
            // M(2,c,z) = (z+2-c) M(1,c,z) + (c-1) and M(1,c,z) = (c-1) e^z z^{1-c} γ(c-1,z),
            // which stays finite for large z where the series overflows.
            let c = nn as f64 / 2.0;
            let g = lower_incomplete_gamma_scaled(c - 1.0, z).expect("c - 1 > 0 and z >= 0 for n >= 7");
            ((z + 2.0 - c) * g + (-z).exp()) / (8.0 * (nn as f64 - 4.0))
        }
    }
}

fn phi2_dim4(z: f64) -> f64 {
    if z == 0.0 {
        return (EULER_GAMMA - 1.0) / 16.0;
    }
    if z <= 1.0 {
        // ln z + E1(z) and (e^{-z} - 1)/z folded into one series:
        // γ - 1 + Σ_{k≥1} (-z)^k [1/(k·k!) - 1/(k+1)!]
        let mut pow_fact = 1.0; // (-z)^k / k!
        let mut sum = EULER_GAMMA - 1.0;
        for k in 1..60 {
            let kf = k as f64;
            pow_fact *= -z / kf;
            let term = pow_fact * (1.0 / kf - 1.0 / (kf + 1.0));
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum / 16.0
    } else {
        let e1 = exp_integral_e1(z).expect("z > 1");
        (((-z).exp() - 1.0) / z - z.ln() - e1) / 16.0
    }
}

/// `phi2` through Kummer's function, valid for `n = 3` and `n >= 5`.
pub fn phi2_kummer(n: Dimension, r: f64) -> Result<f64> {
    let nn = n.get();
    if nn == 4 {
        return Err(Error::UnsupportedDimension(4));
    }
    let nf = nn as f64;
    let m = kummer_1f1((nf - 4.0) / 2.0, nf / 2.0, -r * r)?;
    Ok(m / (4.0 * (nf - 2.0) * (nf - 4.0)))
}

/// Potential of `L_{M-1}^{(n/2)}(|x|²) e^{-|x|²}` at `|x| = r`.
pub fn phi2m(n: Dimension, order: BasisOrder, r: f64) -> f64 {
    let base = phi2(n, r);
    let m = order.get();
    if m == 1 {
        return base;
    }
    let z = r * r;
    let a = n.half() - 1.0;
    let g = lower_incomplete_gamma_scaled(a, z).expect("a > 0 and z >= 0");
    base + g / 16.0 + (-z).exp() / 16.0 * laguerre_ladder(m, a, z)
}

/// Σ_{j=0}^{M-3} L_j^{(a)}(z) / ((j+1)(j+2)).
fn laguerre_ladder(m: u32, a: f64, z: f64) -> f64 {
    if m < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..(m - 2) as usize {
        if j == 1 {
            prev = cur;
            cur = 1.0 + a - z;
        } else if j > 1 {
            let jf = (j - 1) as f64;
            let next = ((2.0 * jf + 1.0 + a - z) * cur - (jf + a) * prev) / (jf + 1.0);
            prev = cur;
            cur = next;
        }
        sum += cur / ((j + 1) * (j + 2)) as f64;
    }
    sum
}

/// Radial generating function `π^{-n/2} L_{M-1}^{(n/2)}(r²) e^{-r²}`.
pub fn radial_eta2m(n: Dimension, order: BasisOrder, r: f64) -> f64 {
    let z = r * r;
    PI.powf(-n.half()) * gen_laguerre(order.get() as usize - 1, n.half(), z) * (-z).exp()
}

/// Limits for [`direct_cubature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectBudget {
    pub max_dim: usize,
    /// Upper bound on the bounding-box point count `(2L+1)ⁿ`.
    pub max_points: f64,
}

impl Default for DirectBudget {
    fn default() -> Self {
        Self {
            max_dim: 6,
            max_points: 5e9,
        }
    }
}

/// Direct lattice-sum cubature with the radial basis of order `2M`:
///
/// `(h√D)⁴/(πD)^{n/2} Σ_m f(hm) Φ_{2M}((x - hm)/(h√D))`
///
/// summed over the lattice ball `|hm| <= radius` in lexicographic order with
/// compensated accumulation. `x` may be any point; grid points reuse kernel
/// values by integer squared distance.
pub fn direct_cubature<F>(f: F, grid: &GridSpec, order: BasisOrder, x: &[f64]) -> Result<PotentialSample>
where
    F: Fn(&[f64]) -> f64,
{
    direct_cubature_with(f, grid, order, x, &DirectBudget::default())
}

pub fn direct_cubature_with<F>(
    f: F,
    grid: &GridSpec,
    order: BasisOrder,
    x: &[f64],
    budget: &DirectBudget,
) -> Result<PotentialSample>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let dim = Dimension::new(n)?;
    let l = grid.max_index();
    let box_points = ((2 * l + 1) as f64).powi(n as i32);
    if n > budget.max_dim || box_points > budget.max_points {
        return Err(Error::DimensionTooLarge {
            n,
            points: box_points,
            budget: budget.max_points,
        });
    }

    let scale = grid.h * grid.d.sqrt();
    let on_grid: Option<Vec<i64>> = x
        .iter()
        .map(|&xi| {
            let k = (xi / grid.h).round();
            ((xi / grid.h - k).abs() < 1e-9).then_some(k as i64)
        })
        .collect();

    // Φ at integer squared index distance q, filled lazily.
    let mut table: Vec<f64> = Vec::new();
    let mut kernel_at = |m: &[i64]| -> f64 {
        match &on_grid {
            Some(k) => {
                let q: i64 = k.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                let q = q as usize;
                if q >= table.len() {
                    table.resize(q + 1, f64::NAN);
                }
                if table[q].is_nan() {
                    table[q] = phi2m(dim, order, (q as f64 / grid.d).sqrt());
                }
                table[q]
            }
            None => {
                let r2: f64 = x
                    .iter()
                    .zip(m)
                    .map(|(&xi, &mi)| {
                        let d = (xi - grid.h * mi as f64) / scale;
                        d * d
                    })
                    .sum();
                phi2m(dim, order, r2.sqrt())
            }
        }
    };

    let r_idx2 = (grid.radius / grid.h).powi(2) * (1.0 + 1e-12);
    let mut m = vec![0i64; n];
    let mut y = vec![0.0; n];
    let mut acc = KahanSum::default();
    visit_ball(0, n, l, r_idx2, 0.0, &mut m, &mut |idx: &[i64]| {
        for (yj, &mj) in y.iter_mut().zip(idx) {
            *yj = grid.h * mj as f64;
        }
        let fv = f(&y);
        if fv != 0.0 {
            acc.add(fv * kernel_at(idx));
        }
    });

    let prefactor = grid.h4d2() / (PI * grid.d).powf(n as f64 / 2.0);
    Ok(PotentialSample {
        point: x.to_vec(),
        value: prefactor * acc.sum(),
        method: Method::Direct,
        order: order.get(),
        h: grid.h,
        d: grid.d,
    })
}

/// Lexicographic walk over `{m ∈ ℤⁿ : |m|² <= r2}`.
fn visit_ball(j: usize, n: usize, l: i64, r2: f64, used: f64, m: &mut [i64], visit: &mut dyn FnMut(&[i64])) {
    if j == n {
        visit(m);
        return;
    }
    let rest = r2 - used;
    let lim = (rest.max(0.0).sqrt().floor() as i64).min(l);
    for v in -lim..=lim {
        m[j] = v;
        visit_ball(j + 1, n, l, r2, used + (v * v) as f64, m, visit);
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}
