//! Tensor-product cubature assembled from one-dimensional operations.
//!
//! For a density given as `Σ_p β_p Π_j f_j^{(p)}(x_j)` the cubature at the
//! grid point `hk` is
//!
//! ```text
//! n >= 5:  (h√D)⁴/16 · τ Σ_p β_p Σ_s Φ_s Φ'_s Π_j σ_j^{(p)}(k_j, t_s)
//! n  = 3: -(h√D)⁴/8  · τ Σ_p β_p Σ_s Φ'_s [Π_j σ_j + Φ_s Σ_i ρ_i Π_{j≠i} σ_j]
//! ```
//!
//! with the normalized one-dimensional sums
//!
//! ```text
//! σ(k, t) = (πD(1+t))^{-1/2} Σ_m f(hm) e^{-(k-m)²/(D(1+t))} Q_M((k-m)/√D, t)
//! ```
//!
//! and `ρ` the same sum with `R_M` in place of `Q_M`. Folding `(πD(1+t))^{-1/2}`
//! into every factor keeps each of them O(1), so the n-fold products can be
//! formed in log space even for n in the tens of millions.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::{BasisOrder, Dimension, GridSpec, KahanSum, Method, PotentialSample};
use crate::quad::{check_tail, qm_poly_buf, rm_poly_buf, DENode, DEQuadrature};

/// `e^{-x} < 1e-18` beyond this exponent.
const KERNEL_CUTOFF_EXPONENT: f64 = 41.446_531_673_892_82;

/// Largest admissible boundary term of a 1-D sum, relative to the sum of
/// absolute terms. Samples of `x⁴e^{-x²}` cut at |x| = 6.5 sit a few ulps above zero.
const TRUNCATION_TOLERANCE: f64 = 1e-14;

/// Products of more than this many factors are formed in log space.
const LOG_DOMAIN_DIMENSION: usize = 1000;

/// Rank cap for expanding isotropic densities into explicit separated form.
pub const DEFAULT_RANK_DIMENSION_CAP: usize = 64;

/// One term `β Π_j f_j` of a separated density; `factors[j]` indexes the
/// factor pool of the owning [`SeparatedDensity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedTerm {
    pub weight: f64,
    pub factors: Vec<usize>,
}

/// Rank-P sum of products of one-dimensional grid functions.
///
/// Every factor is sampled on the same index range `index_min..index_min + len`.
/// Factors are pooled so that terms sharing a one-dimensional function share
/// its convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedDensity {
    n: usize,
    index_min: i64,
    pool: Vec<Vec<f64>>,
    terms: Vec<SeparatedTerm>,
}

impl SeparatedDensity {
    pub fn new(n: usize, index_min: i64, pool: Vec<Vec<f64>>, terms: Vec<SeparatedTerm>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if n == 0 {
            return bad("separated density needs n >= 1".into());
        }
        if terms.is_empty() {
            return bad("separated density needs rank >= 1".into());
        }
        let Some(len) = pool.first().map(Vec::len) else {
            return bad("factor pool is empty".into());
        };
        if len == 0 || pool.iter().any(|f| f.len() != len) {
            return bad("all factors must be non-empty and share one index range".into());
        }
        for (p, term) in terms.iter().enumerate() {
            if term.factors.len() != n {
                return bad(format!("term {p} has {} factors, expected {n}", term.factors.len()));
            }
            if let Some(&id) = term.factors.iter().find(|&&id| id >= pool.len()) {
                return bad(format!("term {p} references factor {id}, pool has {}", pool.len()));
            }
        }
        Ok(Self {
            n,
            index_min,
            pool,
            terms,
        })
    }

    /// Rank-1 density `β Π_j f_j` with each factor given explicitly.
    pub fn product(index_min: i64, weight: f64, factors: Vec<Vec<f64>>) -> Result<Self> {
        let n = factors.len();
        let term = SeparatedTerm {
            weight,
            factors: (0..n).collect(),
        };
        Self::new(n, index_min, factors, vec![term])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[SeparatedTerm] {
        &self.terms
    }

    pub fn index_min(&self) -> i64 {
        self.index_min
    }

    pub fn index_max(&self) -> i64 {
        self.index_min + self.pool[0].len() as i64 - 1
    }

    pub fn factor(&self, p: usize, j: usize) -> &[f64] {
        &self.pool[self.terms[p].factors[j]]
    }

    /// The same density with dimension `j` of every term moved to `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut f = vec![0; self.n];
                for (j, &id) in t.factors.iter().enumerate() {
                    f[perm[j]] = id;
                }
                SeparatedTerm {
                    weight: t.weight,
                    factors: f,
                }
            })
            .collect();
        Self::new(self.n, self.index_min, self.pool.clone(), terms)
    }

    /// Density value at the grid index `m`; zero outside the sampled range.
    pub fn value_at(&self, m: &[i64]) -> f64 {
        assert_eq!(m.len(), self.n, "index dimension mismatch");
        let hi = self.index_max();
        if m.iter().any(|&v| v < self.index_min || v > hi) {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|t| {
                t.weight
                    * t.factors
                        .iter()
                        .zip(m)
                        .map(|(&id, &mj)| self.pool[id][(mj - self.index_min) as usize])
                        .product::<f64>()
            })
            .sum()
    }
}

/// Samples `f(hm)` for `|m| <= L` where `L·h <= radius`.
pub fn sample_factor(grid: &GridSpec, f: impl Fn(f64) -> f64) -> (i64, Vec<f64>) {
    let l = grid.max_index();
    (-l, (-l..=l).map(|m| f(grid.h * m as f64)).collect())
}

/// Radial density `e^{-|x|²}(c₀ + c₁|x|² + c₂|x|⁴)` in `n` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicGaussianPolyDensity {
    pub n: usize,
    pub coeffs: [f64; 3],
}

impl IsotropicGaussianPolyDensity {
    pub fn new(n: usize, c0: f64, c1: f64, c2: f64) -> Result<Self> {
        Dimension::new(n)?;
        Ok(Self {
            n,
            coeffs: [c0, c1, c2],
        })
    }

    /// `4e^{-|x|²}(n(n+2) - 4(n+2)|x|² + 4|x|⁴)`, whose potential is exactly `e^{-|x|²}`.
    pub fn test_density(n: usize) -> Result<Self> {
        let nf = n as f64;
        Self::new(n, 4.0 * nf * (nf + 2.0), -16.0 * (nf + 2.0), 16.0)
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let [c0, c1, c2] = self.coeffs;
        (-r2).exp() * (c0 + c1 * r2 + c2 * r2 * r2)
    }

    /// Separated form over the factors `e^{-x²}`, `x²e^{-x²}`, `x⁴e^{-x²}` using
    /// `|x|⁴ = Σ_j x_j⁴ + 2 Σ_{i<j} x_i² x_j²`. Terms with a zero coefficient are dropped.
    pub fn to_separated(&self, grid: &GridSpec) -> Result<SeparatedDensity> {
        self.to_separated_with_cap(grid, DEFAULT_RANK_DIMENSION_CAP)
    }

    pub fn to_separated_with_cap(&self, grid: &GridSpec, cap: usize) -> Result<SeparatedDensity> {
        let n = self.n;
        if n > cap {
            return Err(Error::RankBudgetExceeded { n, cap });
        }
        let (index_min, g0) = sample_factor(grid, |x| (-x * x).exp());
        let (_, g2) = sample_factor(grid, |x| x * x * (-x * x).exp());
        let (_, g4) = sample_factor(grid, |x| x.powi(4) * (-x * x).exp());
        let [c0, c1, c2] = self.coeffs;

        let mut terms = Vec::with_capacity(1 + 2 * n + n * (n - 1) / 2);
        let with = |picks: &[(usize, usize)]| {
            let mut f = vec![0; n];
            for &(j, id) in picks {
                f[j] = id;
            }
            f
        };
        if c0 != 0.0 {
            terms.push(SeparatedTerm {
                weight: c0,
                factors: vec![0; n],
            });
        }
        if c1 != 0.0 {
            for j in 0..n {
                terms.push(SeparatedTerm {
                    weight: c1,
                    factors: with(&[(j, 1)]),
                });
            }
        }
        if c2 != 0.0 {
            for j in 0..n {
                terms.push(SeparatedTerm {
                    weight: c2,
                    factors: with(&[(j, 2)]),
                });
            }
            for i in 0..n {
                for j in i + 1..n {
                    terms.push(SeparatedTerm {
                        weight: 2.0 * c2,
                        factors: with(&[(i, 1), (j, 1)]),
                    });
                }
            }
        }
        SeparatedDensity::new(n, index_min, vec![g0, g2, g4], terms)
    }
}

/// Separated form of the reference density in `n` dimensions.
pub fn build_test_density(n: usize, grid: &GridSpec) -> Result<SeparatedDensity> {
    IsotropicGaussianPolyDensity::test_density(n)?.to_separated(grid)
}

/// Grid point `(k₁, 0, …, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisPoint {
    pub k1: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelKind {
    Q,
    R,
}

/// Normalized one-dimensional kernels `(πD(1+t))^{-1/2} e^{-d²/(D(1+t))} K_M(d/√D, t)`
/// tabulated per node for offsets `d = 0..=min(window, span)`.
struct KernelTable {
    values: Vec<Vec<f64>>,
    window: Vec<i64>,
}

impl KernelTable {
    fn build(ts: &[f64], d: f64, order: BasisOrder, kind: KernelKind, span: i64) -> Self {
        let mut buf = Vec::new();
        let sqrt_d = d.sqrt();
        let mut values = Vec::with_capacity(ts.len());
        let mut window = Vec::with_capacity(ts.len());
        for &t in ts {
            let l1 = t.ln_1p();
            let spread = d * t.max(0.0) + d; // D(1+t)
            let w = (KERNEL_CUTOFF_EXPONENT * spread).sqrt();
            let w = if w.is_finite() && w < span as f64 {
                w.floor() as i64
            } else {
                span
            };
            let norm = (-0.5 * ((PI * d).ln() + l1)).exp();
            let row = (0..=w)
                .map(|off| {
                    let x = off as f64 / sqrt_d;
                    let poly = match kind {
                        KernelKind::Q => qm_poly_buf(order, x, t, &mut buf),
                        KernelKind::R => rm_poly_buf(order, x, t, &mut buf),
                    };
                    norm * (-(off * off) as f64 / spread).exp() * poly
                })
                .collect();
            values.push(row);
            window.push(w);
        }
        Self { values, window }
    }

    /// Σ_m f(m) K_s(k - m), visiting offsets `d = 0, 1, …` and pairing `k ± d`.
    fn apply(&self, s: usize, samples: &[f64], index_min: i64, k: i64) -> Result<f64> {
        let row = &self.values[s];
        let hi = index_min + samples.len() as i64 - 1;
        let at = |m: i64| -> f64 {
            if m < index_min || m > hi {
                0.0
            } else {
                samples[(m - index_min) as usize]
            }
        };
        let mut sum = at(k) * row[0];
        let mut abs_sum = sum.abs();
        for (off, &kv) in row.iter().enumerate().skip(1) {
            let off = off as i64;
            if k + off > hi && k - off < index_min {
                break;
            }
            let pair = at(k + off) + at(k - off);
            sum += kv * pair;
            abs_sum += (kv * at(k + off)).abs() + (kv * at(k - off)).abs();
        }
        // the kernel is still live at a sample boundary: the cut must stay near roundoff
        let w = self.window[s];
        for edge in [index_min, hi] {
            let off = (k - edge).abs();
            if off <= w && (off as usize) < row.len() {
                let term = (row[off as usize] * at(edge)).abs();
                if term > TRUNCATION_TOLERANCE * abs_sum {
                    return Err(Error::SupportTruncated {
                        k,
                        ratio: term / abs_sum,
                    });
                }
            }
        }
        Ok(sum)
    }
}

/// One normalized 1-D sum `σ(k, t)` with the `Q_M` kernel.
///
/// `samples[i]` is `f(h·(index_min + i))`.
pub fn conv1d(samples: &[f64], index_min: i64, t: f64, d: f64, order: BasisOrder, k: i64) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let hi = index_min + samples.len() as i64 - 1;
    let span = (k - index_min).abs().max((hi - k).abs());
    KernelTable::build(&[t], d, order, KernelKind::Q, span).apply(0, samples, index_min, k)
}

fn kernel_span(index_min: i64, index_max: i64, ks: impl Iterator<Item = i64>) -> i64 {
    ks.map(|k| (k - index_min).abs().max((index_max - k).abs()))
        .max()
        .unwrap_or(0)
}

/// Product of `vals` in ascending order, in log space when asked.
///
/// Sorting makes the result independent of the order of the factors.
fn ordered_product(vals: &mut [f64], ln_weight: f64, weight: f64, log_domain: bool) -> f64 {
    vals.sort_unstable_by(f64::total_cmp);
    if log_domain || !weight.is_finite() {
        let mut ln = ln_weight;
        let mut neg = false;
        for &v in vals.iter() {
            if v == 0.0 {
                return 0.0;
            }
            neg ^= v < 0.0;
            ln += v.abs().ln();
        }
        if ln < -745.0 {
            return 0.0;
        }
        let mag = ln.exp();
        if neg {
            -mag
        } else {
            mag
        }
    } else {
        weight * vals.iter().product::<f64>()
    }
}

/// Cubature values of the potential of `density` at grid points `points`
/// (index vectors), from one-dimensional sums only.
pub fn evaluate(
    density: &SeparatedDensity,
    points: &[Vec<i64>],
    grid: &GridSpec,
    order: BasisOrder,
    rule: &DEQuadrature,
) -> Result<Vec<PotentialSample>> {
    let n = density.dim();
    let dim = Dimension::new(n).map_err(|_| Error::UnsupportedDimension(n))?;
    if n == 4 {
        return Err(Error::UnsupportedDimension(4));
    }
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, density has n = {n}",
            p.len()
        )));
    }
    let nodes = rule.nodes();
    let ts: Vec<f64> = nodes.iter().map(|nd| nd.t).collect();
    let span = kernel_span(
        density.index_min(),
        density.index_max(),
        points.iter().flatten().copied(),
    );
    let q_table = KernelTable::build(&ts, grid.d, order, KernelKind::Q, span);
    let r_table = (n == 3).then(|| KernelTable::build(&ts, grid.d, order, KernelKind::R, span));

    points
        .iter()
        .map(|k| {
            let value = evaluate_point(density, k, dim, grid, &nodes, &q_table, r_table.as_ref())?;
            Ok(PotentialSample {
                point: k.iter().map(|&kj| grid.h * kj as f64).collect(),
                value,
                method: Method::Tensor,
                order: order.get(),
                h: grid.h,
                d: grid.d,
            })
        })
        .collect()
}

/// Per-node 1-D sums for every distinct `(factor, k_j)` pair of one point.
struct SigmaCache {
    slot: HashMap<(usize, i64), usize>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl SigmaCache {
    fn build(
        density: &SeparatedDensity,
        k: &[i64],
        nodes: usize,
        q_table: &KernelTable,
        r_table: Option<&KernelTable>,
    ) -> Result<Self> {
        let mut cache = Self {
            slot: HashMap::new(),
            q: Vec::new(),
            r: Vec::new(),
        };
        for term in density.terms() {
            for (&id, &kj) in term.factors.iter().zip(k) {
                if cache.slot.contains_key(&(id, kj)) {
                    continue;
                }
                let samples = &density.pool[id];
                let q = (0..nodes)
                    .map(|s| q_table.apply(s, samples, density.index_min(), kj))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(rt) = r_table {
                    let r = (0..nodes)
                        .map(|s| rt.apply(s, samples, density.index_min(), kj))
                        .collect::<Result<Vec<_>>>()?;
                    cache.r.push(r);
                }
                cache.slot.insert((id, kj), cache.q.len());
                cache.q.push(q);
            }
        }
        Ok(cache)
    }
}

fn evaluate_point(
    density: &SeparatedDensity,
    k: &[i64],
    dim: Dimension,
    grid: &GridSpec,
    nodes: &[DENode],
    q_table: &KernelTable,
    r_table: Option<&KernelTable>,
) -> Result<f64> {
    let n = dim.get();
    let cache = SigmaCache::build(density, k, nodes.len(), q_table, r_table)?;
    let log_domain = n > LOG_DOMAIN_DIMENSION;
    let last = nodes.len() - 1;

    let mut total = KahanSum::default();
    let mut abs_total = 0.0;
    let mut abs_last = 0.0;
    let mut vals = vec![0.0; n];
    let mut parts = [0.0; 3];

    for term in density.terms() {
        let slots: Vec<usize> = term
            .factors
            .iter()
            .zip(k)
            .map(|(&id, &kj)| cache.slot[&(id, kj)])
            .collect();
        let mut acc = KahanSum::default();
        for (s, node) in nodes.iter().enumerate() {
            let contrib = if n == 3 {
                // τΦ' [σ₁σ₂σ₃ + Φ Σ_i ρ_i Π_{j≠i} σ_j]
                let ln_w = node.tau.ln() + node.ln_dt;
                let w = ln_w.exp();
                for (v, &sl) in vals.iter_mut().zip(&slots) {
                    *v = cache.q[sl][s];
                }
                let base = ordered_product(&mut vals, ln_w, w, false);
                for (i, part) in parts.iter_mut().enumerate() {
                    for (j, (v, &sl)) in vals.iter_mut().zip(&slots).enumerate() {
                        *v = if i == j { cache.r[sl][s] } else { cache.q[sl][s] };
                    }
                    *part = ordered_product(&mut vals, ln_w + node.ln_t, w * node.t, false);
                }
                parts.sort_unstable_by(f64::total_cmp);
                base + (parts[0] + parts[1] + parts[2])
            } else {
                for (v, &sl) in vals.iter_mut().zip(&slots) {
                    *v = cache.q[sl][s];
                }
                ordered_product(&mut vals, node.ln_weight(), node.weight, log_domain)
            };
            acc.add(contrib);
            abs_total += (term.weight * contrib).abs();
            if s == last {
                abs_last += (term.weight * contrib).abs();
            }
        }
        total.add(term.weight * acc.sum());
    }
    check_tail(abs_last, abs_total)?;

    let scale = grid.h4d2();
    Ok(if n == 3 {
        -scale / 8.0 * total.sum()
    } else {
        scale / 16.0 * total.sum()
    })
}

/// Cubature of an isotropic Gaussian-times-quadratic density at `(hk₁, 0, …, 0)`.
///
/// All axes but the first see the same three 1-D sums, so the rank-expanded
/// product collapses to `A₀^{n-1}` times a short combinatorial bracket; the
/// cost does not depend on `n`.
pub fn evaluate_symmetric(
    density: &IsotropicGaussianPolyDensity,
    point: AxisPoint,
    grid: &GridSpec,
    order: BasisOrder,
    rule: &DEQuadrature,
) -> Result<PotentialSample> {
    let n = density.n;
    if n < 5 {
        return Err(Error::UnsupportedDimension(n));
    }
    let nodes = rule.nodes();
    let ts: Vec<f64> = nodes.iter().map(|nd| nd.t).collect();
    let (index_min, g0) = sample_factor(grid, |x| (-x * x).exp());
    let (_, g2) = sample_factor(grid, |x| x * x * (-x * x).exp());
    let (_, g4) = sample_factor(grid, |x| x.powi(4) * (-x * x).exp());
    let index_max = index_min + g0.len() as i64 - 1;
    let span = kernel_span(index_min, index_max, [point.k1, 0].into_iter());
    let table = KernelTable::build(&ts, grid.d, order, KernelKind::Q, span);

    let sums = |k: i64| -> Result<[Vec<f64>; 3]> {
        let one = |g: &[f64]| {
            (0..nodes.len())
                .map(|s| table.apply(s, g, index_min, k))
                .collect::<Result<Vec<_>>>()
        };
        Ok([one(&g0)?, one(&g2)?, one(&g4)?])
    };
    let [a1, b1, c1] = sums(point.k1)?;
    let [a0, b0, c0] = sums(0)?;

    let [p0, p1, p2] = density.coeffs;
    let m1 = (n - 1) as f64;
    let m2 = ((n - 1) * (n - 2)) as f64;
    let mut total = KahanSum::default();
    let mut abs_total = 0.0;
    let mut last = 0.0;
    for (s, node) in nodes.iter().enumerate() {
        let contrib = if a0[s] == 0.0 {
            0.0
        } else {
            let rb = b0[s] / a0[s];
            let rc = c0[s] / a0[s];
            let bracket = p0 * a1[s]
                + p1 * (b1[s] + m1 * a1[s] * rb)
                + p2 * (c1[s] + m1 * a1[s] * rc + 2.0 * m1 * b1[s] * rb + m2 * a1[s] * rb * rb);
            let ln_mag = node.ln_weight() + m1 * a0[s].abs().ln() + bracket.abs().ln();
            let negative = (a0[s] < 0.0 && (n - 1) % 2 == 1) ^ (bracket < 0.0);
            if bracket == 0.0 || ln_mag < -745.0 {
                0.0
            } else if negative {
                -ln_mag.exp()
            } else {
                ln_mag.exp()
            }
        };
        total.add(contrib);
        abs_total += contrib.abs();
        last = contrib.abs();
    }
    check_tail(last, abs_total)?;

    Ok(PotentialSample {
        point: vec![grid.h * point.k1 as f64],
        value: grid.h4d2() / 16.0 * total.sum(),
        method: Method::TensorSymmetric,
        order: order.get(),
        h: grid.h,
        d: grid.d,
    })
}

/// Saturation level of the tensor generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationReport {
    pub d: f64,
    pub order: u32,
    pub n: usize,
    pub epsilon0: f64,
    pub cutoff: usize,
}

/// `ε₀(D) = Σ_{ν ≠ 0} |Fη(√D ν)|` for the tensor basis, summed over
/// `|ν_j| <= cutoff`. The 1-D transform of one factor is
/// `g(ξ) = e^{-π²ξ²} Σ_{k<M} (π²ξ²)^k/k!` with `g(0) = 1`, so the lattice sum
/// is `S^n - 1` with `S = Σ_m g(√D m)`.
pub fn saturation_epsilon0(order: BasisOrder, d: f64, n: usize, cutoff: usize) -> Result<SaturationReport> {
    if !(d > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "saturation estimate needs D > 0 and n >= 1, got D = {d}, n = {n}"
        )));
    }
    let g = |xi: f64| {
        let y = PI * PI * xi * xi;
        let mut term = 1.0;
        let mut poly = 1.0;
        for k in 1..order.get() {
            term *= y / k as f64;
            poly += term;
        }
        (-y).exp() * poly
    };
    let off_origin: f64 = 2.0 * (1..=cutoff).map(|m| g(d.sqrt() * m as f64)).sum::<f64>();
    let epsilon0 = (n as f64 * off_origin.ln_1p()).exp_m1();
    Ok(SaturationReport {
        d,
        order: order.get(),
        n,
        epsilon0,
        cutoff,
    })
}
