use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::mat2::CMat2;
use crate::par;

/// Multi-index `k` in `Z^d`.
pub type Index = Vec<i64>;

/// Coefficient type of a trigonometric polynomial.
pub trait Coeff:
    Copy + Send + Sync + Debug + PartialEq + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + Mul<Output = Self> + AddAssign
{
    const NCOMP: usize;
    fn zero() -> Self;
    fn one() -> Self;
    fn scale(self, c: Complex64) -> Self;
    /// Submultiplicative norm used by the weighted-l1 norm.
    fn norm(&self) -> f64;
    fn conj(&self) -> Self;
    fn comp(&self, i: usize) -> Complex64;
    fn from_comps(c: &[Complex64]) -> Self;
}

impl Coeff for Complex64 {
    const NCOMP: usize = 1;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn scale(self, c: Complex64) -> Self {
        self * c
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn comp(&self, _i: usize) -> Complex64 {
        *self
    }
    fn from_comps(c: &[Complex64]) -> Self {
        c[0]
    }
}

impl Coeff for CMat2 {
    const NCOMP: usize = 4;
    fn zero() -> Self {
        CMat2::ZERO
    }
    fn one() -> Self {
        CMat2::IDENTITY
    }
    fn scale(self, c: Complex64) -> Self {
        CMat2::scale(&self, c)
    }
    fn norm(&self) -> f64 {
        CMat2::norm(self)
    }
    fn conj(&self) -> Self {
        CMat2::conj(self)
    }
    fn comp(&self, i: usize) -> Complex64 {
        self.0[i / 2][i % 2]
    }
    fn from_comps(c: &[Complex64]) -> Self {
        CMat2([[c[0], c[1]], [c[2], c[3]]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealityClass {
    RealScalar,
    Sl2Real,
    General,
}

impl RealityClass {
    pub fn is_real(self) -> bool {
        self != RealityClass::General
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormFlavor {
    SupStrip,
    WeightedL1,
}

/// Strip widths `r` (first coordinate) and `s` (remaining coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub r: f64,
    pub s: f64,
    pub flavor: NormFlavor,
}

impl NormParams {
    pub fn l1(r: f64, s: f64) -> Self {
        NormParams { r, s, flavor: NormFlavor::WeightedL1 }
    }

    /// The single-radius norm `|.|_r`.
    pub fn uniform(r: f64) -> Self {
        NormParams::l1(r, r)
    }

    pub fn sup(r: f64, s: f64) -> Self {
        NormParams { r, s, flavor: NormFlavor::SupStrip }
    }

    pub fn weight(&self, k: &[i64]) -> f64 {
        let rest: i64 = k[1..].iter().map(|x| x.abs()).sum();
        (2.0 * PI * (k[0].abs() as f64 * self.r + rest as f64 * self.s)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// Finitely supported Fourier series `sum_k c_k e^{2 pi i <k, phi>}` on `T^d`.
///
/// `debt` accumulates the weighted-l1 mass of coefficients dropped by
/// [`TrigPoly::prune`]; certified norms add it back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly<C: Coeff> {
    pub dim: usize,
    pub coeffs: BTreeMap<Index, C>,
    pub reality: RealityClass,
    pub debt: f64,
}

pub type ScalarPoly = TrigPoly<Complex64>;
pub type MatPoly = TrigPoly<CMat2>;

/// Default coefficient floor for pruning.
pub const COEFF_FLOOR: f64 = 1e-16;

pub fn l1(k: &[i64]) -> i64 {
    k.iter().map(|x| x.abs()).sum()
}

fn dot(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

/// `e^{2 pi i t}`.
pub fn cis(t: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

impl<C: Coeff> TrigPoly<C> {
    pub fn zero(dim: usize, reality: RealityClass) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        TrigPoly { dim, coeffs: BTreeMap::new(), reality, debt: 0.0 }
    }

    pub fn constant(dim: usize, c: C, reality: RealityClass) -> Self {
        let mut p = Self::zero(dim, reality);
        p.set(vec![0; dim], c);
        p
    }

    pub fn from_terms(dim: usize, reality: RealityClass, terms: impl IntoIterator<Item = (Index, C)>) -> Self {
        let mut p = Self::zero(dim, reality);
        for (k, c) in terms {
            assert_eq!(k.len(), dim, "index dimension mismatch");
            *p.coeffs.entry(k).or_insert_with(C::zero) += c;
        }
        p
    }

    pub fn get(&self, k: &[i64]) -> C {
        self.coeffs.get(k).copied().unwrap_or_else(C::zero)
    }

    pub fn set(&mut self, k: Index, c: C) {
        assert_eq!(k.len(), self.dim);
        self.coeffs.insert(k, c);
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn with_reality(mut self, reality: RealityClass) -> Self {
        self.reality = reality;
        self
    }

    /// Largest `|k|` (l1) in the support; 0 for the empty series.
    pub fn degree(&self) -> i64 {
        self.coeffs.keys().map(|k| l1(k)).max().unwrap_or(0)
    }

    /// Largest `|k_j|` in each coordinate.
    pub fn max_per_dim(&self) -> Vec<i64> {
        let mut m = vec![0; self.dim];
        for k in self.coeffs.keys() {
            for (j, &x) in k.iter().enumerate() {
                m[j] = m[j].max(x.abs());
            }
        }
        m
    }

    pub fn eval(&self, phi: &[f64]) -> C {
        let mut acc = C::zero();
        for (k, c) in &self.coeffs {
            acc += c.scale(cis(dot(k, phi)));
        }
        acc
    }

    /// Evaluate at a complex point `phi + i y`.
    pub fn eval_complex(&self, phi: &[f64], y: &[f64]) -> C {
        let mut acc = C::zero();
        for (k, c) in &self.coeffs {
            let damp = (-2.0 * PI * dot(k, y)).exp();
            acc += c.scale(cis(dot(k, phi)) * damp);
        }
        acc
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&[i64], C) -> Option<C>) -> Self {
        let mut out = Self::zero(self.dim, self.reality);
        out.debt = self.debt;
        for (k, c) in &self.coeffs {
            if let Some(v) = f(k, *c) {
                out.coeffs.insert(k.clone(), v);
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = self.map_coeffs(|_, c| Some(c.scale(s)));
        p.debt *= s.norm();
        if s.im != 0.0 {
            p.reality = RealityClass::General;
        }
        p
    }

    /// `f(. + alpha)`: multiplies each coefficient by `e^{2 pi i <k, alpha>}`.
    pub fn shift(&self, alpha: &[f64]) -> Self {
        self.map_coeffs(|k, c| Some(c.scale(cis(dot(k, alpha)))))
    }

    pub fn conj_reflect(&self) -> Self {
        let mut out = Self::zero(self.dim, self.reality);
        out.debt = self.debt;
        for (k, c) in &self.coeffs {
            out.coeffs.insert(k.iter().map(|x| -x).collect(), c.conj());
        }
        out
    }

    /// Projects onto the conjugate-symmetric part `(f + conj-reflect f)/2`.
    pub fn symmetrize(&self) -> Self {
        let half = Complex64::new(0.5, 0.0);
        let mut s = (self + &self.conj_reflect()).scale(half);
        s.reality = self.reality;
        s
    }

    /// Largest violation of `c(-k) = conj c(k)`.
    pub fn reality_defect(&self) -> f64 {
        let r = self.conj_reflect();
        let mut worst: f64 = 0.0;
        for (k, c) in &self.coeffs {
            worst = worst.max((*c - r.get(k)).norm());
        }
        for (k, c) in &r.coeffs {
            worst = worst.max((*c - self.get(k)).norm());
        }
        worst
    }

    /// `T_N` (`|k| < N`) or `R_N` (`|k| >= N`), `|k|` the l1 norm.
    pub fn truncate(&self, n: f64, side: Side) -> Self {
        let mut p = self.map_coeffs(|k, c| {
            let low = (l1(k) as f64) < n;
            (low == (side == Side::Low)).then_some(c)
        });
        p.debt = if side == Side::Low { self.debt } else { 0.0 };
        p
    }

    /// Keep only coefficients selected by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[i64]) -> bool) -> Self {
        self.map_coeffs(|k, c| keep(k).then_some(c))
    }

    /// Drop coefficients whose norm is below `floor`, adding the dropped
    /// mass (weighted for the given norm) to `debt`.
    pub fn prune(&mut self, floor: f64, weights: NormParams) {
        let mut dropped = 0.0;
        self.coeffs.retain(|k, c| {
            let n = c.norm();
            if n < floor {
                dropped += n * weights.weight(k);
                false
            } else {
                true
            }
        });
        self.debt += dropped;
    }

    pub fn analytic_norm(&self, p: NormParams) -> f64 {
        match p.flavor {
            NormFlavor::WeightedL1 => self.coeffs.iter().map(|(k, c)| c.norm() * p.weight(k)).sum::<f64>(),
            NormFlavor::SupStrip => self.sup_strip(p),
        }
    }

    /// Weighted-l1 norm plus accumulated truncation debt: a certified upper
    /// bound for the series before pruning.
    pub fn norm_cert(&self, r: f64, s: f64) -> f64 {
        self.analytic_norm(NormParams::l1(r, s)) + self.debt
    }

    /// `|.|_r` with equal radii.
    pub fn norm_r(&self, r: f64) -> f64 {
        self.norm_cert(r, r)
    }

    /// Sup of the pointwise norm on the real torus, sampled on a grid.
    pub fn sup0(&self) -> f64 {
        self.sup_strip(NormParams::sup(0.0, 0.0))
    }

    /// Grid-sampled sup of the analytic extension over the distinguished
    /// boundary `|Im phi_1| = r`, `|Im phi_j| = s`; a lower estimate of the
    /// strip sup norm.
    fn sup_strip(&self, p: NormParams) -> f64 {
        let n = grid_size_for(self, 4);
        let mut best: f64 = 0.0;
        let patterns = if p.r == 0.0 && p.s == 0.0 { 1 } else { 1usize << self.dim };
        for pat in 0..patterns {
            let y: Vec<f64> = (0..self.dim)
                .map(|j| {
                    let w = if j == 0 { p.r } else { p.s };
                    if pat >> j & 1 == 1 {
                        -w
                    } else {
                        w
                    }
                })
                .collect();
            let damped = self.map_coeffs(|k, c| Some(c.scale(Complex64::new((-2.0 * PI * dot(k, &y)).exp(), 0.0))));
            let grid = damped.to_grid(&vec![n; self.dim]);
            for v in grid.values {
                best = best.max(v.norm());
            }
        }
        best
    }

    /// Values on the uniform grid `phi = (j_1/n_1, ..., j_d/n_d)`, row-major
    /// with the first coordinate slowest. Requires `n_j > 2 max |k_j|`.
    pub fn to_grid(&self, n: &[usize]) -> Grid<C> {
        assert_eq!(n.len(), self.dim);
        let mx = self.max_per_dim();
        for j in 0..self.dim {
            assert!(n[j] as i64 > 2 * mx[j], "grid too coarse for support");
        }
        let total: usize = n.iter().product();
        let mut comps = vec![vec![Complex64::new(0.0, 0.0); total]; C::NCOMP];
        for (k, c) in &self.coeffs {
            let idx = flat_index(k, n);
            for (i, comp) in comps.iter_mut().enumerate() {
                comp[idx] += c.comp(i);
            }
        }
        for comp in comps.iter_mut() {
            fft_nd(comp, n, true);
        }
        let values = (0..total)
            .map(|p| {
                let cs: Vec<Complex64> = comps.iter().map(|c| c[p]).collect();
                C::from_comps(&cs)
            })
            .collect();
        Grid { dims: n.to_vec(), values }
    }

    /// Inverse of [`TrigPoly::to_grid`]: Fourier coefficients of grid samples,
    /// keeping indices with `|k_j| < n_j/2` and `|k| < max_l1`, dropping
    /// those below `floor` into the truncation debt (weighted by `weights`).
    pub fn from_grid(grid: &Grid<C>, reality: RealityClass, max_l1: i64, floor: f64, weights: NormParams) -> Self {
        let n = &grid.dims;
        let dim = n.len();
        let total: usize = n.iter().product();
        let mut comps: Vec<Vec<Complex64>> = (0..C::NCOMP).map(|i| grid.values.iter().map(|v| v.comp(i)).collect()).collect();
        let inv = 1.0 / total as f64;
        for comp in comps.iter_mut() {
            fft_nd(comp, n, false);
        }
        let mut p = Self::zero(dim, reality);
        let mut tail = 0.0;
        for flat in 0..total {
            let k = unflat_index(flat, n);
            let cs: Vec<Complex64> = comps.iter().map(|c| c[flat] * inv).collect();
            let c = C::from_comps(&cs);
            let nyq = k.iter().zip(n.iter()).any(|(&x, &m)| 2 * x.abs() >= m as i64);
            let norm = c.norm();
            if nyq || l1(&k) >= max_l1 || norm < floor {
                tail += norm * weights.weight(&k);
                continue;
            }
            p.coeffs.insert(k, c);
        }
        p.debt = tail;
        p
    }

    /// Coefficientwise product with another series (convolution).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let left: Vec<(&Index, &C)> = self.coeffs.iter().collect();
        const CHUNK: usize = 64;
        let chunks = left.len().div_ceil(CHUNK);
        let partial = par::map_range(chunks, |ci| {
            let mut acc: BTreeMap<Index, C> = BTreeMap::new();
            for (ka, ca) in &left[ci * CHUNK..((ci + 1) * CHUNK).min(left.len())] {
                for (kb, cb) in &other.coeffs {
                    let k: Index = ka.iter().zip(kb.iter()).map(|(a, b)| a + b).collect();
                    *acc.entry(k).or_insert_with(C::zero) += **ca * *cb;
                }
            }
            acc
        });
        let mut out = Self::zero(self.dim, combine_reality(self.reality, other.reality));
        for acc in partial {
            for (k, c) in acc {
                *out.coeffs.entry(k).or_insert_with(C::zero) += c;
            }
        }
        out
    }
}

fn combine_reality(a: RealityClass, b: RealityClass) -> RealityClass {
    use RealityClass::*;
    match (a, b) {
        (General, _) | (_, General) => General,
        (RealScalar, x) | (x, RealScalar) => x,
        (Sl2Real, Sl2Real) => Sl2Real,
    }
}

/// Grid size (power of two) fitting the support with `oversample` headroom.
pub fn grid_size_for<C: Coeff>(p: &TrigPoly<C>, oversample: usize) -> usize {
    let m = p.max_per_dim().into_iter().max().unwrap_or(0) as usize;
    (oversample * (2 * m + 1)).max(8).next_power_of_two()
}

/// Samples on a uniform product grid, row-major, first coordinate slowest.
#[derive(Debug, Clone)]
pub struct Grid<C> {
    pub dims: Vec<usize>,
    pub values: Vec<C>,
}

impl<C: Copy> Grid<C> {
    pub fn point(&self, flat: usize) -> Vec<f64> {
        unflat_index(flat, &self.dims)
            .iter()
            .zip(&self.dims)
            .map(|(&k, &n)| k.rem_euclid(n as i64) as f64 / n as f64)
            .collect()
    }

    pub fn map<D: Copy + Send>(&self, f: impl Fn(&[f64], C) -> D + Sync) -> Grid<D>
    where
        C: Sync,
    {
        let values = par::map_range(self.values.len(), |i| f(&self.point(i), self.values[i]));
        Grid { dims: self.dims.clone(), values }
    }

    pub fn try_map<D: Copy + Send, E: Send>(&self, f: impl Fn(&[f64], C) -> Result<D, E> + Sync) -> Result<Grid<D>, E>
    where
        C: Sync,
    {
        let values: Result<Vec<D>, E> =
            par::map_range(self.values.len(), |i| f(&self.point(i), self.values[i])).into_iter().collect();
        Ok(Grid { dims: self.dims.clone(), values: values? })
    }
}

/// Position of index `k` in a row-major grid, with `k_j` taken mod `n_j`.
fn flat_index(k: &[i64], n: &[usize]) -> usize {
    let mut idx = 0usize;
    for (&x, &m) in k.iter().zip(n) {
        idx = idx * m + x.rem_euclid(m as i64) as usize;
    }
    idx
}

/// Inverse of [`flat_index`] with each coordinate in `(-n_j/2, n_j/2]`.
fn unflat_index(mut flat: usize, n: &[usize]) -> Index {
    let mut k = vec![0i64; n.len()];
    for j in (0..n.len()).rev() {
        let m = n[j];
        let r = (flat % m) as i64;
        flat /= m;
        k[j] = if 2 * r > m as i64 { r - m as i64 } else { r };
    }
    k
}

/// Unnormalised d-dimensional DFT in place. `inverse` uses `e^{+2 pi i}`.
pub fn fft_nd(data: &mut [Complex64], n: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total = data.len();
    let mut stride = 1usize;
    for j in (0..n.len()).rev() {
        let m = n[j];
        let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let block = m * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                for t in 0..m {
                    line[t] = data[outer + inner + t * stride];
                }
                fft.process(&mut line);
                for t in 0..m {
                    data[outer + inner + t * stride] = line[t];
                }
            }
        }
        stride *= m;
    }
}

impl<C: Coeff> Add for &TrigPoly<C> {
    type Output = TrigPoly<C>;
    fn add(self, o: &TrigPoly<C>) -> TrigPoly<C> {
        assert_eq!(self.dim, o.dim);
        let mut out = self.clone();
        for (k, c) in &o.coeffs {
            *out.coeffs.entry(k.clone()).or_insert_with(C::zero) += *c;
        }
        out.debt += o.debt;
        if self.reality != o.reality {
            out.reality = combine_reality(self.reality, o.reality);
        }
        out
    }
}

impl<C: Coeff> Sub for &TrigPoly<C> {
    type Output = TrigPoly<C>;
    fn sub(self, o: &TrigPoly<C>) -> TrigPoly<C> {
        self + &(-o)
    }
}

impl<C: Coeff> Neg for &TrigPoly<C> {
    type Output = TrigPoly<C>;
    fn neg(self) -> TrigPoly<C> {
        self.map_coeffs(|_, c| Some(-c))
    }
}

impl<C: Coeff> Mul for &TrigPoly<C> {
    type Output = TrigPoly<C>;
    fn mul(self, o: &TrigPoly<C>) -> TrigPoly<C> {
        TrigPoly::mul(self, o)
    }
}

impl ScalarPoly {
    /// `amp cos(2 pi <k, phi>)` as a real scalar series.
    pub fn cos_mode(dim: usize, k: Index, amp: f64) -> Self {
        let neg: Index = k.iter().map(|x| -x).collect();
        let h = Complex64::new(amp / 2.0, 0.0);
        TrigPoly::from_terms(dim, RealityClass::RealScalar, [(k, h), (neg, h)])
    }

    /// `amp sin(2 pi <k, phi>)` as a real scalar series.
    pub fn sin_mode(dim: usize, k: Index, amp: f64) -> Self {
        let neg: Index = k.iter().map(|x| -x).collect();
        let h = Complex64::new(0.0, -amp / 2.0);
        TrigPoly::from_terms(dim, RealityClass::RealScalar, [(k, h), (neg, -h)])
    }

    pub fn real_constant(dim: usize, c: f64) -> Self {
        TrigPoly::constant(dim, Complex64::new(c, 0.0), RealityClass::RealScalar)
    }

    pub fn mean(&self) -> Complex64 {
        self.get(&vec![0; self.dim])
    }

    pub fn eval_real(&self, phi: &[f64]) -> f64 {
        self.eval(phi).re
    }

    /// `self * m` for a constant matrix `m`.
    pub fn times_matrix(&self, m: CMat2) -> MatPoly {
        let reality = if self.reality == RealityClass::RealScalar && m.max_imag() == 0.0 {
            if m.trace().norm() == 0.0 {
                RealityClass::Sl2Real
            } else {
                RealityClass::General
            }
        } else {
            RealityClass::General
        };
        let mut p = TrigPoly::zero(self.dim, reality);
        for (k, c) in &self.coeffs {
            p.coeffs.insert(k.clone(), m.scale(*c));
        }
        p.debt = self.debt * m.norm();
        p
    }
}

impl MatPoly {
    pub fn identity(dim: usize) -> Self {
        TrigPoly::constant(dim, CMat2::IDENTITY, RealityClass::Sl2Real)
    }

    pub fn constant_real(dim: usize, m: super::Mat2, reality: RealityClass) -> Self {
        TrigPoly::constant(dim, m.to_complex(), reality)
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarPoly {
        let mut p = TrigPoly::zero(self.dim, if self.reality.is_real() { RealityClass::RealScalar } else { RealityClass::General });
        for (k, c) in &self.coeffs {
            p.coeffs.insert(k.clone(), c.0[i][j]);
        }
        p
    }

    pub fn from_entries(e: [[&ScalarPoly; 2]; 2], reality: RealityClass) -> Self {
        let dim = e[0][0].dim;
        let mut p = TrigPoly::zero(dim, reality);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(e[i][j].dim, dim);
                for (k, c) in &e[i][j].coeffs {
                    let slot = p.coeffs.entry(k.clone()).or_insert(CMat2::ZERO);
                    slot.0[i][j] += *c;
                }
                p.debt += e[i][j].debt;
            }
        }
        p
    }

    /// Real part of the evaluation.
    pub fn eval_real(&self, phi: &[f64]) -> super::Mat2 {
        self.eval(phi).re()
    }

    /// Entrywise adjugate; the inverse for SL(2)-valued series.
    pub fn adj(&self) -> Self {
        self.map_coeffs(|_, c| Some(c.adj()))
    }

    pub fn left_mul_const(&self, m: CMat2) -> Self {
        let mut p = self.map_coeffs(|_, c| Some(m * c));
        p.debt *= m.norm();
        p
    }

    pub fn right_mul_const(&self, m: CMat2) -> Self {
        let mut p = self.map_coeffs(|_, c| Some(c * m));
        p.debt *= m.norm();
        p
    }

    /// Largest absolute trace coefficient.
    pub fn trace_defect(&self) -> f64 {
        self.coeffs.values().map(|c| c.trace().norm()).fold(0.0, f64::max)
    }
}
