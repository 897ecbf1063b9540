//! Quasiperiodic SL(2,R) cocycles `(phi, x) -> (phi + alpha, A(phi) x)`.
//!
//! Angles are measured in turns. The fibered rotation number is computed
//! by tracking a continuous lift of the projective action: for fixed `phi`
//! the lifted increment stays within half a turn of its value at `x = 0`,
//! and that reference value is continued over the torus once per cocycle
//! (see [`HomotopyReport`]).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fourier::{Mat2, MatPoly, ScalarPoly};
use crate::par;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CocycleError {
    #[error("generator is not SL(2,R)-valued: det defect {defect}")]
    NotSl2 { defect: f64 },
    #[error("generator is not homotopic to the identity: winding {winding:?}")]
    NotHomotopicToIdentity { winding: Vec<i64> },
    #[error("degree estimate {estimate:?} is not close to an integer vector")]
    DegenerateB { estimate: Vec<f64> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Something that evaluates to a 2x2 matrix on `T^d`.
#[derive(Clone)]
pub enum Generator {
    Constant(Mat2),
    Poly(MatPoly),
    /// `((E - lambda v, -1), (1, 0))`.
    Schrodinger { energy: f64, lambda: f64, v: ScalarPoly },
    Field(Arc<dyn Fn(&[f64]) -> Mat2 + Send + Sync>),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Constant(m) => write!(f, "Constant({m:?})"),
            Generator::Poly(p) => write!(f, "Poly({} terms)", p.len()),
            Generator::Schrodinger { energy, lambda, v } => {
                write!(f, "Schrodinger(E={energy}, lambda={lambda}, v: {} terms)", v.len())
            }
            Generator::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Generator {
    pub fn eval(&self, phi: &[f64]) -> Mat2 {
        match self {
            Generator::Constant(m) => *m,
            Generator::Poly(p) => p.eval_real(phi),
            Generator::Schrodinger { energy, lambda, v } => {
                let pot = if *lambda == 0.0 { 0.0 } else { lambda * v.eval_real(phi) };
                Mat2::new(energy - pot, -1.0, 1.0, 0.0)
            }
            Generator::Field(f) => f(phi),
        }
    }

    pub fn field(f: impl Fn(&[f64]) -> Mat2 + Send + Sync + 'static) -> Self {
        Generator::Field(Arc::new(f))
    }
}

#[derive(Debug, Clone)]
pub struct CocycleSpec {
    pub alpha: Vec<f64>,
    pub generator: Generator,
    pub homotopy_class: Option<Vec<i64>>,
    /// Set for Schrodinger cocycles: rotation numbers fold into `[0, 1/2]`.
    pub schrodinger: bool,
}

fn shifted(phi: &[f64], alpha: &[f64], times: f64) -> Vec<f64> {
    phi.iter().zip(alpha).map(|(p, a)| (p + times * a).rem_euclid(1.0)).collect()
}

impl CocycleSpec {
    /// Builds a cocycle, checking `det A = 1` to `1e-10` on a `16^d` grid.
    pub fn new(alpha: Vec<f64>, generator: Generator) -> Result<Self, CocycleError> {
        let c = CocycleSpec { alpha, generator, homotopy_class: None, schrodinger: false };
        let defect = c.det_defect(16);
        if defect > 1e-10 {
            return Err(CocycleError::NotSl2 { defect });
        }
        Ok(c)
    }

    pub fn constant(alpha: Vec<f64>, m: Mat2) -> Self {
        CocycleSpec { alpha, generator: Generator::Constant(m), homotopy_class: None, schrodinger: false }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn eval(&self, phi: &[f64]) -> Mat2 {
        self.generator.eval(phi)
    }

    pub fn det_defect(&self, n: usize) -> f64 {
        grid_points(self.dim(), n).iter().map(|p| (self.eval(p).det() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Uniform grid `{j/n}^d`.
pub fn grid_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut i| {
            let mut p = vec![0.0; d];
            for j in (0..d).rev() {
                p[j] = (i % n) as f64 / n as f64;
                i /= n;
            }
            p
        })
        .collect()
}

/// `A^{(n)}(phi)`: `A(phi+(n-1)alpha)...A(phi)` for `n > 0`, `I` for `n = 0`,
/// `A(phi+n alpha)^{-1}...A(phi-alpha)^{-1}` for `n < 0`.
pub fn iterate(c: &CocycleSpec, phi: &[f64], n: i64) -> Mat2 {
    let mut p = Mat2::IDENTITY;
    if n > 0 {
        for j in 0..n {
            p = c.eval(&shifted(phi, &c.alpha, j as f64)) * p;
        }
    } else {
        for j in 1..=(-n) {
            p = c.eval(&shifted(phi, &c.alpha, -(j as f64))).inverse() * p;
        }
    }
    p
}

/// Low-discrepancy phases (Kronecker sequence with generalised golden ratios).
pub fn kronecker_phases(d: usize, samples: usize) -> Vec<Vec<f64>> {
    // root of x^{d+1} = x + 1
    let mut g = 2.0f64;
    for _ in 0..60 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    let step: Vec<f64> = (1..=d).map(|j| g.powi(-(j as i32)).fract()).collect();
    (0..samples).map(|i| step.iter().map(|s| (0.5 + s * i as f64).fract()).collect()).collect()
}

/// Phase-averaged `(1/n) ln |A^{(n)}(phi)|`, accumulated with per-step
/// renormalisation so products never overflow.
pub fn lyapunov_estimate(c: &CocycleSpec, n: usize, samples: usize) -> f64 {
    assert!(n >= 1 && samples >= 1);
    let phases = kronecker_phases(c.dim(), samples);
    let vals = par::map_slice(&phases, |phi| {
        let mut p = Mat2::IDENTITY;
        let mut log_scale = 0.0;
        let mut x = phi.clone();
        for _ in 0..n {
            p = c.eval(&x) * p;
            let s = p.norm();
            p = p.scale(1.0 / s);
            log_scale += s.ln();
            for (xi, a) in x.iter_mut().zip(&c.alpha) {
                *xi = (*xi + a).rem_euclid(1.0);
            }
        }
        log_scale / n as f64
    });
    vals.iter().sum::<f64>() / samples as f64
}

/// Winding data of `phi -> angle(A(phi) e(0))`.
#[derive(Debug, Clone, Serialize)]
pub struct HomotopyReport {
    /// Winding number along each generator circle, in full turns.
    pub winding: Vec<i64>,
    /// Centre of the continuous branch of `angle(A(phi) e(0))`, in turns.
    pub branch_center: f64,
    /// Width of the sampled range of that branch; the lift is trusted when
    /// it stays below one turn.
    pub branch_width: f64,
}

fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

fn angle_turns(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]) / (2.0 * PI)
}

/// Winding of the generator's rotational part along each torus circle on a
/// 256-point grid, plus the branch used by the rotation-number lift.
pub fn homotopy_check(g: &Generator, d: usize) -> HomotopyReport {
    let winding = (0..d)
        .map(|j| {
            let mut total = 0.0;
            let mut prev = angle_turns(g.eval(&vec![0.0; d]).apply([1.0, 0.0]));
            for i in 1..=256 {
                let mut p = vec![0.0; d];
                p[j] = i as f64 / 256.0;
                let a = angle_turns(g.eval(&p).apply([1.0, 0.0]));
                total += wrap_half(a - prev);
                prev = a;
            }
            total.round() as i64
        })
        .collect();
    let a0 = angle_turns(g.eval(&vec![0.0; d]).apply([1.0, 0.0]));
    let n = if d <= 2 { 32 } else { 8 };
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for p in grid_points(d, n) {
        let rel = wrap_half(angle_turns(g.eval(&p).apply([1.0, 0.0])) - a0);
        lo = lo.min(rel);
        hi = hi.max(rel);
    }
    HomotopyReport { winding, branch_center: a0 + (lo + hi) / 2.0, branch_width: hi - lo }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationOptions {
    pub n: usize,
    pub phase_samples: usize,
    pub random_starts: usize,
    pub seed: u64,
}

impl RotationOptions {
    pub fn new(n: usize, phase_samples: usize) -> Self {
        RotationOptions { n, phase_samples, random_starts: 8, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationEstimate {
    pub value: f64,
    pub iterations: usize,
    pub phase_samples: usize,
    pub error_budget: f64,
    /// Largest minus smallest per-start estimate.
    pub spread: f64,
    pub seed: u64,
}

/// Per-step angle budget coefficient: `|x_n - x_0 - n rho| <= 1` for the
/// lifted projective map, so finite orbits contribute at most `1/n`.
const BUDGET_A: f64 = 1.0;

/// Fibered rotation number with default sampling (8 random starts, fixed seed).
pub fn rotation_number(c: &CocycleSpec, n: usize, phase_samples: usize) -> Result<RotationEstimate, CocycleError> {
    rotation_number_with(c, RotationOptions::new(n, phase_samples))
}

pub fn rotation_number_with(c: &CocycleSpec, opts: RotationOptions) -> Result<RotationEstimate, CocycleError> {
    if opts.n == 0 || opts.phase_samples == 0 {
        return Err(CocycleError::InvalidArgument("n and phase_samples must be positive".into()));
    }
    let d = c.dim();
    let h = homotopy_check(&c.generator, d);
    if h.winding.iter().any(|&w| w != 0) {
        return Err(CocycleError::NotHomotopicToIdentity { winding: h.winding });
    }
    // Birkhoff starts along the orbit of 0, then seeded random starts
    let mut starts: Vec<(Vec<f64>, f64)> =
        (0..opts.phase_samples).map(|i| (shifted(&vec![0.0; d], &c.alpha, i as f64), 0.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let phi: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        starts.push((phi, rng.gen::<f64>()));
    }
    let center = h.branch_center;
    let vals = par::map_slice(&starts, |(phi0, x0)| lifted_average(c, phi0, *x0, opts.n, center));
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let value = if c.schrodinger { mean.clamp(0.0, 0.5) } else { mean.rem_euclid(1.0) };
    let budget = BUDGET_A / opts.n as f64 + spread + 1e-12;
    Ok(RotationEstimate {
        value,
        iterations: opts.n,
        phase_samples: starts.len(),
        error_budget: budget,
        spread,
        seed: opts.seed,
    })
}

fn lifted_average(c: &CocycleSpec, phi0: &[f64], x0: f64, n: usize, center: f64) -> f64 {
    let mut phi = phi0.to_vec();
    let mut y = x0.rem_euclid(1.0);
    let mut total = 0.0;
    for _ in 0..n {
        let a = c.eval(&phi);
        let reference = center + wrap_half(angle_turns(a.apply([1.0, 0.0])) - center);
        let (s, co) = (2.0 * PI * y).sin_cos();
        let w = a.apply([co, s]);
        let raw = angle_turns(w) - y;
        let delta = reference + wrap_half(raw - reference);
        total += delta;
        y = (y + delta).rem_euclid(1.0);
        for (xi, al) in phi.iter_mut().zip(&c.alpha) {
            *xi = (*xi + al).rem_euclid(1.0);
        }
    }
    total / n as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub sup_norm: f64,
    pub argmax_n: usize,
    /// Set when the norm passed `1e100`; the orbit is then evidence of
    /// unboundedness and iteration stops.
    pub overflow: bool,
}

/// `max_{n <= N, phi sampled} |A^{(n)}(phi)|`.
pub fn boundedness_metric(c: &CocycleSpec, big_n: usize, phase_samples: usize) -> BoundednessReport {
    let phases = kronecker_phases(c.dim(), phase_samples.max(1));
    let per = par::map_slice(&phases, |phi| {
        let mut p = Mat2::IDENTITY;
        let mut x = phi.clone();
        let mut best = (1.0f64, 0usize, false);
        for n in 1..=big_n {
            p = c.eval(&x) * p;
            let s = p.norm();
            if s > best.0 {
                best = (s, n, false);
            }
            if s > 1e100 {
                best.2 = true;
                break;
            }
            for (xi, a) in x.iter_mut().zip(&c.alpha) {
                *xi = (*xi + a).rem_euclid(1.0);
            }
        }
        best
    });
    let mut out = BoundednessReport { sup_norm: 1.0, argmax_n: 0, overflow: false };
    for (s, n, o) in per {
        if s > out.sup_norm || (s == out.sup_norm && n < out.argmax_n) {
            out.sup_norm = s;
            out.argmax_n = n;
        }
        out.overflow |= o;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SchrodingerParams {
    pub energy: f64,
    pub lambda: f64,
    #[serde(skip)]
    pub v: ScalarPoly,
    pub phase: Vec<f64>,
}

/// `S = ((E - lambda v, -1), (1, 0))` over the frequency `alpha`.
pub fn schrodinger_cocycle(alpha: Vec<f64>, p: &SchrodingerParams) -> CocycleSpec {
    assert_eq!(alpha.len(), p.v.dim, "potential dimension must match the frequency");
    CocycleSpec {
        alpha,
        generator: Generator::Schrodinger { energy: p.energy, lambda: p.lambda, v: p.v.clone() },
        homotopy_class: Some(vec![0; p.v.dim]),
        schrodinger: true,
    }
}

/// Factored form `S = ((E,-1),(1,0)) exp(lambda v ((0,0),(1,0)))`:
/// the constant part and the rank-one exponent at `phi`.
pub fn schrodinger_factors(p: &SchrodingerParams, phi: &[f64]) -> (Mat2, Mat2) {
    let c = Mat2::new(p.energy, -1.0, 1.0, 0.0);
    let x = p.lambda * p.v.eval_real(phi);
    (c, Mat2::new(0.0, 0.0, x, 0.0))
}

/// Outcome of comparing `rho(alpha, B(.+alpha) A B^{-1})` with
/// `rho(alpha, A) + <deg B, alpha>/2`.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeShiftReport {
    pub degree: Vec<i64>,
    pub degree_raw: Vec<f64>,
    pub rho_original: f64,
    pub rho_conjugated: f64,
    pub predicted_shift: f64,
    pub measured_shift: f64,
    pub discrepancy: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Degree of a PSL(2,R)-valued map in half turns: the angle change of
/// `B(phi) e(0)` along each generator, divided by `pi`.
pub fn psl2_degree(b: &(dyn Fn(&[f64]) -> Mat2 + Sync), d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let mut total = 0.0;
            let mut prev = angle_turns(b(&vec![0.0; d]).apply([1.0, 0.0]));
            for i in 1..=256 {
                let mut p = vec![0.0; d];
                p[j] = i as f64 / 256.0;
                let a = angle_turns(b(&p).apply([1.0, 0.0]));
                // lines, not vectors: steps wrap at a quarter turn
                let mut step = a - prev;
                step -= (step * 2.0).round() / 2.0;
                total += step;
                prev = a;
            }
            total * 2.0
        })
        .collect()
}

pub fn degree_shift_check(
    b: Arc<dyn Fn(&[f64]) -> Mat2 + Send + Sync>,
    c: &CocycleSpec,
    opts: RotationOptions,
) -> Result<DegreeShiftReport, CocycleError> {
    let d = c.dim();
    let raw = psl2_degree(b.as_ref(), d);
    if raw.iter().any(|x| (x - x.round()).abs() > 0.1) {
        return Err(CocycleError::DegenerateB { estimate: raw });
    }
    let degree: Vec<i64> = raw.iter().map(|x| x.round() as i64).collect();
    let gen = c.generator.clone();
    let alpha = c.alpha.clone();
    let bb = b.clone();
    let conj = Generator::field(move |phi: &[f64]| {
        let shifted: Vec<f64> = phi.iter().zip(&alpha).map(|(p, a)| p + a).collect();
        bb(&shifted) * gen.eval(phi) * bb(phi).inverse()
    });
    let cc = CocycleSpec { alpha: c.alpha.clone(), generator: conj, homotopy_class: None, schrodinger: false };
    let r0 = rotation_number_with(c, opts)?;
    let r1 = rotation_number_with(&cc, opts)?;
    let predicted: f64 = degree.iter().zip(&c.alpha).map(|(&k, a)| k as f64 * a).sum::<f64>() / 2.0;
    let measured = r1.value - r0.value;
    let discrepancy = wrap_half(measured - predicted).abs();
    let budget = r0.error_budget + r1.error_budget;
    Ok(DegreeShiftReport {
        degree,
        degree_raw: raw,
        rho_original: r0.value,
        rho_conjugated: r1.value,
        predicted_shift: predicted.rem_euclid(1.0),
        measured_shift: measured.rem_euclid(1.0),
        discrepancy,
        budget,
        pass: discrepancy <= budget,
    })
}

/// One CSV row of an estimator report.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorRow {
    pub estimator: String,
    pub n: usize,
    pub samples: usize,
    pub value: f64,
    pub error_budget: f64,
    pub seed: u64,
}

/// `sup_phi |A(phi) - B(phi)|` on a `n^d` grid.
pub fn grid_distance(a: &Generator, b: &Generator, d: usize, n: usize) -> f64 {
    grid_points(d, n).iter().map(|p| (a.eval(p) - b.eval(p)).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::RealityClass;

    const GOLD: f64 = 0.6180339887498949;

    #[test]
    fn iterate_identities() {
        let c = CocycleSpec::constant(vec![GOLD], Mat2::rot(0.25));
        assert_eq!(iterate(&c, &[0.1], 0), Mat2::IDENTITY);
        assert!((iterate(&c, &[0.1], 4) - Mat2::IDENTITY).max_abs() < 1e-14);
        let v = ScalarPoly::cos_mode(1, vec![1], 1.0);
        let p = SchrodingerParams { energy: 0.3, lambda: 1.5, v, phase: vec![0.0] };
        let s = schrodinger_cocycle(vec![GOLD], &p);
        let phi = [0.37];
        let lhs = iterate(&s, &phi, 8);
        let rhs = iterate(&s, &shifted(&phi, &s.alpha, 5.0), 3) * iterate(&s, &phi, 5);
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
        let back = iterate(&s, &phi, -3) * iterate(&s, &shifted(&phi, &s.alpha, -3.0), 3);
        assert!((back - Mat2::IDENTITY).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_of_constants() {
        let h = CocycleSpec::constant(vec![GOLD], Mat2::diag(2.0, 0.5));
        assert!((lyapunov_estimate(&h, 200, 3) - 2f64.ln()).abs() < 1e-10);
        let r = CocycleSpec::constant(vec![GOLD], Mat2::rot(0.3));
        assert!(lyapunov_estimate(&r, 200, 3).abs() < 1e-10);
    }

    #[test]
    fn rotation_numbers_of_constants() {
        let r = CocycleSpec::constant(vec![GOLD], Mat2::rot(0.3));
        let est = rotation_number(&r, 1000, 2).unwrap();
        assert!((est.value - 0.3).abs() < 1e-12);
        for (e, want) in [(0.0, 0.25), (1.0, 1.0 / 6.0), (-1.0, 1.0 / 3.0)] {
            let p = SchrodingerParams { energy: e, lambda: 0.0, v: ScalarPoly::real_constant(1, 0.0), phase: vec![0.0] };
            let est = rotation_number(&schrodinger_cocycle(vec![GOLD], &p), 20000, 2).unwrap();
            assert!((est.value - want).abs() < 1e-4, "E={e}: {}", est.value);
        }
    }

    #[test]
    fn non_homotopic_rejected() {
        let g = Generator::field(|phi: &[f64]| Mat2::rot(phi[0]));
        let c = CocycleSpec::new(vec![GOLD], g).unwrap();
        assert!(matches!(rotation_number(&c, 10, 1), Err(CocycleError::NotHomotopicToIdentity { .. })));
    }

    #[test]
    fn boundedness_of_constants() {
        let r = CocycleSpec::constant(vec![GOLD], Mat2::rot(0.3));
        assert!((boundedness_metric(&r, 50, 2).sup_norm - 1.0).abs() < 1e-12);
        let h = CocycleSpec::constant(vec![GOLD], Mat2::diag(2.0, 0.5));
        let b = boundedness_metric(&h, 20, 2);
        assert_eq!(b.argmax_n, 20);
        assert!((b.sup_norm - 2f64.powi(20)).abs() < 1e-6);
    }

    #[test]
    fn schrodinger_factored_form() {
        let v = &ScalarPoly::cos_mode(2, vec![1, 0], 1.0) + &ScalarPoly::cos_mode(2, vec![0, 1], 1.0);
        let p = SchrodingerParams { energy: 0.4, lambda: 0.7, v, phase: vec![0.0, 0.0] };
        let s = schrodinger_cocycle(vec![GOLD, 0.4142], &p);
        for phi in grid_points(2, 8) {
            let (c, f) = schrodinger_factors(&p, &phi);
            assert!((c * f.exp_sl2() - s.eval(&phi)).max_abs() < 1e-12);
        }
        let flat = SchrodingerParams { energy: 0.0, lambda: 1.0, v: ScalarPoly::real_constant(1, 0.5), phase: vec![0.0] };
        assert_eq!(schrodinger_cocycle(vec![GOLD], &flat).eval(&[0.3]), Mat2::new(-0.5, -1.0, 1.0, 0.0));
    }

    #[test]
    fn half_turn_conjugation_shifts_by_half_frequency() {
        let c = CocycleSpec::constant(vec![GOLD], Mat2::rot(0.2));
        let b: Arc<dyn Fn(&[f64]) -> Mat2 + Send + Sync> = Arc::new(|phi: &[f64]| Mat2::rot(phi[0] / 2.0));
        let rep = degree_shift_check(b, &c, RotationOptions::new(4000, 2)).unwrap();
        assert_eq!(rep.degree, vec![1]);
        assert!(rep.pass, "{rep:?}");
        let id: Arc<dyn Fn(&[f64]) -> Mat2 + Send + Sync> = Arc::new(|_: &[f64]| Mat2::IDENTITY);
        let rep = degree_shift_check(id, &c, RotationOptions::new(1000, 1)).unwrap();
        assert_eq!(rep.degree, vec![0]);
        assert!(rep.discrepancy < 1e-9);
    }

    #[test]
    fn poly_generator_det_check() {
        let bad = MatPoly::constant_real(1, Mat2::diag(2.0, 2.0), RealityClass::General);
        assert!(matches!(CocycleSpec::new(vec![GOLD], Generator::Poly(bad)), Err(CocycleError::NotSl2 { .. })));
    }
}
