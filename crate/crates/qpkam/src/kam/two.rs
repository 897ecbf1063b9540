//! Two-frequency step: full cohomological solve, resonant/nonresonant
//! splitting, extraction of the new `g`, reverse conjugation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use serde::Serialize;

use super::field::{conj_exp_j, expm1_j, FieldGrid};
use super::schedule::KamScheduleTwo;
use super::{
    BudgetCheck, DivisorHealth, Engine, KamError, KamOptions, KamState, Mode, NearIdentity, StepOutput, StepReport,
};
use crate::arithmetic::xprec::xf_to_f64;
use crate::arithmetic::{torus_norm_f64, torus_norm_lower, FrequencyPair};
use crate::fourier::{l1, m_decompose, m_recompose, MDecomposition, Mat2, MatPoly, NormParams, RealityClass, ScalarPoly};
use crate::homological::{divisor, solve_scalar_cohomology};

/// Guard band of the floating-point nonresonance test.
const GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub eps: f64,
    pub eta: f64,
    pub iterations: usize,
    /// Norm of the nonresonant off-diagonal part left at exit.
    pub residual: f64,
    pub nonresonant_modes: usize,
    pub resonant_modes: usize,
    pub y_norm: f64,
    pub f_re_norm: f64,
    pub y_bound_ok: bool,
    pub f_re_bound_ok: bool,
    pub exact_membership: bool,
}

#[derive(Debug, Clone)]
pub struct SplitOutput {
    pub y: MatPoly,
    /// `e^Y - I`.
    pub z_minus_i: MatPoly,
    /// Resonant remainder, with the leftover nonresonant part removed.
    pub f_re: MatPoly,
    /// The leftover nonresonant part (below the splitting tolerance).
    pub leftover: MatPoly,
    pub report: SplitReport,
}

/// Decides `min_{s = +-1} ||<k,alpha> + 2 s rho|| >= eta`.
struct Nonresonance<'a> {
    alpha: &'a [f64],
    rho: f64,
    eta: f64,
    exact: Option<(&'a FrequencyPair, BigRational, BigRational)>,
}

impl<'a> Nonresonance<'a> {
    fn new(alpha: &'a [f64], rho: f64, eta: f64, exact: Option<&'a FrequencyPair>) -> Self {
        let exact = exact.and_then(|fp| {
            let two_rho = BigRational::from_f64(2.0 * rho)?;
            let eta_q = BigRational::from_f64(eta)?;
            Some((fp, two_rho, eta_q))
        });
        Nonresonance { alpha, rho, eta, exact }
    }

    fn holds(&self, k: &[i64]) -> bool {
        if let Some((fp, two_rho, eta)) = &self.exact {
            let (lo, hi) = fp.dot_interval(k);
            return [1i64, -1].iter().all(|&s| {
                let shift = two_rho * BigRational::from_integer(BigInt::from(s));
                &torus_norm_lower(&(&lo + &shift), &(&hi + &shift)) >= eta
            });
        }
        let dot: f64 = k.iter().zip(self.alpha).map(|(&a, &b)| a as f64 * b).sum();
        [1.0, -1.0].iter().all(|s| torus_norm_f64(dot + 2.0 * s * self.rho) >= self.eta + GUARD)
    }
}

/// Replaces `F` by `F_re` through a conjugation `e^Y` with
/// `e^{Y(.+alpha)} A e^F e^{-Y} = A e^{F_re}`, `A = R_{rho}`, removing the
/// off-diagonal modes whose twisted divisors are at least `eta`.
///
/// `norm_r` is the radius of the certification norm `|.|_r`.
pub fn nre_split(
    rho: f64,
    f: &MatPoly,
    eta: f64,
    norm_r: f64,
    alpha: &[f64],
    exact: Option<&FrequencyPair>,
    opts: &KamOptions,
) -> Result<SplitOutput, KamError> {
    let d = alpha.len();
    let w = NormParams::uniform(norm_r);
    let eps = f.norm_cert(norm_r, norm_r);
    // |R_rho| = 1 in the operator norm
    if eps > 1.0 / 256.0 {
        return Err(KamError::HypothesisViolated(format!("|F| = {eps:e} exceeds (4|A|)^-4 = 1/256")));
    }
    if eta < 13.0 * eps.sqrt() {
        return Err(KamError::HypothesisViolated(format!("eta = {eta:e} is below 13 |F|^(1/2)")));
    }
    let test = Nonresonance::new(alpha, rho, eta, exact);
    let base = Mat2::rot(rho);
    let mut cur = f.clone();
    let mut z = MatPoly::zero(d, RealityClass::Sl2Real);
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut stalled = 0;
    let (resid, nonres_part) = loop {
        let parts = m_decompose(&cur)?;
        let w1 = parts.w1.filter(|k| test.holds(k));
        let resid = w1.analytic_norm(w);
        if resid < opts.split_tol || iterations >= opts.split_max_iter {
            break (resid, w1);
        }
        if resid >= 0.5 * prev {
            stalled += 1;
            if stalled >= 2 {
                return Err(KamError::NoConvergence { iterations, residual: resid });
            }
        }
        prev = resid;
        iterations += 1;
        let h1 = w1.map_coeffs(|k, c| Some(-c / divisor(k, alpha, 2.0 * rho)));
        let h2 = h1.conj_reflect();
        let zero = ScalarPoly::zero(d, RealityClass::RealScalar);
        let y = m_recompose(&MDecomposition { f_minus: zero, w1: h1, w2: h2 });
        let ys = y.shift(alpha);
        let grid = FieldGrid::for_degrees(d, &[cur.max_per_dim(), y.max_per_dim(), z.max_per_dim()], opts.grid_cap);
        let (fv, _) = grid.sample_mat(&cur);
        let (yv, _) = grid.sample_mat(&y);
        let (ysv, _) = grid.sample_mat(&ys);
        let (zv, _) = grid.sample_mat(&z);
        let next = grid.try_map(|i| {
            let x2 = base.adj() * ysv[i].expm1_sl2() * base;
            let x4 = yv[i].scale(-1.0).expm1_sl2();
            Mat2::dmul(Mat2::dmul(x2, fv[i].expm1_sl2()), x4).log1p_sl2()
        })?;
        cur = grid.to_mat(next, RealityClass::Sl2Real, opts.coeff_floor, w);
        let zn = grid.map(|i| Mat2::dmul(yv[i].expm1_sl2(), zv[i]));
        z = grid.to_mat(zn, RealityClass::Sl2Real, opts.coeff_floor, w);
    };
    if iterations >= opts.split_max_iter && resid >= opts.split_tol {
        return Err(KamError::NoConvergence { iterations, residual: resid });
    }
    let grid = FieldGrid::for_degrees(d, &[z.max_per_dim()], opts.grid_cap);
    let (zv, _) = grid.sample_mat(&z);
    let yv = grid.try_map(|i| zv[i].log1p_sl2())?;
    let y = grid.to_mat(yv, RealityClass::Sl2Real, opts.coeff_floor, w);
    let leftover = m_recompose(&MDecomposition {
        f_minus: ScalarPoly::zero(d, RealityClass::RealScalar),
        w2: nonres_part.conj_reflect(),
        w1: nonres_part,
    });
    let f_re = (&cur - &leftover).with_reality(RealityClass::Sl2Real);
    let parts = m_decompose(f)?;
    let nonresonant_modes = parts.w1.coeffs.keys().filter(|k| test.holds(k)).count();
    let y_norm = y.norm_cert(norm_r, norm_r);
    let f_re_norm = f_re.norm_cert(norm_r, norm_r);
    let report = SplitReport {
        eps,
        eta,
        iterations,
        residual: resid,
        nonresonant_modes,
        resonant_modes: parts.w1.len() - nonresonant_modes,
        y_norm,
        f_re_norm,
        y_bound_ok: y_norm <= eps.sqrt(),
        f_re_bound_ok: f_re_norm <= 2.0 * eps,
        exact_membership: test.exact.is_some(),
    };
    Ok(SplitOutput { y, z_minus_i: z, f_re, leftover, report })
}

/// One two-frequency step `n >= 0` from `(g_n, F_n)` with the truncation
/// `R_{q~_{n*+n}} g_n = 0`.
#[allow(clippy::too_many_arguments)]
pub fn kam_step_two(
    state: &KamState,
    sched: &KamScheduleTwo,
    n: usize,
    alpha: &[f64],
    exact: Option<&FrequencyPair>,
    rho_f: f64,
    opts: &KamOptions,
) -> Result<StepOutput, KamError> {
    let d = alpha.len();
    if state.f.dim != d || state.g.dim != d {
        return Err(KamError::HypothesisViolated("dimensions of alpha, g and F differ".into()));
    }
    let q_now = sched.q_tilde_at(n).ok_or_else(|| exhausted(sched, n))?;
    let q_next = sched.q_tilde_at(n + 1).ok_or_else(|| exhausted(sched, n + 1))?;
    if let Some(k) = state.g.coeffs.keys().find(|k| l1(k) as f64 >= q_now) {
        return Err(KamError::HypothesisViolated(format!("g has mode {k:?} at or above q~ = {q_now}")));
    }
    let mut health = DivisorHealth { diophantine: opts.recheck_rho(rho_f, alpha)?, ..Default::default() };
    let theory = opts.mode == Mode::Theory;
    let w = NormParams::uniform(opts.cert_r);
    let norm = |p: &MatPoly| p.norm_cert(opts.cert_r, opts.cert_r);
    let f_in = norm(&state.f);
    let eps_n = sched.row(n).map(|r| xf_to_f64(&r.eps));
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    if theory {
        let bound = eps_n.ok_or_else(|| KamError::HypothesisViolated(format!("schedule has no row {n}")))?;
        let c = BudgetCheck::new("|F_n| <= eps_n", f_in, bound);
        checks.push(c.clone());
        c.enforce(n)?;
    }

    // full cohomological solve for the non-constant part of g
    let v = solve_scalar_cohomology(alpha, &state.g, f64::INFINITY, true)?;
    if let Some(qp) = sched.q_prime_at(n) {
        let floor = 1.0 / (2.0 * qp);
        let mut ok = true;
        for k in state.g.coeffs.keys().filter(|k| l1(k) != 0) {
            let dot: f64 = k.iter().zip(alpha).map(|(&a, &b)| a as f64 * b).sum();
            health.note_divisor(divisor(k, alpha, 0.0).norm());
            ok &= torus_norm_f64(dot) >= floor;
        }
        health.floor_ok = Some(ok);
    }
    let g0 = state.g.mean().re;
    let grid = FieldGrid::for_degrees(d, &[state.f.max_per_dim(), v.max_per_dim()], opts.grid_cap);
    let (fv, mut dropped) = grid.sample_mat(&state.f);
    let (vv, dv) = grid.sample_scalar(&v);
    dropped += dv;
    let shift = expm1_j(-g0);
    let ft = grid.try_map(|i| Mat2::dmul(shift, conj_exp_j(-vv[i], fv[i]).expm1_sl2()).log1p_sl2())?;
    let f_tilde = grid.to_mat(ft, RealityClass::Sl2Real, opts.coeff_floor, w);

    // splitting
    let eps = norm(&f_tilde);
    let split = if eps > 0.0 {
        Some(nre_split(rho_f, &f_tilde, 13.0 * eps.sqrt(), opts.cert_r, alpha, exact, opts)?)
    } else {
        None
    };
    let (f_cur, z) = match &split {
        Some(s) => ((&s.f_re + &s.leftover).with_reality(RealityClass::Sl2Real), s.z_minus_i.clone()),
        None => (f_tilde.clone(), MatPoly::zero(d, RealityClass::Sl2Real)),
    };

    // new g from the low diagonal modes
    let parts = m_decompose(&f_cur)?;
    let g_bar = parts.f_minus.filter(|k| (l1(k) as f64) < q_next).scale((-1.0).into());
    let g_bar = g_bar.with_reality(RealityClass::RealScalar);
    let grid = FieldGrid::for_degrees(d, &[f_cur.max_per_dim(), g_bar.max_per_dim(), z.max_per_dim(), v.max_per_dim()], opts.grid_cap);
    let (fc, a1) = grid.sample_mat(&f_cur);
    let (gb, a2) = grid.sample_scalar(&g_bar);
    let (zv, a3) = grid.sample_mat(&z);
    let (vv, a4) = grid.sample_scalar(&v);
    dropped += a1 + a2 + a3 + a4;
    let f_bar = grid.try_map(|i| Mat2::dmul(expm1_j(gb[i]), fc[i].expm1_sl2()).log1p_sl2())?;

    // reverse conjugation
    let f_plus = grid.map(|i| conj_exp_j(vv[i], f_bar[i]));
    let f_plus = grid.to_mat(f_plus, RealityClass::Sl2Real, opts.coeff_floor, w);
    let phi = grid.map(|i| conj_exp_j(vv[i], zv[i]));
    let phi = NearIdentity { minus_i: grid.to_mat(phi, RealityClass::Sl2Real, opts.coeff_floor, w) };
    let mut g_rest = state.g.clone();
    g_rest.coeffs.remove(&vec![0; d]);
    let g_plus = (&g_rest + &g_bar).with_reality(RealityClass::RealScalar);
    let truncation_ok = g_plus.coeffs.keys().all(|k| (l1(k) as f64) < q_next);
    if !truncation_ok {
        notes.push("truncation invariant failed".into());
    }
    let output = KamState::new(g_plus, f_plus);
    let audit_sup = super::conjugation_audit(&phi, alpha, rho_f, state, &output, opts.audit_points);
    let f_out = norm(&output.f);
    let phi_norm = norm(&phi.minus_i);
    let g_change = (&output.g - &state.g).norm_cert(opts.cert_r, opts.cert_r);
    if let Some(en) = eps_n {
        let mut budget = vec![BudgetCheck::new("|g_{n+1} - g_n| <= 4 eps_n^{3/4}", g_change, 4.0 * en.powf(0.75))];
        if let Some(next) = sched.row(n + 1) {
            budget.insert(0, BudgetCheck::new("|F_{n+1}| <= eps_{n+1}", f_out, xf_to_f64(&next.eps)));
        }
        for c in budget {
            if theory {
                c.enforce(n)?;
            }
            checks.push(c);
        }
    }
    checks.push(BudgetCheck::new("R_{q~_{n*+n+1}} g_{n+1} = 0", if truncation_ok { 0.0 } else { 1.0 }, 0.0));
    let report = StepReport {
        step: n,
        engine: Engine::Two,
        mode: opts.mode,
        f_in,
        f_out,
        phi_norm,
        g_change,
        audit_sup,
        grid: grid.dims,
        dropped,
        substeps: Vec::new(),
        n_literal: None,
        divisors: health,
        checks,
        split: split.map(|s| s.report),
        notes,
    };
    Ok(StepOutput { state: output, phi, report })
}

fn exhausted(sched: &KamScheduleTwo, n: usize) -> KamError {
    KamError::HypothesisViolated(format!(
        "frequency data exhausted: q~ index {} needed, {} stored",
        sched.n_star + n,
        sched.q_tilde.len()
    ))
}
