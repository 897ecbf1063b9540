//! Multifrequency step: resonance removal, inner Newton loop, reverse
//! conjugation.

use super::field::{conj_exp_j, expm1_j, FieldGrid};
use super::schedule::{ln_f64, KamScheduleMulti};
use super::{
    adaptive_k, BudgetCheck, DivisorHealth, Engine, KamError, KamOptions, KamState, Mode, NearIdentity, StepOutput,
    StepReport, SubStep,
};
use crate::arithmetic::xprec::xf_to_f64;
use crate::fourier::{l1, m_decompose, m_recompose, MDecomposition, Mat2, MatPoly, RealityClass, ScalarPoly, Side};
use crate::homological::{divisor, solve_layers, solve_scalar_cohomology, HomError};

/// Mean of a real scalar series.
fn mean_re(g: &ScalarPoly) -> f64 {
    g.mean().re
}

fn constant(d: usize, c: f64) -> ScalarPoly {
    ScalarPoly::real_constant(d, c)
}

/// `e^{tJ} F e^{-tJ}` with `t = sign * v(phi)`, on a grid.
fn conjugate_by_v(f: &MatPoly, v: &ScalarPoly, sign: f64, opts: &KamOptions, dropped: &mut f64) -> (MatPoly, Vec<usize>) {
    let d = f.dim;
    let grid = FieldGrid::for_degrees(d, &[f.max_per_dim(), v.max_per_dim()], opts.grid_cap);
    let (fv, a) = grid.sample_mat(f);
    let (vv, b) = grid.sample_scalar(v);
    *dropped += a + b;
    let out = grid.map(|i| conj_exp_j(sign * vv[i], fv[i]));
    (grid.to_mat(out, f.reality, opts.coeff_floor, opts.norm()), grid.dims)
}

struct NewtonOut {
    f: MatPoly,
    g: ScalarPoly,
    psi: MatPoly,
    substeps: Vec<SubStep>,
    grid: Vec<usize>,
}

/// Literal inner-loop truncations for theory mode.
struct Literal {
    sigma1: f64,
    ln_eta0: f64,
}

impl Literal {
    fn k(&self, nu: usize) -> f64 {
        let sigma = self.sigma1 / 2f64.powi(nu as i32 - 1);
        let ln_eta = 1.5f64.powi(nu as i32 - 1) * self.ln_eta0;
        (-ln_eta / (2.0 * std::f64::consts::PI * sigma)).floor() + 1.0
    }
}

#[allow(clippy::too_many_arguments)]
fn newton_loop(
    alpha: &[f64],
    rho_f: f64,
    f0: MatPoly,
    g0: ScalarPoly,
    max_sub: usize,
    literal: Option<&Literal>,
    opts: &KamOptions,
    health: &mut DivisorHealth,
    dropped: &mut f64,
    notes: &mut Vec<String>,
) -> Result<NewtonOut, KamError> {
    let d = alpha.len();
    let w = opts.norm();
    let mut f = f0;
    let mut g = g0;
    let mut psi = MatPoly::zero(d, RealityClass::Sl2Real);
    let mut substeps = Vec::new();
    let mut grid_dims = Vec::new();
    for nu in 1..=max_sub {
        let eps = opts.mat_norm(&f);
        if eps == 0.0 || (opts.mode == Mode::Practical && eps <= 0.1 * opts.tol) {
            break;
        }
        let k = match literal {
            Some(lit) => {
                let kl = lit.k(nu);
                if kl > opts.k_cap as f64 {
                    notes.push(format!("sub-step {nu}: literal K = {kl:.0} capped at {}", opts.k_cap));
                }
                kl.min(opts.k_cap as f64).max(1.0) as usize
            }
            None => adaptive_k(&f, 0.1 * (0.1 * opts.tol).max(eps * eps), opts.k_cap, opts),
        };
        let parts = m_decompose(&f)?;
        let is_theta_free = |k: &[i64]| k[1..].iter().all(|&x| x == 0);
        let c = parts.f_minus.filter(is_theta_free);
        let mut y_minus = ScalarPoly::zero(d, RealityClass::RealScalar);
        for (idx, coef) in &parts.f_minus.coeffs {
            if is_theta_free(idx) || l1(idx) >= k as i64 {
                continue;
            }
            let dv = divisor(idx, alpha, 0.0);
            health.note_divisor(dv.norm());
            if dv.norm() < 1e-14 {
                return Err(HomError::DivisorUnderflow { k: idx.clone(), divisor: dv.norm() }.into());
            }
            y_minus.coeffs.insert(idx.clone(), -coef / dv);
        }
        let (h1, layers, _) = solve_layers(alpha, rho_f, &g, &parts.w1, k, opts.cert_r)?;
        health.note_layers(&layers);
        let h2 = h1.conj_reflect();
        let y = m_recompose(&MDecomposition { f_minus: y_minus, w1: h1, w2: h2 }).with_reality(RealityClass::Sl2Real);
        let y_shift = y.shift(alpha);
        let grid = FieldGrid::for_degrees(
            d,
            &[f.max_per_dim(), y.max_per_dim(), g.max_per_dim(), psi.max_per_dim()],
            opts.grid_cap,
        );
        let (fv, a1) = grid.sample_mat(&f);
        let (yv, a2) = grid.sample_mat(&y);
        let (ysv, a3) = grid.sample_mat(&y_shift);
        let (gv, a4) = grid.sample_scalar(&g);
        let (cv, a5) = grid.sample_scalar(&c);
        let (pv, a6) = grid.sample_mat(&psi);
        *dropped += a1 + a2 + a3 + a4 + a5 + a6;
        let base = Mat2::rot(rho_f);
        let fnew = grid.try_map(|i| {
            let a = base * Mat2::exp_j(-gv[i]);
            let x1 = expm1_j(-cv[i]);
            let x2 = a.adj() * ysv[i].expm1_sl2() * a;
            let x3 = fv[i].expm1_sl2();
            let x4 = yv[i].scale(-1.0).expm1_sl2();
            Mat2::dmul(Mat2::dmul(Mat2::dmul(x1, x2), x3), x4).log1p_sl2()
        })?;
        let fnew = grid.to_mat(fnew, RealityClass::Sl2Real, opts.coeff_floor, w);
        let after = opts.mat_norm(&fnew);
        let accepted = literal.is_some() || after < eps;
        substeps.push(SubStep { k, f_before: eps, f_after: after, y_norm: opts.mat_norm(&y), accepted });
        if !accepted {
            notes.push(format!("sub-step {nu} discarded: |F| {eps:e} -> {after:e}"));
            break;
        }
        let pnew = grid.map(|i| Mat2::dmul(yv[i].expm1_sl2(), pv[i]));
        psi = grid.to_mat(pnew, RealityClass::Sl2Real, opts.coeff_floor, w);
        g = (&g - &c).with_reality(RealityClass::RealScalar);
        f = fnew;
        grid_dims = grid.dims;
    }
    Ok(NewtonOut { f, g, psi, substeps, grid: grid_dims })
}

/// One multifrequency step `n >= 1` from `(g_{n-1}, F_{n-1})`.
///
/// `g` must depend on the first coordinate only; the generator is
/// `R_{rho_f + g/2pi} e^F`.
pub fn kam_step_multi(
    state: &KamState,
    sched: &KamScheduleMulti,
    n: usize,
    alpha: &[f64],
    rho_f: f64,
    opts: &KamOptions,
) -> Result<StepOutput, KamError> {
    let d = alpha.len();
    if n == 0 || state.f.dim != d || state.g.dim != d {
        return Err(KamError::HypothesisViolated("step index starts at 1 and dimensions must agree".into()));
    }
    if state.g.coeffs.keys().any(|k| k[1..].iter().any(|&x| x != 0)) {
        return Err(KamError::HypothesisViolated("g must depend on the first coordinate only".into()));
    }
    let mut health = DivisorHealth { diophantine: opts.recheck_rho(rho_f, alpha)?, ..Default::default() };
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    let mut dropped = 0.0;
    let theory = opts.mode == Mode::Theory;
    let f_in = opts.mat_norm(&state.f);
    let eps_prev = sched.row(n - 1).map(|r| xf_to_f64(&r.eps));
    if theory {
        let bound = eps_prev.ok_or_else(|| KamError::HypothesisViolated(format!("schedule has no row {}", n - 1)))?;
        let c = BudgetCheck::new("|F_{n-1}| <= eps_{n-1}", f_in, bound);
        checks.push(c.clone());
        c.enforce(n)?;
    }

    // resonance removal
    let q = sched.q(n).unwrap_or(1.0);
    let (v, g_t, f_t) = if n >= 2 && q > 1.0 {
        let v = solve_scalar_cohomology(alpha, &state.g, q, true)?;
        let mut g_t = state.g.truncate(q, Side::High);
        g_t.coeffs.remove(&vec![0; d]);
        let g_t = (&g_t + &constant(d, mean_re(&state.g))).with_reality(RealityClass::RealScalar);
        let f_t = if v.is_empty() { state.f.clone() } else { conjugate_by_v(&state.f, &v, -1.0, opts, &mut dropped).0 };
        (v, g_t, f_t)
    } else {
        (ScalarPoly::zero(d, RealityClass::RealScalar), state.g.clone(), state.f.clone())
    };

    // inner loop
    let n_literal = sched.newton_steps(n);
    let (max_sub, literal) = if theory {
        let nl = n_literal.unwrap_or(1.0);
        let cap = opts.theory_substep_cap as f64;
        if nl > cap {
            notes.push(format!("literal N = {nl:.0} capped at {cap}"));
        }
        let r_tilde = if n == 1 { sched.params.r0 } else { sched.params.r0 / q.powi(3) };
        let ln_eps = sched.row(n - 1).map(|r| ln_f64(&r.eps)).unwrap_or(f64::NEG_INFINITY);
        (nl.min(cap) as usize, Some(Literal { sigma1: r_tilde / 8.0, ln_eta0: 2f64.ln() + ln_eps }))
    } else {
        (opts.max_substeps, None)
    };
    let out = newton_loop(alpha, rho_f, f_t, g_t.clone(), max_sub, literal.as_ref(), opts, &mut health, &mut dropped, &mut notes)?;

    // reverse conjugation
    let (f_out, g_out, phi) = if v.is_empty() {
        (out.f, out.g, NearIdentity { minus_i: out.psi })
    } else {
        let (f_out, _) = conjugate_by_v(&out.f, &v, 1.0, opts, &mut dropped);
        let g_out = (&(&out.g + &state.g) - &g_t).with_reality(RealityClass::RealScalar);
        let (psi, _) = conjugate_by_v(&out.psi, &v, 1.0, opts, &mut dropped);
        (f_out, g_out, NearIdentity { minus_i: psi.with_reality(RealityClass::Sl2Real) })
    };
    let output = KamState::new(g_out, f_out);
    let audit_sup = super::conjugation_audit(&phi, alpha, rho_f, state, &output, opts.audit_points);
    let f_out_norm = opts.mat_norm(&output.f);
    let phi_norm = opts.mat_norm(&phi.minus_i);
    let g_change = opts.scalar_norm(&(&output.g - &state.g));

    if let Some(ep) = eps_prev {
        let eps_n = sched.row(n).map(|r| xf_to_f64(&r.eps));
        let mut budget = vec![
            BudgetCheck::new("|Phi_n - I| <= 2 eps_{n-1}^{3/4}", phi_norm, 2.0 * ep.powf(0.75)),
            BudgetCheck::new("|g_n - g_{n-1}| <= 4 eps_{n-1}", g_change, 4.0 * ep),
        ];
        if let Some(en) = eps_n {
            budget.insert(0, BudgetCheck::new("|F_n| <= eps_n", f_out_norm, en));
        }
        for c in budget {
            if theory {
                c.enforce(n)?;
            }
            checks.push(c);
        }
    }
    let report = StepReport {
        step: n,
        engine: Engine::Multi,
        mode: opts.mode,
        f_in,
        f_out: f_out_norm,
        phi_norm,
        g_change,
        audit_sup,
        grid: out.grid,
        dropped,
        substeps: out.substeps,
        n_literal,
        divisors: health,
        checks,
        split: None,
        notes,
    };
    Ok(StepOutput { state: output, phi, report })
}
