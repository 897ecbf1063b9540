//! Parameter schedules of the two engines in extended precision.
//!
//! The smallness thresholds are astronomically small, so every quantity is
//! held as an [`XFloat`]; serialised forms carry natural logarithms.

use dashu_float::ops::Abs;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize, Serializer};

use crate::arithmetic::xprec::{xf_f64, xf_floor, xf_int, xf_to_f64, XFloat};
use crate::arithmetic::{select_cd_bridges, u_tilde, ArithError, BridgeSelection, ContinuedFraction};

/// Working precision in bits.
pub const XPREC: usize = 256;

pub fn xf(x: f64) -> XFloat {
    xf_f64(x, XPREC)
}

fn xint(n: i64) -> XFloat {
    xf_int(&BigInt::from(n), XPREC)
}

fn xbig(n: &BigInt) -> XFloat {
    xf_int(n, XPREC)
}

/// Natural log as `f64` (`-inf` for zero).
pub fn ln_f64(x: &XFloat) -> f64 {
    if *x <= XFloat::ZERO {
        return f64::NEG_INFINITY;
    }
    xf_to_f64(&x.ln())
}

fn ser_ln<S: Serializer>(x: &XFloat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(ln_f64(x))
}

fn ser_xf<S: Serializer>(x: &XFloat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(xf_to_f64(x))
}

fn ser_big<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Bernoulli numbers `B_0..B_n` (Akiyama-Tanigawa, `B_1 = +1/2`).
fn bernoulli(n: usize) -> Vec<BigRational> {
    let mut a: Vec<BigRational> = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        a.push(BigRational::new(BigInt::one(), BigInt::from(m as i64 + 1)));
        for j in (1..=m).rev() {
            let jj = BigRational::from_integer(BigInt::from(j as i64));
            a[j - 1] = jj * (&a[j - 1] - &a[j]);
        }
        out.push(a[0].clone());
    }
    out
}

fn xrat(r: &BigRational) -> XFloat {
    xbig(r.numer()) / xbig(r.denom())
}

/// `ln Gamma(x)` for `x > 0`: upward recurrence to `x >= 64`, then the
/// Stirling series with 30 Bernoulli terms (remainder below `1e-70`).
pub fn ln_gamma(x: &XFloat) -> XFloat {
    assert!(*x > XFloat::ZERO, "ln_gamma needs a positive argument");
    let bern = bernoulli(60);
    let mut w = x.clone();
    let mut shift = XFloat::ZERO.with_precision(XPREC).value();
    let sixty_four = xint(64);
    while w < sixty_four {
        shift += w.ln();
        w += xint(1);
    }
    let half = xf(0.5);
    let two_pi = XFloat::pi(XPREC) * xint(2);
    let mut s = (&w - &half) * w.ln() - &w + two_pi.ln() * &half;
    let w2 = &w * &w;
    let mut wpow = w.clone();
    for k in 1..=30usize {
        let b = xrat(&bern[2 * k]);
        s += b / (xint((2 * k * (2 * k - 1)) as i64) * &wpow);
        wpow = &wpow * &w2;
    }
    s - shift
}

/// Largest root of a convex increasing-at-infinity `phi`, by Newton from
/// the right starting at `t0` (which must satisfy `phi(t0) > 0`).
fn newton_right(t0: XFloat, phi: impl Fn(&XFloat) -> (XFloat, XFloat)) -> XFloat {
    let mut t = t0;
    let tol = xf(2f64.powi(-230));
    for _ in 0..400 {
        let (v, dv) = phi(&t);
        let step = v / dv;
        t -= &step;
        if step.clone().abs() <= &tol * (t.clone().abs() + xint(1)) {
            break;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// multifrequency engine

/// Inputs of the multifrequency schedule. `c_global > 100` and the
/// Diophantine pairs are configuration; `c_star` is the unpinned constant
/// of the smallness condition (lab default 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiParams {
    pub r0: f64,
    pub s0: f64,
    pub eps0: f64,
    pub gamma: f64,
    pub tau: f64,
    pub gamma_prime: f64,
    pub tau_prime: f64,
    pub c_global: f64,
    pub c_star: f64,
    pub a_param: f64,
    pub dim: usize,
    /// Override for `U`; default `U~ + 8`.
    pub u: Option<f64>,
}

impl Default for MultiParams {
    fn default() -> Self {
        MultiParams {
            r0: 0.1,
            s0: 0.1,
            eps0: 1e-6,
            gamma: 0.01,
            tau: 3.0,
            gamma_prime: 0.01,
            tau_prime: 3.0,
            c_global: 101.0,
            c_star: 1.0,
            a_param: 4.0,
            dim: 2,
            u: None,
        }
    }
}

impl MultiParams {
    pub fn tau_star(&self) -> f64 {
        self.tau.max(self.tau_prime)
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma.min(self.gamma_prime)
    }
}

/// One row `j` of the multifrequency sequences.
#[derive(Debug, Clone, Serialize)]
pub struct MultiRow {
    pub n: usize,
    #[serde(serialize_with = "ser_big")]
    pub q_n: BigInt,
    #[serde(serialize_with = "ser_ln", rename = "ln_r")]
    pub r: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_r_bar")]
    pub r_bar: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub delta: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub s: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_eps")]
    pub eps: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_eps_tilde")]
    pub eps_tilde: XFloat,
}

/// Evaluated smallness condition on `eps0` for the multifrequency engine,
/// all terms as natural logarithms.
#[derive(Debug, Clone, Serialize)]
pub struct PertCondition {
    #[serde(serialize_with = "ser_xf")]
    pub ln_eps0: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_geometric: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_exponential: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_q_star_term: XFloat,
    /// `ln ln(1/eps0)` and `ln(1/eps0) / (12 tau*)`, compared after taking
    /// logs of both sides.
    #[serde(serialize_with = "ser_xf")]
    pub side_lhs: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub side_rhs: XFloat,
    #[serde(serialize_with = "ser_big")]
    pub q_star: BigInt,
    #[serde(serialize_with = "ser_xf")]
    pub t_star: XFloat,
    pub eps0_zero: bool,
    pub pass_each: [bool; 4],
    pub pass: bool,
}

/// `Q*`: the smallest integer with `ln Q < Q^{1/8} a` for all larger `Q`,
/// `a = r0 / (40 c tau* U)`, together with the root `t*` of
/// `ln a + t/8 - ln t` (zero when there is no root and `Q* = 1`). The root
/// is computed at the precision of `a`.
pub fn q_star(a: &XFloat) -> (BigInt, XFloat) {
    let ln_a = a.ln();
    let eight = xint(8);
    // convex in t with minimum at t = 8
    let at_min = &ln_a + xint(1) - eight.ln();
    if at_min >= XFloat::ZERO {
        return (BigInt::one(), XFloat::ZERO);
    }
    let l = (-ln_a.clone()).max(XFloat::ZERO);
    let t0 = l * xint(16) + xint(64);
    let t = newton_right(t0, |t| (&ln_a + t / &eight - t.ln(), xf(0.125) - xint(1) / t));
    let bits = xf_to_f64(&t) * std::f64::consts::LOG2_E + 128.0;
    let big = t.clone().with_precision(t.precision() + bits as usize).value().exp();
    (xf_floor(&big), t)
}

pub fn pert_condition(p: &MultiParams, u: f64, q1: &BigInt) -> PertCondition {
    let ts = xf(p.tau_star());
    let c = xf(p.c_global);
    let uu = xf(u);
    let d = xint(p.dim as i64);
    let ctu = &c * &ts * &uu;
    let base = xf(p.r0) * xf(p.s0) * xf(p.gamma_star()) / xf(p.c_star);
    let ln_geometric =
        base.ln() * xint(60) * (&ts + &d) - ln_gamma(&(&ts + &d + xint(1))) - xbig(q1).ln() * xint(12) * &ctu;
    let ln_exponential = -(&ctu * xint(2));
    // Q* can exceed 2^256, so the root is solved at twice the working precision
    let a = xf_f64(p.r0, 2 * XPREC) / (xint(40) * &ctu);
    let (qs, t_star) = q_star(&a);
    let lnq = xbig(&qs).ln();
    let ln_q_star_term = -(&lnq * &lnq * xint(40) * &ctu);
    if p.eps0 <= 0.0 {
        return PertCondition {
            ln_eps0: XFloat::ZERO,
            ln_geometric,
            ln_exponential,
            ln_q_star_term,
            side_lhs: XFloat::ZERO,
            side_rhs: XFloat::ZERO,
            q_star: qs,
            t_star,
            eps0_zero: true,
            pass_each: [true; 4],
            pass: true,
        };
    }
    let ln_eps0 = xf(p.eps0).ln();
    let l = -ln_eps0.clone();
    let (side_lhs, side_rhs, side) = if l > XFloat::ZERO {
        let lhs = l.ln();
        let rhs = &l / (&ts * xint(12));
        let ok = lhs < rhs;
        (lhs, rhs, ok)
    } else {
        (XFloat::ZERO, XFloat::ZERO, false)
    };
    let pass_each = [ln_eps0 < ln_geometric, ln_eps0 < ln_exponential, ln_eps0 < ln_q_star_term, side];
    PertCondition {
        ln_eps0,
        ln_geometric,
        ln_exponential,
        ln_q_star_term,
        side_lhs,
        side_rhs,
        q_star: qs,
        t_star,
        eps0_zero: false,
        pass_each,
        pass: pass_each.iter().all(|&b| b),
    }
}

/// Sequences of the multifrequency engine driven by the CD-bridge
/// subsequence `Q_j` of the first frequency.
#[derive(Debug, Clone, Serialize)]
pub struct KamScheduleMulti {
    pub params: MultiParams,
    pub selection: BridgeSelection,
    pub u: f64,
    pub c1: f64,
    pub rows: Vec<MultiRow>,
    pub condition: PertCondition,
}

impl KamScheduleMulti {
    pub fn new(params: MultiParams, alpha_tilde: &ContinuedFraction) -> Result<Self, ArithError> {
        if !(params.r0 > 0.0 && params.s0 > 0.0 && params.c_global > 100.0) {
            return Err(ArithError::InvalidArgument("need r0, s0 > 0 and c > 100".into()));
        }
        let selection = select_cd_bridges(alpha_tilde, params.a_param)?;
        let u = params.u.unwrap_or(u_tilde(alpha_tilde) + 8.0);
        let ts = params.tau_star();
        let c1 = params.c_global / (24.0 * ts * 3f64.ln());
        let q = &selection.q;
        let r0 = xf(params.r0);
        let delta0 = xf(params.s0) / xint(4);
        let ctu = xf(params.c_global) * xf(ts) * xf(u);
        let mut rows = vec![MultiRow {
            n: 0,
            q_n: BigInt::one(),
            r: r0.clone(),
            r_bar: r0.clone(),
            delta: delta0.clone(),
            s: xf(params.s0),
            eps: xf(params.eps0),
            eps_tilde: XFloat::ZERO.with_precision(XPREC).value(),
        }];
        // row j needs Q_j and Q_{j+1}
        for j in 1..q.len().saturating_sub(1) + 1 {
            if j + 1 > q.len() {
                break;
            }
            let qj = &q[j - 1];
            let qn = &q[j];
            let prev = rows.last().unwrap();
            let q3 = xbig(qj).powi(3.into());
            let delta = &delta0 / xint(1i64 << j.min(62));
            let s = &prev.s - &delta;
            let expo = &ctu * xint(1i64 << (j + 1).min(62));
            let eps = &prev.eps / (xbig(qn).ln() * expo).exp();
            let eps_tilde = &prev.eps_tilde + &prev.eps;
            rows.push(MultiRow {
                n: j,
                q_n: qj.clone(),
                r: &r0 / (xint(2) * &q3),
                r_bar: &r0 / &q3,
                delta,
                s,
                eps,
                eps_tilde,
            });
        }
        let condition = pert_condition(&params, u, &q[0]);
        Ok(KamScheduleMulti { params, selection, u, c1, rows, condition })
    }

    /// `Q_n` (1-based) as `f64`, saturating for huge values.
    pub fn q(&self, n: usize) -> Option<f64> {
        self.selection.q.get(n.checked_sub(1)?).map(|x| x.to_f64().unwrap_or(f64::MAX))
    }

    /// Inner-loop length `N = [2^n c1 tau* U ln Q_n] + 1`.
    pub fn newton_steps(&self, n: usize) -> Option<f64> {
        let q = self.selection.q.get(n.checked_sub(1)?)?;
        let lq = crate::arithmetic::xprec::xf_to_f64(&xbig(q).ln());
        Some((2f64.powi(n as i32) * self.c1 * self.params.tau_star() * self.u * lq).floor() + 1.0)
    }

    pub fn row(&self, n: usize) -> Option<&MultiRow> {
        self.rows.get(n)
    }
}

// ---------------------------------------------------------------------------
// two-frequency engine

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoParams {
    pub r0: f64,
    pub eps0: f64,
    pub gamma: f64,
    pub tau: f64,
    pub chi: f64,
    /// The small constant of the smallness condition (lab default 1).
    pub c_small: f64,
    /// Replaces the selected `n*` (practical runs on short frequency data).
    pub n_star_override: Option<usize>,
}

impl Default for TwoParams {
    fn default() -> Self {
        TwoParams { r0: 0.1, eps0: 1e-6, gamma: 0.01, tau: 3.0, chi: 5.0, c_small: 1.0, n_star_override: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoRow {
    pub n: usize,
    #[serde(serialize_with = "ser_ln", rename = "ln_r")]
    pub r: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_r_bar")]
    pub r_bar: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_eps")]
    pub eps: XFloat,
    #[serde(serialize_with = "ser_ln", rename = "ln_eps_tilde")]
    pub eps_tilde: XFloat,
    /// `e^{-q~_{n*+n+1}^{1/10} r0} <= eps_n`, when `q~_{n*+n+1}` is known.
    pub est_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsCondition {
    #[serde(serialize_with = "ser_xf")]
    pub ln_eps0: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_bound_gamma: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_bound_ell: XFloat,
    #[serde(serialize_with = "ser_xf")]
    pub ln_ell_star: XFloat,
    pub eps0_zero: bool,
    pub pass: bool,
}

/// Per-index status of the selection inequalities.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRow {
    pub n: usize,
    pub growth_ok: bool,
    pub smallness_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KamScheduleTwo {
    pub params: TwoParams,
    #[serde(serialize_with = "ser_big_vec")]
    pub q_tilde: Vec<BigInt>,
    #[serde(serialize_with = "ser_big_vec")]
    pub q_prime: Vec<BigInt>,
    pub selection: Vec<SelectionRow>,
    pub n_star: usize,
    /// The selection held for every stored index above `n*`.
    pub n_star_certified: bool,
    pub condition: EpsCondition,
    pub rows: Vec<TwoRow>,
}

fn ser_big_vec<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

/// `ln l*`: the largest root of `r0 e^{t/10} - 16 chi tau^2 t - 11 ln 2`
/// (`l* = max(2, e^{t*})`).
pub fn ln_ell_star(r0: f64, chi: f64, tau: f64) -> XFloat {
    let r = xf(r0);
    let b = xf(16.0 * chi * tau * tau);
    let c0 = xint(11) * xint(2).ln();
    let ten = xint(10);
    let psi = |t: &XFloat| -> (XFloat, XFloat) {
        let e = (t / &ten).exp();
        (&r * &e - &b * t - &c0, &r * &e / &ten - &b)
    };
    let mut t0 = xf(20.0 * ((16.0 * chi * tau * tau + 8.0) / r0).ln().max(1.0) + 40.0);
    while psi(&t0).0 <= XFloat::ZERO {
        t0 = &t0 * xint(2);
    }
    let t = newton_right(t0, psi);
    let ln2 = xint(2).ln();
    if t < ln2 {
        ln2
    } else {
        t
    }
}

impl KamScheduleTwo {
    /// `q_tilde[m]`, `q_prime[m]` are the convergent denominators with
    /// `m = 0, 1, ...` (index 0 is the trivial denominator 1).
    pub fn new(params: TwoParams, q_tilde: Vec<BigInt>, q_prime: Vec<BigInt>) -> Result<Self, ArithError> {
        if !(params.r0 > 0.0 && params.r0 <= 1.0 && params.chi >= 5.0 && params.tau > 2.0) {
            return Err(ArithError::InvalidArgument("need 0 < r0 <= 1, chi >= 5, tau > 2".into()));
        }
        if q_tilde.len() < 2 || q_prime.len() != q_tilde.len() {
            return Err(ArithError::InvalidArgument("need matching denominator lists with at least 2 entries".into()));
        }
        let r0 = xf(params.r0);
        let expo = 16.0 * params.chi * params.tau * params.tau;
        let lt = ln_ell_star(params.r0, params.chi, params.tau);
        let eps0_zero = params.eps0 <= 0.0;
        let ln_eps0 = if eps0_zero { XFloat::ZERO } else { xf(params.eps0).ln() };
        let ln_bound_gamma = xf(params.c_small).ln() + xf(params.gamma).ln() * xf(8.0 * (params.tau + 1.0)) + r0.ln() * xint(16);
        let ln_bound_ell = -(&lt * xf(expo));
        let pass = eps0_zero || (ln_eps0 < ln_bound_gamma && ln_eps0 < ln_bound_ell);
        let condition = EpsCondition {
            ln_eps0: ln_eps0.clone(),
            ln_bound_gamma,
            ln_bound_ell,
            ln_ell_star: lt,
            eps0_zero,
            pass,
        };
        let power_tenth = |m: usize| -> XFloat { (xbig(&q_tilde[m]).ln() / xint(10)).exp() * &r0 };
        let selection: Vec<SelectionRow> = (1..q_tilde.len())
            .map(|m| {
                let lhs = xint(11) * xint(2).ln() + xbig(&q_tilde[m]).ln() * xf(expo);
                let e = power_tenth(m);
                let growth_ok = lhs <= e;
                let smallness_ok = eps0_zero || -e <= ln_eps0;
                SelectionRow { n: m, growth_ok, smallness_ok }
            })
            .collect();
        let last = q_tilde.len() - 1;
        let mut n_star = last;
        for n in (0..last).rev() {
            let s = &selection[n];
            if s.growth_ok && s.smallness_ok {
                n_star = n;
            } else {
                break;
            }
        }
        let n_star_certified = n_star < last;
        let n_star = params.n_star_override.unwrap_or(n_star);

        let mut rows = vec![TwoRow {
            n: 0,
            r: r0.clone(),
            r_bar: r0.clone(),
            eps: xf(params.eps0),
            eps_tilde: XFloat::ZERO.with_precision(XPREC).value(),
            est_holds: None,
        }];
        let mut eps_sum = xf(params.eps0).powf(&xf(0.75));
        for n in 1.. {
            let m = n_star + n;
            if m >= q_tilde.len() {
                break;
            }
            let qp_prev = xbig(&q_prime[m - 1]);
            let qp = xbig(&q_prime[m]);
            let prev = rows.last().unwrap();
            let eps = &prev.eps * (-(power_tenth(m) / xint(2))).exp();
            let eps_tilde = &eps_sum * xint(4);
            eps_sum += if eps > XFloat::ZERO { eps.powf(&xf(0.75)) } else { XFloat::ZERO };
            rows.push(TwoRow {
                n,
                r: &r0 / (xint(2) * &qp_prev * &qp_prev),
                r_bar: &r0 * xint(4) / (&qp * &qp),
                eps,
                eps_tilde,
                est_holds: None,
            });
        }
        for row in rows.iter_mut() {
            let m = n_star + row.n + 1;
            if m < q_tilde.len() {
                let lhs = -power_tenth(m);
                row.est_holds = Some(eps0_zero || lhs <= row.eps.ln());
            }
        }
        Ok(KamScheduleTwo { params, q_tilde, q_prime, selection, n_star, n_star_certified, condition, rows })
    }

    /// `q~_{n* + n}` as `f64`.
    pub fn q_tilde_at(&self, n: usize) -> Option<f64> {
        self.q_tilde.get(self.n_star + n).map(|x| x.to_f64().unwrap_or(f64::MAX))
    }

    pub fn q_prime_at(&self, n: usize) -> Option<f64> {
        self.q_prime.get(self.n_star + n).map(|x| x.to_f64().unwrap_or(f64::MAX))
    }

    pub fn row(&self, n: usize) -> Option<&TwoRow> {
        self.rows.get(n)
    }
}

/// Compares two extended values to a relative tolerance.
pub fn rel_close(a: &XFloat, b: &XFloat, tol: f64) -> bool {
    let diff = (a - b).abs();
    let scale = a.clone().abs().max(b.clone().abs());
    if scale == XFloat::ZERO {
        return diff == XFloat::ZERO;
    }
    diff <= scale * xf(tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        // ln 20! = ln 2432902008176640000
        let v = ln_gamma(&xint(21));
        let exact = xbig(&"2432902008176640000".parse::<BigInt>().unwrap()).ln();
        assert!(rel_close(&v, &exact, 1e-60));
        // Gamma(1/2) = sqrt(pi)
        let h = ln_gamma(&xf(0.5));
        let sp = XFloat::pi(XPREC).ln() / xint(2);
        assert!(rel_close(&h, &sp, 1e-60));
    }

    #[test]
    fn bernoulli_small() {
        let b = bernoulli(6);
        assert_eq!(b[2], BigRational::new(1.into(), 6.into()));
        assert_eq!(b[4], BigRational::new((-1).into(), 30.into()));
        assert_eq!(b[6], BigRational::new(1.into(), 42.into()));
    }

    #[test]
    fn q_star_definition() {
        let a = 1e-3;
        let (qs, t) = q_star(&xf(a));
        let f = |q: f64| q.ln() < q.powf(0.125) * a;
        let qf = qs.to_f64().unwrap();
        assert!(!f(qf * (1.0 - 1e-12)));
        assert!(f(qf * (1.0 + 1e-9)));
        assert!((xf_to_f64(&t) - qf.ln()).abs() < 1e-9);
        assert_eq!(q_star(&xf(10.0)).0, BigInt::one());
    }

    #[test]
    fn multi_rows_follow_recursion() {
        let cf = ContinuedFraction::from_u64(&[1; 40]);
        let s = KamScheduleMulti::new(MultiParams::default(), &cf).unwrap();
        assert!(s.rows.len() >= 3);
        assert_eq!(s.selection.q[0], BigInt::one());
        let r1 = &s.rows[1];
        assert!(rel_close(&r1.r, &(xf(0.1) / xint(2)), 1e-70));
        assert!(!s.condition.pass, "1e-6 is far above the threshold");
        for w in s.rows.windows(2) {
            assert!(w[1].s < w[0].s && w[1].s > xf(0.05));
            assert!(w[1].eps <= w[0].eps);
            if w[1].n + 1 < s.selection.q.len() && s.selection.q[w[1].n] > BigInt::one() {
                assert!(w[1].eps < w[0].eps);
            }
        }
    }

    #[test]
    fn ell_star_root() {
        let lt = ln_ell_star(0.5, 5.0, 2.5);
        let t = xf_to_f64(&lt);
        let psi = |t: f64| 0.5 * (t / 10.0).exp() - 16.0 * 5.0 * 6.25 * t - 11.0 * 2f64.ln();
        assert!(psi(t).abs() < 1e-6 * (16.0 * 5.0 * 6.25 * t));
        assert!(psi(t + 1.0) > 0.0 && psi(t - 1.0) < 0.0);
    }

    #[test]
    fn zero_eps_passes_trivially() {
        let p = MultiParams { eps0: 0.0, ..MultiParams::default() };
        let c = pert_condition(&p, 9.0, &BigInt::one());
        assert!(c.pass && c.eps0_zero);
    }
}
