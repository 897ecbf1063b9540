use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::hpreal::{rational_to_f64, HpReal};
use super::ArithError;

/// Bits of precision consumed per partial quotient for a typical real
/// (twice the Levy constant in base 2, rounded up).
const LEVY_BITS_PER_QUOTIENT: f64 = 3.43;

/// Partial quotients `a_0; a_1, a_2, ...` with cached convergents.
///
/// Indexing follows `p_0 = 0, p_1 = 1, q_0 = 1, q_1 = a_1` for the
/// fractional part, so `p[n]/q[n]` is the n-th convergent of `x - a_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub a0: BigInt,
    pub quotients: Vec<BigUint>,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    /// Set when the expansion terminated because the input was rational.
    pub finite: bool,
}

impl ContinuedFraction {
    pub fn from_quotients(a0: BigInt, quotients: Vec<BigUint>) -> Result<Self, ArithError> {
        if quotients.iter().any(|a| a.is_zero()) {
            return Err(ArithError::InvalidArgument("partial quotients must be positive".into()));
        }
        let mut p = vec![BigInt::zero(), BigInt::one()];
        let mut q = vec![BigInt::one()];
        if let Some(a1) = quotients.first() {
            q.push(BigInt::from(a1.clone()));
        } else {
            p.truncate(1);
        }
        for j in 1..quotients.len() {
            let a = BigInt::from(quotients[j].clone());
            let pn = &a * &p[j] + &p[j - 1];
            let qn = &a * &q[j] + &q[j - 1];
            p.push(pn);
            q.push(qn);
        }
        Ok(ContinuedFraction { a0, quotients, p, q, finite: false })
    }

    /// Convenience constructor from small quotients, `a_0 = 0`.
    pub fn from_u64(quotients: &[u64]) -> Self {
        Self::from_quotients(BigInt::zero(), quotients.iter().map(|&a| BigUint::from(a)).collect())
            .expect("positive quotients")
    }

    /// Number of partial quotients `a_1..a_N`.
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    /// `p_n` for `0 <= n <= depth`.
    pub fn p(&self, n: usize) -> &BigInt {
        &self.p[n]
    }

    /// `q_n` for `0 <= n <= depth`.
    pub fn q(&self, n: usize) -> &BigInt {
        &self.q[n]
    }

    pub fn denominators(&self) -> &[BigInt] {
        &self.q
    }

    /// `a_0 + p_n/q_n`.
    pub fn convergent(&self, n: usize) -> BigRational {
        BigRational::new(&self.a0 * &self.q[n] + &self.p[n], self.q[n].clone())
    }

    /// Closed interval containing every real whose expansion starts with
    /// the stored quotients. Degenerate (a point) when `finite`.
    pub fn interval(&self) -> (BigRational, BigRational) {
        let n = self.depth();
        let c = self.convergent(n);
        if self.finite || n == 0 {
            if n == 0 && !self.finite {
                let a0 = BigRational::from_integer(self.a0.clone());
                return (a0.clone(), a0 + BigRational::one());
            }
            return (c.clone(), c);
        }
        let other = BigRational::new(
            &self.a0 * (&self.q[n] + &self.q[n - 1]) + &self.p[n] + &self.p[n - 1],
            &self.q[n] + &self.q[n - 1],
        );
        if c < other {
            (c, other)
        } else {
            (other, c)
        }
    }

    /// Best rational stand-in for the value: the deepest convergent.
    pub fn value(&self) -> BigRational {
        self.convergent(self.depth())
    }

    pub fn to_f64(&self) -> f64 {
        let (lo, hi) = self.interval();
        rational_to_f64(&((lo + hi) / BigRational::from_integer(BigInt::from(2))))
    }

    pub fn to_hpreal(&self) -> HpReal {
        let (lo, hi) = self.interval();
        let two = BigRational::from_integer(BigInt::from(2));
        HpReal { value: (&lo + &hi) / &two, radius: (hi - lo) / two, precision_bits: None }
    }
}

/// Expand `x` (in `(0,1)`) to `depth` partial quotients.
///
/// Each quotient is accepted only if both ends of the uncertainty interval
/// agree on it. An exactly rational input terminates early with
/// `finite = true`.
pub fn cf_expand(x: &HpReal, depth: usize) -> Result<ContinuedFraction, ArithError> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if x.lo() <= zero || x.hi() >= one {
        return Err(ArithError::InvalidArgument("cf_expand expects x in (0,1)".into()));
    }
    if let Some(bits) = x.precision_bits {
        if (depth as f64) * LEVY_BITS_PER_QUOTIENT > bits as f64 {
            return Err(ArithError::PrecisionExhausted { depth_reached: 0 });
        }
    }
    let mut lo = x.lo();
    let mut hi = x.hi();
    let mut quotients: Vec<BigUint> = Vec::with_capacity(depth);
    let mut finite = false;
    while quotients.len() < depth {
        if lo.is_zero() && hi.is_zero() {
            finite = true;
            break;
        }
        if lo <= zero {
            return Err(ArithError::PrecisionExhausted { depth_reached: quotients.len() });
        }
        let inv_hi = hi.recip();
        let inv_lo = lo.recip();
        let a_lo = inv_hi.floor().to_integer();
        let a_hi = inv_lo.floor().to_integer();
        // the interval straddles a quotient boundary
        if a_lo != a_hi {
            return Err(ArithError::PrecisionExhausted { depth_reached: quotients.len() });
        }
        let a = a_lo;
        let new_lo = inv_hi - BigRational::from_integer(a.clone());
        let new_hi = inv_lo - BigRational::from_integer(a.clone());
        quotients.push(a.to_biguint().expect("positive quotient"));
        lo = new_lo;
        hi = new_hi;
    }
    let mut cf = ContinuedFraction::from_quotients(BigInt::zero(), quotients)?;
    cf.finite = finite;
    Ok(cf)
}

/// `min_j |x - j|` exactly.
pub fn torus_norm(x: &BigRational) -> BigRational {
    let frac = x - x.floor();
    let other = BigRational::one() - &frac;
    if frac < other {
        frac
    } else {
        other
    }
}

pub fn torus_norm_f64(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

/// One coordinate of a frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub enum FreqCoord {
    Cf(ContinuedFraction),
    Real(HpReal),
}

impl FreqCoord {
    pub fn interval(&self) -> (BigRational, BigRational) {
        match self {
            FreqCoord::Cf(cf) => cf.interval(),
            FreqCoord::Real(r) => (r.lo(), r.hi()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            FreqCoord::Cf(cf) => cf.to_f64(),
            FreqCoord::Real(r) => r.to_f64(),
        }
    }
}

/// `alpha = (alpha_tilde, alpha_prime)` on the d-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPair {
    pub alpha_tilde: ContinuedFraction,
    pub alpha_prime: Vec<FreqCoord>,
    pub precision_bits: u32,
}

/// Self-describing record for serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub kind: String,
    pub coords: Vec<Vec<String>>,
    pub precision_bits: u32,
}

impl FrequencyPair {
    pub fn new(alpha_tilde: ContinuedFraction, alpha_prime: Vec<FreqCoord>) -> Self {
        FrequencyPair { alpha_tilde, alpha_prime, precision_bits: 256 }
    }

    /// One-dimensional frequency (d = 1).
    pub fn single(alpha: ContinuedFraction) -> Self {
        Self::new(alpha, Vec::new())
    }

    pub fn dim(&self) -> usize {
        1 + self.alpha_prime.len()
    }

    pub fn coord(&self, j: usize) -> FreqCoord {
        if j == 0 {
            FreqCoord::Cf(self.alpha_tilde.clone())
        } else {
            self.alpha_prime[j - 1].clone()
        }
    }

    pub fn intervals(&self) -> Vec<(BigRational, BigRational)> {
        (0..self.dim()).map(|j| self.coord(j).interval()).collect()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.coord(j).to_f64()).collect()
    }

    /// Exact interval containing `<k, alpha>`.
    pub fn dot_interval(&self, k: &[i64]) -> (BigRational, BigRational) {
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (j, (a, b)) in self.intervals().into_iter().enumerate() {
            let kj = BigRational::from_integer(BigInt::from(k[j]));
            if k[j] >= 0 {
                lo += &kj * a;
                hi += &kj * b;
            } else {
                lo += &kj * b;
                hi += &kj * a;
            }
        }
        (lo, hi)
    }

    pub fn record(&self) -> FrequencyRecord {
        let coords = (0..self.dim())
            .map(|j| match self.coord(j) {
                FreqCoord::Cf(cf) => cf.quotients.iter().map(|a| a.to_string()).collect(),
                FreqCoord::Real(r) => vec![r.value.to_string(), r.radius.to_string()],
            })
            .collect();
        FrequencyRecord { kind: "cf".into(), coords, precision_bits: self.precision_bits }
    }
}

/// Lower bound on `||x||` over an interval `[lo, hi]`; zero if the interval
/// meets an integer.
pub(crate) fn torus_norm_lower(lo: &BigRational, hi: &BigRational) -> BigRational {
    let fl = lo.floor();
    if hi >= &(&fl + BigRational::one()) || lo == &fl {
        return BigRational::zero();
    }
    let a = torus_norm(lo);
    let b = torus_norm(hi);
    if a < b {
        a
    } else {
        b
    }
}

/// One convergent's worth of the classical continued-fraction laws.
#[derive(Debug, Clone, Serialize)]
pub struct CfLawRow {
    pub n: usize,
    pub q_n: String,
    pub q_next: String,
    /// `||q_n x||` rounded for display.
    pub dist: f64,
    /// `||q_n x|| >= 1/(q_n + q_{n+1})`.
    pub lower_ok: bool,
    /// `||q_n x|| <= 1/q_{n+1}`.
    pub upper_ok: bool,
    /// `||k x|| > ||q_n x||` for `0 < k < q_{n+1}`, `k != q_n`; `None`
    /// when `q_{n+1}` exceeds the enumeration cap.
    pub best_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CfLawReport {
    /// Denominator of the rational stand-in `x = p_N/q_N`.
    pub q_depth: String,
    pub rows: Vec<CfLawRow>,
    pub pass: bool,
}

/// Exact check of the convergent laws for `1 <= n <= convergents` on the
/// deepest convergent `x = p_N/q_N`, which shares the stored quotients.
/// `n = 0` is excluded: with `a_1 = 1` the nearest integer to `q_0 x` is
/// not `p_0`. Requires `convergents + 2 <= depth` so the last quotient
/// (which a rational may rewrite) is never involved.
pub fn cf_laws(cf: &ContinuedFraction, convergents: usize, best_cap: u64) -> Result<CfLawReport, ArithError> {
    let depth = cf.depth();
    if convergents + 2 > depth {
        return Err(ArithError::InvalidArgument(format!(
            "{convergents} convergents need depth >= {}, have {depth}",
            convergents + 2
        )));
    }
    let big_p = cf.p(depth).clone();
    let big_q = cf.q(depth).clone();
    let dist_num = |k: &BigInt| {
        let r = (k * &big_p).mod_floor(&big_q);
        let other = &big_q - &r;
        if r < other {
            r
        } else {
            other
        }
    };
    let small = |x: &BigInt| -> Option<u128> { x.try_into().ok().filter(|v: &u128| *v < (1u128 << 126)) };
    let mut rows = Vec::with_capacity(convergents);
    for n in 1..=convergents {
        let qn = cf.q(n);
        let qn1 = cf.q(n + 1);
        let d = dist_num(qn);
        let lower_ok = &d * (qn + qn1) >= big_q;
        let upper_ok = &d * qn1 <= big_q;
        let best_ok = match (small(&big_p), small(&big_q), small(qn1), small(qn), small(&d)) {
            (Some(p), Some(q), Some(limit), Some(qn), Some(dn)) if limit <= best_cap as u128 => {
                let step = p % q;
                let mut r = 0u128;
                let mut ok = true;
                for k in 1..limit {
                    // step < q, so one subtraction reduces mod q
                    r += step;
                    if r >= q {
                        r -= q;
                    }
                    if k != qn && r.min(q - r) <= dn {
                        ok = false;
                        break;
                    }
                }
                Some(ok)
            }
            _ => None,
        };
        rows.push(CfLawRow {
            n,
            q_n: qn.to_string(),
            q_next: qn1.to_string(),
            dist: rational_to_f64(&BigRational::new(d, big_q.clone())),
            lower_ok,
            upper_ok,
            best_ok,
        });
    }
    let pass = rows.iter().all(|r| r.lower_ok && r.upper_ok && r.best_ok != Some(false));
    Ok(CfLawReport { q_depth: big_q.to_string(), rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_fibonacci() {
        let cf = cf_expand(&HpReal::golden_mean(128), 6).unwrap();
        let qs: Vec<u64> = cf.quotients.iter().map(|a| a.try_into().unwrap()).collect();
        assert_eq!(qs, vec![1, 1, 1, 1, 1, 1]);
        let dens: Vec<i64> = (0..=6).map(|n| cf.q(n).try_into().unwrap()).collect();
        assert_eq!(dens, vec![1, 1, 2, 3, 5, 8, 13]);
    }

    #[test]
    fn e_minus_2_expansion() {
        let cf = cf_expand(&HpReal::e_minus_2(200), 8).unwrap();
        let qs: Vec<u64> = cf.quotients.iter().map(|a| a.try_into().unwrap()).collect();
        assert_eq!(qs, vec![1, 2, 1, 1, 4, 1, 1, 6]);
    }

    #[test]
    fn rational_input_terminates() {
        let x = HpReal::exact(BigRational::new(BigInt::from(5), BigInt::from(13)));
        let cf = cf_expand(&x, 10).unwrap();
        assert!(cf.finite);
        assert_eq!(cf.value(), BigRational::new(BigInt::from(5), BigInt::from(13)));
    }

    #[test]
    fn low_precision_is_reported() {
        let x = HpReal::golden_mean(20);
        assert!(matches!(cf_expand(&x, 40), Err(ArithError::PrecisionExhausted { .. })));
    }

    #[test]
    fn torus_norm_examples() {
        assert_eq!(torus_norm_f64(0.75), 0.25);
        assert_eq!(torus_norm_f64(3.0), 0.0);
        assert!((torus_norm_f64(-0.4) - 0.4).abs() < 1e-15);
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(torus_norm(&r(3, 4)), r(1, 4));
        assert_eq!(torus_norm(&r(-2, 5)), r(2, 5));
    }

    #[test]
    fn laws_hold_for_golden_mean() {
        let cf = ContinuedFraction::from_u64(&[1; 20]);
        let rep = cf_laws(&cf, 15, 1_000_000).unwrap();
        assert!(rep.pass && rep.rows.iter().all(|r| r.best_ok == Some(true)));
        assert!(cf_laws(&cf, 19, 1_000_000).is_err());
    }

    #[test]
    fn interval_contains_true_value() {
        let g = HpReal::golden_mean(200);
        let cf = cf_expand(&g, 20).unwrap();
        let (lo, hi) = cf.interval();
        assert!(lo <= g.value && g.value <= hi);
    }
}
