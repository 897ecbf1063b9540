use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::cf::{ContinuedFraction, FreqCoord, FrequencyPair};
use super::hpreal::ln_bigint;
use super::xprec::{floor_c_exp, floor_c_pow};
use super::ArithError;

/// Growth bound `G` used in property (a): `q~_n > G(q'_{n-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Growth {
    /// `G(q) = e^q`; steps whose bound would exceed `max_digits` decimal
    /// digits fail with `GrowthOverflow`.
    ExactExp { max_digits: u64 },
    /// `G(q) = e^{min(q, cap)}`.
    CappedExp { cap: u64 },
    /// `G(q) = coeff * q^m`.
    Polynomial { coeff: u64, m: u32 },
}

impl Growth {
    /// `floor(c * G(q))`.
    fn floor_scaled(&self, c: u64, q: &BigInt) -> Result<BigInt, ()> {
        match self {
            Growth::ExactExp { max_digits } => {
                let digits = q.to_f64().unwrap_or(f64::INFINITY) * std::f64::consts::LOG10_E;
                if !(digits <= *max_digits as f64) {
                    return Err(());
                }
                Ok(floor_c_exp(c, q))
            }
            Growth::CappedExp { cap } => {
                let e = q.clone().min(BigInt::from(*cap));
                Ok(floor_c_exp(c, &e))
            }
            Growth::Polynomial { coeff, m } => Ok(BigInt::from(c * coeff) * q.pow(*m)),
        }
    }

    /// Whether `G` takes integer values at integer points.
    fn integral(&self) -> bool {
        matches!(self, Growth::Polynomial { .. })
    }
}

/// Bezout and coprimality witnesses of one construction step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepWitness {
    pub t_tilde: String,
    pub s_tilde: String,
    pub k_tilde: String,
    pub t_prime: String,
    pub k_prime: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaStep {
    pub n: usize,
    pub a_tilde: BigInt,
    pub a_prime: BigInt,
    pub q_tilde: BigInt,
    pub q_prime: BigInt,
    pub witness: Option<StepWitness>,
}

/// Per-step outcome of properties (a)-(d); (a) is vacuous at step 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaProperties {
    pub n: usize,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
}

impl OmegaProperties {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c && self.d
    }
}

#[derive(Debug, Clone)]
pub struct OmegaChiFrequency {
    pub chi: f64,
    pub growth: Growth,
    pub steps: Vec<OmegaStep>,
    pub alpha_tilde: ContinuedFraction,
    pub alpha_prime: ContinuedFraction,
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    if r.is_zero() {
        q
    } else {
        q + 1
    }
}

/// Build the first `steps` partial quotients of a frequency pair in
/// `Omega(chi)` by coprime partial-quotient surgery.
///
/// Step 1 is `a~_1 = 2, a'_1 = 37`. Each later step picks the smallest
/// witnesses, so the output is deterministic. Every step is re-checked with
/// [`OmegaChiFrequency::properties`] before returning.
pub fn construct_omega_chi(chi: f64, steps: usize, growth: Growth) -> Result<OmegaChiFrequency, ArithError> {
    if !(chi >= 5.0) || steps == 0 {
        return Err(ArithError::InvalidArgument("need chi >= 5 and steps >= 1".into()));
    }
    let mut qt = vec![BigInt::one(), BigInt::from(2)];
    let mut qp = vec![BigInt::one(), BigInt::from(37)];
    let mut out = vec![OmegaStep {
        n: 1,
        a_tilde: BigInt::from(2),
        a_prime: BigInt::from(37),
        q_tilde: qt[1].clone(),
        q_prime: qp[1].clone(),
        witness: None,
    }];
    for n in 2..=steps {
        let (qt1, qt2) = (&qt[n - 1], &qt[n - 2]);
        let (qp1, qp2) = (&qp[n - 1], &qp[n - 2]);

        // t~ q~_{n-1} + q~_{n-2} = s~ q'_{n-1}
        let inv = mod_inverse(qt1, qp1).ok_or(ArithError::NoWitness { step: n, which: "bezout-tilde" })?;
        let t_tilde = (-(qt2 * &inv)).mod_floor(qp1);
        let s_tilde = (&t_tilde * qt1 + qt2) / qp1;

        let two_g = growth
            .floor_scaled(2, qp1)
            .map_err(|_| ArithError::GrowthOverflow { feasible_steps: n - 1, failed_step: n })?;
        // k q~ >= 2G  <=>  k q~ >= floor(2G) (+1 when 2G is not an integer)
        let target = if growth.integral() { two_g } else { two_g + 1 };
        let mut k_tilde = ceil_div(&target, qt1).max(BigInt::one());
        while !k_tilde.gcd(qp1).is_one() {
            k_tilde += 1;
        }
        let a_tilde = &t_tilde + &k_tilde;
        let q_tilde = &a_tilde * qt1 + qt2;

        // t' q'_{n-1} + q'_{n-2} = 0 mod q~_n
        let inv = mod_inverse(qp1, &q_tilde).ok_or(ArithError::NoWitness { step: n, which: "bezout-prime" })?;
        let t_prime = (-(qp2 * &inv)).mod_floor(&q_tilde);
        let lo = ceil_div(&(BigInt::from(2) * q_tilde.pow(5)), qp1);
        let (upper, _) = floor_c_pow(3, &q_tilde, chi);
        let hi = upper.div_floor(qp1);
        let mut k_prime = lo;
        while !k_prime.gcd(&q_tilde).is_one() {
            k_prime += 1;
            if k_prime > hi {
                return Err(ArithError::NoWitness { step: n, which: "k-prime window" });
            }
        }
        if k_prime > hi {
            return Err(ArithError::NoWitness { step: n, which: "k-prime window" });
        }
        let a_prime = &t_prime + &k_prime;
        let q_prime = &a_prime * qp1 + qp2;

        out.push(OmegaStep {
            n,
            a_tilde,
            a_prime,
            q_tilde: q_tilde.clone(),
            q_prime: q_prime.clone(),
            witness: Some(StepWitness {
                t_tilde: t_tilde.to_string(),
                s_tilde: s_tilde.to_string(),
                k_tilde: k_tilde.to_string(),
                t_prime: t_prime.to_string(),
                k_prime: k_prime.to_string(),
            }),
        });
        qt.push(q_tilde);
        qp.push(q_prime);
    }
    let to_cf = |xs: Vec<BigInt>| {
        ContinuedFraction::from_quotients(BigInt::zero(), xs.into_iter().map(|a| a.to_biguint().unwrap()).collect())
    };
    let alpha_tilde = to_cf(out.iter().map(|s| s.a_tilde.clone()).collect())?;
    let alpha_prime = to_cf(out.iter().map(|s| s.a_prime.clone()).collect())?;
    let freq = OmegaChiFrequency { chi, growth, steps: out, alpha_tilde, alpha_prime };
    if let Some(bad) = freq.properties().into_iter().find(|p| !p.all()) {
        return Err(ArithError::NoWitness { step: bad.n, which: "post-construction property check" });
    }
    Ok(freq)
}

impl OmegaChiFrequency {
    pub fn q_tilde(&self, n: usize) -> &BigInt {
        self.alpha_tilde.q(n)
    }

    pub fn q_prime(&self, n: usize) -> &BigInt {
        self.alpha_prime.q(n)
    }

    pub fn frequency(&self) -> FrequencyPair {
        FrequencyPair::new(self.alpha_tilde.clone(), vec![FreqCoord::Cf(self.alpha_prime.clone())])
    }

    /// Check (a)-(d) at every step with big-integer comparisons.
    pub fn properties(&self) -> Vec<OmegaProperties> {
        (1..=self.steps.len())
            .map(|n| {
                let qt = self.q_tilde(n);
                let qp = self.q_prime(n);
                let qp_prev = self.q_prime(n - 1);
                let a = if n == 1 {
                    true
                } else {
                    match self.growth.floor_scaled(1, qp_prev) {
                        Ok(g) => qt > &g,
                        Err(_) => false,
                    }
                };
                let (four_pow, exact) = floor_c_pow(4, qt, self.chi);
                let upper_ok = if exact { qp < &four_pow } else { qp <= &four_pow };
                let b = &qt.pow(5) < qp && upper_ok;
                let c = qt.gcd(qp_prev).is_one();
                let d = qp.gcd(qt).is_one();
                OmegaProperties { n, a, b, c, d }
            })
            .collect()
    }

    /// `ln ln q~_{n+1} / ln q~_n` for consecutive constructed steps.
    pub fn lnln_trend(&self) -> Vec<f64> {
        (1..self.steps.len())
            .map(|n| ln_bigint(self.q_tilde(n + 1)).ln() / ln_bigint(self.q_tilde(n)))
            .collect()
    }

    /// Witness table as a JSON-friendly record.
    pub fn record(&self) -> OmegaRecord {
        OmegaRecord {
            chi: self.chi,
            growth: self.growth.clone(),
            steps: self.steps.len(),
            quotients_tilde: self.steps.iter().map(|s| s.a_tilde.to_string()).collect(),
            quotients_prime: self.steps.iter().map(|s| s.a_prime.to_string()).collect(),
            q_tilde: self.steps.iter().map(|s| s.q_tilde.to_string()).collect(),
            q_prime: self.steps.iter().map(|s| s.q_prime.to_string()).collect(),
            witnesses: self.steps.iter().map(|s| s.witness.clone()).collect(),
        }
    }

    /// Decimal digits of the last `q'_n`.
    pub fn max_digits(&self) -> usize {
        self.steps.last().map(|s| s.q_prime.abs().to_string().len()).unwrap_or(0)
    }
}

/// Serializable view of a constructed frequency.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaRecord {
    pub chi: f64,
    pub growth: Growth,
    pub steps: usize,
    pub quotients_tilde: Vec<String>,
    pub quotients_prime: Vec<String>,
    pub q_tilde: Vec<String>,
    pub q_prime: Vec<String>,
    pub witnesses: Vec<Option<StepWitness>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_one() {
        let f = construct_omega_chi(5.0, 1, Growth::Polynomial { coeff: 1, m: 2 }).unwrap();
        assert_eq!(f.q_tilde(1), &BigInt::from(2));
        assert_eq!(f.q_prime(1), &BigInt::from(37));
    }

    #[test]
    fn linear_surrogate_second_step() {
        // t~ = 18 solves 2t + 1 = 0 mod 37, k~ = 38 is the first k >= 37
        // coprime to 37, so a~_2 = 56 and q~_2 = 113
        let f = construct_omega_chi(5.0, 2, Growth::Polynomial { coeff: 1, m: 1 }).unwrap();
        assert_eq!(f.q_tilde(2), &BigInt::from(113));
        let w = f.steps[1].witness.as_ref().unwrap();
        assert_eq!(w.t_tilde, "18");
        assert_eq!(w.k_tilde, "38");
        assert!(f.properties().iter().all(|p| p.all()));
    }

    #[test]
    fn exact_growth_overflows_past_step_two() {
        let r = construct_omega_chi(5.0, 3, Growth::ExactExp { max_digits: 5000 });
        assert!(matches!(r, Err(ArithError::GrowthOverflow { feasible_steps: 2, failed_step: 3 })));
    }
}
