use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::cf::{torus_norm, torus_norm_f64, torus_norm_lower, FrequencyPair};
use super::hpreal::ln_rational;
use super::lattice::{l1_norm, lattice_ball, lattice_half_ball};
use super::ArithError;
use crate::par;

/// `max_{0<|k|<=K} (1/|k|) ln(1/||<k,alpha>||)`.
///
/// Each divisor is evaluated on the exact interval of `<k,alpha>`; if that
/// interval meets an integer the divisor is below the resolution of the
/// frequency data.
pub fn beta_estimate(alpha: &FrequencyPair, k_max: i64) -> Result<f64, ArithError> {
    if k_max < 1 {
        return Err(ArithError::InvalidArgument("K must be >= 1".into()));
    }
    let ks = lattice_half_ball(alpha.dim(), k_max);
    let terms = par::map_slice(&ks, |k| {
        let (lo, hi) = alpha.dot_interval(k);
        if torus_norm_lower(&lo, &hi).is_zero() {
            return None;
        }
        let mid = (lo + hi) / BigRational::from_integer(2.into());
        let d = torus_norm(&mid);
        Some(-ln_rational(&d) / l1_norm(k) as f64)
    });
    let mut best = f64::NEG_INFINITY;
    for t in terms {
        match t {
            Some(v) => best = best.max(v),
            None => return Err(ArithError::PrecisionExhausted { depth_reached: alpha.alpha_tilde.depth() }),
        }
    }
    Ok(best)
}

/// Outcome of a Diophantine test of `2 rho` against the frequency lattice.
#[derive(Debug, Clone, Serialize)]
pub struct DiophantineReport {
    pub pass: bool,
    /// Multi-index minimising `||2rho + <k,alpha>|| (1+|k|)^tau / gamma`.
    pub worst_k: Vec<i64>,
    pub worst_divisor: f64,
    /// The minimised ratio; `pass` iff it is at least 1.
    pub worst_ratio: f64,
    pub checked: usize,
}

/// Test `||2rho + <k,alpha>|| >= gamma/(1+|k|)^tau` for all `|k| <= K`,
/// including `k = 0`.
pub fn check_rho_diophantine(rho: f64, alpha: &FrequencyPair, gamma: f64, tau: f64, k_max: i64) -> DiophantineReport {
    check_rho_diophantine_f64(rho, &alpha.to_f64_vec(), gamma, tau, k_max)
}

pub fn check_rho_diophantine_f64(rho: f64, alpha: &[f64], gamma: f64, tau: f64, k_max: i64) -> DiophantineReport {
    let ks = lattice_ball(alpha.len(), k_max.max(0));
    let vals = par::map_slice(&ks, |k| {
        let dot: f64 = k.iter().zip(alpha).map(|(&kj, &aj)| kj as f64 * aj).sum();
        let d = torus_norm_f64(2.0 * rho + dot);
        let ratio = d * (1.0 + l1_norm(k) as f64).powf(tau) / gamma;
        (ratio, d)
    });
    // lexicographic order of `ks` makes the first minimum the tie-break
    let mut best = 0usize;
    for (i, v) in vals.iter().enumerate() {
        if v.0 < vals[best].0 {
            best = i;
        }
    }
    DiophantineReport {
        pass: vals[best].0 >= 1.0,
        worst_k: ks[best].clone(),
        worst_divisor: vals[best].1,
        worst_ratio: vals[best].0,
        checked: ks.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{cf_expand, ContinuedFraction, HpReal};

    fn golden() -> FrequencyPair {
        FrequencyPair::single(cf_expand(&HpReal::golden_mean(400), 60).unwrap())
    }

    #[test]
    fn golden_beta_is_attained_at_k1() {
        let b = beta_estimate(&golden(), 50).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((b - 2.0 * phi.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_sees_a_large_quotient() {
        // q_6 = 13, then a_7 = 10^6 forces ||13 alpha|| <= 1/q_7
        let mut qs = vec![1u64; 6];
        qs.push(1_000_000);
        qs.extend([1u64; 10]);
        let alpha = FrequencyPair::single(ContinuedFraction::from_u64(&qs));
        let b = beta_estimate(&alpha, 20).unwrap();
        assert!(b >= (1e6f64).ln() / 14.0);
    }

    #[test]
    fn exact_resonance_fails() {
        let alpha = golden();
        let a = alpha.to_f64_vec();
        let rho = (3.0 * a[0]) / 2.0;
        let rep = check_rho_diophantine(rho, &alpha, 0.01, 2.0, 10);
        assert!(!rep.pass);
        assert_eq!(rep.worst_k, vec![-3]);
    }

    #[test]
    fn k0_reduces_to_two_rho() {
        let alpha = golden();
        let rep = check_rho_diophantine(0.1, &alpha, 0.19, 1.0, 0);
        assert_eq!(rep.checked, 1);
        assert!(rep.pass);
        let rep = check_rho_diophantine(0.1, &alpha, 0.25, 1.0, 0);
        assert!(!rep.pass);
    }
}
