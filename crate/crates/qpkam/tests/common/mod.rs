//! Shared regression family for the engine and acceptance tests.
#![allow(dead_code)]

use num_complex::Complex64;
use qpkam::arithmetic::{construct_omega_chi, ContinuedFraction, FrequencyPair, Growth};
use qpkam::fourier::{MatPoly, RealityClass, ScalarPoly};
use qpkam::kam::{KamScheduleMulti, KamScheduleTwo, MultiParams, TwoParams};

pub const RHO0: f64 = 0.1234567;

pub struct Freq {
    pub name: &'static str,
    pub alpha: Vec<f64>,
    pub cf: ContinuedFraction,
}

fn periodic(period: &[u64], len: usize) -> ContinuedFraction {
    let q: Vec<u64> = period.iter().cycle().take(len).copied().collect();
    ContinuedFraction::from_u64(&q)
}

/// Diophantine pairs and a triple; the first coordinate carries the
/// continued fraction used by the bridge selection.
pub fn frequencies() -> Vec<Freq> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    vec![
        Freq { name: "golden-sqrt2", alpha: vec![g, 2f64.sqrt() - 1.0], cf: periodic(&[1], 40) },
        Freq { name: "sqrt3-sqrt7", alpha: vec![3f64.sqrt() - 1.0, 7f64.sqrt() - 2.0], cf: periodic(&[1, 2], 40) },
        Freq { name: "golden-triple", alpha: vec![g, 2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0], cf: periodic(&[1], 40) },
    ]
}

fn idx(d: usize, entries: &[(usize, i64)]) -> Vec<i64> {
    let mut k = vec![0; d];
    for &(j, v) in entries {
        k[j] = v;
    }
    k
}

fn build(e: [[ScalarPoly; 2]; 2]) -> MatPoly {
    MatPoly::from_entries([[&e[0][0], &e[0][1]], [&e[1][0], &e[1][1]]], RealityClass::Sl2Real)
}

/// Perturbation shapes: mixed low modes, first-coordinate modes only, and
/// a spread of modes up to degree 3. Each is scaled to `|F| = norm` in the
/// default certification norm.
pub fn perturbations(d: usize, norm: f64) -> Vec<(&'static str, MatPoly)> {
    let last = d - 1;
    let mixed = build(
        [
            [ScalarPoly::cos_mode(d, idx(d, &[(0, 1)]), 1.0), ScalarPoly::sin_mode(d, idx(d, &[(last, 1)]), 1.0)],
            [ScalarPoly::cos_mode(d, idx(d, &[(last, 1)]), 0.5), ScalarPoly::cos_mode(d, idx(d, &[(0, 1)]), -1.0)],
        ],
    );
    let first = build(
        [
            [ScalarPoly::sin_mode(d, idx(d, &[(0, 2)]), 0.7), &ScalarPoly::cos_mode(d, idx(d, &[(0, 1)]), 1.0) + &ScalarPoly::real_constant(d, 0.3)],
            [ScalarPoly::cos_mode(d, idx(d, &[(0, 1)]), -0.4), ScalarPoly::sin_mode(d, idx(d, &[(0, 2)]), -0.7)],
        ],
    );
    let spread_diag = &ScalarPoly::cos_mode(d, idx(d, &[(0, 1), (last, -1)]), 1.0)
        + &ScalarPoly::sin_mode(d, idx(d, &[(0, 2), (last, 1)]), 0.5);
    let spread = build(
        [
            [spread_diag.clone(), &ScalarPoly::cos_mode(d, idx(d, &[(last, 3)]), 0.3) + &ScalarPoly::real_constant(d, 0.2)],
            [ScalarPoly::sin_mode(d, idx(d, &[(0, 1), (last, 1)]), 0.6), spread_diag.scale(Complex64::new(-1.0, 0.0))],
        ],
    );
    [("mixed", mixed), ("first-coordinate", first), ("spread", spread)]
        .into_iter()
        .map(|(n, f)| {
            let s = norm / f.norm_cert(0.01, 0.01);
            (n, f.scale(Complex64::new(s, 0.0)).with_reality(RealityClass::Sl2Real))
        })
        .collect()
}

pub fn multi_schedule(cf: &ContinuedFraction, d: usize, eps0: f64) -> KamScheduleMulti {
    KamScheduleMulti::new(MultiParams { eps0, dim: d, ..Default::default() }, cf).expect("schedule")
}

/// Surrogate two-frequency setup: `Omega(5)` with linear growth, 3 steps.
pub fn two_setup(eps0: f64) -> (FrequencyPair, KamScheduleTwo) {
    let om = construct_omega_chi(5.0, 3, Growth::Polynomial { coeff: 1, m: 1 }).expect("surrogate frequency");
    let qt = (0..=3).map(|n| om.q_tilde(n).clone()).collect();
    let qp = (0..=3).map(|n| om.q_prime(n).clone()).collect();
    let sched = KamScheduleTwo::new(TwoParams { eps0, n_star_override: Some(0), ..Default::default() }, qt, qp)
        .expect("schedule");
    (om.frequency(), sched)
}
