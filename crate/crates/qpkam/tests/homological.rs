use num_complex::Complex64;
use proptest::prelude::*;

use qpkam::fourier::{cis, l1, RealityClass, ScalarPoly};
use qpkam::homological::{divisor, solve_scalar_cohomology, solve_twisted, twisted_factor, HomError, HomNorms, TwistedProblem};

fn alpha() -> Vec<f64> {
    vec![(5f64.sqrt() - 1.0) / 2.0, 2f64.sqrt() - 1.0]
}

fn problem(rho: f64, k_trunc: usize, g_amp: f64) -> TwistedProblem {
    let f = ScalarPoly::from_terms(
        2,
        RealityClass::General,
        [(vec![1, 1], Complex64::new(1e-5, 0.0)), (vec![-1, 2], Complex64::new(0.0, 2e-5)), (vec![0, 0], Complex64::new(3e-6, 1e-6))],
    );
    TwistedProblem {
        alpha: alpha(),
        rho,
        g: ScalarPoly::cos_mode(2, vec![1, 0], g_amp),
        f,
        k_trunc,
        norms: HomNorms { r: 0.2, s: 0.2, sigma: 0.05, delta: 0.05 },
        gamma: 0.05,
        tau: 2.0,
    }
}

#[test]
fn twisted_solution_satisfies_the_truncated_equation() {
    let p = problem(0.2, 6, 1e-7);
    p.validate().unwrap();
    let sol = solve_twisted(&p).unwrap();
    assert!(sol.approx_defect < 1e-15, "{}", sol.approx_defect);
    // pointwise, the full equation leaves exactly the high-mode residual
    for phi in [[0.1, 0.7], [0.55, 0.25]] {
        let shifted: Vec<f64> = phi.iter().zip(&p.alpha).map(|(x, a)| x + a).collect();
        let g = p.g.eval_real(&phi);
        let lhs = cis(2.0 * p.rho) * Complex64::new(0.0, 2.0 * g).exp() * sol.h.eval(&shifted) - sol.h.eval(&phi) + p.f.eval(&phi);
        let rest = sol.residual.eval(&phi);
        assert!((lhs - rest).norm() < 1e-15, "{lhs} vs {rest}");
    }
}

#[test]
fn truncation_beyond_the_limit_is_rejected() {
    let p = problem(0.2, 60, 1e-7);
    assert!(matches!(p.validate(), Err(HomError::HypothesisViolated(_))));
    assert!(matches!(solve_twisted(&p), Err(HomError::HypothesisViolated(_))));
}

#[test]
fn twisted_factor_matches_the_exponential() {
    let g = ScalarPoly::cos_mode(2, vec![2, 0], 0.3);
    let (coef, tail) = twisted_factor(&g, 0.17, 16);
    assert!(tail < 1e-14);
    for x in [0.0, 0.31, 0.77] {
        let direct = cis(2.0 * 0.17) * (Complex64::new(0.0, 2.0 * g.eval_real(&[x, 0.0])).exp() - 1.0);
        let series: Complex64 = coef.iter().map(|(m, c)| c * cis(*m as f64 * x)).sum();
        assert!((direct - series).norm() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divisor_is_cis_minus_one(k0 in -50i64..50, k1 in -50i64..50, c in -1.0f64..1.0) {
        let a = alpha();
        let d = divisor(&[k0, k1], &a, c);
        let x = k0 as f64 * a[0] + k1 as f64 * a[1] + c;
        prop_assert!((d - (cis(x) - 1.0)).norm() < 1e-12);
    }

    #[test]
    fn scalar_cohomology_solves_the_difference_equation(
        terms in prop::collection::vec((prop::collection::vec(-4i64..=4, 2), -1.0f64..1.0), 1..6),
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let g = terms.iter().fold(ScalarPoly::zero(2, RealityClass::RealScalar), |acc, (k, a)| &acc + &ScalarPoly::cos_mode(2, k.clone(), *a));
        let q = 7.0;
        let v = solve_scalar_cohomology(&alpha(), &g, q, true).unwrap();
        let phi = [x, y];
        let shifted: Vec<f64> = phi.iter().zip(alpha()).map(|(p, a)| p + a).collect();
        let low = g.filter(|k| (l1(k) as f64) < q);
        let want = -low.eval_real(&phi) + g.mean().re;
        prop_assert!((v.eval_real(&shifted) - v.eval_real(&phi) - want).abs() < 1e-9);
    }
}
