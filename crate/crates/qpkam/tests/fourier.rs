use num_complex::Complex64;
use proptest::prelude::*;

use qpkam::fourier::{
    cis, compose_conjugate, m_decompose, m_recompose, Mat2, MatPoly, NormParams, RealityClass, ScalarPoly, Side,
};

fn trig(d: usize, terms: &[(Vec<i64>, f64, f64)]) -> ScalarPoly {
    terms.iter().fold(ScalarPoly::zero(d, RealityClass::RealScalar), |acc, (k, c, s)| {
        &(&acc + &ScalarPoly::cos_mode(d, k.clone(), *c)) + &ScalarPoly::sin_mode(d, k.clone(), *s)
    })
}

fn sl2_field(terms: [&[(Vec<i64>, f64, f64)]; 3]) -> MatPoly {
    let (a, b, c) = (trig(2, terms[0]), trig(2, terms[1]), trig(2, terms[2]));
    let na = -&a;
    MatPoly::from_entries([[&a, &b], [&c, &na]], RealityClass::Sl2Real)
}

fn mode() -> impl Strategy<Value = (Vec<i64>, f64, f64)> {
    (prop::collection::vec(-3i64..=3, 2), -1.0f64..1.0, -1.0f64..1.0)
}

#[test]
fn cis_is_the_unit_circle_in_turns() {
    assert!((cis(0.25) - Complex64::i()).norm() < 1e-15);
    assert!((cis(0.5) + 1.0).norm() < 1e-15);
}

#[test]
fn rotation_is_counterclockwise() {
    let v = Mat2::rot(0.25).apply([1.0, 0.0]);
    assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
}

#[test]
fn truncation_splits_the_series() {
    let f = trig(2, &[(vec![1, 0], 1.0, 0.5), (vec![2, 2], 0.3, 0.0), (vec![0, 3], 0.0, 0.2)]);
    let low = f.truncate(3.0, Side::Low);
    let high = f.truncate(3.0, Side::High);
    assert_eq!(low.len() + high.len(), f.len());
    assert!(low.coeffs.keys().all(|k| k.iter().map(|x| x.abs()).sum::<i64>() < 3));
}

#[test]
fn weighted_norm_matches_its_definition() {
    let f = trig(2, &[(vec![1, -2], 0.4, 0.0)]);
    let (r, s) = (0.1, 0.05);
    let want = 0.4 * (2.0 * std::f64::consts::PI * (r + 2.0 * s)).exp();
    assert!((f.analytic_norm(NormParams::l1(r, s)) - want).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_and_log_are_inverse_near_zero(a in -0.2f64..0.2, b in -0.2f64..0.2, c in -0.2f64..0.2) {
        let x = Mat2::sl2(a, b, c);
        let e = x.exp_sl2();
        prop_assert!((e.det() - 1.0).abs() < 1e-13);
        let back = e.log_sl2().unwrap();
        prop_assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn products_evaluate_pointwise(fs in prop::collection::vec(mode(), 1..4), gs in prop::collection::vec(mode(), 1..4), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (f, g) = (trig(2, &fs), trig(2, &gs));
        let p = [x, y];
        let prod = f.mul(&g);
        prop_assert!((prod.eval_real(&p) - f.eval_real(&p) * g.eval_real(&p)).abs() < 1e-12);
    }

    #[test]
    fn shift_translates_the_argument(fs in prop::collection::vec(mode(), 1..5), x in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = trig(2, &fs);
        let shifted = f.shift(&[a, b]);
        prop_assert!((shifted.eval_real(&[x, 0.3]) - f.eval_real(&[x + a, 0.3 + b])).abs() < 1e-12);
    }

    #[test]
    fn grid_roundtrip_recovers_coefficients(fs in prop::collection::vec(mode(), 1..5)) {
        let f = trig(2, &fs);
        let g = f.to_grid(&[16, 16]);
        let back = ScalarPoly::from_grid(&g, RealityClass::RealScalar, 100, 0.0, NormParams::uniform(0.0));
        prop_assert!((&back - &f).norm_cert(0.0, 0.0) < 1e-12);
    }

    #[test]
    fn norm_grows_with_the_strip(fs in prop::collection::vec(mode(), 1..5), r in 0.0f64..0.2, dr in 0.0f64..0.2) {
        let f = trig(2, &fs);
        prop_assert!(f.norm_cert(r, r) <= f.norm_cert(r + dr, r + dr) + 1e-15);
        prop_assert!(f.sup0() <= f.norm_cert(0.0, 0.0) + 1e-12);
    }

    #[test]
    fn m_frame_roundtrip(a in prop::collection::vec(mode(), 1..3), b in prop::collection::vec(mode(), 1..3), c in prop::collection::vec(mode(), 1..3)) {
        let f = sl2_field([&a, &b, &c]);
        let back = m_recompose(&m_decompose(&f).unwrap());
        prop_assert!((&back - &f).norm_cert(0.0, 0.0) < 1e-12);
    }

    #[test]
    fn conjugation_by_convolution_matches_pointwise(
        a in prop::collection::vec(mode(), 1..3),
        b in prop::collection::vec(mode(), 1..3),
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let alpha = [0.618, 0.414];
        let small = |ts: &Vec<(Vec<i64>, f64, f64)>| ts.iter().map(|(k, c, s)| (k.clone(), 0.1 * c, 0.1 * s)).collect::<Vec<_>>();
        let (bs, as_) = (small(&b), small(&a));
        // compose_conjugate inverts B through the adjugate, so compare against that
        let bp = MatPoly::identity(2);
        let bfield = &bp + &sl2_field([&[], &bs, &bs]);
        let afield = sl2_field([&as_, &[], &as_]);
        let out = compose_conjugate(&bfield, &afield, &alpha, None);
        let p = [x, y];
        let ps = [x + alpha[0], y + alpha[1]];
        let want = bfield.eval_real(&ps) * afield.eval_real(&p) * bfield.eval_real(&p).adj();
        prop_assert!((out.eval_real(&p) - want).norm() < 1e-11);
    }
}
