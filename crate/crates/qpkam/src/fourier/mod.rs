//! Sparse trigonometric polynomials on `T^d`, analytic norms and the
//! sl(2,R) utilities used by the reducibility engines.

mod mat2;
mod poly;

pub use mat2::{CMat2, Mat2};
pub use poly::{
    cis, fft_nd, grid_size_for, l1, Coeff, Grid, Index, MatPoly, NormFlavor, NormParams, RealityClass, ScalarPoly,
    Side, TrigPoly, COEFF_FLOOR,
};

use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FourierError {
    #[error("matrix log outside its domain: |A - I| = {distance}")]
    LogDomain { distance: f64 },
    #[error("series is not traceless: trace coefficient {trace}")]
    NotSl2 { trace: f64 },
}

/// `T_N` / `R_N` truncation.
pub fn truncate<C: Coeff>(f: &TrigPoly<C>, n: f64, side: Side) -> TrigPoly<C> {
    f.truncate(n, side)
}

pub fn analytic_norm<C: Coeff>(f: &TrigPoly<C>, p: NormParams) -> f64 {
    f.analytic_norm(p)
}

/// Scalar parts of an sl(2,R)-valued series in the `M` frame:
/// `F = M^{-1} ((i F^-, w1), (w2, -i F^-)) M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MDecomposition {
    pub f_minus: ScalarPoly,
    pub w1: ScalarPoly,
    pub w2: ScalarPoly,
}

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn m_decompose(f: &MatPoly) -> Result<MDecomposition, FourierError> {
    let scale = f.coeffs.values().map(|c| c.max_abs()).fold(1.0, f64::max);
    let tr = f.trace_defect();
    if tr > 1e-12 * scale {
        return Err(FourierError::NotSl2 { trace: tr });
    }
    let half = Complex64::new(0.5, 0.0);
    let f11 = f.entry(0, 0);
    let f12 = f.entry(0, 1);
    let f21 = f.entry(1, 0);
    let f_minus = (&f12 - &f21).scale(half).with_reality(RealityClass::RealScalar);
    let f_plus = (&f12 + &f21).scale(half);
    let ifp = f_plus.scale(I);
    let w1 = (&f11 - &ifp).with_reality(RealityClass::General);
    let w2 = (&f11 + &ifp).with_reality(RealityClass::General);
    Ok(MDecomposition { f_minus, w1, w2 })
}

/// Inverse of [`m_decompose`].
pub fn m_recompose(d: &MDecomposition) -> MatPoly {
    let half = Complex64::new(0.5, 0.0);
    let f11 = (&d.w1 + &d.w2).scale(half);
    let f_plus = (&d.w2 - &d.w1).scale(Complex64::new(0.0, -0.5));
    let f12 = &f_plus + &d.f_minus;
    let f21 = &f_plus - &d.f_minus;
    let f22 = -&f11;
    let real = d.f_minus.reality.is_real() && (&d.w2 - &d.w1.conj_reflect()).coeffs.values().all(|c| c.norm() < 1e-300);
    let reality = if real { RealityClass::Sl2Real } else { RealityClass::General };
    MatPoly::from_entries([[&f11, &f12], [&f21, &f22]], reality)
}

/// `B(. + alpha) A(.) B(.)^{-1}` by convolution; `B^{-1}` is the adjugate,
/// exact for SL(2)-valued `B`. Coefficients below `floor` are pruned into
/// the truncation debt (weighted for `|.|_0`).
pub fn compose_conjugate(b: &MatPoly, a: &MatPoly, alpha: &[f64], floor: Option<f64>) -> MatPoly {
    let mut out = b.shift(alpha).mul(a).mul(&b.adj());
    out.reality = if b.reality.is_real() && a.reality.is_real() { RealityClass::Sl2Real } else { RealityClass::General };
    if let Some(fl) = floor {
        out.prune(fl, NormParams::uniform(0.0));
    }
    out
}

/// Real parts of a matrix series on a grid.
pub fn sample_real(f: &MatPoly, n: &[usize]) -> Grid<Mat2> {
    let g = f.to_grid(n);
    Grid { dims: g.dims, values: g.values.iter().map(|c| c.re()).collect() }
}

/// Matrix series with real grid samples `g`, keeping `|k| < max_l1` and
/// coefficients above `floor`; dropped mass is recorded as debt.
pub fn from_real_grid(g: &Grid<Mat2>, reality: RealityClass, max_l1: i64, floor: f64, weights: NormParams) -> MatPoly {
    let cg = Grid { dims: g.dims.clone(), values: g.values.iter().map(|m| m.to_complex()).collect() };
    let mut p = MatPoly::from_grid(&cg, reality, max_l1, floor, weights);
    // exact conjugate symmetry for real samples
    if reality.is_real() {
        let debt = p.debt;
        p = p.symmetrize();
        p.debt = debt;
    }
    p
}

/// Scalar analogue of [`from_real_grid`].
pub fn scalar_from_real_grid(g: &Grid<f64>, max_l1: i64, floor: f64, weights: NormParams) -> ScalarPoly {
    let cg = Grid { dims: g.dims.clone(), values: g.values.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    let p = ScalarPoly::from_grid(&cg, RealityClass::RealScalar, max_l1, floor, weights);
    let debt = p.debt;
    let mut s = p.symmetrize();
    s.debt = debt;
    s
}

/// Outcome of the sup-to-weighted-l1 conversion inequality
/// `|f|_{r+} <= 36 / min(1, (r - r+)^2) ||f||_r`.
#[derive(Debug, Clone, Serialize)]
pub struct NormConversion {
    pub weighted_l1_inner: f64,
    pub sup_outer: f64,
    pub factor: f64,
    pub holds: bool,
}

pub fn norm_conversion_check<C: Coeff>(f: &TrigPoly<C>, r: f64, r_plus: f64) -> NormConversion {
    let inner = f.analytic_norm(NormParams::uniform(r_plus));
    let sup = f.analytic_norm(NormParams::sup(r, r));
    let factor = 36.0 / (r - r_plus).powi(2).min(1.0);
    NormConversion { weighted_l1_inner: inner, sup_outer: sup, factor, holds: inner <= factor * sup * (1.0 + 1e-12) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_sl2(dim: usize) -> MatPoly {
        let a = ScalarPoly::cos_mode(dim, vec![1; dim], 0.1);
        let b = &ScalarPoly::sin_mode(dim, vec![2; dim], 0.05) + &ScalarPoly::real_constant(dim, 0.02);
        let cc = ScalarPoly::cos_mode(dim, [vec![0; dim - 1], vec![1]].concat(), -0.07);
        let na = -&a;
        MatPoly::from_entries([[&a, &b], [&cc, &na]], RealityClass::Sl2Real)
    }

    #[test]
    fn m_decompose_examples() {
        let g = ScalarPoly::cos_mode(1, vec![1], 0.3);
        let fj = g.times_matrix(Mat2::J.to_complex());
        let d = m_decompose(&fj).unwrap();
        assert!(d.w1.coeffs.values().all(|x| x.norm() == 0.0));
        assert_eq!(d.f_minus, g.clone().with_reality(RealityClass::RealScalar));
        let sym = ScalarPoly::real_constant(1, 2.0).times_matrix(Mat2::new(0.0, 1.0, 1.0, 0.0).to_complex());
        let d = m_decompose(&sym).unwrap();
        assert_eq!(d.w1.get(&[0]), c(0.0, -2.0));
        assert_eq!(d.w2.get(&[0]), c(0.0, 2.0));
        assert!(d.f_minus.get(&[0]).norm() == 0.0);
    }

    #[test]
    fn m_frame_matches_explicit_conjugation() {
        let f = Mat2::sl2(0.3, -0.2, 0.5).to_complex();
        let p = MatPoly::constant(1, f, RealityClass::Sl2Real);
        let d = m_decompose(&p).unwrap();
        let fm = d.f_minus.get(&[0]);
        let inner = CMat2::new(I * fm, d.w1.get(&[0]), d.w2.get(&[0]), -I * fm);
        let back = CMat2::m_inv() * inner * CMat2::m();
        assert!((back - f).max_abs() < 1e-15);
    }

    #[test]
    fn recompose_inverts_and_w2_is_reflected_w1() {
        let f = sample_sl2(2);
        let d = m_decompose(&f).unwrap();
        assert!((&d.w2 - &d.w1.conj_reflect()).coeffs.values().all(|x| x.norm() < 1e-16));
        let back = m_recompose(&d);
        for (k, v) in &f.coeffs {
            assert!((back.get(k) - *v).max_abs() < 1e-16);
        }
        assert_eq!(back.reality, RealityClass::Sl2Real);
    }

    #[test]
    fn not_sl2_rejected() {
        let p = MatPoly::identity(1);
        assert!(matches!(m_decompose(&p), Err(FourierError::NotSl2 { .. })));
    }

    #[test]
    fn conjugation_by_rotations_commutes() {
        let b = MatPoly::constant_real(1, Mat2::rot(0.17), RealityClass::Sl2Real);
        let a = MatPoly::constant_real(1, Mat2::rot(0.3), RealityClass::Sl2Real);
        let out = compose_conjugate(&b, &a, &[0.618], None);
        assert!((out.get(&[0]).re() - Mat2::rot(0.3)).max_abs() < 1e-15);
        let id = compose_conjugate(&MatPoly::identity(1), &a, &[0.618], None);
        assert_eq!(id.get(&[0]), a.get(&[0]));
    }

    #[test]
    fn exp_log_field_roundtrip() {
        let f = sample_sl2(2);
        let n = [32, 32];
        let g = sample_real(&f, &n);
        let e = g.map(|_, m| m.exp_sl2());
        let l = e.try_map(|_, m| m.log_sl2()).unwrap();
        let back = from_real_grid(&l, RealityClass::Sl2Real, 64, 1e-17, NormParams::uniform(0.0));
        assert!((&back - &f).analytic_norm(NormParams::uniform(0.0)) < 1e-13);
    }

    #[test]
    fn conversion_inequality_holds() {
        let f = &ScalarPoly::cos_mode(2, vec![1, 2], 1.0) + &ScalarPoly::sin_mode(2, vec![3, 0], 0.5);
        let r = norm_conversion_check(&f, 0.2, 0.1);
        assert!(r.holds);
    }
}
