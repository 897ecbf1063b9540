use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FourierError;

/// Real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

/// Complex 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    /// `J = ((0,1),(-1,0))`.
    pub const J: Mat2 = Mat2([[0.0, 1.0], [-1.0, 0.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2([[a, 0.0], [0.0, d]])
    }

    /// `R_g = e^{-2 pi g J}`, counterclockwise rotation by `2 pi g`.
    pub fn rot(g: f64) -> Self {
        let (s, c) = (2.0 * PI * g).sin_cos();
        Mat2([[c, -s], [s, c]])
    }

    /// `e^{tJ} = cos t I + sin t J`.
    pub fn exp_j(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Mat2([[c, s], [-s, c]])
    }

    /// Traceless matrix from coordinates: `a ((1,0),(0,-1)) + b ((0,1),(0,0)) + c ((0,0),(1,0))`.
    pub fn sl2(a: f64, b: f64, c: f64) -> Self {
        Mat2([[a, b], [c, -a]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// Adjugate; equals the inverse when `det = 1`.
    pub fn adj(&self) -> Self {
        let m = &self.0;
        Mat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn inverse(&self) -> Self {
        self.adj().scale(1.0 / self.det())
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Spectral (operator 2-) norm.
    pub fn norm(&self) -> f64 {
        let f2 = self.0.iter().flatten().map(|x| x * x).sum::<f64>();
        let d = self.det();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }

    /// Max entry magnitude, a cheap sup-type comparison norm.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn to_complex(&self) -> CMat2 {
        let m = &self.0;
        let c = |x: f64| Complex64::new(x, 0.0);
        CMat2([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    /// `sqrt(-det F)` branch quantities: returns `(cosh-like, sinh(w)/w-like)`
    /// for `F^2 = delta I`.
    fn exp_coeffs(delta: f64) -> (f64, f64) {
        if delta.abs() < 1e-8 {
            // Taylor to fourth order in delta
            let c = 1.0 + delta / 2.0 + delta * delta / 24.0;
            let s = 1.0 + delta / 6.0 + delta * delta / 120.0;
            (c, s)
        } else if delta > 0.0 {
            let w = delta.sqrt();
            (w.cosh(), w.sinh() / w)
        } else {
            let w = (-delta).sqrt();
            (w.cos(), w.sin() / w)
        }
    }

    /// Exponential of a traceless matrix by the closed form
    /// `e^F = c(w) I + s(w) F` with `F^2 = -det(F) I`.
    pub fn exp_sl2(&self) -> Mat2 {
        let t = self.trace() / 2.0;
        let f = *self - Mat2::IDENTITY.scale(t);
        let (c, s) = Mat2::exp_coeffs(-f.det());
        let e = Mat2::IDENTITY.scale(c) + f.scale(s);
        if t == 0.0 {
            e
        } else {
            e.scale(t.exp())
        }
    }

    /// Inverse of [`Mat2::exp_sl2`] near the identity. The input is first
    /// normalised to unit determinant.
    pub fn log_sl2(&self) -> Result<Mat2, FourierError> {
        let dist = (*self - Mat2::IDENTITY).norm();
        if !(dist < 0.5) {
            return Err(FourierError::LogDomain { distance: dist });
        }
        let a = self.scale(1.0 / self.det().sqrt());
        let t = a.trace() / 2.0;
        let f = a - Mat2::IDENTITY.scale(t);
        // F = w / sin(w) (A - t I) with cos w = t, continued through t > 1
        let u = 1.0 - t;
        let factor = if u.abs() < 1e-6 {
            // w^2 = 2u + u^2/3 + ..., w/sin w = 1 + w^2/6 + 7 w^4/360
            let w2 = 2.0 * u + u * u / 3.0;
            1.0 + w2 / 6.0 + 7.0 * w2 * w2 / 360.0
        } else if t < 1.0 {
            let w = t.acos();
            w / w.sin()
        } else {
            let w = t.acosh();
            w / w.sinh()
        };
        Ok(f.scale(factor))
    }

    /// `e^F - I` for traceless `F`, without cancellation for small `F`.
    pub fn expm1_sl2(&self) -> Mat2 {
        let delta = -self.det();
        let (cm1, s) = if delta.abs() < 1e-8 {
            (delta / 2.0 + delta * delta / 24.0, 1.0 + delta / 6.0 + delta * delta / 120.0)
        } else if delta > 0.0 {
            let w = delta.sqrt();
            (2.0 * (w / 2.0).sinh().powi(2), w.sinh() / w)
        } else {
            let w = (-delta).sqrt();
            (-2.0 * (w / 2.0).sin().powi(2), w.sin() / w)
        };
        Mat2::IDENTITY.scale(cm1) + self.scale(s)
    }

    /// `log(I + X)` for `I + X` in SL(2,R) with `|X| < 1/2`. Works from the
    /// traceless part of `X` so that relative accuracy is kept as `X -> 0`.
    pub fn log1p_sl2(&self) -> Result<Mat2, FourierError> {
        let dist = self.norm();
        if !(dist < 0.5) {
            return Err(FourierError::LogDomain { distance: dist });
        }
        let t = self.trace() / 2.0;
        let s = *self - Mat2::IDENTITY.scale(t);
        // S = (sin w / w) L with det S = sin^2 w (sinh^2 on the hyperbolic side)
        let s2 = s.det();
        let factor = if s2.abs() < 1e-3 {
            1.0 + s2 * (1.0 / 6.0 + s2 * (3.0 / 40.0 + s2 * (5.0 / 112.0 + s2 * (35.0 / 1152.0 + s2 * 63.0 / 2816.0))))
        } else if s2 > 0.0 {
            let r = s2.sqrt();
            r.asin() / r
        } else {
            let r = (-s2).sqrt();
            r.asinh() / r
        };
        Ok(s.scale(factor))
    }

    /// `(I + a)(I + b) - I`.
    pub fn dmul(a: Mat2, b: Mat2) -> Mat2 {
        a + b + a * b
    }

    /// Angle of `A e(x)` where `e(x) = (cos 2 pi x, sin 2 pi x)`, in turns.
    pub fn projective_angle(&self, x: f64) -> f64 {
        let (s, c) = (2.0 * PI * x).sin_cos();
        let v = self.apply([c, s]);
        v[1].atan2(v[0]) / (2.0 * PI)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(r)
    }
}

impl CMat2 {
    pub const ZERO: CMat2 = CMat2([[Complex64::new(0.0, 0.0); 2]; 2]);
    pub const IDENTITY: CMat2 =
        CMat2([[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        CMat2([[a, b], [c, d]])
    }

    /// `M = (1/(1+i)) ((1,-i),(1,i))`, unitary.
    pub fn m() -> Self {
        let k = Complex64::new(1.0, 1.0).inv();
        let i = Complex64::i();
        CMat2([[k, -i * k], [k, i * k]])
    }

    pub fn m_inv() -> Self {
        CMat2::m().adjoint()
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        CMat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn conj(&self) -> Self {
        let m = &self.0;
        CMat2([[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]])
    }

    pub fn adj(&self) -> Self {
        let m = &self.0;
        CMat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        CMat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let f2: f64 = self.0.iter().flatten().map(|x| x.norm_sqr()).sum();
        let d = self.det().norm();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |a, x| a.max(x.norm()))
    }

    pub fn re(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0].re, m[0][1].re], [m[1][0].re, m[1][1].re]])
    }

    pub fn max_imag(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |a, x| a.max(x.im.abs()))
    }
}

impl Add for CMat2 {
    type Output = CMat2;
    fn add(self, o: CMat2) -> CMat2 {
        let (a, b) = (&self.0, &o.0);
        CMat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl AddAssign for CMat2 {
    fn add_assign(&mut self, o: CMat2) {
        *self = *self + o;
    }
}

impl Sub for CMat2 {
    type Output = CMat2;
    fn sub(self, o: CMat2) -> CMat2 {
        self + (-o)
    }
}

impl Neg for CMat2 {
    type Output = CMat2;
    fn neg(self) -> CMat2 {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for CMat2 {
    type Output = CMat2;
    fn mul(self, o: CMat2) -> CMat2 {
        let (a, b) = (&self.0, &o.0);
        let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        CMat2(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_exp(f: Mat2) -> Mat2 {
        let mut term = Mat2::IDENTITY;
        let mut sum = Mat2::IDENTITY;
        for n in 1..30 {
            term = (term * f).scale(1.0 / n as f64);
            sum = sum + term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_and_rotation_generator() {
        assert_eq!(Mat2::ZERO.exp_sl2(), Mat2::IDENTITY);
        let e = Mat2::J.scale(PI / 2.0).exp_sl2();
        assert!((e - Mat2::J).max_abs() < 1e-15);
        // e^{-2 pi g J} = R_g
        let g = 0.123;
        assert!((Mat2::J.scale(-2.0 * PI * g).exp_sl2() - Mat2::rot(g)).max_abs() < 1e-15);
        assert!((Mat2::exp_j(0.7) - Mat2::J.scale(0.7).exp_sl2()).max_abs() < 1e-15);
    }

    #[test]
    fn exp_matches_power_series_and_log_inverts() {
        for (a, b, c) in [(0.1, 0.2, -0.15), (0.2, 0.05, 0.1), (0.0, 0.2, -0.2), (1e-9, 2e-9, 0.0), (0.21, -0.1, 0.1)] {
            let f = Mat2::sl2(a, b, c);
            let e = f.exp_sl2();
            assert!((e - series_exp(f)).max_abs() < 1e-14);
            assert!((e.det() - 1.0).abs() < 1e-14);
            let back = e.log_sl2().unwrap();
            assert!((back - f).max_abs() < 1e-12, "{a} {b} {c}");
        }
    }

    #[test]
    fn log_domain_guard() {
        assert!(matches!(Mat2::rot(0.25).log_sl2(), Err(FourierError::LogDomain { .. })));
    }

    #[test]
    fn m_is_unitary() {
        let p = CMat2::m() * CMat2::m().adjoint();
        assert!((p - CMat2::IDENTITY).max_abs() < 1e-15);
    }

    #[test]
    fn spectral_norm() {
        assert!((Mat2::diag(2.0, 0.5).norm() - 2.0).abs() < 1e-15);
        assert!((Mat2::rot(0.3).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expm1_and_log1p_keep_relative_accuracy() {
        for (a, b, c) in [(0.1, 0.2, -0.15), (0.0, 0.2, -0.2), (3e-9, 1e-8, -2e-9), (1e-13, -4e-13, 2e-13), (0.2, 0.05, 0.1)] {
            let f = Mat2::sl2(a, b, c);
            let x = f.expm1_sl2();
            let scale = f.max_abs();
            assert!((x + Mat2::IDENTITY - series_exp(f)).max_abs() < 1e-15);
            // the small-F cases must be accurate relative to |F|
            assert!((x - f).max_abs() <= scale * scale + 1e-16 * scale);
            let back = x.log1p_sl2().unwrap();
            assert!((back - f).max_abs() <= 1e-14 * scale, "{a} {b} {c}");
        }
        assert!(Mat2::rot(0.25).scale(1.0).expm1_sl2().max_abs() > 0.0);
        assert!(matches!((Mat2::rot(0.25) - Mat2::IDENTITY).log1p_sl2(), Err(FourierError::LogDomain { .. })));
        let a = Mat2::sl2(0.01, 0.02, 0.0).expm1_sl2();
        let b = Mat2::sl2(0.0, -0.01, 0.03).expm1_sl2();
        let prod = (a + Mat2::IDENTITY) * (b + Mat2::IDENTITY) - Mat2::IDENTITY;
        assert!((Mat2::dmul(a, b) - prod).max_abs() < 1e-15);
    }
}
