//! Pointwise field arithmetic on uniform grids.
//!
//! Group elements close to the identity are carried as `X = A - I` so that
//! products and logarithms keep accuracy relative to `|X|` rather than to 1.

use crate::fourier::{
    from_real_grid, scalar_from_real_grid, FourierError, Grid, Mat2, MatPoly, NormParams, RealityClass, ScalarPoly,
};
use crate::par;

/// Grid shape shared by all fields of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub dims: Vec<usize>,
}

impl FieldGrid {
    /// Power-of-two sizes with `n_j >= 4 m_j + 8` (at least 16, at most `cap`)
    /// where `m_j` is the largest degree in coordinate `j`.
    pub fn for_degrees(d: usize, degrees: &[Vec<i64>], cap: usize) -> Self {
        let dims = (0..d)
            .map(|j| {
                let m = degrees.iter().filter_map(|v| v.get(j)).copied().max().unwrap_or(0).max(0) as usize;
                (4 * m + 8).max(16).next_power_of_two().min(cap.max(16))
            })
            .collect();
        FieldGrid { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn fits(&self, k: &[i64]) -> bool {
        k.iter().zip(&self.dims).all(|(&x, &n)| 2 * x.unsigned_abs() < n as u64)
    }

    /// Real samples of a matrix series; coefficients the grid cannot
    /// resolve are dropped and their `|.|_0` mass returned.
    pub fn sample_mat(&self, p: &MatPoly) -> (Vec<Mat2>, f64) {
        let dropped: f64 = p.coeffs.iter().filter(|(k, _)| !self.fits(k)).map(|(_, c)| c.norm()).sum();
        let kept = p.filter(|k| self.fits(k));
        let g = kept.to_grid(&self.dims);
        (g.values.iter().map(|c| c.re()).collect(), dropped)
    }

    pub fn sample_scalar(&self, p: &ScalarPoly) -> (Vec<f64>, f64) {
        let dropped: f64 = p.coeffs.iter().filter(|(k, _)| !self.fits(k)).map(|(_, c)| c.norm()).sum();
        let kept = p.filter(|k| self.fits(k));
        let g = kept.to_grid(&self.dims);
        (g.values.iter().map(|c| c.re).collect(), dropped)
    }

    pub fn to_mat(&self, values: Vec<Mat2>, reality: RealityClass, floor: f64, w: NormParams) -> MatPoly {
        from_real_grid(&Grid { dims: self.dims.clone(), values }, reality, i64::MAX, floor, w)
    }

    pub fn to_scalar(&self, values: Vec<f64>, floor: f64, w: NormParams) -> ScalarPoly {
        scalar_from_real_grid(&Grid { dims: self.dims.clone(), values }, i64::MAX, floor, w)
    }

    pub fn map<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        par::map_range(self.len(), f)
    }

    pub fn try_map<T: Send>(
        &self,
        f: impl Fn(usize) -> Result<T, FourierError> + Sync + Send,
    ) -> Result<Vec<T>, FourierError> {
        par::map_range(self.len(), f).into_iter().collect()
    }
}

/// `e^{tJ} M e^{-tJ}`.
pub fn conj_exp_j(t: f64, m: Mat2) -> Mat2 {
    let r = Mat2::exp_j(t);
    r * m * Mat2::exp_j(-t)
}

/// `e^{tJ} - I`.
pub fn expm1_j(t: f64) -> Mat2 {
    Mat2::J.scale(t).expm1_sl2()
}

/// Largest degree per coordinate of a series (zeros for an empty series).
pub fn degrees<C: crate::fourier::Coeff>(p: &crate::fourier::TrigPoly<C>) -> Vec<i64> {
    p.max_per_dim()
}
