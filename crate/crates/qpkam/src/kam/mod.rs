//! Rotations-reducibility engines.
//!
//! Both engines act on cocycles `(alpha, R_{rho_f + g/2pi} e^F)` with a
//! fixed base rotation number `rho_f`, a real scalar `g` and an
//! sl(2,R)-valued `F`. A step returns a near-identity conjugation `Phi`
//! and the new pair `(g, F)`; the conjugation identity
//! `Phi(. + alpha) A_in Phi^{-1} = A_out` is audited on a grid every step.
//!
//! Group elements near the identity are handled as `A - I` throughout, so
//! the computed `F` keeps accuracy relative to its own size.

pub mod field;
mod multi;
mod run;
pub mod schedule;
mod two;

pub use multi::kam_step_multi;
pub use run::{kam_run, CauchyRow, EngineSchedule, KamProblem, KamTrace, StepRecord};
pub use schedule::{KamScheduleMulti, KamScheduleTwo, MultiParams, TwoParams};
pub use two::{kam_step_two, nre_split, SplitOutput, SplitReport};

use serde::{Deserialize, Serialize};

use crate::arithmetic::{check_rho_diophantine_f64, ArithError, DiophantineReport};
use crate::cocycle::{grid_points, CocycleError, Generator};
use crate::fourier::{FourierError, Mat2, MatPoly, RealityClass, ScalarPoly, TrigPoly};
use crate::homological::HomError;
use field::FieldGrid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KamError {
    #[error("rho_f = {rho} left D(gamma/2 = {gamma}, tau = {tau}) at k = {k:?} (ratio {ratio:e})")]
    DiophantineLost { rho: f64, gamma: f64, tau: f64, k: Vec<i64>, ratio: f64 },
    #[error("step {step}: {inequality} fails ({value:e} > {bound:e})")]
    NormBudgetExceeded { step: usize, inequality: String, value: f64, bound: f64 },
    #[error("|F_n| did not decrease for 3 consecutive steps (step {step}, |F| = {last:e})")]
    NonConvergence { step: usize, last: f64 },
    #[error("splitting iteration stagnated after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

impl KamError {
    /// Hypothesis failures map to CLI exit code 2.
    pub fn is_hypothesis(&self) -> bool {
        matches!(
            self,
            KamError::HypothesisViolated(_) | KamError::DiophantineLost { .. } | KamError::NormBudgetExceeded { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Literal schedules: inequalities are checked and failures abort.
    Theory,
    /// Adaptive truncation with tolerance-based stopping.
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Multi,
    Two,
}

/// Numerical controls shared by both engines.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KamOptions {
    pub mode: Mode,
    /// Stop once the certified `|F|` is below this.
    pub tol: f64,
    /// Radii of the certification norm (first / remaining coordinates).
    pub cert_r: f64,
    pub cert_s: f64,
    /// Coefficients below this are dropped into the truncation debt.
    pub coeff_floor: f64,
    pub k_cap: usize,
    pub grid_cap: usize,
    pub max_substeps: usize,
    /// Upper bound on the literal inner-loop count in theory mode.
    pub theory_substep_cap: usize,
    /// Grid points per dimension of the conjugation audit.
    pub audit_points: usize,
    /// Orbit length for rotation-number checks; 0 disables them.
    pub rho_check_n: usize,
    pub rho_check_samples: usize,
    /// `(gamma', tau')` for the per-step recheck of `rho_f` at `gamma'/2`.
    pub diophantine: Option<(f64, f64)>,
    pub dio_kmax: i64,
    pub split_tol: f64,
    pub split_max_iter: usize,
}

impl Default for KamOptions {
    fn default() -> Self {
        KamOptions {
            mode: Mode::Practical,
            tol: 1e-12,
            cert_r: 0.01,
            cert_s: 0.01,
            coeff_floor: 1e-22,
            k_cap: 24,
            grid_cap: 64,
            max_substeps: 8,
            theory_substep_cap: 16,
            audit_points: 16,
            rho_check_n: 20_000,
            rho_check_samples: 2,
            diophantine: None,
            dio_kmax: 30,
            split_tol: 1e-13,
            split_max_iter: 50,
        }
    }
}

impl KamOptions {
    pub fn norm(&self) -> crate::fourier::NormParams {
        crate::fourier::NormParams::l1(self.cert_r, self.cert_s)
    }

    pub fn mat_norm(&self, f: &MatPoly) -> f64 {
        f.norm_cert(self.cert_r, self.cert_s)
    }

    pub fn scalar_norm(&self, g: &ScalarPoly) -> f64 {
        g.norm_cert(self.cert_r, self.cert_s)
    }

    /// Recheck `rho_f` against `D(gamma'/2, tau')`.
    pub fn recheck_rho(&self, rho_f: f64, alpha: &[f64]) -> Result<Option<DiophantineReport>, KamError> {
        let Some((gamma, tau)) = self.diophantine else { return Ok(None) };
        let rep = check_rho_diophantine_f64(rho_f, alpha, gamma / 2.0, tau, self.dio_kmax);
        if !rep.pass {
            return Err(KamError::DiophantineLost {
                rho: rho_f,
                gamma: gamma / 2.0,
                tau,
                k: rep.worst_k.clone(),
                ratio: rep.worst_ratio,
            });
        }
        Ok(Some(rep))
    }
}

/// `(g, F)` with generator `R_{rho_f + g/2pi} e^F`.
#[derive(Debug, Clone, PartialEq)]
pub struct KamState {
    pub g: ScalarPoly,
    pub f: MatPoly,
}

impl KamState {
    pub fn new(g: ScalarPoly, f: MatPoly) -> Self {
        KamState { g, f }
    }

    pub fn dim(&self) -> usize {
        self.f.dim
    }

    pub fn eval(&self, rho_f: f64, phi: &[f64]) -> Mat2 {
        Mat2::rot(rho_f) * Mat2::exp_j(-self.g.eval_real(phi)) * self.f.eval_real(phi).exp_sl2()
    }

    pub fn generator(&self, rho_f: f64) -> Generator {
        let s = self.clone();
        Generator::field(move |phi| s.eval(rho_f, phi))
    }
}

/// A conjugation `Phi = I + X` stored through `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct NearIdentity {
    pub minus_i: MatPoly,
}

impl NearIdentity {
    pub fn identity(d: usize) -> Self {
        NearIdentity { minus_i: TrigPoly::zero(d, RealityClass::Sl2Real) }
    }

    pub fn eval(&self, phi: &[f64]) -> Mat2 {
        Mat2::IDENTITY + self.minus_i.eval_real(phi)
    }

    /// `Self * inner` (apply `inner` first), computed on a grid.
    pub fn compose(&self, inner: &NearIdentity, opts: &KamOptions) -> NearIdentity {
        let d = self.minus_i.dim;
        let grid = FieldGrid::for_degrees(d, &[self.minus_i.max_per_dim(), inner.minus_i.max_per_dim()], opts.grid_cap);
        let (a, _) = grid.sample_mat(&self.minus_i);
        let (b, _) = grid.sample_mat(&inner.minus_i);
        let prod = grid.map(|i| Mat2::dmul(a[i], b[i]));
        NearIdentity { minus_i: grid.to_mat(prod, RealityClass::Sl2Real, opts.coeff_floor, opts.norm()) }
    }
}

/// `sup_phi |Phi(phi + alpha) A_in(phi) Phi(phi)^{-1} - A_out(phi)|` on a
/// uniform grid with `points^d` nodes.
pub fn conjugation_audit(
    phi: &NearIdentity,
    alpha: &[f64],
    rho_f: f64,
    input: &KamState,
    output: &KamState,
    points: usize,
) -> f64 {
    let pts = grid_points(alpha.len(), points);
    let errs = crate::par::map_slice(&pts, |p| {
        let shifted: Vec<f64> = p.iter().zip(alpha).map(|(x, a)| x + a).collect();
        let lhs = phi.eval(&shifted) * input.eval(rho_f, p) * phi.eval(p).adj();
        (lhs - output.eval(rho_f, p)).norm()
    });
    errs.into_iter().fold(0.0, f64::max)
}

/// One checked inequality of a step.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetCheck {
    pub inequality: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BudgetCheck {
    pub fn new(inequality: &str, value: f64, bound: f64) -> Self {
        let pass = value <= bound * (1.0 + 1e-12) || value == 0.0;
        BudgetCheck { inequality: inequality.into(), value, bound, pass }
    }

    fn enforce(&self, step: usize) -> Result<(), KamError> {
        if self.pass {
            Ok(())
        } else {
            Err(KamError::NormBudgetExceeded {
                step,
                inequality: self.inequality.clone(),
                value: self.value,
                bound: self.bound,
            })
        }
    }
}

/// Small-divisor diagnostics of a step.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DivisorHealth {
    /// Smallest `|e^{2 pi i <k,alpha>} - 1|` used in a classical solve.
    pub min_divisor: Option<f64>,
    /// Largest layer condition number of the twisted solves.
    pub max_condition: Option<f64>,
    /// Measured `max |D_l^{-1}|`.
    pub max_dinv: Option<f64>,
    /// Whether the classical divisors respect the configured floor.
    pub floor_ok: Option<bool>,
    pub diophantine: Option<DiophantineReport>,
}

impl DivisorHealth {
    fn note_divisor(&mut self, d: f64) {
        self.min_divisor = Some(self.min_divisor.map_or(d, |m| m.min(d)));
    }

    fn note_layers(&mut self, layers: &[crate::homological::LayerReport]) {
        for l in layers {
            self.max_condition = Some(self.max_condition.map_or(l.condition, |m| m.max(l.condition)));
            self.max_dinv = Some(self.max_dinv.map_or(l.dinv_norm, |m| m.max(l.dinv_norm)));
        }
    }
}

/// Diagnostics of one inner sub-step.
#[derive(Debug, Clone, Serialize)]
pub struct SubStep {
    pub k: usize,
    pub f_before: f64,
    pub f_after: f64,
    pub y_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub engine: Engine,
    pub mode: Mode,
    pub f_in: f64,
    pub f_out: f64,
    pub phi_norm: f64,
    pub g_change: f64,
    pub audit_sup: f64,
    pub grid: Vec<usize>,
    /// Coefficient mass the grids could not resolve.
    pub dropped: f64,
    pub substeps: Vec<SubStep>,
    /// Literal inner-loop count (multifrequency engine).
    pub n_literal: Option<f64>,
    pub divisors: DivisorHealth,
    pub checks: Vec<BudgetCheck>,
    pub split: Option<SplitReport>,
    pub notes: Vec<String>,
}

/// Output of one engine step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: KamState,
    pub phi: NearIdentity,
    pub report: StepReport,
}

/// Smallest `K` whose tail `sum_{|k| >= K} |F_k| w_k` is at most `bound`,
/// capped at `cap`.
pub(crate) fn adaptive_k(f: &MatPoly, bound: f64, cap: usize, opts: &KamOptions) -> usize {
    let w = opts.norm();
    let mut mass: Vec<(i64, f64)> = f
        .coeffs
        .iter()
        .map(|(k, c)| (crate::fourier::l1(k), c.norm() * w.weight(k)))
        .collect();
    mass.sort_by_key(|x| x.0);
    let total: f64 = mass.iter().map(|x| x.1).sum();
    let mut below = 0.0;
    let mut k = 1usize;
    for (deg, m) in &mass {
        if total - below <= bound {
            break;
        }
        below += m;
        k = k.max(*deg as usize + 1);
    }
    k.clamp(1, cap.max(1))
}
