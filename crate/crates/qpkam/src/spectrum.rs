//! Energy sweeps for quasiperiodic Schrodinger cocycles.
//!
//! For each grid energy the sweep estimates the fibered rotation number,
//! tests it against the Diophantine set of the frequency, conjugates the
//! constant part of the cocycle to a rotation and hands the remainder to
//! the KAM engines. Boundedness of the original cocycle is measured
//! independently by direct iteration, so a reduced row carries two
//! separate pieces of evidence.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arithmetic::{
    cf_expand, check_rho_diophantine_f64, construct_omega_chi, ArithError, ContinuedFraction, FrequencyPair, Growth,
    HpReal,
};
use crate::cocycle::{
    boundedness_metric, grid_points, kronecker_phases, rotation_number_with, schrodinger_cocycle, CocycleError,
    RotationEstimate, RotationOptions, SchrodingerParams,
};
use crate::fourier::{Mat2, MatPoly, RealityClass, ScalarPoly};
use crate::kam::{
    kam_run, Engine, EngineSchedule, KamError, KamOptions, KamProblem, KamScheduleMulti, KamScheduleTwo,
    MultiParams, TwoParams,
};
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum SpectrumError {
    #[error("invalid scan configuration: {0}")]
    Config(String),
    #[error("energy {energy} with step {h} leaves the window [{lo}, {hi}]")]
    OutOfWindow { energy: f64, h: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How the frequency vector is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaSpec {
    /// Periodic continued fractions `[0; a_1, a_2, ...]`, one period per
    /// coordinate.
    Quadratic { quotients: Vec<Vec<u64>> },
    /// Explicit floating-point coordinates in `(0, 1)`.
    Explicit { values: Vec<f64> },
    /// Two-frequency Liouvillean construction.
    Omega { chi: f64, steps: usize, growth: Growth },
}

/// Depth of the truncated periodic expansions.
const QUADRATIC_DEPTH: usize = 60;

/// A frequency vector together with the arithmetic the engines need.
#[derive(Debug, Clone)]
pub struct ResolvedFrequency {
    pub alpha: Vec<f64>,
    /// Continued fraction of the first coordinate.
    pub cf: ContinuedFraction,
    /// Exact data, when the frequency came from the two-frequency
    /// construction.
    pub pair: Option<FrequencyPair>,
    pub q_tilde: Vec<num_bigint::BigInt>,
    pub q_prime: Vec<num_bigint::BigInt>,
}

impl AlphaSpec {
    pub fn resolve(&self) -> Result<ResolvedFrequency, SpectrumError> {
        match self {
            AlphaSpec::Quadratic { quotients } => {
                if quotients.is_empty() || quotients.iter().any(|p| p.is_empty() || p.contains(&0)) {
                    return Err(SpectrumError::Config("alpha.quotients needs non-empty positive periods".into()));
                }
                let cfs: Vec<ContinuedFraction> = quotients
                    .iter()
                    .map(|p| {
                        let q: Vec<u64> = p.iter().cycle().take(QUADRATIC_DEPTH).copied().collect();
                        ContinuedFraction::from_u64(&q)
                    })
                    .collect();
                let alpha = cfs.iter().map(|c| c.to_f64()).collect();
                Ok(ResolvedFrequency { alpha, cf: cfs[0].clone(), pair: None, q_tilde: vec![], q_prime: vec![] })
            }
            AlphaSpec::Explicit { values } => {
                if values.is_empty() || values.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                    return Err(SpectrumError::Config("alpha.values must lie in (0, 1)".into()));
                }
                let cf = cf_expand(&HpReal::from_f64(values[0]), 20)?;
                Ok(ResolvedFrequency { alpha: values.clone(), cf, pair: None, q_tilde: vec![], q_prime: vec![] })
            }
            AlphaSpec::Omega { chi, steps, growth } => {
                let om = construct_omega_chi(*chi, *steps, growth.clone())?;
                let pair = om.frequency();
                Ok(ResolvedFrequency {
                    alpha: pair.to_f64_vec(),
                    cf: pair.alpha_tilde.clone(),
                    q_tilde: (0..=*steps).map(|n| om.q_tilde(n).clone()).collect(),
                    q_prime: (0..=*steps).map(|n| om.q_prime(n).clone()).collect(),
                    pair: Some(pair),
                })
            }
        }
    }
}

/// One term `cos * cos(2 pi <k,phi>) + sin * sin(2 pi <k,phi>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub coeffs: Vec<PotentialTerm>,
}

impl Potential {
    /// `cos(2 pi phi_1) + ... + cos(2 pi phi_d)`.
    pub fn cos_sum(d: usize) -> Self {
        let coeffs = (0..d)
            .map(|j| {
                let mut k = vec![0; d];
                k[j] = 1;
                PotentialTerm { k, cos: 1.0, sin: 0.0 }
            })
            .collect();
        Potential { coeffs }
    }

    pub fn to_poly(&self, d: usize) -> Result<ScalarPoly, SpectrumError> {
        let mut v = ScalarPoly::zero(d, RealityClass::RealScalar);
        for t in &self.coeffs {
            if t.k.len() != d {
                return Err(SpectrumError::Config(format!("potential mode {:?} does not match dimension {d}", t.k)));
            }
            let term = &ScalarPoly::cos_mode(d, t.k.clone(), t.cos) + &ScalarPoly::sin_mode(d, t.k.clone(), t.sin);
            v = (&v + &term).with_reality(RealityClass::RealScalar);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiophantineConfig {
    pub gamma: f64,
    pub tau: f64,
    /// Lattice cap for the membership test.
    pub k_max: i64,
}

impl Default for DiophantineConfig {
    fn default() -> Self {
        DiophantineConfig { gamma: 0.01, tau: 3.0, k_max: 30 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KamConfig {
    pub engine: Engine,
    pub max_steps: usize,
    /// Override of `n_*` for the two-frequency schedule.
    pub n_star: Option<usize>,
    #[serde(flatten)]
    pub options: KamOptions,
}

impl Default for KamConfig {
    fn default() -> Self {
        KamConfig { engine: Engine::Multi, max_steps: 6, n_star: Some(0), options: KamOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsConfig {
    /// Iterations of the boundedness metric.
    #[serde(rename = "N")]
    pub n: usize,
    pub threshold: f64,
    pub phase_samples: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { n: 10_000, threshold: 100.0, phase_samples: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationConfig {
    pub n: usize,
    pub phase_samples: usize,
    pub random_starts: usize,
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig { n: 20_000, phase_samples: 2, random_starts: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzConfig {
    /// Number of reduced rows that get a slope spot-check.
    pub spot_checks: usize,
    /// Largest step; `None` uses a quarter of the grid spacing.
    pub h: Option<f64>,
    /// Iterations of the rotation estimates behind each slope.
    pub n: usize,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig { spot_checks: 3, h: None, n: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdsConfig {
    /// Truncation size `L`.
    pub size: usize,
    pub phases: usize,
}

impl Default for IdsConfig {
    fn default() -> Self {
        IdsConfig { size: 2000, phases: 4 }
    }
}

/// Everything a sweep needs; every table except `alpha` has defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha: AlphaSpec,
    /// Defaults to `sum_j cos(2 pi phi_j)`.
    #[serde(default)]
    pub potential: Option<Potential>,
    #[serde(default)]
    pub lambda: f64,
    /// Explicit window; when absent it is obtained by inverting the free
    /// curve on `[2 sigma, 1/2 - 2 sigma]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_sigma")]
    pub sigma_margin: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub diophantine: DiophantineConfig,
    #[serde(default)]
    pub kam: KamConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub rotation: RotationConfig,
    #[serde(default)]
    pub lipschitz: LipschitzConfig,
    #[serde(default)]
    pub ids: IdsConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    0.05
}
fn default_grid() -> usize {
    41
}
fn default_seed() -> u64 {
    0x5eed
}

impl ScanConfig {
    pub fn new(alpha: AlphaSpec, lambda: f64) -> Self {
        ScanConfig {
            alpha,
            potential: None,
            lambda,
            window: None,
            sigma_margin: default_sigma(),
            grid: default_grid(),
            diophantine: DiophantineConfig::default(),
            kam: KamConfig::default(),
            bounds: BoundsConfig::default(),
            rotation: RotationConfig::default(),
            lipschitz: LipschitzConfig::default(),
            ids: IdsConfig::default(),
            seed: default_seed(),
        }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let bad = |m: &str| Err(SpectrumError::Config(m.into()));
        if self.grid < 2 {
            return bad("grid must be at least 2");
        }
        if !(self.sigma_margin > 0.0 && self.sigma_margin < 0.125) {
            return bad("sigma_margin must lie in (0, 1/8)");
        }
        let [lo, hi] = self.window();
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return bad("window must satisfy E1 < E2");
        }
        if !(self.lambda.is_finite()) || self.diophantine.gamma <= 0.0 || self.diophantine.tau < 0.0 {
            return bad("lambda must be finite and gamma, tau positive");
        }
        if self.rotation.n == 0 || self.bounds.n == 0 || self.ids.size == 0 {
            return bad("iteration counts must be positive");
        }
        Ok(())
    }

    /// `[E_1, E_2]`.
    pub fn window(&self) -> [f64; 2] {
        self.window.unwrap_or_else(|| {
            let e = 2.0 * (4.0 * PI * self.sigma_margin).cos();
            [-e, e]
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        let [lo, hi] = self.window();
        let n = self.grid.max(2);
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }

    fn rotation_options(&self, n: usize, row: usize) -> RotationOptions {
        RotationOptions {
            n,
            phase_samples: self.rotation.phase_samples,
            random_starts: self.rotation.random_starts,
            seed: self.seed.wrapping_add(row as u64),
        }
    }
}

/// Frequency and potential shared by all rows of a sweep.
struct Setup {
    freq: ResolvedFrequency,
    v: ScalarPoly,
}

impl Setup {
    fn new(cfg: &ScanConfig) -> Result<Self, SpectrumError> {
        cfg.validate()?;
        let freq = cfg.alpha.resolve()?;
        let d = freq.alpha.len();
        let v = cfg.potential.clone().unwrap_or_else(|| Potential::cos_sum(d)).to_poly(d)?;
        Ok(Setup { freq, v })
    }

    fn rho(&self, cfg: &ScanConfig, energy: f64, opts: RotationOptions) -> Result<RotationEstimate, SpectrumError> {
        let p = SchrodingerParams { energy, lambda: cfg.lambda, v: self.v.clone(), phase: vec![0.0; self.v.dim] };
        Ok(rotation_number_with(&schrodinger_cocycle(self.freq.alpha.clone(), &p), opts)?)
    }
}

/// `arccos(E/2) / 2 pi`, clamped to `[0, 1/2]` outside `(-2, 2)`.
pub fn free_rho(energy: f64) -> f64 {
    (energy / 2.0).clamp(-1.0, 1.0).acos() / (2.0 * PI)
}

/// Conjugacy of the free transfer matrix to a rotation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreeConjugacy {
    /// `P` with `det P = 1` and `P ((E,-1),(1,0)) P^{-1} = R_{rho_0}`.
    pub p: Mat2,
    pub rho0: f64,
    /// `|P| |P^{-1}|`.
    pub cond: f64,
}

/// Eigenbasis construction for `|E| < 2`; `None` in the hyperbolic and
/// parabolic cases.
pub fn free_conjugacy(energy: f64) -> Option<FreeConjugacy> {
    if !(energy.abs() < 2.0) {
        return None;
    }
    let theta = (energy / 2.0).acos();
    // real and imaginary parts of the eigenvector (e^{-i theta}, 1)
    let m = Mat2::new(theta.cos(), -theta.sin(), 1.0, 0.0);
    let m = m.scale(1.0 / m.det().sqrt());
    let p = m.inverse();
    Some(FreeConjugacy { p, rho0: theta / (2.0 * PI), cond: p.norm() * m.norm() })
}

/// `F_E = lambda v P N P^{-1}` with `N = ((0,0),(1,0))`, so that
/// `P S_{E - lambda v} P^{-1} = R_{rho_0} e^{F_E}` exactly.
pub fn conjugated_perturbation(conj: &FreeConjugacy, lambda: f64, v: &ScalarPoly) -> MatPoly {
    let n = conj.p * Mat2::new(0.0, 0.0, 1.0, 0.0) * conj.p.inverse();
    v.times_matrix(n.scale(lambda).to_complex()).with_reality(RealityClass::Sl2Real)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KamStatus {
    /// Not in the Diophantine set, or no elliptic constant part.
    Skipped,
    Reduced,
    NotConverged,
    HypothesisViolated,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub energy: f64,
    pub rho_est: f64,
    pub error_budget: f64,
    pub in_pi: bool,
    /// Smallest `||2rho + <k,alpha>|| (1+|k|)^tau / gamma` over the lattice cap.
    pub dio_ratio: f64,
    pub kam_status: KamStatus,
    pub kam_detail: Option<String>,
    pub kam_steps: usize,
    pub initial_f_norm: Option<f64>,
    pub final_f_norm: Option<f64>,
    /// Worst per-step and composed conjugation audits.
    pub audit: Option<f64>,
    pub cond_p: Option<f64>,
    /// `sup |Phi P|^2`, the bound the reduction implies for the iterates.
    pub conj_bound: Option<f64>,
    pub sup_norm_n: f64,
    pub overflow: bool,
    pub bounded: bool,
    pub lipschitz_local: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub config: ScanConfig,
    pub window: [f64; 2],
    pub rows: Vec<ScanRow>,
    pub fraction_in_pi: f64,
    pub fraction_reduced: f64,
    pub fraction_bounded: f64,
    /// Fractions are over grid points, not Lebesgue measure.
    pub caveat: String,
}

/// Audit level a row must pass to count as reduced.
const AUDIT_TOL: f64 = 1e-8;

/// `(E, rho(alpha, S_{E - lambda v}))` on the grid.
pub fn rho_curve(cfg: &ScanConfig) -> Result<Vec<(f64, RotationEstimate)>, SpectrumError> {
    let setup = Setup::new(cfg)?;
    let energies = cfg.energies();
    let idx: Vec<usize> = (0..energies.len()).collect();
    par::map_slice(&idx, |&i| setup.rho(cfg, energies[i], cfg.rotation_options(cfg.rotation.n, i)).map(|r| (energies[i], r)))
        .into_iter()
        .collect()
}

/// Indices `i` with `rho(E_{i+1}) > rho(E_i) + b_i + b_{i+1}`.
pub fn monotonicity_violations(curve: &[(f64, RotationEstimate)]) -> Vec<usize> {
    curve
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].1.value > w[0].1.value + w[0].1.error_budget + w[1].1.error_budget)
        .map(|(i, _)| i)
        .collect()
}

fn run_kam(cfg: &ScanConfig, setup: &Setup, conj: &FreeConjugacy, row: &mut ScanRow) {
    let d = setup.freq.alpha.len();
    let f = conjugated_perturbation(conj, cfg.lambda, &setup.v);
    let opts = &cfg.kam.options;
    let eps0 = opts.mat_norm(&f);
    row.initial_f_norm = Some(eps0);
    let schedule = match cfg.kam.engine {
        Engine::Multi => {
            KamScheduleMulti::new(MultiParams { eps0, dim: d, ..Default::default() }, &setup.freq.cf).map(EngineSchedule::Multi)
        }
        Engine::Two => {
            if setup.freq.pair.is_none() {
                row.kam_status = KamStatus::Failed;
                row.kam_detail = Some("the two-frequency engine needs alpha.kind = omega".into());
                return;
            }
            let params = TwoParams { eps0, n_star_override: cfg.kam.n_star, ..Default::default() };
            KamScheduleTwo::new(params, setup.freq.q_tilde.clone(), setup.freq.q_prime.clone()).map(EngineSchedule::Two)
        }
    };
    let schedule = match schedule {
        Ok(s) => s,
        Err(e) => {
            row.kam_status = KamStatus::Failed;
            row.kam_detail = Some(e.to_string());
            return;
        }
    };
    let problem = KamProblem {
        alpha: setup.freq.alpha.clone(),
        rho0: conj.rho0,
        f,
        frequency: setup.freq.pair.clone(),
        rho_f: None,
    };
    match kam_run(&problem, &schedule, opts, cfg.kam.max_steps) {
        Ok(trace) => {
            let audit = trace
                .steps
                .iter()
                .flat_map(|s| [s.report.audit_sup, s.composed_audit])
                .fold(0.0f64, f64::max);
            row.kam_steps = trace.steps.len();
            row.final_f_norm = Some(opts.mat_norm(&trace.final_state.f));
            row.audit = Some(audit);
            let sup = grid_points(d, if d <= 2 { 32 } else { 12 })
                .iter()
                .map(|phi| (trace.composed.eval(phi) * conj.p).norm())
                .fold(0.0f64, f64::max);
            row.conj_bound = Some(sup * sup);
            if trace.converged && audit < AUDIT_TOL {
                row.kam_status = KamStatus::Reduced;
            } else {
                row.kam_status = KamStatus::NotConverged;
                row.kam_detail = Some(format!("converged = {}, audit = {audit:e}", trace.converged));
            }
        }
        Err(e) => {
            row.kam_status = match e {
                KamError::NonConvergence { .. } | KamError::NoConvergence { .. } => KamStatus::NotConverged,
                ref e if e.is_hypothesis() => KamStatus::HypothesisViolated,
                _ => KamStatus::Failed,
            };
            row.kam_detail = Some(e.to_string());
        }
    }
}

fn scan_row(cfg: &ScanConfig, setup: &Setup, i: usize, energy: f64) -> ScanRow {
    let mut row = ScanRow {
        energy,
        rho_est: f64::NAN,
        error_budget: f64::INFINITY,
        in_pi: false,
        dio_ratio: 0.0,
        kam_status: KamStatus::Skipped,
        kam_detail: None,
        kam_steps: 0,
        initial_f_norm: None,
        final_f_norm: None,
        audit: None,
        cond_p: None,
        conj_bound: None,
        sup_norm_n: f64::INFINITY,
        overflow: false,
        bounded: false,
        lipschitz_local: None,
    };
    match setup.rho(cfg, energy, cfg.rotation_options(cfg.rotation.n, i)) {
        Ok(r) => {
            row.rho_est = r.value;
            row.error_budget = r.error_budget;
            let dio = &cfg.diophantine;
            let rep = check_rho_diophantine_f64(r.value, &setup.freq.alpha, dio.gamma, dio.tau, dio.k_max);
            row.in_pi = rep.pass;
            row.dio_ratio = rep.worst_ratio;
        }
        Err(e) => {
            row.kam_status = KamStatus::Failed;
            row.kam_detail = Some(e.to_string());
        }
    }
    let p = SchrodingerParams { energy, lambda: cfg.lambda, v: setup.v.clone(), phase: vec![0.0; setup.v.dim] };
    let b = boundedness_metric(&schrodinger_cocycle(setup.freq.alpha.clone(), &p), cfg.bounds.n, cfg.bounds.phase_samples);
    row.sup_norm_n = b.sup_norm;
    row.overflow = b.overflow;
    row.bounded = !b.overflow && b.sup_norm <= cfg.bounds.threshold;
    if !row.in_pi {
        return row;
    }
    match free_conjugacy(energy) {
        Some(conj) => {
            row.cond_p = Some(conj.cond);
            run_kam(cfg, setup, &conj, &mut row);
        }
        None => row.kam_detail = Some("constant part is not elliptic".into()),
    }
    row
}

fn fraction(rows: &[ScanRow], f: impl Fn(&ScanRow) -> bool) -> f64 {
    rows.iter().filter(|r| f(r)).count() as f64 / rows.len().max(1) as f64
}

/// Full sweep. Per-row failures are recorded in the row.
pub fn scan(cfg: &ScanConfig) -> Result<ScanReport, SpectrumError> {
    let setup = Setup::new(cfg)?;
    let energies = cfg.energies();
    let idx: Vec<usize> = (0..energies.len()).collect();
    let mut rows = par::map_slice(&idx, |&i| scan_row(cfg, &setup, i, energies[i]));

    // slope spot-checks at evenly spaced reduced rows
    let h = lipschitz_step(cfg);
    let [lo, hi] = cfg.window();
    let reduced: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].kam_status == KamStatus::Reduced && rows[i].energy - h >= lo && rows[i].energy + h <= hi)
        .collect();
    let picks: Vec<usize> = match (cfg.lipschitz.spot_checks, reduced.len()) {
        (0, _) | (_, 0) => vec![],
        (m, n) if m >= n => reduced.clone(),
        (m, n) => (0..m).map(|j| reduced[j * (n - 1) / (m - 1).max(1)]).collect(),
    };
    let slopes = par::map_slice(&picks, |&i| lipschitz_at(cfg, &setup, rows[i].energy, h).ok().map(|l| l.c_e));
    for (i, s) in picks.into_iter().zip(slopes) {
        rows[i].lipschitz_local = s;
    }

    Ok(ScanReport {
        window: cfg.window(),
        fraction_in_pi: fraction(&rows, |r| r.in_pi),
        fraction_reduced: fraction(&rows, |r| r.kam_status == KamStatus::Reduced),
        fraction_bounded: fraction(&rows, |r| r.bounded),
        caveat: format!("fractions of {} grid energies; not a Lebesgue measure", rows.len()),
        rows,
        config: cfg.clone(),
    })
}

impl ScanReport {
    /// Reduced rows whose iterates exceed the bound implied by their
    /// conjugacy (with 1% slack for grid sampling of `sup |Phi P|`).
    pub fn bound_violations(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.kam_status == KamStatus::Reduced)
            .filter(|r| r.conj_bound.is_some_and(|b| r.sup_norm_n > 1.01 * b))
            .map(|r| r.energy)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SpectrumError> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Everything except the rows.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "window": self.window,
            "rows": self.rows.len(),
            "fraction_in_pi": self.fraction_in_pi,
            "fraction_reduced": self.fraction_reduced,
            "fraction_bounded": self.fraction_bounded,
            "bound_violations": self.bound_violations(),
            "caveat": self.caveat,
        })
    }

    /// `scan.csv` and `summary.json` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, SpectrumError> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("scan.csv");
        self.write_csv(&csv_path)?;
        let json_path = dir.join("summary.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&self.summary_json())?)?;
        Ok(vec![csv_path, json_path])
    }
}

/// Secant slopes of the rotation curve at one step size.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeLevel {
    pub h: f64,
    pub slope_minus: f64,
    pub slope_plus: f64,
    /// Slope uncertainty from the rotation error budgets.
    pub budget: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub energy: f64,
    pub rho: f64,
    pub levels: Vec<SlopeLevel>,
    /// Largest observed slope: the recorded local constant.
    pub c_e: f64,
    /// Spread of slopes across levels stays within half the largest
    /// slope plus the budgets.
    pub stable: bool,
    /// Whether `energy` is a reduced row of the report.
    pub reduced: bool,
}

const LIPSCHITZ_LEVELS: usize = 3;

fn lipschitz_step(cfg: &ScanConfig) -> f64 {
    let [lo, hi] = cfg.window();
    cfg.lipschitz.h.unwrap_or((hi - lo) / (4.0 * (cfg.grid - 1) as f64))
}

fn lipschitz_at(cfg: &ScanConfig, setup: &Setup, energy: f64, h: f64) -> Result<LipschitzReport, SpectrumError> {
    let [lo, hi] = cfg.window();
    if !(h > 0.0) || energy - h < lo || energy + h > hi {
        return Err(SpectrumError::OutOfWindow { energy, h, lo, hi });
    }
    let opts = |j: usize| cfg.rotation_options(cfg.lipschitz.n, j);
    let mut pts = vec![energy];
    for j in 0..LIPSCHITZ_LEVELS {
        let hj = h / 2f64.powi(j as i32);
        pts.push(energy - hj);
        pts.push(energy + hj);
    }
    let idx: Vec<usize> = (0..pts.len()).collect();
    let est: Vec<RotationEstimate> =
        par::map_slice(&idx, |&j| setup.rho(cfg, pts[j], opts(j))).into_iter().collect::<Result<_, _>>()?;
    let levels: Vec<SlopeLevel> = (0..LIPSCHITZ_LEVELS)
        .map(|j| {
            let hj = h / 2f64.powi(j as i32);
            let (m, p) = (&est[1 + 2 * j], &est[2 + 2 * j]);
            SlopeLevel {
                h: hj,
                slope_minus: (m.value - est[0].value).abs() / hj,
                slope_plus: (p.value - est[0].value).abs() / hj,
                budget: (est[0].error_budget + m.error_budget.max(p.error_budget)) / hj,
            }
        })
        .collect();
    let slopes: Vec<f64> = levels.iter().flat_map(|l| [l.slope_minus, l.slope_plus]).collect();
    let c_e = slopes.iter().cloned().fold(0.0, f64::max);
    let lo_s = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let budget = levels.iter().map(|l| l.budget).fold(0.0, f64::max);
    Ok(LipschitzReport {
        energy,
        rho: est[0].value,
        levels,
        c_e,
        stable: c_e - lo_s <= 0.5 * c_e + budget,
        reduced: false,
    })
}

/// Secant slopes `|rho(E +- h) - rho(E)| / h` over three dyadic levels.
pub fn lipschitz_check(report: &ScanReport, energy: f64, h: f64) -> Result<LipschitzReport, SpectrumError> {
    let setup = Setup::new(&report.config)?;
    let mut out = lipschitz_at(&report.config, &setup, energy, h)?;
    out.reduced = report
        .rows
        .iter()
        .any(|r| (r.energy - energy).abs() < 1e-12 && r.kam_status == KamStatus::Reduced);
    Ok(out)
}

/// Number of eigenvalues below `energy` of the symmetric tridiagonal
/// matrix with unit off-diagonal and diagonal `diag` (Sturm count).
pub fn sturm_count(diag: &[f64], energy: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - energy } else { d - energy - 1.0 / q };
        if q == 0.0 {
            q = f64::EPSILON;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone, Serialize)]
pub struct IdsRow {
    pub energy: f64,
    pub rho: f64,
    pub error_budget: f64,
    /// `1 - 2 rho`.
    pub ids_rotation: f64,
    /// Phase-averaged eigenvalue fraction of the `L x L` truncations.
    pub ids_count: f64,
    pub diff: f64,
    /// `max(2/L, 3 error_budget)`.
    pub tol: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdsReport {
    pub size: usize,
    pub phases: usize,
    pub rows: Vec<IdsRow>,
    pub max_diff: f64,
    pub all_agree: bool,
}

/// Compare `N = 1 - 2 rho` with finite-volume eigenvalue counting.
pub fn ids_relation_check(cfg: &ScanConfig, energies: &[f64]) -> Result<IdsReport, SpectrumError> {
    let setup = Setup::new(cfg)?;
    let l = cfg.ids.size;
    let phases = kronecker_phases(setup.freq.alpha.len(), cfg.ids.phases.max(1));
    let diags: Vec<Vec<f64>> = par::map_slice(&phases, |phi| {
        (0..l)
            .map(|n| {
                let x: Vec<f64> = phi.iter().zip(&setup.freq.alpha).map(|(p, a)| p + n as f64 * a).collect();
                cfg.lambda * setup.v.eval_real(&x)
            })
            .collect()
    });
    let idx: Vec<usize> = (0..energies.len()).collect();
    let rows: Vec<IdsRow> = par::map_slice(&idx, |&i| {
        let e = energies[i];
        let r = setup.rho(cfg, e, cfg.rotation_options(cfg.rotation.n, i))?;
        let count = diags.iter().map(|d| sturm_count(d, e) as f64 / l as f64).sum::<f64>() / diags.len() as f64;
        let ids = 1.0 - 2.0 * r.value;
        let tol = (2.0 / l as f64).max(3.0 * r.error_budget);
        let diff = (ids - count).abs();
        Ok(IdsRow {
            energy: e,
            rho: r.value,
            error_budget: r.error_budget,
            ids_rotation: ids,
            ids_count: count,
            diff,
            tol,
            agree: diff <= tol,
        })
    })
    .into_iter()
    .collect::<Result<_, SpectrumError>>()?;
    Ok(IdsReport {
        size: l,
        phases: diags.len(),
        max_diff: rows.iter().map(|r| r.diff).fold(0.0, f64::max),
        all_agree: rows.iter().all(|r| r.agree),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_conjugacy_rotates() {
        for e in [-1.9, -0.7, 0.0, 0.3, 1.99] {
            let c = free_conjugacy(e).unwrap();
            let lhs = c.p * Mat2::new(e, -1.0, 1.0, 0.0) * c.p.inverse();
            assert!((lhs - Mat2::rot(c.rho0)).norm() < 1e-12, "E = {e}");
            assert!((c.p.det() - 1.0).abs() < 1e-12);
        }
        assert!(free_conjugacy(2.0).is_none());
    }

    #[test]
    fn sturm_count_of_free_laplacian() {
        // eigenvalues 2 cos(pi j/(L+1)), j = 1..L
        let l = 50;
        let diag = vec![0.0; l];
        let eigs: Vec<f64> = (1..=l).map(|j| 2.0 * (PI * j as f64 / (l + 1) as f64).cos()).collect();
        for e in [-2.5, -1.3, 0.05, 1.7, 2.5] {
            assert_eq!(sturm_count(&diag, e), eigs.iter().filter(|&&x| x < e).count());
        }
    }

    #[test]
    fn sigma_window_inverts_free_curve() {
        let cfg = ScanConfig::new(AlphaSpec::Quadratic { quotients: vec![vec![1]] }, 0.0);
        let [lo, hi] = cfg.window();
        assert!((free_rho(hi) - 0.1).abs() < 1e-14);
        assert!((free_rho(lo) - 0.4).abs() < 1e-14);
    }
}
