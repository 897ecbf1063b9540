//! Composed runs of either engine and their on-disk trace.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::schedule::ln_f64;
use super::{
    kam_step_multi, kam_step_two, conjugation_audit, Engine, KamError, KamOptions, KamScheduleMulti,
    KamScheduleTwo, KamState, Mode, NearIdentity, StepReport,
};
use crate::arithmetic::FrequencyPair;
use crate::cocycle::{rotation_number_with, CocycleSpec, RotationOptions};
use crate::fourier::{l1, CMat2, Coeff, MatPoly, RealityClass, ScalarPoly, TrigPoly};

/// A cocycle `(alpha, R_{rho0} e^F)` to be reduced.
#[derive(Debug, Clone)]
pub struct KamProblem {
    pub alpha: Vec<f64>,
    pub rho0: f64,
    pub f: MatPoly,
    /// Exact frequency description, used for exact nonresonance tests.
    pub frequency: Option<FrequencyPair>,
    /// Replaces the orbit estimate of `rho(alpha, R_{rho0} e^F)`.
    pub rho_f: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum EngineSchedule {
    Multi(KamScheduleMulti),
    Two(KamScheduleTwo),
}

impl EngineSchedule {
    pub fn engine(&self) -> Engine {
        match self {
            EngineSchedule::Multi(_) => Engine::Multi,
            EngineSchedule::Two(_) => Engine::Two,
        }
    }

    fn condition_pass(&self) -> bool {
        match self {
            EngineSchedule::Multi(s) => s.condition.pass,
            EngineSchedule::Two(s) => s.condition.pass,
        }
    }

    /// Analytic radius attached to step `n`, if the schedule has one.
    fn radius(&self, n: usize) -> Option<f64> {
        let r = match self {
            EngineSchedule::Multi(s) => &s.row(n)?.r,
            EngineSchedule::Two(s) => &s.row(n)?.r,
        };
        Some(ln_f64(r).exp())
    }
}

/// Finite-order derivative diagnostic of `Phi^{(n)} - Phi^{(n-1)}`:
/// `sum_k |c_k| (2 pi |k|)^m` against the weighted-l1 Cauchy bound
/// `(m / (e r))^m |.|_r`.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyRow {
    pub step: usize,
    pub order: u32,
    pub radius: f64,
    pub derivative: f64,
    pub bound: f64,
    pub holds: bool,
}

fn cauchy_rows(step: usize, diff: &MatPoly, r: f64) -> Vec<CauchyRow> {
    let weighted = diff.norm_cert(r, r);
    (0..=3u32)
        .map(|m| {
            let derivative: f64 = diff
                .coeffs
                .iter()
                .map(|(k, c)| c.norm() * (2.0 * std::f64::consts::PI * l1(k) as f64).powi(m as i32))
                .sum();
            let factor = if m == 0 { 1.0 } else { (m as f64 / (std::f64::consts::E * r)).powi(m as i32) };
            let bound = factor * weighted;
            CauchyRow { step, order: m, radius: r, derivative, bound, holds: derivative <= bound * (1.0 + 1e-12) }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub report: StepReport,
    pub phi: NearIdentity,
    pub state: KamState,
    pub g_norm: f64,
    pub f_norm: f64,
    pub rho_estimate: Option<f64>,
    pub rho_drift: Option<f64>,
    pub rho_budget: Option<f64>,
    /// Audit of the composed conjugation against the original cocycle.
    pub composed_audit: f64,
    pub status: String,
    pub cauchy: Vec<CauchyRow>,
}

#[derive(Debug, Clone)]
pub struct KamTrace {
    pub engine: Engine,
    pub mode: Mode,
    pub alpha: Vec<f64>,
    pub rho_f: f64,
    pub rho_f_budget: f64,
    pub initial: KamState,
    pub steps: Vec<StepRecord>,
    /// `Phi^{(n)}`: the product of all step conjugations.
    pub composed: NearIdentity,
    pub final_state: KamState,
    pub converged: bool,
    pub schedule: serde_json::Value,
}

fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

/// Copy without coefficients below `floor`, for cheap orbit evaluation.
fn pruned(s: &KamState, floor: f64) -> KamState {
    let keep_m = |p: &MatPoly| p.map_coeffs(|_, c| (c.norm() >= floor).then_some(c));
    let keep_s = |p: &ScalarPoly| p.map_coeffs(|_, c| (c.norm() >= floor).then_some(c));
    KamState::new(keep_s(&s.g), keep_m(&s.f))
}

fn estimate_rho(spec: CocycleSpec, opts: &KamOptions) -> Result<(f64, f64), KamError> {
    let r = rotation_number_with(&spec, RotationOptions::new(opts.rho_check_n.max(1000), opts.rho_check_samples.max(1)))?;
    Ok((r.value, r.error_budget))
}

/// Runs up to `max_steps` steps of the chosen engine from `g_0 =
/// 2 pi (rho0 - rho_f)`, `F_0 = F`.
pub fn kam_run(
    problem: &KamProblem,
    schedule: &EngineSchedule,
    opts: &KamOptions,
    max_steps: usize,
) -> Result<KamTrace, KamError> {
    let d = problem.alpha.len();
    if problem.f.dim != d {
        return Err(KamError::HypothesisViolated("F and alpha dimensions differ".into()));
    }
    if opts.mode == Mode::Theory && !schedule.condition_pass() {
        return Err(KamError::HypothesisViolated("smallness condition on eps0 fails".into()));
    }
    let (rho_f, rho_f_budget) = match problem.rho_f {
        Some(r) => (r, 0.0),
        None => {
            let f = problem.f.clone();
            let rho0 = problem.rho0;
            let gen = crate::cocycle::Generator::field(move |phi| {
                crate::fourier::Mat2::rot(rho0) * f.eval_real(phi).exp_sl2()
            });
            let (r, b) = estimate_rho(CocycleSpec::new(problem.alpha.clone(), gen)?, opts)?;
            (problem.rho0 + wrap_half(r - problem.rho0), b)
        }
    };
    if let Some((gamma, tau)) = opts.diophantine {
        let rep = crate::arithmetic::check_rho_diophantine_f64(rho_f, &problem.alpha, gamma, tau, opts.dio_kmax);
        if !rep.pass {
            return Err(KamError::HypothesisViolated(format!(
                "rho_f = {rho_f} fails D({gamma}, {tau}) at k = {:?}",
                rep.worst_k
            )));
        }
    }
    let g0 = 2.0 * std::f64::consts::PI * (problem.rho0 - rho_f);
    let initial = KamState::new(ScalarPoly::real_constant(d, g0), problem.f.clone().with_reality(RealityClass::Sl2Real));
    let mut state = initial.clone();
    let mut composed = NearIdentity::identity(d);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut stalls = 0;
    let mut converged = opts.mat_norm(&state.f) < opts.tol;
    for i in 0..max_steps {
        if converged {
            break;
        }
        let out = match schedule {
            EngineSchedule::Multi(s) => kam_step_multi(&state, s, i + 1, &problem.alpha, rho_f, opts)?,
            EngineSchedule::Two(s) => {
                kam_step_two(&state, s, i, &problem.alpha, problem.frequency.as_ref(), rho_f, opts)?
            }
        };
        let next_composed = out.phi.compose(&composed, opts);
        let composed_audit =
            conjugation_audit(&next_composed, &problem.alpha, rho_f, &initial, &out.state, opts.audit_points);
        let diff = (&next_composed.minus_i - &composed.minus_i).with_reality(RealityClass::Sl2Real);
        let radius = schedule.radius(i + 1).filter(|r| *r > 0.0).unwrap_or(opts.cert_r);
        let cauchy = cauchy_rows(i + 1, &diff, radius);
        let (rho_estimate, rho_drift, rho_budget) = if opts.rho_check_n > 0 {
            let light = pruned(&out.state, 1e-15);
            let spec = CocycleSpec::new(problem.alpha.clone(), light.generator(rho_f))?;
            let (r, b) = estimate_rho(spec, opts)?;
            let drift = wrap_half(r - rho_f).abs();
            (Some(r), Some(drift), Some(b + rho_f_budget))
        } else {
            (None, None, None)
        };
        let f_norm = out.report.f_out;
        if f_norm >= out.report.f_in {
            stalls += 1;
        } else {
            stalls = 0;
        }
        converged = f_norm < opts.tol;
        let status = if converged {
            "converged"
        } else if stalls > 0 {
            "stalled"
        } else {
            "contracting"
        };
        steps.push(StepRecord {
            g_norm: opts.scalar_norm(&out.state.g),
            f_norm,
            rho_estimate,
            rho_drift,
            rho_budget,
            composed_audit,
            status: status.into(),
            cauchy,
            report: out.report,
            phi: out.phi,
            state: out.state.clone(),
        });
        state = out.state;
        composed = next_composed;
        if stalls >= 3 {
            return Err(KamError::NonConvergence { step: i + 1, last: f_norm });
        }
    }
    let schedule_json = serde_json::to_value(schedule).unwrap_or(serde_json::Value::Null);
    Ok(KamTrace {
        engine: schedule.engine(),
        mode: opts.mode,
        alpha: problem.alpha.clone(),
        rho_f,
        rho_f_budget,
        initial,
        steps,
        composed,
        final_state: state,
        converged,
        schedule: schedule_json,
    })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    step: usize,
    phi_minus_i: f64,
    g_norm: f64,
    f_norm: f64,
    rho_drift: Option<f64>,
    audit: f64,
    composed_audit: f64,
    status: &'a str,
}

fn write_coeffs<C: Coeff>(path: &Path, p: &TrigPoly<C>, comps: usize, to: impl Fn(&C) -> Vec<f64>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..p.dim).map(|j| format!("k{j}")).collect();
    for c in 0..comps {
        header.push(format!("re{c}"));
        header.push(format!("im{c}"));
    }
    w.write_record(&header)?;
    for (k, c) in &p.coeffs {
        let mut row: Vec<String> = k.iter().map(|x| x.to_string()).collect();
        row.extend(to(c).iter().map(|x| format!("{x:e}")));
        w.write_record(&row)?;
    }
    w.flush()
}

fn mat_parts(c: &CMat2) -> Vec<f64> {
    c.0.iter().flatten().flat_map(|z| [z.re, z.im]).collect()
}

impl KamTrace {
    pub fn summary_rows(&self) -> Vec<(usize, f64, f64, f64, Option<f64>, String)> {
        self.steps
            .iter()
            .map(|s| (s.report.step, s.report.phi_norm, s.g_norm, s.f_norm, s.rho_drift, s.status.clone()))
            .collect()
    }

    /// Writes `schedule.json`, `steps.json`, `summary.csv` and per-step
    /// coefficient tables; returns the written paths.
    pub fn write_dir(&self, dir: &Path) -> io::Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let sched = dir.join("schedule.json");
        fs::write(&sched, serde_json::to_string_pretty(&self.schedule)?)?;
        written.push(sched);
        let reports: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "report": s.report,
                    "rho_estimate": s.rho_estimate,
                    "rho_drift": s.rho_drift,
                    "rho_budget": s.rho_budget,
                    "composed_audit": s.composed_audit,
                    "cauchy": s.cauchy,
                })
            })
            .collect();
        let meta = serde_json::json!({
            "engine": self.engine,
            "mode": self.mode,
            "alpha": self.alpha,
            "rho_f": self.rho_f,
            "rho_f_budget": self.rho_f_budget,
            "converged": self.converged,
            "steps": reports,
        });
        let steps = dir.join("steps.json");
        fs::write(&steps, serde_json::to_string_pretty(&meta)?)?;
        written.push(steps);
        let summary = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&summary)?;
        for s in &self.steps {
            w.serialize(SummaryRow {
                step: s.report.step,
                phi_minus_i: s.report.phi_norm,
                g_norm: s.g_norm,
                f_norm: s.f_norm,
                rho_drift: s.rho_drift,
                audit: s.report.audit_sup,
                composed_audit: s.composed_audit,
                status: &s.status,
            })?;
        }
        w.flush()?;
        written.push(summary);
        for s in &self.steps {
            let n = s.report.step;
            let p = dir.join(format!("step{n:02}_phi.csv"));
            write_coeffs(&p, &s.phi.minus_i, 4, mat_parts)?;
            written.push(p);
            let p = dir.join(format!("step{n:02}_g.csv"));
            write_coeffs(&p, &s.state.g, 1, |z| vec![z.re, z.im])?;
            written.push(p);
            let p = dir.join(format!("step{n:02}_f.csv"));
            write_coeffs(&p, &s.state.f, 4, mat_parts)?;
            written.push(p);
        }
        Ok(written)
    }
}
