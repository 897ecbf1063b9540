//! One function per subcommand. Each returns its typed configuration
//! (for the manifest snapshot) after writing artifacts into the run.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qpkam::arithmetic::{
    cf_expand, cf_laws, construct_omega_chi, verify_small_divisors, ArithError, CfLawReport, ContinuedFraction,
    DivisorMode, Growth, HpReal, OmegaProperties,
};
use qpkam::cocycle::{
    lyapunov_estimate, rotation_number_with, schrodinger_cocycle, CocycleSpec, RotationOptions, SchrodingerParams,
};
use qpkam::fourier::{Mat2, MatPoly, RealityClass, ScalarPoly};
use qpkam::homological::{solve_twisted, HomError, HomNorms, TwistedProblem};
use qpkam::kam::{
    kam_run, Engine, EngineSchedule, KamError, KamOptions, KamProblem, KamScheduleMulti, KamScheduleTwo, MultiParams,
    TwoParams,
};
use qpkam::spectrum::{ids_relation_check, scan, AlphaSpec, Potential, PotentialTerm, ScanConfig, SpectrumError};

use crate::config::RawConfig;
use crate::manifest::Run;
use crate::CliError;

fn arith(e: ArithError) -> CliError {
    match e {
        ArithError::InvalidArgument(m) => CliError::Config(m),
        e => CliError::Internal(e.into()),
    }
}

fn spectrum_err(e: SpectrumError) -> CliError {
    match e {
        SpectrumError::Config(m) => CliError::Config(m),
        SpectrumError::Arith(e) => arith(e),
        e => CliError::Internal(e.into()),
    }
}

// freq-construct

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FreqConfig {
    pub chi: f64,
    pub steps: usize,
    pub growth: Growth,
}

impl Default for FreqConfig {
    fn default() -> Self {
        FreqConfig { chi: 5.0, steps: 2, growth: Growth::ExactExp { max_digits: 100_000 } }
    }
}

#[derive(Serialize)]
struct StepRow {
    n: usize,
    a_tilde: String,
    a_prime: String,
    q_tilde: String,
    q_prime: String,
    prop_a: Option<bool>,
    prop_b: Option<bool>,
    prop_c: Option<bool>,
    prop_d: Option<bool>,
}

pub fn freq_construct(raw: &RawConfig, run: &mut Run) -> Result<FreqConfig, CliError> {
    let cfg: FreqConfig = raw.typed()?;
    let om = construct_omega_chi(cfg.chi, cfg.steps, cfg.growth.clone()).map_err(arith)?;
    let props: Vec<OmegaProperties> = om.properties();
    let rows: Vec<StepRow> = om
        .steps
        .iter()
        .map(|s| {
            let p = props.iter().find(|p| p.n == s.n);
            StepRow {
                n: s.n,
                a_tilde: s.a_tilde.to_string(),
                a_prime: s.a_prime.to_string(),
                q_tilde: s.q_tilde.to_string(),
                q_prime: s.q_prime.to_string(),
                prop_a: p.map(|p| p.a),
                prop_b: p.map(|p| p.b),
                prop_c: p.map(|p| p.c),
                prop_d: p.map(|p| p.d),
            }
        })
        .collect();
    for r in &rows {
        println!("step {}: a~ = {}, a' = {}, q~ = {}, q' = {}", r.n, r.a_tilde, r.a_prime, r.q_tilde, r.q_prime);
    }
    let all = props.iter().all(|p| p.all());
    println!("properties (a)-(d) hold at every step: {all}");
    run.write_json(
        "frequency.json",
        &serde_json::json!({ "record": om.record(), "properties": props, "lnln_trend": om.lnln_trend() }),
    )?;
    run.write_csv("steps.csv", &rows)?;
    let trend: Vec<(f64, f64)> = om.lnln_trend().iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect();
    run.plot("lnln_trend", ["n", "lnln_ratio"], &trend)?;
    Ok(cfg)
}

// arith-verify

#[derive(Debug, Serialize, Deserialize)]
pub struct ArithConfig {
    pub alpha: AlphaSpec,
    #[serde(default = "default_convergents")]
    pub convergents: usize,
    #[serde(default = "default_best_cap")]
    pub best_cap: u64,
    #[serde(default)]
    pub divisors: Option<DivisorConfig>,
}

fn default_convergents() -> usize {
    15
}
fn default_best_cap() -> u64 {
    10_000_000
}

/// Exhaustive small-divisor checks on an `omega` frequency.
#[derive(Debug, Serialize, Deserialize)]
pub struct DivisorConfig {
    /// Steps `1..=max_step` are verified.
    pub max_step: usize,
    #[serde(default = "default_divisor_cap")]
    pub cap: u64,
    /// Also check `||<k,alpha> +- 2 rho||` when set.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_divisor_cap() -> u64 {
    qpkam::arithmetic::DEFAULT_BRUTE_FORCE_CAP
}
fn default_gamma() -> f64 {
    0.01
}
fn default_tau() -> f64 {
    3.0
}

#[derive(Serialize)]
struct LawCsvRow {
    coordinate: usize,
    n: usize,
    q_n: String,
    q_next: String,
    dist: f64,
    lower_ok: bool,
    upper_ok: bool,
    best_ok: Option<bool>,
}

pub fn arith_verify(raw: &RawConfig, run: &mut Run) -> Result<ArithConfig, CliError> {
    let cfg: ArithConfig = raw.typed()?;
    let depth = cfg.convergents + 2;
    let cfs: Vec<ContinuedFraction> = match &cfg.alpha {
        AlphaSpec::Quadratic { quotients } => quotients
            .iter()
            .map(|p| {
                if p.is_empty() || p.contains(&0) {
                    return Err(CliError::Config("alpha.quotients needs non-empty positive periods".into()));
                }
                let q: Vec<u64> = p.iter().cycle().take(depth.max(60)).copied().collect();
                Ok(ContinuedFraction::from_u64(&q))
            })
            .collect::<Result<_, _>>()?,
        AlphaSpec::Explicit { values } => values
            .iter()
            .map(|&x| cf_expand(&HpReal::from_f64(x), depth).map_err(arith))
            .collect::<Result<_, _>>()?,
        AlphaSpec::Omega { chi, steps, growth } => {
            let om = construct_omega_chi(*chi, *steps, growth.clone()).map_err(arith)?;
            vec![om.alpha_tilde.clone(), om.alpha_prime.clone()]
        }
    };
    let mut reports: Vec<Option<CfLawReport>> = Vec::new();
    let mut csv_rows = Vec::new();
    let mut pass = true;
    for (j, cf) in cfs.iter().enumerate() {
        // finite expansions (omega coordinates) support fewer convergents
        let n = cfg.convergents.min(cf.depth().saturating_sub(2));
        if n == 0 {
            println!("coordinate {j}: skipped (expansion depth {} too short)", cf.depth());
            reports.push(None);
            continue;
        }
        match cf_laws(cf, n, cfg.best_cap) {
            Ok(rep) => {
                println!("coordinate {j}: convergent laws up to n = {n}: {}", if rep.pass { "PASS" } else { "FAIL" });
                pass &= rep.pass;
                csv_rows.extend(rep.rows.iter().map(|r| LawCsvRow {
                    coordinate: j,
                    n: r.n,
                    q_n: r.q_n.clone(),
                    q_next: r.q_next.clone(),
                    dist: r.dist,
                    lower_ok: r.lower_ok,
                    upper_ok: r.upper_ok,
                    best_ok: r.best_ok,
                }));
                reports.push(Some(rep));
            }
            Err(e) => {
                println!("coordinate {j}: skipped ({e})");
                reports.push(None);
            }
        }
    }
    run.write_csv("cf_laws.csv", &csv_rows)?;
    let mut divisor_reports = Vec::new();
    if let Some(dc) = &cfg.divisors {
        let AlphaSpec::Omega { chi, steps, growth } = &cfg.alpha else {
            return Err(CliError::Config("divisors requires alpha.kind = \"omega\"".into()));
        };
        let om = construct_omega_chi(*chi, *steps, growth.clone()).map_err(arith)?;
        let mut rows = Vec::new();
        for n in 1..=dc.max_step {
            let mut modes = vec![DivisorMode::MixedLattice];
            if let Some(rho) = dc.rho {
                modes.push(DivisorMode::RhoShift { rho, gamma: dc.gamma, tau: dc.tau });
            }
            for mode in modes {
                let rep = verify_small_divisors(&om, n, mode, dc.cap).map_err(arith)?;
                println!("{} at n = {n}: {} ({} checked)", rep.check, if rep.pass { "PASS" } else { "FAIL" }, rep.checked);
                pass &= rep.pass;
                rows.extend(rep.rows.iter().cloned());
                divisor_reports.push(rep);
            }
        }
        run.write_csv("divisors.csv", &rows)?;
    }
    run.write_json("arith.json", &serde_json::json!({ "pass": pass, "cf_laws": reports, "divisors": divisor_reports }))?;
    if !pass {
        return Err(CliError::Hypothesis("arithmetic verification failed; see arith.json".into()));
    }
    Ok(cfg)
}

// rotnum, lyapunov

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CocycleConfig {
    /// Constant rotation `R_rho` over `alpha` (golden mean by default).
    Rotation {
        rho: f64,
        #[serde(default)]
        alpha: Option<AlphaSpec>,
    },
    Schrodinger {
        alpha: AlphaSpec,
        energy: f64,
        #[serde(default)]
        lambda: f64,
        #[serde(default)]
        potential: Option<Potential>,
    },
}

impl CocycleConfig {
    fn build(&self) -> Result<CocycleSpec, CliError> {
        match self {
            CocycleConfig::Rotation { rho, alpha } => {
                let spec = alpha.clone().unwrap_or(AlphaSpec::Quadratic { quotients: vec![vec![1]] });
                let a = spec.resolve().map_err(spectrum_err)?.alpha;
                Ok(CocycleSpec::constant(a, Mat2::rot(*rho)))
            }
            CocycleConfig::Schrodinger { alpha, energy, lambda, potential } => {
                let a = alpha.resolve().map_err(spectrum_err)?.alpha;
                let d = a.len();
                let v = potential.clone().unwrap_or_else(|| Potential::cos_sum(d)).to_poly(d).map_err(spectrum_err)?;
                let p = SchrodingerParams { energy: *energy, lambda: *lambda, v, phase: vec![0.0; d] };
                Ok(schrodinger_cocycle(a, &p))
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RotConfig {
    pub cocycle: CocycleConfig,
    #[serde(default = "default_rot_n")]
    pub n: usize,
    #[serde(default = "default_phase_samples")]
    pub phase_samples: usize,
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_rot_n() -> usize {
    1_000_000
}
fn default_phase_samples() -> usize {
    2
}
fn default_random_starts() -> usize {
    8
}
fn default_seed() -> u64 {
    0x5eed
}

pub fn rotnum(raw: &RawConfig, run: &mut Run) -> Result<RotConfig, CliError> {
    let cfg: RotConfig = raw.typed()?;
    let c = cfg.cocycle.build()?;
    let opts = RotationOptions { n: cfg.n, phase_samples: cfg.phase_samples, random_starts: cfg.random_starts, seed: cfg.seed };
    let est = rotation_number_with(&c, opts).map_err(|e| match e {
        qpkam::cocycle::CocycleError::NotHomotopicToIdentity { .. } => CliError::Hypothesis(e.to_string()),
        qpkam::cocycle::CocycleError::InvalidArgument(m) => CliError::Config(m),
        e => CliError::Internal(e.into()),
    })?;
    println!("rho = {:.12} +- {:.3e}", est.value, est.error_budget);
    run.write_json("rotation.json", &est)?;
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LyapConfig {
    pub cocycle: CocycleConfig,
    #[serde(default = "default_lyap_n")]
    pub n: usize,
    #[serde(default = "default_lyap_samples")]
    pub phase_samples: usize,
}

fn default_lyap_n() -> usize {
    100_000
}
fn default_lyap_samples() -> usize {
    8
}

pub fn lyapunov(raw: &RawConfig, run: &mut Run) -> Result<LyapConfig, CliError> {
    let cfg: LyapConfig = raw.typed()?;
    if cfg.n == 0 || cfg.phase_samples == 0 {
        return Err(CliError::Config("n and phase_samples must be positive".into()));
    }
    let c = cfg.cocycle.build()?;
    let l = lyapunov_estimate(&c, cfg.n, cfg.phase_samples);
    println!("L = {l:.12}");
    run.write_json("lyapunov.json", &serde_json::json!({ "lyapunov": l, "n": cfg.n, "phase_samples": cfg.phase_samples }))?;
    Ok(cfg)
}

// homsolve

/// One Fourier coefficient `re + i im` at `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormsConfig {
    pub r: f64,
    pub s: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig { r: 0.1, s: 0.1, sigma: 0.02, delta: 0.02 }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HomConfig {
    pub alpha: AlphaSpec,
    pub rho: f64,
    /// `None` uses `[ln(1/eta~)/(2 pi sigma)] + 1`.
    #[serde(default)]
    pub k_trunc: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub norms: NormsConfig,
    /// Real `g(phi_1)`.
    #[serde(default)]
    pub g: Vec<PotentialTerm>,
    pub f: Vec<CoefTerm>,
}

#[derive(Serialize)]
struct CoefRow {
    k: String,
    re: f64,
    im: f64,
}

pub fn homsolve(raw: &RawConfig, run: &mut Run) -> Result<HomConfig, CliError> {
    let cfg: HomConfig = raw.typed()?;
    let alpha = cfg.alpha.resolve().map_err(spectrum_err)?.alpha;
    let d = alpha.len();
    let g = Potential { coeffs: cfg.g.clone() }.to_poly(d).map_err(spectrum_err)?;
    if let Some(t) = cfg.f.iter().find(|t| t.k.len() != d) {
        return Err(CliError::Config(format!("f mode {:?} does not match dimension {d}", t.k)));
    }
    let f = ScalarPoly::from_terms(d, RealityClass::General, cfg.f.iter().map(|t| (t.k.clone(), Complex64::new(t.re, t.im))));
    let n = cfg.norms;
    let norms = HomNorms { r: n.r, s: n.s, sigma: n.sigma, delta: n.delta };
    let eta_t = f.norm_cert(n.r, n.s);
    let k_trunc = cfg.k_trunc.unwrap_or_else(|| TwistedProblem::default_k(eta_t.max(f64::MIN_POSITIVE), n.sigma));
    let problem = TwistedProblem { alpha, rho: cfg.rho, g, f, k_trunc, norms, gamma: cfg.gamma, tau: cfg.tau };
    let sol = solve_twisted(&problem).map_err(|e| match e {
        HomError::HypothesisViolated(_) | HomError::DivisorUnderflow { .. } | HomError::IllConditioned { .. } => {
            CliError::Hypothesis(e.to_string())
        }
        HomError::InvalidArgument(m) => CliError::Config(m),
    })?;
    println!(
        "K = {k_trunc}: |h| = {:.3e}, residual = {:.3e}, truncated defect = {:.3e}",
        sol.h_norm_cert, sol.residual_norm_cert, sol.approx_defect
    );
    run.write_json(
        "solution.json",
        &serde_json::json!({
            "k_trunc": k_trunc,
            "h_norm_cert": sol.h_norm_cert,
            "residual_norm_cert": sol.residual_norm_cert,
            "approx_defect": sol.approx_defect,
            "layers": sol.layers,
            "bounds": sol.bound_report,
        }),
    )?;
    let rows: Vec<CoefRow> = sol
        .h
        .coeffs
        .iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| CoefRow { k: k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "), re: c.re, im: c.im })
        .collect();
    run.write_csv("h.csv", &rows)?;
    Ok(cfg)
}

// kam-run

/// `cos(2 pi <k,phi>)` and `sin` amplitudes of one matrix entry; `"11"`
/// also sets the `"22"` entry to its negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryTerm {
    pub entry: String,
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KamRunConfig {
    pub alpha: AlphaSpec,
    pub rho0: f64,
    /// Skip the orbit estimate of the rotation number.
    #[serde(default)]
    pub rho_f: Option<f64>,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default = "default_kam_steps")]
    pub max_steps: usize,
    /// Rescale `F` to this certified norm.
    #[serde(default)]
    pub normalize: Option<f64>,
    /// Schedule `eps_0`; defaults to the norm of `F`.
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default = "default_n_star")]
    pub n_star: Option<usize>,
    pub perturbation: Vec<EntryTerm>,
    #[serde(default)]
    pub options: KamOptions,
}

fn default_engine() -> Engine {
    Engine::Multi
}
fn default_kam_steps() -> usize {
    4
}
fn default_n_star() -> Option<usize> {
    Some(0)
}

fn build_perturbation(d: usize, terms: &[EntryTerm]) -> Result<MatPoly, CliError> {
    let zero = || ScalarPoly::zero(d, RealityClass::RealScalar);
    let (mut a, mut b, mut c) = (zero(), zero(), zero());
    for t in terms {
        if t.k.len() != d {
            return Err(CliError::Config(format!("perturbation mode {:?} does not match dimension {d}", t.k)));
        }
        let term = &ScalarPoly::cos_mode(d, t.k.clone(), t.cos) + &ScalarPoly::sin_mode(d, t.k.clone(), t.sin);
        let slot = match t.entry.as_str() {
            "11" => &mut a,
            "12" => &mut b,
            "21" => &mut c,
            other => return Err(CliError::Config(format!("perturbation entry `{other}` must be 11, 12 or 21"))),
        };
        *slot = (&*slot + &term).with_reality(RealityClass::RealScalar);
    }
    let neg = a.scale(Complex64::new(-1.0, 0.0));
    Ok(MatPoly::from_entries([[&a, &b], [&c, &neg]], RealityClass::Sl2Real))
}

fn kam_err(e: KamError) -> CliError {
    if e.is_hypothesis() {
        CliError::Hypothesis(e.to_string())
    } else {
        CliError::Internal(e.into())
    }
}

pub fn kam_run_cmd(raw: &RawConfig, run: &mut Run) -> Result<KamRunConfig, CliError> {
    let cfg: KamRunConfig = raw.typed()?;
    let freq = cfg.alpha.resolve().map_err(spectrum_err)?;
    let d = freq.alpha.len();
    let mut f = build_perturbation(d, &cfg.perturbation)?;
    if let Some(target) = cfg.normalize {
        let now = cfg.options.mat_norm(&f);
        if now == 0.0 {
            return Err(CliError::Config("cannot normalise a zero perturbation".into()));
        }
        f = f.scale(Complex64::new(target / now, 0.0)).with_reality(RealityClass::Sl2Real);
    }
    let eps0 = cfg.eps0.unwrap_or_else(|| cfg.options.mat_norm(&f));
    let schedule = match cfg.engine {
        Engine::Multi => EngineSchedule::Multi(
            KamScheduleMulti::new(MultiParams { eps0, dim: d, ..Default::default() }, &freq.cf).map_err(arith)?,
        ),
        Engine::Two => {
            if freq.pair.is_none() {
                return Err(CliError::Config("engine = \"two\" needs alpha.kind = \"omega\"".into()));
            }
            let params = TwoParams { eps0, n_star_override: cfg.n_star, ..Default::default() };
            EngineSchedule::Two(KamScheduleTwo::new(params, freq.q_tilde.clone(), freq.q_prime.clone()).map_err(arith)?)
        }
    };
    let problem = KamProblem { alpha: freq.alpha.clone(), rho0: cfg.rho0, f, frequency: freq.pair.clone(), rho_f: cfg.rho_f };
    let trace = kam_run(&problem, &schedule, &cfg.options, cfg.max_steps).map_err(kam_err)?;
    for (step, phi, g, fnorm, drift, status) in trace.summary_rows() {
        let drift = drift.map_or_else(|| "n/a".to_string(), |d| format!("{d:.3e}"));
        println!("step {step}: |Phi-I| = {phi:.3e}, |g| = {g:.3e}, |F| = {fnorm:.3e}, drift = {drift}, {status}");
    }
    println!("converged: {}", trace.converged);
    let files = trace.write_dir(&run.path("trace")).map_err(|e| CliError::Internal(e.into()))?;
    for p in files {
        run.record(p);
    }
    let pts: Vec<(f64, f64)> = trace.steps.iter().map(|s| (s.report.step as f64, s.f_norm)).collect();
    run.plot("f_norm", ["step", "f_norm"], &pts)?;
    Ok(cfg)
}

// spectrum-scan

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumCmdConfig {
    #[serde(flatten)]
    pub scan: ScanConfig,
    /// Number of equally spaced energies for the IDS cross-check; 0 skips it.
    #[serde(default)]
    pub ids_check: usize,
}

pub fn spectrum_scan(raw: &RawConfig, run: &mut Run) -> Result<SpectrumCmdConfig, CliError> {
    let cfg: SpectrumCmdConfig = raw.typed()?;
    let rep = scan(&cfg.scan).map_err(spectrum_err)?;
    println!(
        "{} energies in [{}, {}]: in Pi {:.4}, reduced {:.4}, bounded {:.4}",
        rep.rows.len(),
        rep.window[0],
        rep.window[1],
        rep.fraction_in_pi,
        rep.fraction_reduced,
        rep.fraction_bounded
    );
    for p in rep.write_dir(&run.dir).map_err(spectrum_err)? {
        run.record(p);
    }
    if cfg.ids_check > 0 {
        let [lo, hi] = rep.window;
        let n = cfg.ids_check;
        let energies: Vec<f64> =
            (0..n).map(|i| if n == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
        let ids = ids_relation_check(&cfg.scan, &energies).map_err(spectrum_err)?;
        println!("IDS check: max |1 - 2 rho - N_L| = {:.3e}, all within tolerance: {}", ids.max_diff, ids.all_agree);
        run.write_csv("ids.csv", &ids.rows)?;
    }
    let rho: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.energy, r.rho_est)).collect();
    run.plot("rho", ["energy", "rho"], &rho)?;
    let sup: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.energy, r.sup_norm_n)).collect();
    run.plot("sup_norm", ["energy", "sup_norm"], &sup)?;
    Ok(cfg)
}
