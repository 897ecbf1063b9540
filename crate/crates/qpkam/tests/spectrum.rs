use std::f64::consts::PI;

use proptest::prelude::*;
use qpkam::fourier::Mat2;
use qpkam::spectrum::{
    free_conjugacy, free_rho, ids_relation_check, lipschitz_check, monotonicity_violations, rho_curve, scan,
    AlphaSpec, KamStatus, ScanConfig, SpectrumError,
};

fn golden_sqrt2(lambda: f64) -> ScanConfig {
    let mut cfg = ScanConfig::new(AlphaSpec::Quadratic { quotients: vec![vec![1], vec![2]] }, lambda);
    cfg.lipschitz.spot_checks = 0;
    cfg
}

#[test]
fn free_curve_hits_closed_form() {
    let mut cfg = golden_sqrt2(0.0);
    let s = 2f64.sqrt();
    cfg.window = Some([-s, s]);
    cfg.grid = 3;
    let curve = rho_curve(&cfg).unwrap();
    for ((e, r), want) in curve.iter().zip([0.375, 0.25, 0.125]) {
        assert!((r.value - want).abs() <= r.error_budget, "E = {e}: {} vs {want}", r.value);
    }
    assert!(monotonicity_violations(&curve).is_empty());
}

#[test]
fn perturbed_curve_is_monotone_and_close_to_free() {
    let mut cfg = golden_sqrt2(0.05);
    cfg.grid = 7;
    let curve = rho_curve(&cfg).unwrap();
    assert!(monotonicity_violations(&curve).is_empty());
    for (e, r) in &curve {
        // |rho - rho_0| is at most of order (lambda |v|_0)^{1/2}
        assert!((r.value - free_rho(*e)).abs() <= 2.0 * (0.05f64 * 2.0).sqrt(), "E = {e}");
    }
}

#[test]
fn free_sweep_is_bounded_and_trivially_reduced() {
    let mut cfg = golden_sqrt2(0.0);
    cfg.window = Some([-1.9, 1.9]);
    cfg.grid = 11;
    let rep = scan(&cfg).unwrap();
    assert_eq!(rep.fraction_bounded, 1.0);
    for r in &rep.rows {
        if r.in_pi {
            assert_eq!(r.kam_status, KamStatus::Reduced, "E = {}", r.energy);
            assert_eq!(r.kam_steps, 0);
            assert_eq!(r.final_f_norm, Some(0.0));
        } else {
            assert_eq!(r.kam_status, KamStatus::Skipped);
        }
    }
    assert_eq!(rep.fraction_reduced, rep.fraction_in_pi);
    assert!(rep.bound_violations().is_empty());
}

#[test]
fn resonant_energy_is_filtered_out() {
    let cfg0 = golden_sqrt2(0.0);
    let alpha1 = cfg0.alpha.resolve().unwrap().alpha[0];
    // 2 rho + alpha_1 = 1
    let e = 2.0 * (PI * (1.0 - alpha1)).cos();
    let mut cfg = cfg0;
    cfg.window = Some([e - 0.1, e + 0.1]);
    cfg.grid = 3;
    let rep = scan(&cfg).unwrap();
    let mid = &rep.rows[1];
    assert!((mid.energy - e).abs() < 1e-12);
    assert!(!mid.in_pi);
    assert_eq!(mid.kam_status, KamStatus::Skipped);
    assert!(mid.final_f_norm.is_none());
}

#[test]
fn diophantine_fraction_grows_as_gamma_shrinks() {
    let mut fractions = Vec::new();
    for gamma in [0.2, 0.05, 0.005] {
        let mut cfg = golden_sqrt2(0.0);
        cfg.grid = 41;
        cfg.rotation.n = 2000;
        cfg.bounds.n = 200;
        cfg.diophantine.gamma = gamma;
        fractions.push(scan(&cfg).unwrap().fraction_in_pi);
    }
    assert!(fractions.windows(2).all(|w| w[0] <= w[1]), "{fractions:?}");
    assert!(fractions[0] < fractions[2]);
}

#[test]
fn free_slope_matches_arccos_derivative() {
    let mut cfg = golden_sqrt2(0.0);
    cfg.grid = 5;
    let rep = scan(&cfg).unwrap();
    let e = 0.5;
    let l = lipschitz_check(&rep, e, 0.04).unwrap();
    let exact = 1.0 / (2.0 * PI * (4.0 - e * e).sqrt());
    for lvl in &l.levels {
        for s in [lvl.slope_minus, lvl.slope_plus] {
            assert!((s - exact).abs() <= 0.02 * exact + lvl.budget, "h = {}: {s} vs {exact}", lvl.h);
        }
    }
    assert!(l.stable);
    let edge = rep.window[1];
    assert!(matches!(lipschitz_check(&rep, edge, 0.01), Err(SpectrumError::OutOfWindow { .. })));
}

#[test]
fn perturbed_sweep_reduces_and_stays_bounded() {
    let mut cfg = golden_sqrt2(0.05);
    cfg.grid = 3;
    cfg.lipschitz.spot_checks = 1;
    let rep = scan(&cfg).unwrap();
    assert!(rep.fraction_reduced > 0.0);
    assert!(rep.fraction_reduced <= rep.fraction_in_pi);
    for r in rep.rows.iter().filter(|r| r.kam_status == KamStatus::Reduced) {
        assert!(r.audit.unwrap() < 1e-8);
        assert!(r.final_f_norm.unwrap() <= 1e-12);
        assert!(r.sup_norm_n <= cfg.bounds.threshold);
    }
    assert!(rep.bound_violations().is_empty());
    assert!(rep.rows.iter().any(|r| r.lipschitz_local.is_some_and(|c| c.is_finite() && c > 0.0)));

    let dir = std::env::temp_dir().join(format!("qpkam-scan-{}", std::process::id()));
    let files = rep.write_dir(&dir).unwrap();
    assert!(files.iter().all(|p| p.exists()));
    let rows = csv::Reader::from_path(dir.join("scan.csv")).unwrap().records().count();
    assert_eq!(rows, 3);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn free_ids_matches_counting() {
    let cfg = golden_sqrt2(0.0);
    let energies = [-2.5, -1.5, -0.3, 0.0, 0.8, 1.7, 2.5];
    let rep = ids_relation_check(&cfg, &energies).unwrap();
    for r in &rep.rows {
        let closed = if r.energy.abs() < 2.0 { 1.0 - (r.energy / 2.0).acos() / PI } else if r.energy < 0.0 { 0.0 } else { 1.0 };
        assert!((r.ids_count - closed).abs() < 0.01, "E = {}", r.energy);
        assert!(r.agree, "E = {}: diff {}", r.energy, r.diff);
    }
    assert_eq!(rep.rows[0].ids_count, 0.0);
    assert!((rep.rows[0].rho - 0.5).abs() <= rep.rows[0].error_budget);
    assert_eq!(rep.rows[6].ids_count, 1.0);
    assert!(rep.rows[6].rho.abs() <= rep.rows[6].error_budget);
}

#[test]
fn config_rejects_bad_input_and_round_trips() {
    let mut cfg = golden_sqrt2(0.0);
    cfg.grid = 1;
    assert!(matches!(scan(&cfg), Err(SpectrumError::Config(_))));
    let cfg = golden_sqrt2(0.05);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ScanConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    let bad = ScanConfig::new(AlphaSpec::Explicit { values: vec![1.5] }, 0.0);
    assert!(matches!(scan(&bad), Err(SpectrumError::Config(_))));
}

proptest! {
    #[test]
    fn free_conjugacy_is_exact(e in -1.999f64..1.999) {
        let c = free_conjugacy(e).unwrap();
        let lhs = c.p * Mat2::new(e, -1.0, 1.0, 0.0) * c.p.inverse();
        prop_assert!((lhs - Mat2::rot(c.rho0)).norm() < 1e-9);
        prop_assert!((c.rho0 - free_rho(e)).abs() < 1e-15);
    }
}
