use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qpkam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpkam")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("qpkam-cli-{name}-{}", std::process::id()));
    std::fs::remove_dir_all(&d).ok();
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SCAN: &str = r#"
lambda = 0.0
grid = 9
[alpha]
kind = "quadratic"
quotients = [[1], [2]]
[lipschitz]
spot_checks = 0
"#;

#[test]
fn freq_construct_first_step() {
    let d = scratch("freq");
    let out = d.join("run");
    let o = qpkam(&["freq-construct", "--chi", "5", "--steps", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(out.join("steps.csv")).unwrap().records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][3], "2");
    assert_eq!(&rows[0][4], "37");
    assert!(rows.iter().all(|r| (5..9).all(|i| &r[i] == "true")));
    let m = json(out.join("manifest.json"));
    assert_eq!(m["command"], "freq-construct");
    assert_eq!(m["snapshot"]["chi"], 5.0);
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn rotnum_of_constant_rotation() {
    let d = scratch("rot");
    let cfg = write(&d, "rot.toml", "[cocycle]\nkind = \"rotation\"\nrho = 0.3\n");
    let out = d.join("run");
    let o = qpkam(&["rotnum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(out.join("rotation.json"));
    let (v, b) = (r["value"].as_f64().unwrap(), r["error_budget"].as_f64().unwrap());
    assert!((v - 0.3).abs() <= b && b <= 2e-6, "{v} +- {b}");
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn free_scan_is_fully_bounded() {
    let d = scratch("scan");
    let cfg = write(&d, "scan.toml", SCAN);
    let out = d.join("run");
    let o = qpkam(&["spectrum-scan", "--config", &cfg, "--out", out.to_str().unwrap(), "--emit-plot-data"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(out.join("summary.json"))["fraction_bounded"], 1.0);
    assert!(out.join("plot_rho.dat").exists());
    let rep = qpkam(&["report", "--run", out.to_str().unwrap()]);
    assert!(rep.status.success());
    assert!(stdout(&rep).contains("fraction_bounded: 1.0"));
    std::fs::remove_file(out.join("scan.csv")).unwrap();
    assert_eq!(qpkam(&["report", "--run", out.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn serial_replay_is_byte_identical() {
    let d = scratch("replay");
    let cfg = write(&d, "scan.toml", SCAN);
    let (a, b) = (d.join("par"), d.join("ser"));
    let o1 = qpkam(&["spectrum-scan", "--config", &cfg, "--set", "lambda=0.05", "--set", "grid=3", "--seed", "7", "--out", a.to_str().unwrap()]);
    let o2 = qpkam(&["spectrum-scan", "--config", &cfg, "--set", "lambda=0.05", "--set", "grid=3", "--seed", "7", "--serial", "--out", b.to_str().unwrap()]);
    assert!(o1.status.success() && o2.status.success(), "{}{}", stderr(&o1), stderr(&o2));
    assert_eq!(std::fs::read(a.join("scan.csv")).unwrap(), std::fs::read(b.join("scan.csv")).unwrap());
    assert_eq!(json(b.join("manifest.json"))["serial"], true);
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn overrides_reach_the_snapshot() {
    let d = scratch("snap");
    let cfg = write(&d, "scan.toml", SCAN);
    let out = d.join("run");
    let o = qpkam(&["spectrum-scan", "--config", &cfg, "--set", "grid=3", "--set", "diophantine.gamma=0.02", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snap: toml::Table = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap().parse().unwrap();
    assert_eq!(snap["grid"].as_integer(), Some(3));
    assert_eq!(snap["diophantine"]["gamma"].as_float(), Some(0.02));
    // defaults are spelled out
    assert!(snap["rotation"]["n"].as_integer().is_some());
    let m = json(out.join("manifest.json"));
    assert_eq!(m["overrides"].as_array().unwrap().len(), 2);
    // the snapshot alone reproduces the run
    let again = d.join("again");
    let snap_path = out.join("config.resolved.toml");
    let o = qpkam(&["spectrum-scan", "--config", snap_path.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("scan.csv")).unwrap(), std::fs::read(again.join("scan.csv")).unwrap());
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn theory_mode_violation_exits_with_two() {
    let d = scratch("kam");
    let cfg = write(
        &d,
        "kam.toml",
        r#"
rho0 = 0.2
normalize = 0.5
[alpha]
kind = "quadratic"
quotients = [[1], [2]]
[[perturbation]]
entry = "12"
k = [1, 0]
cos = 1.0
[options]
mode = "theory"
"#,
    );
    let out = d.join("run");
    let o = qpkam(&["kam-run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("hypothesis"));
    assert!(out.join("manifest.json").exists());

    let ok = qpkam(&["kam-run", "--config", &cfg, "--set", "normalize=1e-3", "--set", "options.mode=practical", "--out", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("converged: true"));
    assert!(out.join("trace/summary.csv").exists());
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn config_errors_point_at_the_problem() {
    let d = scratch("err");
    let cfg = write(&d, "bad.toml", "grid = \"many\"\n[alpha]\nkind = \"quadratic\"\nquotients = [[1]]\n");
    let o = qpkam(&["spectrum-scan", "--config", &cfg, "--out", d.join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 1") && err.contains("grid"), "{err}");

    let o = qpkam(&["spectrum-scan", "--config", &cfg, "--set", "grid", "--out", d.join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("key=value"));

    let o = qpkam(&["rotnum", "--config", d.join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
    std::fs::remove_dir_all(d).ok();
}

#[test]
fn arith_and_homsolve_commands_run() {
    let d = scratch("misc");
    let a = write(&d, "a.toml", "convergents = 10\n[alpha]\nkind = \"quadratic\"\nquotients = [[1], [1, 2]]\n");
    let o = qpkam(&["arith-verify", "--config", &a, "--out", d.join("a").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(d.join("a/arith.json"))["pass"], true);

    let h = write(
        &d,
        "h.toml",
        r#"
rho = 0.2
k_trunc = 6
gamma = 0.05
tau = 2.0
norms = { r = 0.2, s = 0.2, sigma = 0.05, delta = 0.05 }
alpha = { kind = "quadratic", quotients = [[1], [2]] }
g = [{ k = [1, 0], cos = 1e-7 }]
f = [{ k = [1, 1], re = 1e-5 }, { k = [-1, -1], re = 1e-5 }]
"#,
    );
    let o = qpkam(&["homsolve", "--config", &h, "--out", d.join("h").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json(d.join("h/solution.json"))["approx_defect"].as_f64().unwrap() < 1e-15);
    let o = qpkam(&["homsolve", "--config", &h, "--set", "k_trunc=60", "--out", d.join("h").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(d).ok();
}
