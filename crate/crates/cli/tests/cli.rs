use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn octabush(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octabush"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .map(|it| it.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect())
        .unwrap_or_default();
    dirs.sort();
    dirs
}

fn summary(out: &Path) -> Value {
    let dirs = run_dirs(out);
    let last = dirs.last().expect("a run directory");
    serde_json::from_str(&fs::read_to_string(last.join("summary.json")).unwrap()).unwrap()
}

fn names(v: &Value) -> Vec<&str> {
    v.as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect()
}

#[test]
fn modes_lists_patterns_and_stabilizers() {
    let tmp = TempDir::new().unwrap();
    let text = octabush(&["modes"], tmp.path());
    assert!(text.status.success());
    let stdout = String::from_utf8(text.stdout).unwrap();
    assert!(stdout.contains("1/sqrt(6) x [(0,0,-1) (-1,0,0) (0,-1,0) (1,0,0) (0,1,0) (0,0,1)]"));
    assert!(stdout.contains("1/sqrt(12) x [(0,0,-2) (0,0,1) (0,0,1) (0,0,1) (0,0,1) (0,0,-2)]"));

    let json = octabush(&["modes", "--json"], tmp.path());
    let rows: Value = serde_json::from_slice(&json.stdout).unwrap();
    let orders: Vec<u64> = rows.as_array().unwrap().iter().map(|r| r["stabilizer_order"].as_u64().unwrap()).collect();
    let domains: Vec<u64> = rows.as_array().unwrap().iter().map(|r| r["domain_count"].as_u64().unwrap()).collect();
    assert_eq!(orders, [48, 16, 8]);
    assert_eq!(domains, [1, 3, 3]);
    assert_eq!(names(&rows[2]["domain_axes"]), ["z", "x", "y"]);
    assert!(run_dirs(tmp.path()).is_empty());
}

#[test]
fn root_excitation_involves_the_secondary() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["simulate", "--model", "pes-d4h", "--excite", "b=0.3"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(names(&s["secondary_excited"]), ["a"]);
    assert!(s["max_abs_a_full"].as_f64().unwrap() > 1e-3);
}

#[test]
fn secondary_excitation_leaves_root_at_zero() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["simulate", "--model", "pes-d4h", "--excite", "a=0.2"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(names(&s["identically_zero"]), ["b"]);
    assert_eq!(s["max_abs_b_full"].as_f64(), Some(0.0));
}

#[test]
fn breathing_bush_closes_in_the_cluster() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["simulate", "--model", "lj", "--excite", "phi1=0.1", "--steps", "3000"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(tmp.path());
    assert!(s["closure_residual_full"].as_f64().unwrap() < 1e-8);
    let dir = &run_dirs(tmp.path())[0];
    for f in ["config.toml", "trajectory.csv", "modes.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let header = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let row = header.lines().nth(1).unwrap();
    assert_eq!(row.split(',').next().unwrap(), "0.0000000000000000e0");
}

#[test]
fn exit_status_follows_checks_and_config() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(
        &["simulate", "--model", "lj", "--excite", "phi1=0.05", "--excite", "phi2=0.05", "--steps", "500"],
        tmp.path(),
    );
    assert!(o.status.success());
    // The polar bush leaks into the uniform ligand shift when the centre interacts.
    let o = octabush(&["simulate", "--model", "lj", "--excite", "phi3=0.05", "--steps", "500"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(summary(tmp.path())["pass"], Value::Bool(false));
    let o = octabush(&["simulate", "--config", "/nonexistent.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn abort_is_recorded_and_nonzero() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["simulate", "--model", "lj", "--excite", "phi1=-2.5", "--steps", "200"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let s = summary(tmp.path());
    assert_eq!(s["aborted"], Value::Bool(true));
    assert!(s["abort"]["reason"].is_string(), "{}", s["abort"]);
    assert!(s["samples"].as_u64().unwrap() < 201);
    assert_eq!(s["pass"], Value::Bool(false));
}

#[test]
fn identical_config_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "model = \"morse\"\nworkers = 3\n[excite]\nphi2 = 0.02\n[integrator]\nsteps = 400\nstride = 7\n").unwrap();
    let out = tmp.path().join("out");
    for _ in 0..2 {
        let o = octabush(&["simulate", "--config", cfg.to_str().unwrap()], &out);
        assert!(o.status.success());
    }
    for _ in 0..2 {
        let o = octabush(&["sweep", "nu", "--config", cfg.to_str().unwrap(), "--model", "pes-d4h", "--range", "0.05:0.2:4"], &out);
        assert!(o.status.success());
    }
    let dirs = run_dirs(&out);
    assert_eq!(dirs.len(), 4);
    for pair in dirs.chunks(2) {
        let files: Vec<_> = fs::read_dir(&pair[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert!(files.len() >= 3);
        for f in files {
            let a = fs::read(pair[0].join(&f)).unwrap();
            let b = fs::read(pair[1].join(&f)).unwrap();
            assert!(a == b, "{f:?} differs");
        }
    }
}

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "model = \"pes-c4v\"\n[excite]\nc = 0.1\n[integrator]\nsteps = 50\ndt = 0.02\n").unwrap();
    let o = octabush(&["simulate", "--config", cfg.to_str().unwrap(), "--steps", "20"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(s["samples"], 21);
    assert_eq!(s["dt_full"].as_f64(), Some(0.02));
    let snap = fs::read_to_string(run_dirs(tmp.path())[0].join("config.toml")).unwrap();
    assert!(snap.contains("model = \"pes-c4v\""));
    assert!(snap.contains("steps = 20"));
}

#[test]
fn invalid_config_is_rejected_by_key_before_running() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("model = \"lj\"\n[integrator]\ndt = -1.0\n", "integrator.dt"),
        ("model = \"lj\"\n[integrator]\nsteps = 0\n", "integrator.steps"),
        ("model = \"lj\"\n[integrator]\ndtt = 0.1\n", "integrator.dtt"),
        ("model = \"octahedron\"\n", "model"),
        ("model = \"pes-file\"\n", "pes.file"),
        ("[excite]\nphi7 = 0.1\n", "excite.phi7"),
        ("[excite]\nc = 0.1\n", "excite.c"),
        ("workers = 0\n", "workers"),
    ];
    for (text, key) in cases {
        let cfg = tmp.path().join("bad.toml");
        fs::write(&cfg, text).unwrap();
        let out = tmp.path().join("out");
        let o = octabush(&["simulate", "--config", cfg.to_str().unwrap()], &out);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert!(err.contains(&format!("`{key}`")), "{text}: {err}");
        assert!(run_dirs(&out).is_empty(), "{text}");
    }
}

#[test]
fn cluster_fit_passes_the_audit() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["fit", "--model", "lj", "--vars", "ab", "--degree", "4"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert!(s["forbidden_relative_full"].as_f64().unwrap() < 1e-6);
    let dir = &run_dirs(tmp.path())[0];
    let samples = fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("a,b,energy"));
    assert_eq!(samples.lines().count(), 1 + 21 * 21);
}

#[test]
fn polynomial_fit_recovers_the_source_and_compares() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["fit", "--model", "pes-d4h", "--vars", "ab", "--degree", "4", "--compare", "eq11"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    let checks = s["checks"].as_array().unwrap();
    let recovery = checks.iter().find(|c| c["name"] == "max coefficient recovery error").unwrap();
    assert!(recovery["measured_full"].as_f64().unwrap() < 1e-10);
    let table = fs::read_to_string(run_dirs(tmp.path())[0].join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 9);
    assert!(table.lines().any(|l| l.starts_with("a^2b^2,")));
}

#[test]
fn polynomial_file_model_roundtrips() {
    let tmp = TempDir::new().unwrap();
    let pes = tmp.path().join("pes.json");
    fs::write(&pes, octabush::potentials::reference_c4v().to_json().unwrap()).unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("model = \"pes-file\"\n[pes]\nfile = {:?}\n[fit]\nvars = \"abc\"\n", pes.to_str().unwrap())).unwrap();
    let out = tmp.path().join("out");
    let o = octabush(&["fit", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&out)["pass"], Value::Bool(true));
}

#[test]
fn nu_sweep_softens_and_meets_the_harmonic_limit() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["sweep", "nu", "--model", "pes-d4h", "--mode", "a", "--range", "0.05:0.4:15", "--workers", "4"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    assert_eq!(s["soft_nonlinearity"], Value::Bool(true));

    let tmp = TempDir::new().unwrap();
    let o = octabush(&["sweep", "nu", "--model", "pes-d4h", "--mode", "a", "--range", "0.001:0.01:3"], tmp.path());
    assert!(o.status.success());
    let nu = summary(tmp.path())["smallest_amplitude_frequency_full"].as_f64().unwrap();
    let expected = 0.38538f64.sqrt() / (2.0 * std::f64::consts::PI);
    assert!((nu - expected).abs() / expected < 0.01);
    let curve = fs::read_to_string(run_dirs(tmp.path())[0].join("nu_of_a.csv")).unwrap();
    assert!(curve.starts_with('#'));
}

#[test]
fn transfer_sweep_is_quadratic_at_small_mu() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["sweep", "transfer", "--model", "pes-d4h", "--range", "0.05:0.35:7"], tmp.path());
    assert!(o.status.success());
    let s = summary(tmp.path());
    let e = s["small_mu_exponent_full"].as_f64().unwrap();
    assert!((e - 2.0).abs() <= 0.1, "{e}");
    assert_eq!(s["blow_ups"], 0);
}

#[test]
fn transfer_sweep_needs_a_polynomial_model() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["sweep", "transfer", "--model", "lj"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_reports_and_catches_a_planted_defect() {
    let tmp = TempDir::new().unwrap();
    let o = octabush(&["check", "--criteria", "1,3", "--json"], tmp.path());
    assert!(o.status.success());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    let ratio = report["criteria"][1]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["target"] == "1.2")
        .expect("ratio check");
    assert!((ratio["measured"].as_f64().unwrap() - 1.1984).abs() < 1e-4);

    let o = octabush(&["check", "--criteria", "1", "--perturb", "1,2,0:0.01", "--json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["criteria"][0]["pass"], Value::Bool(false));
}
