use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn tefield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tefield"))
        .args(args)
        .env("TEFIELD_THREADS", "2")
        .output()
        .unwrap()
}

fn run_in(dir: &TempDir, sub: &str, model: &str, extra: &[&str]) -> Output {
    let model = fixture(model);
    let mut args = vec![
        sub,
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    tefield(&args)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_passes_on_ising() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "verify", "ising_1d.toml", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn verify_passes_on_json_model_and_widom_rowlinson() {
    for model in ["ising_1d.json", "widom_rowlinson.toml", "consistent_onepoint.toml"] {
        let dir = TempDir::new().unwrap();
        let o = run_in(&dir, "verify", model, &[]);
        assert_eq!(o.status.code(), Some(0), "{model}: {}", stderr(&o));
    }
}

#[test]
fn verify_flags_corrupted_energy() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "verify", "corrupted_onepoint.toml", &[]);
    assert_eq!(o.status.code(), Some(1));
    let report = json(dir.path().join("verify.json"));
    assert_eq!(report["passed"], false);
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failing.contains(&"onepoint_consistency"), "{failing:?}");
    let worst = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "onepoint_consistency")
        .unwrap()["worst_violation"]
        .as_f64()
        .unwrap();
    assert!((worst - 0.8).abs() < 1e-9, "{worst}");
    assert!(stderr(&o).contains("FAIL"));
}

#[test]
fn verify_kolmogorov_on_fdd_models() {
    for model in ["mixture.toml", "exchangeable.toml", "markov_pair.toml"] {
        let dir = TempDir::new().unwrap();
        let o = run_in(&dir, "verify", model, &[]);
        assert_eq!(o.status.code(), Some(0), "{model}: {}", stderr(&o));
    }
}

#[test]
fn usage_and_input_errors_exit_2() {
    let o = tefield(&["verify", "--model", "does-not-exist.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does-not-exist.toml"));

    assert_eq!(tefield(&["verify"]).status.code(), Some(2));
    assert_eq!(tefield(&["frobnicate"]).status.code(), Some(2));

    for bad in ["malformed.toml", "widom_rowlinson_r0.toml", "oversized_term.toml"] {
        let dir = TempDir::new().unwrap();
        let o = run_in(&dir, "verify", bad, &[]);
        assert_eq!(o.status.code(), Some(2), "{bad}: {}", stderr(&o));
    }
}

#[test]
fn reconstruct_matches_hamiltonian() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "reconstruct", "ising_2d.toml", &["--shape", "2x1", "--all-orders"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("reconstruct.json"));
    assert_eq!(report["reference"], "hamiltonian");
    assert!(report["residual"].as_f64().unwrap() < 1e-12);
    assert!(report["order_spread"].as_f64().unwrap() < 1e-12);
    let total: f64 = report["table"]["probs"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn reconstruct_refuses_inconsistent_energy() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "reconstruct", "corrupted_onepoint.toml", &["--shape", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn uniqueness_reports_coefficients() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "uniqueness", "ising_free.toml", &[]);
    assert_eq!(o.status.code(), Some(0));
    let report = json(dir.path().join("uniqueness.json"));
    assert_eq!(report["coefficient"].as_f64(), Some(0.0));
    assert_eq!(report["satisfied"], true);

    let o = run_in(&dir, "uniqueness", "ising_1d.toml", &["--method", "delta"]);
    assert_eq!(o.status.code(), Some(0));
    let report = json(dir.path().join("uniqueness.json"));
    assert!((report["coefficient"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(report["satisfied"], false);
}

#[test]
fn canonical_mixture_oscillates() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        &dir,
        "canonical",
        "mixture.toml",
        &[
            "--boundary",
            "blocks:10",
            "--schedule",
            "ball:1,11,111,1111,11111,111111",
            "--blowup",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("verdict.json"));
    assert_eq!(report["verdict"]["kind"], "oscillating");
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("n,size,value\n"));
}

#[test]
fn canonical_exchangeable_converges_under_period_two() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        &dir,
        "canonical",
        "exchangeable.toml",
        &["--boundary", "period:2", "--schedule", "ball:100..120:2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("verdict.json"));
    assert_eq!(report["verdict"]["kind"], "converged");
    assert!(report["final_value"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn canonical_rejects_energy_models() {
    let dir = TempDir::new().unwrap();
    let o = run_in(&dir, "canonical", "ising_1d.toml", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_is_reproducible() {
    let model = fixture("ising_1d.toml");
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let o = tefield(&[
            "sample",
            "--model",
            model.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--sweeps",
            "500",
            "--burn-in",
            "50",
            "--seed",
            "7",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read(&out).unwrap());
        let csv = dir.path().join(name.replace(".json", ".magnetization.csv"));
        assert!(csv.exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let stats: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(stats["recorded_sweeps"], 450);
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "method = \"delta\"\n").unwrap();
    let o = run_in(
        &dir,
        "uniqueness",
        "ising_1d.toml",
        &["--method", "dobrushin", "--config", config.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("uniqueness.json"));
    assert_eq!(report["method"], "delta");
}
