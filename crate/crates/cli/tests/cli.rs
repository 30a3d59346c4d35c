use std::path::Path;
use std::process::{Command, Output};

fn nhcyl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhcyl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const COARSE: &str = r#"{
  "scenario": "pendulum-cylinder",
  "epsilon_ladder": [0.1, 0.05],
  "solver": { "grid": { "nt": 8, "nq": 16, "np": 13 } },
  "certify": { "containment_seeds": 12, "sample_nq": 8, "sample_np": 9, "sample_extra": 10 },
  "seed": 3
}"#;

#[test]
fn invalid_ordering_is_a_config_error() {
    let o = nhcyl(&["check", "--epsilon", "0.25"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon < delta"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"epsilon_ladder": [0.05], "delta": 0.2, "alpha": 0.1}"#,
    );
    assert_eq!(code(&nhcyl(&["check", "--config", &cfg])), 3);
    let cfg = write_config(
        dir.path(),
        r#"{"epsilon_ladder": [0.05], "unknown_key": 1}"#,
    );
    assert_eq!(code(&nhcyl(&["check", "--config", &cfg])), 3);
    assert_eq!(code(&nhcyl(&["--stage", "nonsense"])), 3);
    assert_eq!(code(&nhcyl(&["check", "--scenario", "nope"])), 3);
}

#[test]
fn missing_upstream_artifact_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    let o = nhcyl(&[
        "certify",
        "--out",
        out.to_str().unwrap(),
        "--epsilon",
        "0.05",
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("solve.json"));
}

#[test]
fn average_prints_mode_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = nhcyl(&["average", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("divisor"));
    // 2π(1 − ω) for the (1, −1, ·) modes.
    assert!(s.contains("(1,-1,0)") && s.contains("2.399963e0"), "{s}");
    assert!(dir.path().join("averaging.json").exists());
}

#[test]
fn check_passes_on_builtin_scenarios() {
    for sc in ["pendulum-cylinder", "unperturbed"] {
        let dir = tempfile::tempdir().unwrap();
        let o = nhcyl(&[
            "check",
            "--scenario",
            sc,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn staged_run_matches_full_run_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), COARSE);
    let full = dir.path().join("full");
    let staged = dir.path().join("staged");
    let o = nhcyl(&["--config", &cfg, "--out", full.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for stage in ["check", "average", "solve", "certify", "sweep"] {
        let o = nhcyl(&[
            "--config",
            &cfg,
            "--out",
            staged.to_str().unwrap(),
            "--stage",
            stage,
        ]);
        assert_eq!(
            code(&o),
            0,
            "{stage}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
    let a = std::fs::read(full.join("summary.csv")).unwrap();
    let b = std::fs::read(staged.join("summary.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8_lossy(&a);
    assert!(text.starts_with(
        "epsilon,invariance_residual,xy_c0,c0_bound_rhs,eps_q2_c1,p2_c1,phi_dist,min_torsion,pass"
    ));
    assert_eq!(text.lines().count(), 3);

    // certify re-validates the stored graphs.
    let o = nhcyl(&["certify", "--config", &cfg, "--out", full.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = nhcyl(&["sweep", "--config", &cfg, "--out", full.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("remainder_order"));
    assert_eq!(std::fs::read(full.join("summary.csv")).unwrap(), a);
}

#[test]
fn certificate_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "epsilon_ladder": [0.1],
  "solver": { "grid": { "nt": 4, "nq": 8, "np": 9 } },
  "certify": { "containment_seeds": 4, "sample_nq": 4, "sample_np": 5, "sample_extra": 0 },
  "tolerances": { "min_torsion": 2.0 }
}"#,
    );
    let o = nhcyl(&[
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
