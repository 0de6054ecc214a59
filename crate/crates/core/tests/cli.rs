use std::path::Path;
use std::process::{Command, Output};

use qpe_bounds::simulate;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpe-bounds")).args(args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{
    "spectrum": {"family": "uniform", "modes": 3},
    "alphas": [0.4, 0.8],
    "protocols": [
        {"kind": "qft", "max_times": [63], "n_shots": 200},
        {"kind": "csqpe", "max_times": [64], "n_times": 20, "n_shots": 10}
    ],
    "trials": 4,
    "seed": 5
}"#;

#[test]
fn bounds_diag_gi_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for cmd in ["bounds", "diag", "gi"] {
        let out = cli(&[cmd, "--config", &cfg, "--seed", "9"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with("# qpe-bounds v0.1.0 seed=9\n"), "{cmd}");
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5, "{cmd}");
    }
}

#[test]
fn bench_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_path = dir.path().join("bench.csv");
    let out = cli(&["bench", "--config", &cfg, "--out", out_path.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("family,modes,alpha,c0,protocol,T"));
    assert!(header.ends_with("ratio_r,t_total,g0,gamma,f0_max,diag_ratio,status"));
    assert!(text.lines().skip(2).all(|l| l.ends_with(",ok")));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"spectrum": {"family": "uniform", "modes": 3}, "alphas": [], "protocols": []}"#);
    assert_eq!(cli(&["bounds", "--config", &bad]).status.code(), Some(1));
    assert_eq!(cli(&["bench", "--config", "/nonexistent.json"]).status.code(), Some(1));
    let trials = write_config(dir.path(), &SMALL.replace("\"trials\": 4", "\"trials\": 1"));
    assert_eq!(cli(&["bench", "--config", &trials]).status.code(), Some(1));
}

#[test]
fn partial_failure_exits_two_and_keeps_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
        "spectrum": {"family": "uniform", "modes": 3},
        "alphas": [0.5],
        "protocols": [
            {"kind": "rpe", "max_times": [16], "n_shots": 4},
            {"kind": "qft", "max_times": [62], "n_shots": 4},
            {"kind": "csqpe", "max_times": [32], "n_times": 10, "n_shots": 10}
        ],
        "trials": 3
    }"#,
    );
    let out = cli(&["bench", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(!rows[0].ends_with(",ok"));
    assert!(!rows[1].ends_with(",ok"));
    assert!(rows[2].ends_with(",ok"));
}

#[test]
fn sample_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("samples");
    let out = cli(&["sample", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let files: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(files.len(), 4);

    let qft = files.iter().find(|f| f.contains("samples_qft_a0.4")).unwrap();
    let parsed = simulate::read_qft_csv(std::io::BufReader::new(std::fs::File::open(qft).unwrap())).unwrap();
    assert_eq!(parsed.len(), 4);
    assert!(parsed.iter().all(|(_, s)| s.outcomes.len() == 200 && s.n == 6));

    let ht = files.iter().find(|f| f.contains("samples_csqpe_a0.4")).unwrap();
    let est = cli(&["estimate", "--input", ht, "--kind", "csqpe", "--max-time", "64", "--sparsity", "3"]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let text = String::from_utf8(est.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));

    let est = cli(&["estimate", "--input", qft, "--kind", "qft"]);
    assert!(est.status.success());
}
