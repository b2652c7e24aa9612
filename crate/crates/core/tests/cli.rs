use std::process::Command;

fn hotspots(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hotspots")).args(args).output().expect("binary runs")
}

#[test]
fn eig_writes_a_run_directory_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eig");
    let o = hotspots(&["eig", "--preset", "rectangle", "--nx", "32", "--ny", "16", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS spectral gap"), "{stdout}");
    let csv = std::fs::read_to_string(out.join("eigenpair.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 33 * 17);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let lambda = manifest["results"]["eigen"]["lambda1"].as_f64().unwrap();
    assert!((lambda - 1.0).abs() < 1e-2, "{lambda}");
}

#[test]
fn coarse_grid_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotspots(&["eig", "--preset", "rectangle", "--nx", "3", "--ny", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning:"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(hotspots(&["eig", "--preset", "torus", "--out", out]).status.code(), Some(1));
    assert_eq!(hotspots(&["eig", "--nx", "many"]).status.code(), Some(1));
    assert_eq!(hotspots(&["frobnicate"]).status.code(), Some(1));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nnz = 4\n").unwrap();
    let o = hotspots(&["eig", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nz"));
}

#[test]
fn help_lists_config_keys() {
    let o = hotspots(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for word in ["eig", "pipeline", "verify", "[barrel]", "d_list"] {
        assert!(text.contains(word), "{word}");
    }
}
