use std::path::Path;
use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secrecy-bench"))
}

fn run(args: &[&str]) -> std::process::Output {
    bench().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sweep_writes_identical_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "sweep",
            "--k",
            "1",
            "--trials",
            "3",
            "--p-db-grid",
            "0:10:5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = json(&dir.path().join("a.csv.manifest.json"));
    assert_eq!(manifest["config"]["trials"], 3);
    assert_eq!(manifest["channel_digests"].as_array().unwrap().len(), 3);
    assert!(manifest["solves"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["seconds"].is_number()));
    let digest = secrecy_bench::io::sha256_hex(&std::fs::read(&a).unwrap());
    assert_eq!(manifest["output"]["sha256"], digest.as_str());
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn sweep_gnuplot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pa.csv");
    let o = run(&[
        "sweep",
        "--mode",
        "pa",
        "--trials",
        "2",
        "--p-db-grid",
        "0,10",
        "--out",
        out.to_str().unwrap(),
        "--gnuplot",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let gp = std::fs::read_to_string(dir.path().join("pa.csv.gp")).unwrap();
    assert!(gp.contains("'pa.csv'"));
    assert!(gp.contains("title 'pa'") && gp.contains("title 'unconstrained'"));
    assert!(!run(&["sweep", "--gnuplot"]).status.success());
}

#[test]
fn secrecy_from_channel_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ch.json");
    std::fs::write(
        &file,
        r#"{"Hs": [[1.4142135623730951, 0]], "eavesdroppers": [[[1, 0]]], "sigma2": [1.0], "P": 10}"#,
    )
    .unwrap();
    for alg in ["alg1", "alg2", "miso"] {
        let o = run(&[
            "secrecy",
            "--algorithm",
            alg,
            "--bits",
            "--channels",
            file.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let rate = v["rate_nats"].as_f64().unwrap();
        assert!((rate - (21.0f64 / 11.0).ln()).abs() < 2e-3, "{alg}: {rate}");
        assert!((v["rate_bits"].as_f64().unwrap() - rate / std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn solve_pa_reports_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ch.json");
    std::fs::write(
        &file,
        r#"{"Hs": [[1, 0]], "eavesdroppers": [[[1, 0]]], "sigma2": [1.0], "P": 10, "gamma": [1.0]}"#,
    )
    .unwrap();
    let out = dir.path().join("pa.json");
    let o = run(&[
        "solve-pa",
        "--channels",
        file.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["capacity_nats"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-6);
    assert!(v["duality_gap"].as_f64().unwrap() <= 1e-6);
    assert!(dir.path().join("pa.json.manifest.json").exists());
}

#[test]
fn bounds_and_scan_run() {
    let o = run(&["bounds", "--k", "1", "--ne", "2", "--p-db", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (l, a, u) = (
        v["lower_bound"].as_f64().unwrap(),
        v["achievable_rate"].as_f64().unwrap(),
        v["upper_bound"].as_f64().unwrap(),
    );
    assert!(l <= a + 1e-6 && a <= u + v["eps_total"].as_f64().unwrap());

    let o = run(&["scan", "--k", "1", "--p-db", "5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("gamma1,F\n"));
    assert_eq!(text.lines().count(), 51);
    assert!(String::from_utf8_lossy(&o.stderr).contains("verdict: pass"));
}

#[test]
fn selftest_exit_status() {
    let o = run(&["selftest", "--instances", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["selftest", "--instances", "2", "--corrupt-gradient"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  grad_g"));
}

#[test]
fn bad_input_is_an_error() {
    assert!(!run(&["sweep", "--trials", "0"]).status.success());
    assert!(!run(&["sweep", "--mode", "scan"]).status.success());
    assert!(!run(&["secrecy", "--channels", "/nonexistent.json"]).status.success());
}
