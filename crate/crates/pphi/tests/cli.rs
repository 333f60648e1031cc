use std::path::Path;
use std::process::{Command, Output};

fn pphi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pphi")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL_KH: &str = r#"{"n_list": [6], "samples": 12, "seed": 5, "geometry":
    {"weight": {"kind": "flat_on_disk"}, "nu": {"kind": "circle"}, "support": {"kind": "circle"}, "grid_size": 128}}"#;

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = write(d, "bad.json", r#"{"n_list": [3, 2]}"#);
    let garbage = write(d, "garbage.json", "{not json");
    for args in [
        vec!["--config", "missing.json", "equilibrium"],
        vec!["--config", bad.as_str(), "eqdist"],
        vec!["--config", garbage.as_str(), "sample"],
        vec!["gamma-check", "--k", "2", "--n-max", "3"],
        vec!["no-such-command"],
    ] {
        assert_eq!(pphi(&args, d).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn sample_then_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "cfg.json", SMALL_KH);
    let out = pphi(&["--config", &cfg, "sample", "--out", "s.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(s["coeffs"].as_array().unwrap().len(), 12);
    assert_eq!(s["seed"], serde_json::to_value(pphi::config::RunConfig::load(Path::new(&cfg)).unwrap().seed_for(6)).unwrap());
    assert!(s["geometry_hash"].as_str().unwrap().len() == 64);

    let out = pphi(&["zeros", "--in", "s.json", "--out", "z.csv"], d);
    assert!(out.status.success());
    let zeros = pphi::io::read_zeros(&d.join("z.csv")).unwrap();
    assert_eq!(zeros.len(), 12);
    assert!(zeros.iter().all(|z| z.degree() == 6));

    // --seed overrides the config
    pphi(&["--config", &cfg, "--seed", "9", "sample", "--out", "s9.json"], d);
    assert_ne!(std::fs::read(d.join("s.json")).unwrap(), std::fs::read(d.join("s9.json")).unwrap());
}

#[test]
fn eqdist_is_resumable_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "cfg.json", &SMALL_KH.replace("[6]", "[4, 8]"));
    let run = |out: &str| {
        let o = pphi(&["--config", &cfg, "--threads", "1", "eqdist", "--out", out], d);
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run("a");
    let first = std::fs::read(d.join("a/manifest.json")).unwrap();
    let second = run("a");
    assert!(String::from_utf8_lossy(&second.stderr).contains("reusing"));
    assert_eq!(first, std::fs::read(d.join("a/manifest.json")).unwrap());
    // a fresh directory gives the same bytes
    run("b");
    for f in ["eqdist.csv", "eqdist.svg", "eqdist.json", "samples_N8.json", "zeros_N8.csv", "manifest.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(d.join("a/eqdist.csv")).unwrap();
    assert!(csv.starts_with("N,samples,w1,std_error,"));
    assert_eq!(csv.lines().count(), 3);
    // a changed seed invalidates the stages
    let o = pphi(&["--config", &cfg, "--seed", "6", "eqdist", "--out", "a"], d);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("reusing"));
}

#[test]
fn gamma_check_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = pphi(&["gamma-check", "--k", "2", "--c", "0.5", "--n-max", "40", "--out", "g.csv"], d);
    assert!(out.status.success());
    let text = std::fs::read_to_string(d.join("g.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,log_gamma,lower,upper,log_gamma_over_N2"));
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[0] as usize, i + 1);
        assert!(v[2] <= v[1] && v[1] <= v[3]);
        assert!((v[4] - v[1] / (v[0] * v[0])).abs() < 1e-15);
    }
    let out = pphi(&["gamma-check", "--k", "3", "--c=-0.5,0.25", "--beta", "0.3,0.9", "--n-max", "10"], d);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 11);
}

#[test]
fn checks_report_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "jpc.json", r#"{"n_list": [2, 3], "potential": {"c": [0.0, 1.0]}}"#);
    let out = pphi(&["--config", &cfg, "jpc-check", "--n-pairs", "5", "--out", "r.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    // an impossible tolerance is a check failure, not an error
    let out = pphi(&["--config", &cfg, "jpc-check", "--n-pairs", "5", "--tol", "0"], d);
    assert_eq!(out.status.code(), Some(1));

    let cfg = write(d, "bern.json", r#"{"n_list": [5, 10]}"#);
    let out = pphi(&["--config", &cfg, "bernstein-check", "--n-samples", "200"], d);
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["rows"][1]["max_ratio"].as_f64().unwrap() <= 100.0);
}

#[test]
fn equilibrium_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "cfg.json", SMALL_KH);
    let out = pphi(&["--config", &cfg, "equilibrium", "--out", "eq.json"], d);
    assert!(out.status.success());
    let eq: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("eq.json")).unwrap()).unwrap();
    assert!(eq["rate"]["total"].as_f64().unwrap().abs() < 1e-6);
    let w = eq["weights"].as_array().unwrap();
    assert_eq!(w.len(), 128);
    assert!(w.iter().all(|x| (x.as_f64().unwrap() - 1.0 / 128.0).abs() < 1e-9));

    // the point at 0 is far from the circle: positive rate
    let m = write(d, "m.json", r#"{"points": [[0.0, 0.0], null], "weights": [0.5, 0.5], "smoothing_radius": 0.3}"#);
    let out = pphi(&["--config", &cfg, "rate", "--measure", &m], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["total"].as_f64().unwrap() > 0.1);
    assert_eq!(r["smoothing_radii"].as_array().unwrap().len(), 2);
    let bad = write(d, "bad.json", r#"{"points": [[0.0, 0.0]], "weights": [0.5]}"#);
    assert_eq!(pphi(&["--config", &cfg, "rate", "--measure", &bad], d).status.code(), Some(2));
}

#[test]
fn kh_demo_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "cfg.json", &SMALL_KH.replace("\"samples\": 12", "\"samples\": 40").replace("[6]", "[30]"));
    // small N: concentration on the circle may be below the 90% bound, so only the exit code class is fixed
    let out = pphi(&["--config", &cfg, "kh-demo", "--out", "demo"], d);
    assert!(matches!(out.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["kh_demo.json", "zeros.svg", "radii.svg", "manifest.json"] {
        assert!(d.join("demo").join(f).exists(), "{f}");
    }
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("demo/kh_demo.json")).unwrap()).unwrap();
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 9);
    assert_eq!(r["passed"], checks.iter().all(|c| c["passed"] == true));
    assert_eq!(out.status.code() == Some(0), r["passed"] == true);
}
