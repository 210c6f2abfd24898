use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_enrich-ci");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("ENRICH_CI_THREADS", "2").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const WORKED: &str = r#"{
  "k": 2, "p": [0.5, 0.5], "n1": 200, "n2": 100, "sigma": 0.36, "alpha": 0.05,
  "rule": {"type": "d2", "threshold": 0.025},
  "co_primary": true,
  "stage1": [0.113, 0.013],
  "stage2": {"means": [0.155, -0.064], "pooled": 0.045}
}"#;

#[test]
fn example_passes_and_reports_estimates() {
    let out = run(&["example"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("full,0.057000"));
    assert!(text.contains("s1,0.127000"));
    assert!(text.contains("s2,-0.01"));
    assert_eq!(text.matches(",pass").count(), 9);
    assert!(!text.contains("FAIL"));
}

#[test]
fn ci_reproduces_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "worked.json", WORKED);
    let out = run(&["ci", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "decision,full");
    assert_eq!(lines[1], "target,method,lower,upper");
    let want = [
        ("full", "naive", -0.024, 0.138),
        ("full", "umau", -0.079, 0.131),
        ("full", "tost", -0.078, 0.132),
        ("s1", "naive", 0.012, 0.242),
        ("s1", "umau", -0.028, 0.240),
        ("s1", "tost", -0.025, 0.240),
        ("s2", "naive", -0.128, 0.102),
        ("s2", "umau", -0.200, 0.093),
        ("s2", "tost", -0.198, 0.094),
    ];
    assert_eq!(lines.len(), 2 + want.len());
    for (t, m, lo, hi) in want {
        let row = lines.iter().find(|l| l.starts_with(&format!("{t},{m},"))).expect("row present");
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[2].split('.').nth(1).unwrap().len(), 6, "six decimals in {row}");
        let (a, b): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((a - lo).abs() <= 1e-3 && (b - hi).abs() <= 1e-3, "{row}");
    }
}

#[test]
fn ci_method_filter_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "worked.json", WORKED);
    let dest = dir.path().join("ci.csv");
    let out = run(&["ci", "--config", &cfg, "--methods", "umau", "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dest).unwrap();
    assert_eq!(text.lines().count(), 2 + 3);
    assert!(text.lines().skip(2).all(|l| l.contains(",umau,")));
}

#[test]
fn futility_stop_prints_decision_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "stop.json",
        r#"{"p":[0.5,0.5],"n1":200,"n2":100,"sigma":0.36,"rule":{"type":"d2","threshold":0.025},"stage1":[0.01,0.02]}"#,
    );
    let out = run(&["ci", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "decision,stop\n");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "nosigma.json", r#"{"p":[0.5,0.5],"n1":200,"n2":100,"rule":{"type":"d1","threshold":1}}"#);
    let out = run(&["ci", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));

    let cfg = write(dir.path(), "bad.json", r#"{"p":[0.5,0.4],"n1":2,"n2":2,"sigma":1,"rule":{"type":"d1","threshold":1},"stage1":[0,0]}"#);
    assert_eq!(run(&["ci", "--config", &cfg]).status.code(), Some(2));
    let cfg = write(dir.path(), "rule.json", r#"{"p":[1.0],"n1":2,"n2":2,"sigma":1,"rule":{"type":"d9","threshold":1},"stage1":[0]}"#);
    assert_eq!(run(&["ci", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["ci", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", &write(dir.path(), "w.json", WORKED)]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["ci", "--config", &write(dir.path(), "w2.json", WORKED), "--methods", "wald"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"k":2,"p":[0.5,0.5],"n1":244,"n2":244,"sigma":8,"alpha":0.05,
            "rule":{"type":"d2","threshold":1},"deltas":[0,0],"replicates":300,"seed":7,
            "methods":["naive","umau","tost"],"co_primary":false}"#,
    );
    let a = run(&["simulate", "--config", &cfg]);
    let b = run(&["simulate", "--config", &cfg]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("branch,proportion,method,coverage,mean_width,width_ratio,mc_halfwidth\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("overall,")).count(), 3);

    let other = run(&["simulate", "--config", &cfg, "--seed", "8"]);
    assert_ne!(other.stdout, text.as_bytes());

    let single = run(&["simulate", "--config", &cfg, "--replicates", "1", "--co-primary"]);
    let text = String::from_utf8(single.stdout).unwrap();
    let branches: std::collections::BTreeSet<&str> =
        text.lines().skip(1).map(|l| l.split(',').next().unwrap()).filter(|b| *b != "overall" && !b.starts_with("coprimary")).collect();
    assert_eq!(branches.len(), 1, "{text}");
    assert!(text.lines().skip(1).any(|l| l.contains(",1.000000,")));
}
