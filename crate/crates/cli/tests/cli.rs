use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cfreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfreq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn summary_line(csv: &str) -> Vec<String> {
    csv.lines()
        .last()
        .unwrap()
        .split(',')
        .map(String::from)
        .collect()
}

#[test]
fn analyze_rational_and_digit_list() {
    let o = cfreq(&["analyze", "3/7"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.starts_with("digit,count,frequency\n2,1,0.500000000000\n3,1,0.500000000000\n"));
    assert!(s.contains("\n2,3,3,7,"));

    let o = cfreq(&["analyze", "5/8", "--depth", "4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["digits"], serde_json::json!(["1", "1", "1", "2"]));

    let list = vec!["1,2"; 50].join(",");
    let o = cfreq(&["analyze", &list, "--ranks", "100"]);
    let s = stdout(&o);
    assert!(s.contains("1,50,0.500000000000\n2,50,0.500000000000\n"));
    assert_eq!(s.lines().filter(|l| l.starts_with("100,")).count(), 1);
}

#[test]
fn malformed_input_reports_position() {
    let o = cfreq(&["analyze", "1,2,x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position 4"));
    assert_eq!(cfreq(&["analyze", "3/0"]).status.code(), Some(2));
    assert_eq!(cfreq(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn dimension_runs_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let dirac = write(dir.path(), "dirac.json", r#"{"entries": [[1, 1.0]]}"#);
    let o = cfreq(&["dimension", "--freq", dirac.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(summary_line(&stdout(&o))[..2], ["0.500000000000", "0"]);

    let div = write(
        dir.path(),
        "div.json",
        r#"{"tail": {"family": "power_log", "a": 1.0, "b": 2.0}, "normalize": true}"#,
    );
    let o = cfreq(&[
        "dimension",
        "--freq",
        div.to_str().unwrap(),
        "--n-list",
        "5,10",
    ]);
    let last = summary_line(&stdout(&o));
    assert_eq!(last[0], "0.500000000000");
    assert_eq!(last[3], "true");

    let gauss = write(dir.path(), "gauss.json", r#"{"tail": {"family": "gauss"}}"#);
    let g = gauss.to_str().unwrap();
    let o = cfreq(&[
        "dimension",
        "--freq",
        g,
        "--n-list",
        "5,10,20",
        "--k-list",
        "2",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let alpha: Vec<f64> = v["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["alpha"].as_f64().unwrap())
        .collect();
    assert!(alpha.windows(2).all(|w| w[1] > w[0]), "{alpha:?}");

    assert_eq!(
        cfreq(&[
            "dimension",
            "--freq",
            g,
            "--n-list",
            "5000",
            "--k-list",
            "2"
        ])
        .status
        .code(),
        Some(4)
    );
    let stall = write(dir.path(), "stall.json", r#"{"solver": {"max_dual": 1}}"#);
    let o = cfreq(&[
        "dimension",
        "--config",
        stall.to_str().unwrap(),
        "--freq",
        g,
        "--n-list",
        "5",
        "--k-list",
        "1,2",
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("5,2,,") && l.contains("dual ascent")));
    assert_eq!(
        cfreq(&["dimension", "--freq", "/nonexistent/f.json"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn verify_is_deterministic_and_rejects_unknown_suites() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = cfreq(&[
            "verify",
            "--suite",
            "all",
            "--trials",
            "200",
            "--seed",
            "11",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(text).unwrap().lines().count(), 9);
    assert_eq!(cfreq(&["verify", "--suite", "2.9"]).status.code(), Some(2));

    let o = cfreq(&["verify", "--suite", "2.7", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["suite"], "counting");
    assert_eq!(v[0]["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn sample_words_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let half = write(
        dir.path(),
        "half.json",
        r#"{"entries": [[1, 0.5], [2, 0.5]]}"#,
    );
    let h = half.to_str().unwrap();
    let run = |seed: &str| {
        stdout(&cfreq(&[
            "sample", "seed", "--freq", h, "--n", "1000", "--count", "3", "--seed", seed,
        ]))
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
    assert_eq!(run("5").lines().count(), 3);

    let dirac = write(dir.path(), "dirac.json", r#"{"entries": [[1, 1.0]]}"#);
    let summary = dir.path().join("summary.csv");
    let o = cfreq(&[
        "sample",
        "seed",
        "--freq",
        dirac.to_str().unwrap(),
        "--n",
        "12",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&o), format!("{}\n", ["1"; 12].join(",")));
    assert_eq!(
        std::fs::read_to_string(summary).unwrap(),
        "seed,digit,count,frequency\n0,1,12,1.00000000000\n"
    );
}

#[test]
fn profile_and_config_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"mode": "profile", "ln_b": 10.0, "depths": [4, 5, 6, 7, 8], "seed": 1, "format": "json"}"#,
    );
    let c = cfg.to_str().unwrap();
    let o = cfreq(&["sample", "--config", c]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v[0]["seed"], 1);

    // flags win over the file
    let o = cfreq(&["sample", "--config", c, "--format", "csv", "--seed", "2"]);
    let s = stdout(&o);
    assert!(s.starts_with("seed,m,n,log_mass,log_length,ratio\n2,4,2,"));
    assert_eq!(s.lines().count(), 6);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"mode": "profile", "colour": 1}"#,
    );
    assert_eq!(
        cfreq(&["sample", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
