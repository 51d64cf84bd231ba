use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_epd-screen"));
    c.env_remove("EPD_SCREEN_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn summary(text: &str, key: &str) -> String {
    let prefix = format!("# {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in output"))
        .to_string()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn universal_reports_the_logistic_gap() {
    let o = run(&["universal", "--grid", "601"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# epd-screen "));
    let argmax: f64 = summary(&text, "argmax").parse().unwrap();
    let gap: f64 = summary(&text, "max_gap").parse().unwrap();
    assert!((1.4..=2.2).contains(&argmax), "{argmax}");
    assert!((0.08..=0.11).contains(&gap), "{gap}");
    assert_eq!(body(&text).len(), 602);
}

#[test]
fn solve_n_stays_within_three_atoms() {
    let o = run(&["solve-n", "--n", "12", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["command"], "solve-n");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 12);
    let max = doc["summary"]["max_support"].as_u64().unwrap();
    assert!((1..=3).contains(&max), "{max}");
}

#[test]
fn verify_epd_passes_on_monitoring() {
    let o = run(&["verify-epd", "--family", "monitoring", "--trials", "200", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(summary(&text, "max_support"), "2");
    assert_eq!(summary(&text, "violations"), "0");
}

#[test]
fn same_seed_same_bytes() {
    let args = ["verify-epd", "--family", "screening", "--trials", "100", "--seed", "9"];
    let a = run(&args);
    let b = bin().args(args).args(["--threads", "1"]).output().unwrap();
    assert!(a.status.success() && b.status.success());
    let (ta, tb) = (stdout(&a), stdout(&b));
    assert_eq!(body(&ta), body(&tb));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("first.csv");
    let o = run(&["concavify", "--family", "screening", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(&out).unwrap();

    // The echoed config reproduces the run.
    let config = summary(&first, "config");
    let cfg_path = dir.path().join("run.json");
    let second = dir.path().join("second.csv");
    let mut value: serde_json::Value = serde_json::from_str(&config).unwrap();
    value["out"] = serde_json::json!(second);
    std::fs::write(&cfg_path, value.to_string()).unwrap();
    let o = run(&["--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = std::fs::read_to_string(&second).unwrap();
    assert_eq!(body(&first), body(&again));
}

#[test]
fn bad_masses_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"command": "solve-n", "thetas": [0.2, 0.5], "masses": [0.5, 0.6]}"#,
    )
    .unwrap();
    let o = run(&["--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("masses"));
}

#[test]
fn unknown_flags_and_fields_are_rejected() {
    assert_eq!(run(&["universal", "--gamam", "1"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"command": "universal", "gamam": 1}"#).unwrap();
    let o = run(&["--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamam"));
}

#[test]
fn negative_gamma_is_a_validation_error() {
    let o = run(&["universal", "--gamma=-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}
