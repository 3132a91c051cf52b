use std::path::Path;
use std::process::{Command, Output};

fn reachsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("REACHSIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_robot_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = reachsim(&["simulate", "--robot", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn forced_timeout_exits_2_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = reachsim(
        &["simulate", "--robot", "builtin:7dof", "--controller", "builtin:published", "--max-time", "0.001", "--out", "run.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["termination"]["reason"], "timeout");
    assert_eq!(manifest["controller"]["source"], "builtin:published");
    assert_eq!(manifest["simulation"]["max_time"], 0.001);
    assert!(manifest["wall_clock_seconds"].is_null());
    let defaulted: Vec<String> = serde_json::from_value(manifest["defaulted"].clone()).unwrap();
    assert!(defaulted.contains(&"simulation.dt".to_string()));
    assert!(!defaulted.contains(&"simulation.max_time".to_string()));
    assert!(!defaulted.contains(&"robot".to_string()));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["simulate", "--max-time", "0.05", "--observer", "on", "--disturb", "2:1.0:0.01:", "--out", out];
    assert_eq!(reachsim(&args("a.csv"), dir.path()).status.code(), Some(2));
    assert_eq!(reachsim(&args("b.csv"), dir.path()).status.code(), Some(2));
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let strip = |b: Vec<u8>| String::from_utf8(b).unwrap().replace("b.csv", "a.csv").replace("b.manifest", "a.manifest");
    assert_eq!(strip(read("a.manifest.json")), strip(read("b.manifest.json")));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let o = Command::new(env!("CARGO_BIN_EXE_reachsim"))
        .args(["simulate", "--max-time", "0.002"])
        .current_dir(dir.path())
        .env("REACHSIM_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("trace.csv").exists());
    assert!(out.join("trace.manifest.json").exists());
}

#[test]
fn metrics_report_and_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = reachsim(&["simulate", "--max-time", "0.4", "--out", "reach.csv"], dir.path());
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let text = reachsim(&["metrics", "reach.csv"], dir.path());
    assert_eq!(text.status.code(), Some(0), "{}", stderr(&text));
    assert!(stdout(&text).contains("straightness_ratio = "));
    assert!(stdout(&text).contains("t_peak_fraction = "));
    let csv = reachsim(&["metrics", "reach.csv", "--format", "csv"], dir.path());
    let body = stdout(&csv);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("path_length,"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn metrics_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(reachsim(&["metrics", "empty.csv"], dir.path()).status.code(), Some(1));

    let o = reachsim(&["simulate", "--max-time", "0.003", "--out", "ok.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let mut text = std::fs::read_to_string(dir.path().join("ok.csv")).unwrap();
    text.push_str("1,2,oops\n");
    std::fs::write(dir.path().join("bad.csv"), text).unwrap();
    let o = reachsim(&["metrics", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // The header is row 1, so the appended line is row 6.
    assert!(stderr(&o).contains("row 6"), "{}", stderr(&o));
}

#[test]
fn stationary_run_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ctl.toml"), "[controller]\ntarget = [0.085, 0.0, -0.5585]\n").unwrap();
    let o = reachsim(&["simulate", "--controller", "ctl.toml", "--out", "still.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = reachsim(&["metrics", "still.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ctl.toml"), "[controller]\nk = 13.0\nbogus = 1\n").unwrap();
    let o = reachsim(&["simulate", "--controller", "ctl.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ctl.toml:3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = reachsim(&["simulate", "--disturb", "2:x:0:1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = reachsim(&["simulate", "--observer", "maybe"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_passes_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = reachsim(&["validate", "--seed", "42", "--trials", "30"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert!(!stdout(&a).contains("FAIL"));
    let b = reachsim(&["validate", "--seed", "42", "--trials", "30"], dir.path());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn sign_flip_canary_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let o = reachsim(&["validate", "--trials", "10", "--flip-coriolis-sign"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL skew_symmetry"), "{out}");
    assert!(out.contains("--seed"), "{out}");
}
