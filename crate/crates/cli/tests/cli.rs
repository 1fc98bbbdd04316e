use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ckraus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckraus"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("failed to launch ckraus")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_succeeds_and_bad_flags_are_config_errors() {
    let help = ckraus(&["--help"]);
    assert_eq!(code(&help), 0);
    let text = stdout(&help);
    for sub in ["sample", "spectrum", "evolve-exact", "evolve-kraus", "compare", "chaos-stats", "echo", "report", "run"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
    assert_eq!(code(&ckraus(&["sample", "--no-such-flag"])), 1);
    assert_eq!(code(&ckraus(&[])), 1);
}

#[test]
fn sample_is_deterministic_json() {
    let args = ["sample", "--n-bath", "3", "--jx", "1.5", "--seed", "9"];
    let a = ckraus(&args);
    let b = ckraus(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["n_bath"], 3);
    assert_eq!(v["jxx"].as_array().unwrap().len(), 3);
    assert!(v["jxx"].as_array().unwrap().iter().all(|j| j.as_f64().unwrap().abs() <= 1.5));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "retained = 20\nbogus = 1\n").unwrap();
    assert_eq!(code(&ckraus(&["sample", "--spec", path(&bad)])), 1);
    assert_eq!(code(&ckraus(&["sample", "--samples", "1"])), 1);
    assert_eq!(code(&ckraus(&["spectrum", "--n-bath", "12", "--out", path(dir.path())])), 3);
    fs::create_dir_all(dir.path().join("broken")).unwrap();
    fs::write(
        dir.path().join("broken/report.json"),
        r#"{"n_bath":1,"retained":1,"kt":0.25,"lambda":0.05,"tol":1e-10,"t_max":1.0,"n_samples":2,"points":[],"panels":[],"failures":[]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("broken/kraus.csv"),
        "t,re_rho00,re_rho01,im_rho01,re_rho11,purity,fidelity\n0e0,9e-1,5e-1,0e0,5e-1,1e0,1e0\n",
    )
    .unwrap();
    assert_eq!(code(&ckraus(&["report", path(&dir.path().join("broken"))])), 2);
}

#[test]
fn point_commands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let common = ["--n-bath", "3", "--jx", "1", "--seed", "2", "--t-max", "20", "--samples", "41", "--out", out];
    for cmd in ["spectrum", "evolve-exact", "evolve-kraus", "echo"] {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        let o = ckraus(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let point = dir.path().join("points/jx1_seed2");
    for f in ["spectrum.csv", "coupling.json", "parameters.json", "exact.csv", "kraus.csv", "echo_short.csv", "echo_long.csv"] {
        assert!(point.join(f).is_file(), "missing {f}");
    }
    let exact = fs::read_to_string(point.join("exact.csv")).unwrap();
    assert_eq!(exact.lines().count(), 42);

    let mut args = vec!["compare"];
    args.extend_from_slice(&common);
    let o = ckraus(&args);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m["mean_abs_dp"].as_f64().unwrap() >= 0.0);
    assert!(point.join("metrics.json").is_file());
}

#[test]
fn run_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    let args = [
        "run", "--n-bath", "4", "--jx", "0.5,2", "--seeds", "1,2", "--t-max", "30", "--samples", "61", "--out",
        path(&out),
    ];
    let o = ckraus(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Jx = 2"));
    for f in ["report.json", "report.txt", "summary.csv", "metadata.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let first = fs::read(out.join("report.json")).unwrap();
    assert_eq!(code(&ckraus(&args)), 0);
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());

    let r = ckraus(&["report", path(&out)]);
    assert_eq!(code(&r), 0);
    assert!(stdout(&r).contains("validated 8 trajectory files"));
}

#[test]
fn print_spec_round_trips_through_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckraus(&["run", "--n-bath", "5", "--seeds", "7", "--print-spec"]);
    assert_eq!(code(&o), 0);
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, &o.stdout).unwrap();
    let again = ckraus(&["run", "--spec", path(&spec), "--print-spec"]);
    assert_eq!(o.stdout, again.stdout);
    assert!(stdout(&o).contains("n_bath = 5"));
}

#[test]
fn chaos_stats_reports_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckraus(&["chaos-stats", "--n-bath", "6", "--jx", "0.5,2", "--seeds", "1,2", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("chaos/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(dir.path().join("chaos/jx2_seed1/echo_short.csv").is_file());
}
