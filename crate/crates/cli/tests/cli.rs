use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_approxgroup"))
}

fn run(args: &[&str]) -> (i32, Value) {
    let out: Output = bin().args(args).output().expect("binary runs");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().expect("exit code"), report)
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().expect("report object").remove("timestamp");
    v
}

fn verify(path: &Path) -> (i32, Value) {
    run(&["verify", "--report", path.to_str().unwrap()])
}

#[test]
fn certify_heisenberg_ball() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let (code, _) = run(&[
        "certify", "--group", "ut_mod:3:5", "--set", "ball:gens=xy:r=2", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["schema"], "approxgroup-lab/1");
    assert_eq!(report["status"], "ok");
    assert_eq!(report["verified"], true);
    assert_eq!(report["input"]["group"]["kind"], "ut_mod");
    assert_eq!(report["result"]["base_size"], 17);

    let (code, v) = verify(&path);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["method"], "reload");
    assert_eq!(v["result"]["reproduced"], true);
}

#[test]
fn tampered_certificate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let (code, mut report) = run(&["certify", "--group", "ut_mod:3:5", "--set", "ball:gens=xy:r=2"]);
    assert_eq!(code, 0);
    let cover = report["result"]["cover"].as_array_mut().unwrap();
    cover.pop();
    std::fs::write(&path, report.to_string()).unwrap();
    let (code, v) = verify(&path);
    assert_eq!(code, 3, "{v}");
    assert_eq!(v["status"], "bug");
}

#[test]
fn decompose_subgroup_has_trivial_chain() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    let (code, _) = run(&[
        "decompose", "--group", "ut_mod:3:3", "--set", "subgroup:gens=xyXY,", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["result"]["gamma"].as_array().unwrap().len(), 0);
    assert_eq!(report["result"]["K"], 1);
    let (code, v) = verify(&path);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["reproduced"], true);
}

#[test]
fn growth_on_free_group_finds_no_gap() {
    let (code, report) = run(&["growth", "--group", "free:2", "--n", "10", "--c", "1"]);
    assert_eq!(code, 2);
    assert_eq!(report["status"], "hypothesis");
    assert_eq!(report["message"], "gap not detected");
    assert_eq!(report["result"]["size_n"], 2 * 3u64.pow(10) - 1);
}

#[test]
fn growth_on_integers_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sizes.csv");
    let (code, report) = run(&[
        "growth", "--group", "abelian:0", "--n", "100", "--certify", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(report["result"]["detected"], true);
    assert_eq!(report["result"]["scale"]["r"], 0);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("n,size,threshold,detected\n"));
    assert!(rows.lines().any(|l| l.starts_with("100,201,")));
}

#[test]
fn structure_of_integer_heisenberg_ball_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let (code, _) = run(&[
        "structure", "--group", "ut_int:3", "--set", "ball:gens=xy:r=1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, v) = verify(&path);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["method"], "recompute");
}

#[test]
fn identical_runs_are_byte_identical_without_timestamp() {
    let args = ["progression", "--group", "ut_mod:3:5", "--set", "ball:gens=xy:r=1"];
    let (c1, a) = run(&args);
    let (c2, b) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    let a = serde_json::to_string(&without_timestamp(a)).unwrap();
    let b = serde_json::to_string(&without_timestamp(b)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "torsion", "group": "ut_mod:3:3", "set": "ball:gens=xy:r=1", "r": 3}"#,
    )
    .unwrap();
    let (code, report) = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(report["command"], "torsion");
    // a flag overrides the file: exponent 2 fails for a group of exponent 3
    let (code, report) = run(&["--config", cfg.to_str().unwrap(), "torsion", "--r", "2"]);
    assert_eq!(code, 2, "{report}");
}

#[test]
fn bad_input_exits_one_with_report() {
    let (code, report) = run(&["certify", "--group", "ut_mod:3", "--set", "interval:3"]);
    assert_eq!(code, 1);
    assert_eq!(report["status"], "error");
    let (code, report) = run(&["doubling", "--group", "abelian:0", "--set", "interval:50", "--cap", "20"]);
    assert_eq!(code, 1);
    assert!(report["message"].as_str().unwrap().contains("cap"));
}
