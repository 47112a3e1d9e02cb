use std::process::Command;

fn fuas(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fuas")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn suite_then_plan() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (ok, listing) = fuas(&["suite", "--out", d, "--count", "2", "--seed", "1003"]);
    assert!(ok);
    let first = listing.lines().next().unwrap();
    assert!(first.ends_with("phantom-1003/case.json"));
    let (ok, plan) = fuas(&["plan", "--case", first]);
    assert!(ok);
    assert!(plan.starts_with("REASONING:") && plan.contains("safety_margin:"));
    let (ok, json) = fuas(&["plan", "--case", first, "--json", "--no-memory"]);
    assert!(ok);
    let rec: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(rec["status"], "Finalized");
}

#[test]
fn eval_scores_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("r.txt"), dir.path().join("h.txt"));
    std::fs::write(&r, "a b c").unwrap();
    std::fs::write(&h, "a c").unwrap();
    let (ok, out) = fuas(&["eval", "--ref", r.to_str().unwrap(), "--hyp", h.to_str().unwrap()]);
    assert!(ok);
    assert!(out.contains("rougeL_f1: 0.800000"), "{out}");
}

#[test]
fn bad_case_fails_cleanly() {
    let (ok, _) = fuas(&["plan", "--case", "/nonexistent/case.json"]);
    assert!(!ok);
}
