use std::path::PathBuf;
use std::process::{Command, Output};

fn chiral(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiral")).args(args).output().expect("run chiral")
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn n2_of_bc_beta_gamma() {
    let out = chiral(&["verify-n2", "--system", "bcbg", "--dim", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("c_hat = 1"), "{}", stdout(&out));
}

#[test]
fn virasoro_sign_error_is_detected() {
    let good = chiral(&["verify-voa", "--system", "boson"]);
    assert_eq!(good.status.code(), Some(0));
    let bad = chiral(&["verify-voa", "--system", "boson", "--inject-sign-error"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAILED"));
}

#[test]
fn two_point_cohomology_runs_clean() {
    let p1 = fixture("p1.json");
    let out = chiral(&["cohomology", "--polytope", &p1, "--cutoff", "1", "--compare-seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("seed 1"), "{text}");
    assert!(text.ends_with("ok\n"));
}

#[test]
fn structured_output_is_json() {
    let p1 = fixture("p1.json");
    let out = chiral(&["toric-check", "--polytope", &p1, "--format", "structured"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json");
    assert_eq!(v["reflexive"], serde_json::Value::Bool(true));
}

#[test]
fn bad_input_exits_with_parse_code() {
    assert_eq!(chiral(&["toric-check", "--polytope", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(chiral(&["verify-voa", "--system", "boson", "--cutoff", "-1"]).status.code(), Some(2));
    assert_eq!(chiral(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let p1 = fixture("p1.json");
    let args = ["cohomology", "--polytope", &p1, "--format", "tsv", "--seed", "7"];
    let a = chiral(&args);
    let b = chiral(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
