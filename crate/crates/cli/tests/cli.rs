use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn crtgemm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crtgemm")).args(args).output().expect("spawn crtgemm")
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(name: &str, rows: usize, cols: usize, mode: &str, seed: u64) -> String {
    let p = tmp(name);
    let path = p.to_str().unwrap();
    let (r, c, s) = (rows.to_string(), cols.to_string(), seed.to_string());
    let o = crtgemm(&["generate", "--rows", &r, "--cols", &c, "--mode", mode, "--seed", &s, "--out", path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path.to_owned()
}

#[test]
fn table_has_one_row_per_modulus() {
    let o = crtgemm(&["table", "--n", "5", "--mode", "fp32"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with("#")).count(), 1 + 5);
    assert_eq!(crtgemm(&["table", "--n", "1"]).status.code(), Some(2));
    assert_eq!(crtgemm(&["table", "--n", "50"]).status.code(), Some(2));
}

#[test]
fn emulate_writes_a_result_matrix() {
    let a = generate("ea.txt", 4, 32, "fp64", 1);
    let b = generate("eb.txt", 32, 3, "fp64", 2);
    let out = tmp("ec.txt");
    let o = crtgemm(&["emulate", "--a", &a, "--b", &b, "--n", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("4 3 fp64\n"));
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn mismatched_inputs_are_errors() {
    let a = generate("ma.txt", 3, 8, "fp32", 3);
    let b = generate("mb.txt", 8, 3, "fp64", 4);
    assert_eq!(crtgemm(&["emulate", "--a", &a, "--b", &b, "--n", "10"]).status.code(), Some(2));
    let b32 = generate("mb32.txt", 8, 3, "fp32", 4);
    let o = crtgemm(&["emulate", "--a", &a, "--b", &b32, "--n", "10", "--mode", "fp64"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = generate("mbad.txt", 7, 3, "fp32", 5);
    assert_eq!(crtgemm(&["emulate", "--a", &a, "--b", &bad, "--n", "10"]).status.code(), Some(2));
}

#[test]
fn bounds_and_suggest() {
    let a = generate("ba.txt", 8, 64, "fp64", 5);
    let b = generate("bb.txt", 64, 8, "fp64", 6);
    let o = crtgemm(&["bounds", "--a", &a, "--b", &b, "--n", "16", "--tight"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("cheap max") && s.contains("tight max"));

    let o = crtgemm(&["suggest-n", "--a", &a, "--b", &b, "--target", "1e-10"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("N = "));
    let o = crtgemm(&["suggest-n", "--a", &a, "--b", &b, "--target", "1e-300"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn small_experiment_is_consistent() {
    let out = tmp("exp.csv");
    let o = crtgemm(&[
        "experiment",
        "--m",
        "8",
        "--n",
        "8",
        "--k",
        "64",
        "--mode",
        "fp32",
        "--n-list",
        "2,8-10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert_eq!(crtgemm(&["experiment", "--n-list", "1-3"]).status.code(), Some(2));
}

#[test]
fn quick_selftest_passes() {
    let o = crtgemm(&["selftest", "--quick"]);
    assert!(o.status.success(), "{}", stdout(&o));
}
