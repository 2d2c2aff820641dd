use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn effv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effv")).args(args).env_remove("EFFV_SOLVER_PATH").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&effv(&["frobnicate"])), 2);
    assert_eq!(code(&effv(&["prove"])), 2);
    assert_eq!(code(&effv(&["check", "/nonexistent/file.eff"])), 2);
    let x = corpus("xchg.eff");
    assert_eq!(code(&effv(&["run", path(&x), "no_such_function"])), 2);
    assert_eq!(code(&effv(&["run", path(&x), "server", "--set", "nope=1"])), 2);
}

#[test]
fn empty_file_translates() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("empty.eff");
    std::fs::write(&f, "").unwrap();
    let o = effv(&["translate", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn rejected_input_exits_1() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("bad.eff");
    std::fs::write(&f, "let f (x : int) : int = y").unwrap();
    assert_eq!(code(&effv(&["check", f.to_str().unwrap()])), 1);
}

#[test]
fn prove_exit_codes() {
    let o = effv(&["prove", path(&corpus("xchg.eff"))]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("11 of 11 VCs valid"), "{}", stdout(&o));
    let o = effv(&["prove", path(&corpus("mutations/xchg_wrong_reply.eff"))]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let o = effv(&["prove", path(&corpus("xchg.eff")), "--solver-path", "/nonexistent/z3"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn solver_path_env_override() {
    let o = Command::new(env!("CARGO_BIN_EXE_effv"))
        .args(["prove", path(&corpus("xchg.eff"))])
        .env("EFFV_SOLVER_PATH", "/nonexistent/z3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn prove_report_and_dump() {
    let d = tempfile::tempdir().unwrap();
    let rep = d.path().join("r.json");
    let dump = d.path().join("smt");
    let o = effv(&[
        "prove",
        path(&corpus("xchg.eff")),
        "--report-json",
        rep.to_str().unwrap(),
        "--dump-smt",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(j["schema"], "effv-prove");
    assert_eq!(j["vcs"].as_array().unwrap().len(), 11);
    assert_eq!(std::fs::read_dir(&dump).unwrap().count(), 11);
}

#[test]
fn run_and_trace_json() {
    let x = corpus("xchg.eff");
    let o = effv(&["run", path(&x), "server"]);
    assert_eq!((code(&o), stdout(&o).trim().to_string()), (0, "42".to_string()));
    let d = tempfile::tempdir().unwrap();
    let t = d.path().join("t.json");
    let o = effv(&["run", path(&x), "server", "--check", "--set", "p=7", "--trace-json", t.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert!(j["error"].is_null());
    assert_eq!(j["events"].as_array().unwrap().len(), 4);
}

#[test]
fn run_checked_mutant_blames() {
    let o = effv(&["run", path(&corpus("mutations/xchg_continue_twice.eff")), "server", "--check"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("server"));
}

#[test]
fn enumerate_division() {
    let o = effv(&["run", path(&corpus("division_interpreter.eff")), "eval", "Div (Int (1), Int (0))", "--enumerate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn oracle_clean_on_xchg() {
    let o = effv(&["oracle", path(&corpus("xchg.eff")), "--samples", "20"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 contract violations"));
}

#[test]
fn bench_empty_dir() {
    let d = tempfile::tempdir().unwrap();
    let o = effv(&["bench", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.starts_with("Case"));
}

#[test]
fn bench_records_bad_file() {
    let d = tempfile::tempdir().unwrap();
    for n in ["xchg.eff", "references.eff", "division_interpreter.eff", "control_inversion.eff"] {
        std::fs::copy(corpus(n), d.path().join(n)).unwrap();
    }
    std::fs::write(d.path().join("broken.eff"), "let let let").unwrap();
    let rep = d.path().join("bench.json");
    let o = effv(&["bench", d.path().to_str().unwrap(), "--report-json", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 6, "{out}");
    assert_eq!(rows.iter().filter(|r| r.contains("error (parse)")).count(), 1, "{out}");
    assert!(rows[5].starts_with("Total"));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(j["schema"], "effv-bench");
    assert_eq!(j["totals"]["errors"], 1);
    assert_eq!(j["totals"]["vcs"], 60);
    assert_eq!(j["totals"]["valid"], 60);
}
