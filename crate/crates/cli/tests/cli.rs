use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gtmp_cli::Report;
use gtmp_conic::ConicProgram;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/problems")
        .join(format!("{name}.json"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"))
}

fn gtmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtmp"))
        .args(args)
        .output()
        .expect("run gtmp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes_follow_the_outcome() {
    for (name, want) in [
        ("ex513_n2", 0),
        ("ex52_tm1", 2),
        ("ex511", 3),
        ("ex534", 2),
        ("ex54", 0),
    ] {
        let o = gtmp(&["solve", s(&problem(name))]);
        assert_eq!(code(&o), want, "{name}: {}", stderr(&o));
        let r = Report::from_json(&stdout(&o)).unwrap();
        assert_eq!(r.exit_code, want);
    }
}

#[test]
fn solve_matches_golden_report() {
    let o = gtmp(&["solve", s(&problem("ex513_n3"))]);
    assert_eq!(stdout(&o), std::fs::read_to_string(golden("ex513_n3")).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = gtmp(&["solve", s(&problem("ex52_t1")), "--seed", "3", "-o", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn check_without_report_only_validates() {
    let o = gtmp(&["check", s(&problem("ex531"))]);
    assert_eq!(code(&o), 0);
    assert!(
        stdout(&o).starts_with("ok: gtmp problem in 6 variables with 7 row(s)"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn golden_certificate_verifies() {
    let o = gtmp(&["check", s(&problem("ex52_tm1")), "--report", s(&golden("ex52_tm1"))]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("report verified"));
}

#[test]
fn perturbed_weight_names_the_violated_row() {
    let mut r = Report::from_json(&std::fs::read_to_string(golden("ex531")).unwrap()).unwrap();
    r.measure.as_mut().unwrap().weights[0] += 1e-2;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r.to_json()).unwrap();
    let o = gtmp(&["check", s(&problem("ex531")), "--report", s(&path)]);
    assert_eq!(code(&o), 5);
    let text = stdout(&o);
    assert!(text.contains("report rejected"), "{text}");
    assert!(text.contains("rows[0] (1 = 6) violated"), "{text}");
}

#[test]
fn report_for_another_problem_is_rejected() {
    let o = gtmp(&["check", s(&problem("ex531b")), "--report", s(&golden("ex531"))]);
    assert_eq!(code(&o), 5, "{}", stdout(&o));
}

#[test]
fn json_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"version\": 1,\n  \"mode\": gtmp\n}\n").unwrap();
    let o = gtmp(&["solve", s(&path)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3, column"), "{}", stderr(&o));
}

#[test]
fn polynomial_errors_name_the_field() {
    let text = std::fs::read_to_string(problem("ex531"))
        .unwrap()
        .replace("\"x1^2\"", "\"x1^^2\"");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("badpoly.json");
    std::fs::write(&path, text).unwrap();
    let o = gtmp(&["check", s(&path)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rows[1].poly"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let p = problem("ex531");
    for args in [
        vec!["solve", s(&p), "--d1", "3"],
        vec!["solve", s(&p), "--d1", "2"],
        vec!["solve", s(&p), "--tol-rank", "-1"],
        vec!["cone", s(&p)],
        vec!["solve"],
        vec!["frobnicate"],
    ] {
        let o = gtmp(&args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!stderr(&o).is_empty());
    }
    let o = gtmp(&["solve", "/nonexistent/problem.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_zero() {
    let o = gtmp(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("solve"));
}

#[test]
fn text_output() {
    let o = gtmp(&["tensor", s(&problem("ex513_n2")), "--text"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("KMeasureFound"), "{}", stdout(&o));
}

#[test]
fn dump_sdp_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sdp.txt");
    let o = gtmp(&["solve", s(&problem("ex513_n2")), "--dump-sdp", s(&path)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let prog = ConicProgram::from_sparse_text(&text).unwrap();
    prog.validate().unwrap();
    // Lifted monomials of degree <= 4 in 3 variables.
    assert_eq!(prog.dim, 35);
    assert_eq!(prog.to_sparse_text(), text);
}

#[test]
fn timing_is_opt_in() {
    let o = gtmp(&["solve", s(&problem("ex513_n1"))]);
    assert!(!stdout(&o).contains("wall_time_s"));
    let o = gtmp(&["solve", s(&problem("ex513_n1")), "--timing"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert!(r.wall_time_s.is_some());
}
