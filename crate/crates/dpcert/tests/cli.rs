//! Black-box tests of the command-line interface and its exit codes:
//! 0 accept, 1 reject, 2 usage/parse error, 3 timeout.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

const UNSAT_DIMACS: &str = "p cnf 3 6\n1 2 0\n1 -2 -3 0\n-1 -3 0\n-1 -2 -3 0\n2 3 0\n-2 3 0\n";
const SAT_DIMACS: &str = "p cnf 2 2\n1 2 0\n-1 2 0\n";

fn dimacs_file(content: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn dpcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_unsat_exits_zero() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&["solve", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).contains("s UNSATISFIABLE"));
}

#[test]
fn solve_sat_exits_one() {
    let f = dimacs_file(SAT_DIMACS);
    let out = dpcert(&["solve", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("s SATISFIABLE"));
}

#[test]
fn solve_parse_error_exits_two() {
    let f = dimacs_file("p cnf 2 1\n1 five 0\n");
    let out = dpcert(&["solve", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_missing_file_exits_two() {
    let out = dpcert(&["solve", "/nonexistent/file.cnf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_timeout_exits_three() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&["solve", f.path().to_str().unwrap(), "--order", "lexi", "--timeout", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("s TIMEOUT"));
}

#[test]
fn usage_error_exits_two() {
    let out = dpcert(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_accepts_and_writes_transcript() {
    let f = dimacs_file(UNSAT_DIMACS);
    let transcript = NamedTempFile::new().unwrap();
    let out = dpcert(&[
        "certify",
        f.path().to_str().unwrap(),
        "--transcript",
        transcript.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).contains("r ACCEPT"));
    let text = std::fs::read_to_string(transcript.path()).unwrap();
    // header + initial assignment + 6 polys + 6 challenges + verdict
    assert_eq!(text.lines().count(), 15);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("dir").is_some() && v.get("tag").is_some() && v.get("payload").is_some());
    }
}

#[test]
fn certify_satisfiable_rejects() {
    let f = dimacs_file(SAT_DIMACS);
    let out = dpcert(&["certify", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("nothing-to-certify"));
}

#[test]
fn certify_adversary_rejects() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&[
        "certify",
        f.path().to_str().unwrap(),
        "--adversary",
        "tamper:3:3:1",
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(stdout(&out).contains("r REJECT"));
}

#[test]
fn certify_stream_transport_accepts() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&[
        "certify",
        f.path().to_str().unwrap(),
        "--transport",
        "stream",
        "--repetitions",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).contains("r ACCEPT"));
}

#[test]
fn certify_stream_adversary_rejects() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&[
        "certify",
        f.path().to_str().unwrap(),
        "--transport",
        "stream",
        "--adversary",
        "degree:2",
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn attack_reports_rate() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&[
        "attack",
        f.path().to_str().unwrap(),
        "--strategy",
        "degree:1",
        "--trials",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("accepted 0"), "{text}");
}

#[test]
fn bench_emits_csv() {
    let f = dimacs_file(UNSAT_DIMACS);
    let out = dpcert(&[
        "bench",
        "php:2",
        f.path().to_str().unwrap(),
        "--orders",
        "lexi,greedy",
        "--emit-proofs",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout(&out);
    assert!(text.starts_with("instance,policy,n,clauses,k,verdict"));
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.contains("unsat"));
}
