use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn poisred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("poisred-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn report_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout holds the JSON report")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bundled_examples_meet_their_expectations() {
    let out = poisred(&["examples"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = report_of(&out);
    assert_eq!(report["status"], "PASS");
    assert!(report["fixtures"].as_array().unwrap().len() >= 13);
}

#[test]
fn reduce_counterexample_with_alpha_x2_is_poisson() {
    let out = poisred(&["reduce", "--example", "counterex_x2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report_of(&out);
    assert_eq!(r["status"], "PASS");
    assert_eq!(r["reduced"]["bivector"], "th1*th2 + x2*th1*th3");
    assert_eq!(r["reduced"]["jacobi_defect"], "0");
    let jacobi = r["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "jacobi")
        .unwrap();
    assert_eq!(jacobi["verdict"], "PASS");
}

#[test]
fn reduce_counterexample_with_alpha_x1_prints_the_defect() {
    let out = poisred(&["reduce", "--example", "counterex_x1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("-2*th1*th2*th3"), "{}", stderr(&out));
    let r = report_of(&out);
    assert_eq!(r["verdict"], "FAIL");
    assert_eq!(r["reduced"]["jacobi_defect"], "-2*th1*th2*th3");
}

#[test]
fn check_without_constraints_passes_trivially() {
    let out = poisred(&["check", "--example", "empty"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(report_of(&out)["verdict"], "PASS");
}

#[test]
fn reports_are_byte_stable() {
    for (cmd, example) in [
        ("reduce", "drinfeld_stages"),
        ("act-verify", "hamiltonian_line"),
        ("mw-quotient", "hamiltonian_line"),
    ] {
        let a = scratch(&format!("{cmd}-a.json"));
        let b = scratch(&format!("{cmd}-b.json"));
        for path in [&a, &b] {
            let out = poisred(&[
                cmd,
                "--example",
                example,
                "--report",
                path.to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
            assert!(out.stdout.is_empty(), "report goes to the file only");
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{cmd}");
    }
}

#[test]
fn rank_drop_is_undecided() {
    let path = scratch("rank_drop.poisred");
    fs::write(
        &path,
        "[variables]\neven = x1, x2, x3, x4\n[submanifold]\nsolve.x4 = 0\ntheta.th1 = -x1*th4\n[reduction]\ntheorem = presymplectic\n",
    )
    .unwrap();
    let out = poisred(&[
        "check",
        path.to_str().unwrap(),
        "--samples",
        "400",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_eq!(report_of(&out)["verdict"], "UNKNOWN");
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let path = scratch("bad.poisred");
    fs::write(
        &path,
        "[variables]\neven = x1, x2\n\n[bivector]\nS = th1*th2 + ?\n",
    )
    .unwrap();
    let out = poisred(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(
        stderr(&out).contains("line 5, column 15"),
        "{}",
        stderr(&out)
    );
    let r = report_of(&out);
    assert_eq!(r["status"], "ERROR");
}

#[test]
fn missing_input_is_an_input_error() {
    let path = scratch("noquotient.poisred");
    fs::write(
        &path,
        "[variables]\neven = x1, x2\n[bivector]\nS = th1*th2\n",
    )
    .unwrap();
    let out = poisred(&["reduce", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("quotient"), "{}", stderr(&out));
    let out = poisred(&["act-verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("[dgla]"), "{}", stderr(&out));
}

#[test]
fn theorem_flag_overrides_the_file() {
    let out = poisred(&[
        "check",
        "--example",
        "drinfeld_stages",
        "--theorem",
        "marsden-ratiu",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report_of(&out)["theorem"], "MARSDEN_RATIU");
}

#[test]
fn reads_problem_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_poisred"))
        .args(["check", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"[variables]\neven = q, p\n[bivector]\nS = th1*th2\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn usage_errors_use_clap_status() {
    let out = poisred(&["reduce"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_list_and_show() {
    let out = poisred(&["examples", "--list"]);
    let names = String::from_utf8(out.stdout).unwrap();
    assert!(names.lines().any(|l| l == "counterex_x1"));
    let out = poisred(&["examples", "--show", "empty"]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("[bivector]"));
}
