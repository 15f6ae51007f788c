use std::process::{Command, Output};

use modrep2_core::glam::Lambda;
use modrep2_core::tring::Backend;
use repcli::{render, run, Command as Job, Format, JobError, JobSpec};
use serde_json::Value;

fn modrep2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modrep2")).args(args).env_remove("MODREP2_THREADS").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn lam(l1: u32, l2: u32) -> Lambda {
    Lambda::new(l1, l2).unwrap()
}

#[test]
fn zeta_of_32_at_2() {
    let out = modrep2(&["zeta", "--p", "2", "--lambda", "3,2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "1");
    assert_eq!(v["zeta"], serde_json::json!({"1": 8, "2": 14, "4": 4}));
    assert_eq!(v["pass"], true);
}

#[test]
fn classes_of_gl2_z4() {
    let out = modrep2(&["classes", "--q", "2", "--lambda", "2,2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["classes"], 14);
}

#[test]
fn verify_all_passes_on_small_groups() {
    for (q, l, n) in [("2", "2,1", 5), ("3", "2,1", 20), ("2", "3,2", 26), ("2", "2,2", 14)] {
        let out = modrep2(&["verify-all", "--p", q, "--lambda", l]);
        assert_eq!(out.status.code(), Some(0), "q={q} {l}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["irreducibles"], n);
        let checks = v["checks"].as_array().unwrap();
        assert!(checks.len() >= 5);
        for c in checks {
            for key in ["name", "anchor", "expected", "computed", "pass"] {
                assert!(c.get(key).is_some(), "missing {key}");
            }
        }
    }
}

#[test]
fn csv_and_pretty_output() {
    let out = modrep2(&["zeta", "--p", "2", "--lambda", "3,2", "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "dimension,count\n1,8\n2,14\n4,4\n");
    let out = modrep2(&["order", "--p", "2", "--lambda", "2,1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("name,anchor,expected,computed,pass\n"));
    assert!(text.lines().nth(1).unwrap().ends_with(",true"));
    let out = modrep2(&["zeta", "--p", "2", "--lambda", "3,2", "--format", "pretty"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("zeta: 8D + 14D^2 + 4D^4"));
    assert!(text.ends_with("overall: PASS\n"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["zeta", "--p", "2"][..],
        &["zeta", "--p", "2", "--lambda", "2;1"],
        &["zeta", "--p", "6", "--lambda", "2,1"],
        &["zeta", "--backend", "padic", "--q", "4", "--lambda", "2,1"],
        &["ring-compare", "--q", "4", "--lambda", "2,1"],
        &["nonsense", "--q", "2", "--lambda", "2,1"],
        &["classes", "--q", "5", "--lambda", "4,4"],
        &["orbits", "--q", "2", "--lambda", "2,1"],
    ] {
        assert_eq!(modrep2(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn cap_is_configurable() {
    let small = modrep2(&["order", "--q", "2", "--lambda", "3,2", "--cap", "100"]);
    assert_eq!(small.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&small.stderr).contains("cap"));
    let ok = modrep2(&["order", "--q", "2", "--lambda", "3,2", "--cap", "128"]);
    assert_eq!(json(&ok)["order"], 128);
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let one = modrep2(&["construct", "--q", "2", "--lambda", "3,2", "--threads", "1"]);
    let four = Command::new(env!("CARGO_BIN_EXE_modrep2"))
        .args(["construct", "--q", "2", "--lambda", "3,2"])
        .env("MODREP2_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn out_writes_a_file() {
    let path = std::env::temp_dir().join(format!("modrep2-{}.json", std::process::id()));
    let out = modrep2(&["dixon", "--q", "3", "--lambda", "2,1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["degrees"], serde_json::json!({"1": 4, "2": 8, "3": 8}));
}

#[test]
fn ring_compare_and_tpoly_through_the_library() {
    let r = run(&JobSpec::new(Job::RingCompare, Backend::Padic, 3, lam(3, 1))).unwrap();
    assert!(r.pass);
    assert_eq!(r.checks.len(), 3);
    let r = run(&JobSpec::new(Job::Zeta, Backend::Tpoly, 4, lam(2, 1))).unwrap();
    assert!(r.pass);
    assert_eq!(render(&r, Format::Csv), "dimension,count\n1,9\n3,15\n4,27\n");
    let err = run(&JobSpec::new(Job::Order, Backend::Padic, 2, lam(9, 9))).unwrap_err();
    assert!(matches!(err, JobError::Usage(_)));
}

#[test]
fn failed_checks_give_exit_code_one() {
    let mut r = run(&JobSpec::new(Job::Classes, Backend::Padic, 2, lam(2, 1))).unwrap();
    assert_eq!(r.exit_code(), 0);
    r.checks.push(repcli::Check::eq("forced", "test", 1, 2));
    r.pass = r.checks.iter().all(|c| c.pass);
    assert_eq!(r.exit_code(), 1);
    assert_eq!(r.failures().count(), 1);
}
