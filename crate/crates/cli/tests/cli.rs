use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cardguess"));
    cmd.env_remove("CARDGAME_ORACLE_LIMIT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn simulate_fixed_label_scores_m() {
    let out = run(&["simulate", "--m", "1", "--n", "5", "--strategy", "fixed:3", "--trials", "200", "--seed", "1", "--json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["mean"].as_f64().unwrap(), 1.0);
    assert_eq!(report["trials"], 200);
}

#[test]
fn simulate_writes_report_and_ignores_thread_count() {
    let a = scratch("sim_a.json");
    let b = scratch("sim_b.json");
    for (path, jobs) in [(&a, "1"), (&b, "3")] {
        let out = run(&[
            "simulate", "--m", "3", "--n", "4", "--strategy", "random", "--trials", "3000", "--seed", "7", "--jobs", jobs,
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read_to_string(a).unwrap(), fs::read_to_string(b).unwrap());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["simulate", "--n", "3", "--strategy", "random", "--trials", "1", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["simulate", "--m", "2", "--n", "3", "--strategy", "nope", "--trials", "1", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["simulate", "--m", "0", "--n", "3", "--strategy", "random", "--trials", "1", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["oracle", "--m", "1", "--n", "3", "--history", "4:0"])), 2);
}

#[test]
fn oracle_optimal_value_for_two_cards() {
    let out = run(&["oracle", "--m", "1", "--n", "2", "--optimal"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 1.5);
    assert_eq!(v["exact"], "3/2");
}

#[test]
fn oracle_bound_verification_passes() {
    let out = run(&["oracle", "--m", "2", "--n", "3", "--verify-bound"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["max_slack"].as_f64().unwrap() <= 0.0);
}

#[test]
fn oracle_history_posterior() {
    // a miss on label 1 leaves 1,1,2 behind the first card
    let out = run(&["oracle", "--m", "2", "--n", "2", "--history", "1:0"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["exact"], serde_json::json!(["2/3", "1/3"]));
}

#[test]
fn oracle_refuses_large_decks() {
    assert_eq!(code(&run(&["oracle", "--m", "5", "--n", "5", "--optimal"])), 3);
}

#[test]
fn oracle_limit_can_be_overridden() {
    let args = ["oracle", "--m", "1", "--n", "6", "--history", "1:0"];
    assert_eq!(code(&bin().args(args).env("CARDGAME_ORACLE_LIMIT", "4").output().unwrap()), 3);
    assert_eq!(code(&run(&args)), 0);
}

#[test]
fn couple_sampled_report_passes() {
    let path = scratch("couple.json");
    let out = run(&[
        "couple", "--m", "2", "--n", "3", "--strategy", "greedy-bound", "--trials", "20000", "--seed", "3", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    for key in ["prop_a_pass", "prop_d_pass", "comparison_pass"] {
        assert_eq!(v[key], true, "{key}");
    }
    for key in ["prop_b_worst_z", "prop_c_worst_z"] {
        assert!(v[key].as_f64().unwrap() <= 5.0, "{key}");
    }
}

#[test]
fn couple_exact_drift_without_sampling() {
    let out = run(&["couple", "--m", "1", "--n", "2", "--strategy", "sticky", "--exact-drift"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["max_drift"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["trials"], 0);
}

#[test]
fn couple_needs_seed_when_sampling() {
    assert_eq!(code(&run(&["couple", "--m", "2", "--n", "3", "--strategy", "sticky", "--trials", "10"])), 2);
}

#[test]
fn couple_refuses_large_decks() {
    assert_eq!(code(&run(&["couple", "--m", "3", "--n", "5", "--strategy", "sticky", "--trials", "10", "--seed", "1"])), 3);
}

#[test]
fn sweep_is_deterministic_and_resumable() {
    let grid = scratch("grid.json");
    fs::write(&grid, r#"{"m":[2,3],"n":[3],"strategies":["random","sticky"],"trials":400}"#).unwrap();
    let full = scratch("full.csv");
    let resumed = scratch("resumed.csv");
    let sweep = |out: &PathBuf, from: &str| {
        let o = run(&["sweep", "--grid", grid.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap(), "--from-row", from]);
        assert_eq!(code(&o), 0);
    };
    sweep(&full, "0");
    let text = fs::read_to_string(&full).unwrap();
    assert_eq!(text.lines().count(), 5);
    // first two rows, then resume from row 2 onto the same file
    let head: Vec<&str> = text.lines().take(3).collect();
    fs::write(&resumed, head.join("\n") + "\n").unwrap();
    sweep(&resumed, "2");
    assert_eq!(fs::read_to_string(&resumed).unwrap(), text);
}

#[test]
fn malformed_grid_exits_two() {
    let grid = scratch("bad_grid.json");
    fs::write(&grid, r#"{"m":[2],"n":"three"}"#).unwrap();
    assert_eq!(code(&run(&["sweep", "--grid", grid.to_str().unwrap(), "--seed", "1"])), 2);
}

#[test]
fn sweep_error_rows_exit_one() {
    let grid = scratch("err_grid.json");
    fs::write(&grid, r#"{"m":[1],"n":[2],"strategies":["fixed:9"],"trials":10}"#).unwrap();
    let out = run(&["sweep", "--grid", grid.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).lines().nth(1).unwrap().ends_with("error"));
}

#[test]
fn play_reads_guesses_from_stdin() {
    let mut child = bin()
        .args(["play", "--m", "1", "--n", "2", "--seed", "5"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1\n7\n1\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("enter a label between 1 and 2"));
    assert!(text.contains("final score 1 of 2"));
}

#[test]
fn verify_coupling_suite_passes() {
    let path = scratch("verify.json");
    let out = run(&["verify", "--suite", "coupling", "--seed", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().filter(|l| l.contains(" PASS ")).count(), 4);
    let results: Vec<Value> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let ids: Vec<u64> = results.iter().map(|r| r["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [3, 4, 5, 9]);
}
