//! End-to-end runs of the `seqblock` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqblock"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEQBLOCK_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("abab.txt"), "a b a b\n").unwrap();
    let mut long = String::new();
    for i in 0..300 {
        long.push_str(["a ", "b ", "c ", "d "][(i * 7 + i / 3) % 4]);
    }
    std::fs::write(dir.path().join("long.txt"), long + "\n").unwrap();
    std::fs::write(dir.path().join("edges.tsv"), "a\tb\nb\tc\na\tc\nc\td\nd\ta\nb\td\n").unwrap();
    dir
}

#[test]
fn one_group_total_on_abab() {
    let dir = workspace();
    let r = json(&run(&["fit", "abab.txt", "--groups", "1"], dir.path()));
    let total = r["total"].as_f64().unwrap();
    assert!((total - 12f64.ln()).abs() < 1e-12, "{total}");

    let bits = json(&run(&["fit", "abab.txt", "--groups", "1", "--units", "bits"], dir.path()));
    let b = bits["total"].as_f64().unwrap();
    assert!((b - total / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    let dir = workspace();
    let out = run(&["fit", "abab.txt", "--unified", "--order", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["fit", "abab.txt", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_three() {
    let dir = workspace();
    let out = run(&["fit", "nope.txt"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_split_predicts_nothing() {
    let dir = workspace();
    let r = json(&run(&["predict", "long.txt", "--split", "1.0"], dir.path()));
    assert_eq!(r["holdout"]["delta_sigma"].as_f64(), Some(0.0));
    assert_eq!(r["holdout"]["validation_events"].as_u64(), Some(0));
}

#[test]
fn seeded_fits_repeat() {
    let dir = workspace();
    let args = ["fit", "long.txt", "--order", "2", "--seed", "7", "--verify"];
    let a = json(&run(&args, dir.path()));
    let b = json(&run(&args, dir.path()));
    assert_eq!(a["breakdown"], b["breakdown"]);
    assert_eq!(a["partition"], b["partition"]);
    assert_eq!(a["seed"].as_u64(), Some(7));
}

#[test]
fn static_temporal_fit_has_no_label_chain() {
    let dir = workspace();
    let r = json(&run(&["temporal", "edges.tsv", "--order", "0"], dir.path()));
    assert!(r.get("label_names").is_none());
    assert!(r.get("num_token_groups").is_none());
    assert!(r["num_node_groups"].as_u64().is_some());

    let r = json(&run(&["temporal", "edges.tsv", "--order", "1", "--verify"], dir.path()));
    assert!(r.get("label_names").is_some());
}

#[test]
fn report_and_partition_files() {
    let dir = workspace();
    let out = run(&["fit", "long.txt", "-o", "r.json", "--partition", "p.tsv", "--profile"], dir.path());
    assert!(out.status.success());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(r["profile"].is_object());
    let dump = std::fs::read_to_string(dir.path().join("p.tsv")).unwrap();
    for name in ["a", "b", "c", "d"] {
        assert!(dump.lines().any(|l| l.starts_with(&format!("token:{name}\t"))), "{dump}");
    }
}

#[test]
fn generation_keeps_the_constraints() {
    let dir = workspace();
    assert!(run(&["fit", "long.txt", "-o", "r.json"], dir.path()).status.success());
    let gen = |seed: &str, out: &str, cons: &str| {
        let o = run(
            &["generate", "--report", "r.json", "--input", "long.txt", "--seed", seed, "-o", out, "--save-constraints", cons],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let a = gen("1", "a.txt", "ca.json");
    let b = gen("2", "b.txt", "cb.json");
    assert_eq!(a.split_whitespace().count(), 300);
    assert_eq!(b.split_whitespace().count(), 300);
    assert_ne!(a, b);

    // the generated sequence carries the same constraint signature
    let c: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ca.json")).unwrap()).unwrap();
    let o = run(&["generate", "--constraints", "ca.json", "--seed", "3"], dir.path());
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).split_whitespace().count(), 300);

    let mut sorted_a: Vec<&str> = a.split_whitespace().collect();
    let mut sorted_src: Vec<String> = std::fs::read_to_string(dir.path().join("long.txt"))
        .unwrap()
        .split_whitespace()
        .map(String::from)
        .collect();
    sorted_a.sort_unstable();
    sorted_src.sort_unstable();
    assert_eq!(sorted_a, sorted_src);
    assert!(c["ers"].is_array());
}
