//! Command-line behaviour: exit codes per error class, config echoing,
//! comparison-row invariants.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treatrule"))
}

fn workdir() -> PathBuf {
    let dir = std::env::temp_dir().join("treatrule_cli_tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_sample(path: &PathBuf, n: usize, with_parent: bool) {
    let mut body = String::from(if with_parent { "y,d,x1,x2,parent\n" } else { "y,d,x1,x2\n" });
    let mut state = 9u64;
    let mut unif = move || {
        state = treatrule::util::splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..n {
        let x1 = unif();
        let x2 = unif();
        let d = u8::from(unif() < 0.5);
        // Treatment helps everywhere by ~2.
        let y = 1.0 + x1 + 0.5 * x2 + 2.0 * d as f64 + 0.2 * (unif() - 0.5);
        if with_parent {
            let parent = x1 + 0.1 * (unif() - 0.5);
            body.push_str(&format!("{y:.6},{d},{x1:.6},{x2:.6},{parent:.6}\n"));
        } else {
            body.push_str(&format!("{y:.6},{d},{x1:.6},{x2:.6}\n"));
        }
    }
    std::fs::write(path, body).unwrap();
}

fn write_mapping(path: &PathBuf, with_parent: bool) {
    let text = if with_parent {
        r#"{"outcome":"y","treatment":"d","covariates":["x1","x2"],"parental_outcome":"parent"}"#
    } else {
        r#"{"outcome":"y","treatment":"d","covariates":["x1","x2"]}"#
    };
    std::fs::write(path, text).unwrap();
}

#[test]
fn missing_dataset_file_exits_with_data_code() {
    let dir = workdir();
    let mapping = dir.join("m1.json");
    write_mapping(&mapping, false);
    let status = bin()
        .args(["report", "--data", "/nonexistent.csv", "--mapping", mapping.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn bad_mapping_column_exits_with_config_code() {
    let dir = workdir();
    let csv = dir.join("c2.csv");
    write_sample(&csv, 30, false);
    let mapping = dir.join("m2.json");
    std::fs::write(
        &mapping,
        r#"{"outcome":"y","treatment":"d","covariates":["x1","mother_edu"]}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "report",
            "--data",
            csv.to_str().unwrap(),
            "--mapping",
            mapping.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mother_edu"));
}

#[test]
fn bad_argument_exits_with_argument_code() {
    let dir = workdir();
    let csv = dir.join("c3.csv");
    write_sample(&csv, 30, false);
    let mapping = dir.join("m3.json");
    write_mapping(&mapping, false);
    let out = bin()
        .args([
            "report",
            "--data",
            csv.to_str().unwrap(),
            "--mapping",
            mapping.to_str().unwrap(),
            "--trim",
            "0.9",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn report_embeds_resolved_config_and_hash() {
    let dir = workdir();
    let csv = dir.join("c4.csv");
    write_sample(&csv, 60, false);
    let mapping = dir.join("m4.json");
    write_mapping(&mapping, false);
    let out_path = dir.join("r4.jsonl");
    let out = bin()
        .args([
            "report",
            "--data",
            csv.to_str().unwrap(),
            "--mapping",
            mapping.to_str().unwrap(),
            "--learner",
            "knn",
            "--folds",
            "3",
            "--seed",
            "11",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let body = std::fs::read_to_string(&out_path).unwrap();
    let first: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
    assert_eq!(first["record"], "config");
    assert_eq!(first["seed"], 11);
    assert_eq!(first["config"]["fit"]["learner"], "knn");
    let hash = first["hash"].as_str().unwrap().to_string();
    // Every subsequent record carries the same hash.
    for line in body.lines().skip(1) {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["hash"].as_str().unwrap(), hash);
    }
}

#[test]
fn uniformly_beneficial_scores_make_optimal_equal_treat_all() {
    let dir = workdir();
    let csv = dir.join("c5.csv");
    write_sample(&csv, 120, false);
    let mapping = dir.join("m5.json");
    write_mapping(&mapping, false);
    let out_path = dir.join("r5.jsonl");
    let out = bin()
        .args([
            "optimize",
            "--data",
            csv.to_str().unwrap(),
            "--mapping",
            mapping.to_str().unwrap(),
            "--family",
            "additive",
            "--depth",
            "1",
            "--grid",
            "quantiles:4",
            "--learner",
            "knn",
            "--k",
            "6",
            "--folds",
            "3",
            "--seed",
            "2",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&out_path).unwrap();
    let mut optimal = None;
    let mut treat_all = None;
    for line in body.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        if rec["record"] == "policy_row" {
            match rec["rule"].as_str().unwrap() {
                "optimal" => optimal = Some(rec.clone()),
                "treat_all" => treat_all = Some(rec.clone()),
                _ => {}
            }
        }
    }
    let (optimal, treat_all) = (optimal.unwrap(), treat_all.unwrap());
    // The effect is +2 everywhere: the optimal rule treats everyone.
    assert_eq!(optimal["share_treated"], treat_all["share_treated"]);
    assert_eq!(optimal["welfare"], treat_all["welfare"]);
}

#[test]
fn kendall_welfare_is_bounded_above_by_zero() {
    let dir = workdir();
    let csv = dir.join("c6.csv");
    write_sample(&csv, 100, true);
    let mapping = dir.join("m6.json");
    write_mapping(&mapping, true);
    let out_path = dir.join("r6.jsonl");
    let out = bin()
        .args([
            "optimize",
            "--data",
            csv.to_str().unwrap(),
            "--mapping",
            mapping.to_str().unwrap(),
            "--family",
            "kendall_tau",
            "--target-t",
            "0.0",
            "--depth",
            "1",
            "--grid",
            "quantiles:3",
            "--learner",
            "knn",
            "--k",
            "6",
            "--folds",
            "3",
            "--pair-cap",
            "2000",
            "--seed",
            "4",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&out_path).unwrap();
    let mut rows = 0;
    let mut optimal_welfare = f64::NEG_INFINITY;
    let mut constant_welfare = f64::NEG_INFINITY;
    for line in body.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        if rec["record"] == "policy_row" {
            rows += 1;
            let w = rec["welfare"].as_f64().unwrap();
            assert!(w <= 0.0, "kendall welfare must be <= 0, got {w}");
            match rec["rule"].as_str().unwrap() {
                "optimal" => optimal_welfare = w,
                _ => constant_welfare = constant_welfare.max(w),
            }
        }
    }
    assert_eq!(rows, 3);
    // The constants are inside the class, so the argmax dominates them.
    assert!(optimal_welfare >= constant_welfare);
}

#[test]
fn simulate_single_replication_completes() {
    let dir = workdir();
    let out_path = dir.join("r7.jsonl");
    let out = bin()
        .args([
            "simulate",
            "--dgp",
            "randomized",
            "--family",
            "additive",
            "--n-list",
            "120,240",
            "--reps",
            "1",
            "--depth",
            "0",
            "--mc-draws",
            "20000",
            "--learner",
            "knn",
            "--k",
            "6",
            "--folds",
            "3",
            "--seed",
            "8",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&out_path).unwrap();
    let points: Vec<serde_json::Value> = body
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .filter(|r: &serde_json::Value| r["record"] == "regret_point")
        .collect();
    // One row per requested n.
    assert_eq!(points.len(), 2);
}
