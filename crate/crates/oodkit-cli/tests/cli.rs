//! End-to-end tests of the `oodkit` binary: every subcommand, the
//! flag/config precedence ladder, the exit-code contract, and
//! byte-level determinism of seeded outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oodkit(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_oodkit"));
    cmd.current_dir(dir);
    // Pin timestamps so journal lines from repeat runs are comparable.
    cmd.env("SOURCE_DATE_EPOCH", "0");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed (exit {:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_scores(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn score_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = oodkit(dir.path())
        .args(["score", "--input"])
        .arg(fixture("toy_logits.csv"))
        .args(["--method", "logitgap", "--out", "lg.csv"])
        .output()
        .unwrap();
    assert_ok(&out);
    let scores = read_scores(&dir.path().join("lg.csv"));
    assert_eq!(scores.len(), 2);
    assert!((scores[0] - 1.5404).abs() < 1e-4);
    assert!((scores[1] - 1.54265).abs() < 1e-4);

    let out = oodkit(dir.path())
        .args(["score", "--input"])
        .arg(fixture("toy_logits.csv"))
        .args(["--method", "mcm", "--tau", "1", "--out", "mcm.csv"])
        .output()
        .unwrap();
    assert_ok(&out);
    for s in read_scores(&dir.path().join("mcm.csv")) {
        assert!((s - 0.70).abs() < 0.005);
    }
}

#[test]
fn score_projects_features_through_prototypes() {
    let dir = tempfile::tempdir().unwrap();
    let out = oodkit(dir.path())
        .args(["score", "--features"])
        .arg(fixture("toy_features.csv"))
        .arg("--prototypes")
        .arg(fixture("toy_prototypes.csv"))
        .args(["--scale", "10", "--method", "maxlogit", "--out", "s.csv"])
        .output()
        .unwrap();
    assert_ok(&out);
    let scores = read_scores(&dir.path().join("s.csv"));
    assert_eq!(scores.len(), 60);
    // Cosine logits scaled by 10 stay within [-10, 10].
    assert!(scores.iter().all(|&s| (-10.0..=10.0).contains(&s)));
}

#[test]
fn bad_parameters_exit_2_and_missing_files_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // top_n below 2 is a parameter error.
    let out = oodkit(dir.path())
        .args(["score", "--input"])
        .arg(fixture("toy_logits.csv"))
        .args(["--method", "logitgap_topn", "--top-n", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Contradictory flags are caught by the parser, also exit 2.
    let out = oodkit(dir.path())
        .args(["score", "--input", "a.csv", "--features", "b.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A nonexistent input is a data error.
    let out = oodkit(dir.path())
        .args(["score", "--input", "no_such_file.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_journals_each_run_and_reports_the_reference_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        let out = oodkit(dir.path())
            .arg("eval")
            .arg(fixture("metrics_id_scores.csv"))
            .arg(fixture("metrics_ood_scores.csv"))
            .args(["--method", "logitgap", "--dataset", "toy"])
            .output()
            .unwrap();
        assert_ok(&out);
    }
    let journal = std::fs::read_to_string(dir.path().join("oodkit-journal.jsonl")).unwrap();
    let lines: Vec<&str> = journal.lines().collect();
    assert_eq!(lines.len(), 2, "each eval run appends exactly one line");
    for line in lines {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["command"], "eval");
        assert_eq!(rec["config"]["method"], "logitgap");
        assert_eq!(rec["config"]["dataset"], "toy");
        assert_eq!(rec["inputs"].as_array().unwrap().len(), 2);
        assert_eq!(rec["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
        let p = &rec["payload"];
        assert!((p["fpr95"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!((p["auroc"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((p["aupr"].as_f64().unwrap() - 29.0 / 36.0).abs() < 1e-12);
        assert_eq!(p["n_id"], 3);
        assert_eq!(p["n_ood"], 2);
    }
}

#[test]
fn eval_writes_csv_and_markdown_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = oodkit(dir.path())
        .arg("eval")
        .arg(fixture("metrics_id_scores.csv"))
        .arg(fixture("metrics_ood_scores.csv"))
        .args([
            "--method",
            "lg",
            "--dataset",
            "toy",
            "--out",
            "t.csv",
            "--format",
            "csv",
        ])
        .output()
        .unwrap();
    assert_ok(&out);
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(table.starts_with("method,dataset,fpr95,auroc,aupr_in,lambda95,n_id,n_ood\n"));
    assert!(table.contains("lg,toy,5.0000000000000000e-1,"));

    let out = oodkit(dir.path())
        .arg("eval")
        .arg(fixture("metrics_id_scores.csv"))
        .arg(fixture("metrics_ood_scores.csv"))
        .args(["--method", "lg", "--out", "t.md", "--format", "markdown"])
        .output()
        .unwrap();
    assert_ok(&out);
    let table = std::fs::read_to_string(dir.path().join("t.md")).unwrap();
    assert!(table.contains("FPR95 \u{2193}"));
    assert!(table.contains("| lg | metrics_ood_scores | 0.5000 | 0.6667 | 0.8056 |"));

    let out = oodkit(dir.path())
        .arg("eval")
        .arg(fixture("metrics_id_scores.csv"))
        .arg(fixture("metrics_ood_scores.csv"))
        .args(["--method", "lg", "--out", "t.jsonl", "--format", "jsonl"])
        .output()
        .unwrap();
    assert_ok(&out);
    let row: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap())
            .unwrap();
    assert_eq!(row["method"], "lg");
    assert!((row["aupr_in"].as_f64().unwrap() - 29.0 / 36.0).abs() < 1e-12);
}

#[test]
fn select_n_is_deterministic_and_supports_the_fixed_rule() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out_name: &str| {
        let out = oodkit(dir.path())
            .args(["select-n", "--features"])
            .arg(fixture("toy_features.csv"))
            .arg("--prototypes")
            .arg(fixture("toy_prototypes.csv"))
            .args(["--scale", "10", "--alpha", "0.5", "--val-size", "40"])
            .args(["--seed", "11", "--out", out_name])
            .output()
            .unwrap();
        assert_ok(&out);
        std::fs::read(dir.path().join(out_name)).unwrap()
    };
    let first = run("a.json");
    let second = run("b.json");
    assert_eq!(
        first, second,
        "same seed must give byte-identical selections"
    );

    let doc: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(doc["rule"], "maxgap");
    assert_eq!(doc["n_min"], 2);
    assert_eq!(doc["n_max"], 3);
    // The curve covers every N in [n_min, n_max].
    assert_eq!(doc["gap_curve"].as_array().unwrap().len(), 2);
    let n_star = doc["n_star"].as_u64().unwrap();
    assert!((2..=3).contains(&n_star));

    let out = oodkit(dir.path())
        .args(["select-n", "--fixed", "--k", "100"])
        .output()
        .unwrap();
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        stdout.contains("n_star = 20"),
        "fixed rule for K=100: {stdout}"
    );
}

#[test]
fn synth_ood_with_one_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out_name: &str| {
        let out = oodkit(dir.path())
            .args(["synth-ood", "--features"])
            .arg(fixture("toy_features.csv"))
            .args(["--count", "25", "--seed", "9", "--out", out_name])
            .output()
            .unwrap();
        assert_ok(&out);
        std::fs::read(dir.path().join(out_name)).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 26, "header plus 25 synthetic rows");
    assert!(text.starts_with("c0,c1,"));
}

#[test]
fn simulate_passes_on_sound_worlds_and_rejects_ill_trained_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = oodkit(dir.path())
        .args(["simulate", "--theorem", "nonmax-order", "--input"])
        .arg(fixture("world_default.json"))
        .args(["--samples", "4000", "--out", "r.json"])
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASSED"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["name"], "nonmax-order");
    assert_eq!(report["passed"], true);
    assert_eq!(report["samples"], 4000);

    // Swap the classifier rows: each class now projects onto the other
    // class's direction, which the check must refuse to score.
    let mut world: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("world_default.json")).unwrap())
            .unwrap();
    let w = world["w"].as_array().unwrap().clone();
    world["w"] = serde_json::json!([w[1], w[0]]);
    let ill = dir.path().join("ill_world.json");
    std::fs::write(&ill, serde_json::to_string(&world).unwrap()).unwrap();
    let out = oodkit(dir.path())
        .args(["simulate", "--theorem", "nonmax-order", "--input"])
        .arg(&ill)
        .args(["--samples", "100"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "ill-trained world is a domain error"
    );

    let out = oodkit(dir.path())
        .args(["simulate", "--theorem", "mcm-dominance"])
        .args(["--k", "6", "--samples", "2000", "--seed", "7"])
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASSED"));
}

#[test]
fn flags_override_config_values_which_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{ "score": { "method": "mcm", "tau": 2.0 } }"#,
    )
    .unwrap();

    // Config alone: mcm at tau = 2.
    let out = oodkit(dir.path())
        .args(["score", "--config", "run.json", "--input"])
        .arg(fixture("toy_logits.csv"))
        .args(["--out", "cfg.csv"])
        .output()
        .unwrap();
    assert_ok(&out);
    let cfg_scores = read_scores(&dir.path().join("cfg.csv"));

    // Flag overrides the config's tau; method still comes from the config.
    let out = oodkit(dir.path())
        .args(["score", "--config", "run.json", "--input"])
        .arg(fixture("toy_logits.csv"))
        .args(["--tau", "1", "--out", "flag.csv"])
        .output()
        .unwrap();
    assert_ok(&out);
    let flag_scores = read_scores(&dir.path().join("flag.csv"));

    for s in &flag_scores {
        assert!(
            (s - 0.70).abs() < 0.005,
            "tau=1 mcm should be near 0.70, got {s}"
        );
    }
    assert!(
        (cfg_scores[0] - flag_scores[0]).abs() > 0.01,
        "tau=2 and tau=1 must score differently"
    );

    // An unknown config key is a configuration error.
    std::fs::write(dir.path().join("bad.json"), r#"{ "scoer": {} }"#).unwrap();
    let out = oodkit(dir.path())
        .args(["score", "--config", "bad.json", "--input"])
        .arg(fixture("toy_logits.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_emits_rank_curve_class_summary_and_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = oodkit(dir.path())
        .arg("eval")
        .arg(fixture("metrics_id_scores.csv"))
        .arg(fixture("metrics_ood_scores.csv"))
        .args(["--method", "logitgap", "--dataset", "toy"])
        .output()
        .unwrap();
    assert_ok(&out);

    let out = oodkit(dir.path())
        .args(["report", "--input"])
        .arg(fixture("toy_logits.csv"))
        .arg("--ood")
        .arg(fixture("toy_logits.csv"))
        .args(["--method", "logitgap", "--out", "rpt"])
        .output()
        .unwrap();
    assert_ok(&out);

    let rank = std::fs::read_to_string(dir.path().join("rpt/rank_curve.csv")).unwrap();
    assert!(rank.starts_with("rank,mean_logit,cohort\n"));
    // Two cohorts, three classes each: six curve points.
    assert_eq!(rank.lines().count(), 7);

    let class = std::fs::read_to_string(dir.path().join("rpt/class_summary.csv")).unwrap();
    assert!(class.starts_with("cohort,predicted_class,count,mean_score,min_score,max_score\n"));

    let bench = std::fs::read_to_string(dir.path().join("rpt/benchmark.csv")).unwrap();
    assert!(bench.starts_with("method,dataset,runs,fpr95,auroc,aupr_in\n"));
    assert!(bench.contains("logitgap,toy,1,"));

    // With no inputs and an empty journal there is nothing to report.
    let empty = tempfile::tempdir().unwrap();
    let out = oodkit(empty.path()).arg("report").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
