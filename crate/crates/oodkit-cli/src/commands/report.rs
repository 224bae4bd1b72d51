//! `oodkit report` — plot-ready CSV summaries: per-rank mean logit curves
//! and per-class score summaries for the given cohorts, plus a benchmark
//! table aggregated from the journal's eval records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use oodkit::datastore::{fmt_f64, Matrix};
use oodkit::scoring::score_batch;
use oodkit::theorylab::logit_statistics;

use crate::commands::{argmax, load_matrix_fingerprinted, pick, pick_opt, resolve_scorer};
use crate::config::ConfigFile;
use crate::record;
use crate::{CliError, ReportArgs};

pub fn run(args: &ReportArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.report;
    let scorer = resolve_scorer(&args.scorer, &sec.scorer)?;
    let out_dir = pick(args.out.clone(), sec.out.clone(), PathBuf::from("report"));

    let mut cohorts: Vec<(&'static str, Matrix)> = Vec::new();
    if let Some(path) = pick_opt(args.input.clone(), sec.input.clone()) {
        cohorts.push(("id", load_matrix_fingerprinted(&path)?.0));
    }
    if let Some(path) = pick_opt(args.ood.clone(), sec.ood.clone()) {
        cohorts.push(("ood", load_matrix_fingerprinted(&path)?.0));
    }
    let evals: Vec<_> = record::read_journal(journal)?
        .into_iter()
        .filter(|r| r.command == "eval")
        .collect();
    if cohorts.is_empty() && evals.is_empty() {
        return Err(CliError::Config(
            "nothing to report: give --input/--ood logits or a journal with eval records".into(),
        ));
    }

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();

    if !cohorts.is_empty() {
        let path = out_dir.join("rank_curve.csv");
        write_file(&path, &rank_curve_csv(&cohorts, &scorer)?)?;
        written.push(path);

        let path = out_dir.join("class_summary.csv");
        write_file(&path, &class_summary_csv(&cohorts, &scorer)?)?;
        written.push(path);
    }
    if !evals.is_empty() {
        let path = out_dir.join("benchmark.csv");
        write_file(&path, &benchmark_csv(&evals)?)?;
        written.push(path);
    }

    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Mean sorted logit per rank, one block per cohort. The curve makes the
/// informative-rank cutoff visible: ranks past it carry no ID/OOD contrast.
fn rank_curve_csv(
    cohorts: &[(&'static str, Matrix)],
    scorer: &oodkit::scoring::ScorerConfig,
) -> Result<String, CliError> {
    let mut out = String::from("rank,mean_logit,cohort\n");
    for (name, m) in cohorts {
        let top_n = scorer.top_n.unwrap_or(m.cols()).min(m.cols());
        let stats = logit_statistics(m, top_n)?;
        for (i, &v) in stats.rank_curve.iter().enumerate() {
            out.push_str(&format!("{},{},{name}\n", i + 1, fmt_f64(v)));
        }
    }
    Ok(out)
}

/// Score distribution per (cohort, argmax class).
fn class_summary_csv(
    cohorts: &[(&'static str, Matrix)],
    scorer: &oodkit::scoring::ScorerConfig,
) -> Result<String, CliError> {
    let mut out = String::from("cohort,predicted_class,count,mean_score,min_score,max_score\n");
    for (name, m) in cohorts {
        let scores = score_batch(m, scorer)?;
        let mut groups: BTreeMap<usize, (usize, f64, f64, f64)> = BTreeMap::new();
        for (row, &s) in m.row_iter().zip(scores.scores()) {
            let entry =
                groups
                    .entry(argmax(row))
                    .or_insert((0, 0.0, f64::INFINITY, f64::NEG_INFINITY));
            entry.0 += 1;
            entry.1 += s;
            entry.2 = entry.2.min(s);
            entry.3 = entry.3.max(s);
        }
        for (class, (count, sum, lo, hi)) in groups {
            out.push_str(&format!(
                "{name},{class},{count},{},{},{}\n",
                fmt_f64(sum / count as f64),
                fmt_f64(lo),
                fmt_f64(hi)
            ));
        }
    }
    Ok(out)
}

/// Benchmark table: journal eval records grouped by (method, dataset) with
/// per-group run counts and mean metrics.
fn benchmark_csv(evals: &[record::RunRecord]) -> Result<String, CliError> {
    let mut groups: BTreeMap<(String, String), (usize, f64, f64, f64)> = BTreeMap::new();
    for rec in evals {
        let label = |key: &str| {
            rec.config
                .get(key)
                .and_then(|v| v.as_str())
                .unwrap_or("unknown")
                .to_string()
        };
        let metric = |key: &str| -> Result<f64, CliError> {
            rec.payload
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| {
                    CliError::Data(format!("journal eval record lacks a numeric {key:?}"))
                })
        };
        let entry = groups
            .entry((label("method"), label("dataset")))
            .or_insert((0, 0.0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += metric("fpr95")?;
        entry.2 += metric("auroc")?;
        entry.3 += metric("aupr")?;
    }
    let mut out = String::from("method,dataset,runs,fpr95,auroc,aupr_in\n");
    for ((method, dataset), (runs, fpr, auroc, aupr)) in groups {
        let n = runs as f64;
        out.push_str(&format!(
            "{method},{dataset},{runs},{},{},{}\n",
            fmt_f64(fpr / n),
            fmt_f64(auroc / n),
            fmt_f64(aupr / n)
        ));
    }
    Ok(out)
}
