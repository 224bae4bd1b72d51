//! `oodkit eval` — compute detection metrics for an ID/OOD score-file pair,
//! journal the result, and optionally write a metrics table.

use std::path::Path;

use oodkit::datastore::fmt_f64;
use oodkit::metrics::{evaluate, EvalResult};
use oodkit::scoring::load_scores;
use serde_json::json;

use crate::commands::{pick, pick_opt};
use crate::config::ConfigFile;
use crate::record::{self, RunRecord};
use crate::{CliError, EvalArgs};

pub fn run(args: &EvalArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.eval;
    let id_scores = load_scores(&args.id_scores)?;
    let ood_scores = load_scores(&args.ood_scores)?;
    let result = evaluate(&id_scores, &ood_scores)?;

    let method = pick(
        args.method.clone(),
        sec.method.clone(),
        "unknown".to_string(),
    );
    let dataset = pick_opt(args.dataset.clone(), sec.dataset.clone()).unwrap_or_else(|| {
        args.ood_scores
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".to_string())
    });

    let inputs = vec![
        record::fingerprint(&args.id_scores, id_scores.len(), 1)?,
        record::fingerprint(&args.ood_scores, ood_scores.len(), 1)?,
    ];
    let config_echo = json!({
        "method": method,
        "dataset": dataset,
        "id_scores": args.id_scores.display().to_string(),
        "ood_scores": args.ood_scores.display().to_string(),
    });
    let payload = serde_json::to_value(&result)
        .map_err(|e| CliError::Data(format!("cannot encode metrics: {e}")))?;
    record::append_journal(
        journal,
        &RunRecord::new("eval", config_echo, inputs, payload),
    )?;

    println!(
        "{method} vs {dataset}: FPR95 {:.4}  AUROC {:.4}  AUPR-In {:.4}  (lambda95 {:.6}, {} ID vs {} OOD)",
        result.fpr95, result.auroc, result.aupr, result.lambda95, result.n_id, result.n_ood
    );

    if let Some(out) = pick_opt(args.out.clone(), sec.out.clone()) {
        let format = pick(args.format.clone(), sec.format.clone(), "csv".to_string());
        let table = render_table(&format, &method, &dataset, &result)?;
        std::fs::write(&out, table)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(0)
}

/// One-row metrics table. CSV and JSON-lines keep full precision for
/// machine use; the markdown form rounds to four places for humans.
fn render_table(
    format: &str,
    method: &str,
    dataset: &str,
    r: &EvalResult,
) -> Result<String, CliError> {
    match format {
        "jsonl" => {
            let row = json!({
                "method": method,
                "dataset": dataset,
                "fpr95": r.fpr95,
                "auroc": r.auroc,
                "aupr_in": r.aupr,
                "lambda95": r.lambda95,
                "n_id": r.n_id,
                "n_ood": r.n_ood,
            });
            Ok(format!("{row}\n"))
        }
        "csv" => Ok(format!(
            "method,dataset,fpr95,auroc,aupr_in,lambda95,n_id,n_ood\n{method},{dataset},{},{},{},{},{},{}\n",
            fmt_f64(r.fpr95),
            fmt_f64(r.auroc),
            fmt_f64(r.aupr),
            fmt_f64(r.lambda95),
            r.n_id,
            r.n_ood
        )),
        "markdown" => Ok(format!(
            "| Method | Dataset | FPR95 \u{2193} | AUROC \u{2191} | AUPR-In \u{2191} |\n\
             |---|---|---|---|---|\n\
             | {method} | {dataset} | {:.4} | {:.4} | {:.4} |\n",
            r.fpr95, r.auroc, r.aupr
        )),
        other => Err(CliError::Config(format!(
            "unknown table format {other:?} (want csv, markdown, or jsonl)"
        ))),
    }
}
