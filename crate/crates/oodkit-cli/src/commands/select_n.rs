//! `oodkit select-n` — choose the top-N logit subspace, either with the
//! adaptive synthetic-outlier max-gap search or with the fixed
//! class-count rule.

use std::path::Path;

use oodkit::datastore::{self, Format};
use oodkit::projection::PrototypeSet;
use oodkit::selection::{fixed_n, select_n_pipeline};
use serde_json::json;

use crate::commands::{load_matrix_fingerprinted, pick, pick_opt, resolve_synthesis, SynthInputs};
use crate::config::ConfigFile;
use crate::record::{self, RunRecord};
use crate::{CliError, SelectNArgs};

pub fn run(args: &SelectNArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.select_n;
    if args.fixed || sec.fixed.unwrap_or(false) {
        run_fixed(args, cfg, journal)
    } else {
        run_adaptive(args, cfg, journal)
    }
}

/// The deterministic fallback: N from the class count alone.
fn run_fixed(args: &SelectNArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.select_n;
    let mut inputs = Vec::new();
    let k = if let Some(k) = pick_opt(args.k, sec.k) {
        k
    } else if let Some(ppath) = pick_opt(args.prototypes.clone(), sec.prototypes.clone()) {
        let (protos, fp) = load_matrix_fingerprinted(&ppath)?;
        inputs.push(fp);
        protos.rows()
    } else if let Some(lpath) = pick_opt(args.labels.clone(), sec.labels.clone()) {
        let labels = datastore::load_labels(&lpath)?;
        inputs.push(record::fingerprint(&lpath, labels.len(), 1)?);
        labels.num_classes()
    } else {
        return Err(CliError::Config(
            "--fixed needs the class count: give --k, --prototypes, or --labels".into(),
        ));
    };
    let n_star = fixed_n(k)?;

    let config_echo = json!({ "rule": "fixed", "k": k });
    let payload = json!({ "rule": "fixed", "k": k, "n_star": n_star });
    record::append_journal(
        journal,
        &RunRecord::new("select-n", config_echo, inputs, payload.clone()),
    )?;
    println!("n_star = {n_star} (fixed rule, K = {k})");
    write_out(args, cfg, &payload)?;
    Ok(0)
}

/// The adaptive search: synthesize outliers from the training features,
/// score both cohorts at every candidate N, take the N with the widest
/// ID/OOD gap.
fn run_adaptive(args: &SelectNArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.select_n;
    let fpath = pick_opt(args.features.clone(), sec.features.clone())
        .ok_or_else(|| CliError::Config("select-n needs --features".into()))?;
    let ppath = pick_opt(args.prototypes.clone(), sec.prototypes.clone())
        .ok_or_else(|| CliError::Config("select-n needs --prototypes".into()))?;

    let (features, embedded) = datastore::load_matrix_with_labels(&fpath, Format::Auto)?;
    let mut inputs = vec![record::fingerprint(
        &fpath,
        features.rows(),
        features.cols(),
    )?];
    let labels = match pick_opt(args.labels.clone(), sec.labels.clone()) {
        Some(lpath) => {
            let labels = datastore::load_labels(&lpath)?;
            inputs.push(record::fingerprint(&lpath, labels.len(), 1)?);
            labels
        }
        None => embedded.ok_or_else(|| {
            CliError::Config(
                "no labels: give --labels or embed a `label` column in the features".into(),
            )
        })?,
    };
    let (proto_matrix, proto_fp) = load_matrix_fingerprinted(&ppath)?;
    inputs.push(proto_fp);
    let protos = PrototypeSet::normalize(&proto_matrix)?;

    let scale = pick(args.scale, sec.scale, 1.0);
    let syn = resolve_synthesis(
        SynthInputs {
            alpha: args.alpha,
            beta: args.beta,
            val_size: args.val_size,
            count: args.count,
            seed: args.seed,
            pair_policy: None,
        },
        SynthInputs {
            alpha: sec.alpha,
            beta: sec.beta,
            val_size: sec.val_size,
            count: sec.count,
            seed: sec.seed,
            pair_policy: sec.pair_policy.clone(),
        },
    )?;
    let n_range = match (
        pick_opt(args.n_min, sec.n_min),
        pick_opt(args.n_max, sec.n_max),
    ) {
        (None, None) => None,
        (mn, mx) => Some((mn.unwrap_or(2), mx.unwrap_or(protos.num_classes()))),
    };

    let selection = select_n_pipeline(&features, &labels, &protos, scale, &syn, n_range)?;

    let config_echo = json!({
        "rule": "maxgap",
        "features": fpath.display().to_string(),
        "prototypes": ppath.display().to_string(),
        "scale": scale,
        "synthesis": syn,
        "n_range": n_range,
    });
    let mut payload = serde_json::to_value(&selection)
        .map_err(|e| CliError::Data(format!("cannot encode selection: {e}")))?;
    payload["rule"] = json!("maxgap");
    record::append_journal(
        journal,
        &RunRecord::new("select-n", config_echo, inputs, payload.clone()),
    )?;
    println!(
        "n_star = {} (max-gap over N in [{}, {}])",
        selection.n_star, selection.n_min, selection.n_max
    );
    write_out(args, cfg, &payload)?;
    Ok(0)
}

fn write_out(
    args: &SelectNArgs,
    cfg: &ConfigFile,
    payload: &serde_json::Value,
) -> Result<(), CliError> {
    if let Some(out) = pick_opt(args.out.clone(), cfg.select_n.out.clone()) {
        let text = serde_json::to_string_pretty(payload)
            .map_err(|e| CliError::Data(format!("cannot encode selection: {e}")))?;
        std::fs::write(&out, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
