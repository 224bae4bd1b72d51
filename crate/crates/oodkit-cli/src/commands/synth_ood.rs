//! `oodkit synth-ood` — standalone synthetic-outlier generation by
//! convex interpolation between samples of different classes.

use std::path::PathBuf;

use oodkit::datastore::{self, Format};
use oodkit::selection::synthesize_ood;

use crate::commands::{parse_matrix_format, pick, pick_opt, resolve_synthesis, SynthInputs};
use crate::config::ConfigFile;
use crate::{CliError, SynthOodArgs};

pub fn run(args: &SynthOodArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let sec = &cfg.synth_ood;
    let fpath = pick_opt(args.features.clone(), sec.features.clone())
        .ok_or_else(|| CliError::Config("synth-ood needs --features".into()))?;
    let (features, embedded) = datastore::load_matrix_with_labels(&fpath, Format::Auto)?;
    let labels = match pick_opt(args.labels.clone(), sec.labels.clone()) {
        Some(lpath) => datastore::load_labels(&lpath)?,
        None => embedded.ok_or_else(|| {
            CliError::Config(
                "no labels: give --labels or embed a `label` column in the features".into(),
            )
        })?,
    };
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

    let synthetic = synthesize_ood(&features, &labels, &syn)?;
    let out = pick(
        args.out.clone(),
        sec.out.clone(),
        PathBuf::from("synth_ood.csv"),
    );
    let format = parse_matrix_format(&pick(
        args.format.clone(),
        sec.format.clone(),
        "csv".to_string(),
    ))?;
    datastore::save_matrix(&synthetic, &out, format)?;
    println!(
        "synthesized {} outliers (alpha {}, beta {}, seed {})",
        synthetic.rows(),
        syn.alpha,
        syn.resolved_beta(labels.num_classes()),
        syn.seed
    );
    println!("wrote {}", out.display());
    Ok(0)
}
