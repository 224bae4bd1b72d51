//! `oodkit score` — score a logit matrix, or features projected through
//! class prototypes, and write the resulting score file.

use std::path::PathBuf;

use oodkit::datastore::{self, Format};
use oodkit::projection::{cosine_logits, PrototypeSet};
use oodkit::scoring::score_batch;

use crate::commands::{parse_matrix_format, pick, pick_opt, resolve_scorer};
use crate::config::ConfigFile;
use crate::{CliError, ScoreArgs};

pub fn run(args: &ScoreArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let sec = &cfg.score;
    let scorer = resolve_scorer(&args.scorer, &sec.scorer)?;

    // A flag-level input wins outright; only when neither flag is present
    // do the config paths apply, and then they must not conflict.
    let (input, features) = if args.input.is_some() {
        (args.input.clone(), None)
    } else if args.features.is_some() {
        (None, args.features.clone())
    } else {
        match (&sec.input, &sec.features) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "config sets both score.input and score.features; keep one".into(),
                ))
            }
            (i, f) => (i.clone(), f.clone()),
        }
    };

    let logits = match (input, features) {
        (Some(path), None) => datastore::load_matrix(&path, Format::Auto)?,
        (None, Some(fpath)) => {
            let ppath =
                pick_opt(args.prototypes.clone(), sec.prototypes.clone()).ok_or_else(|| {
                    CliError::Config("--features needs --prototypes to project through".into())
                })?;
            let scale = pick(args.scale, sec.scale, 1.0);
            let (feat, _labels) = datastore::load_matrix_with_labels(&fpath, Format::Auto)?;
            let protos = PrototypeSet::normalize(&datastore::load_matrix(&ppath, Format::Auto)?)?;
            cosine_logits(&feat, &protos, scale)?
        }
        _ => {
            return Err(CliError::Config(
                "score needs --input LOGITS or --features FEATURES --prototypes PROTOS".into(),
            ))
        }
    };

    let scores = score_batch(&logits, &scorer)?;
    let out = pick(
        args.out.clone(),
        sec.out.clone(),
        PathBuf::from("scores.csv"),
    );
    let format = parse_matrix_format(&pick(
        args.format.clone(),
        sec.format.clone(),
        "csv".to_string(),
    ))?;
    scores.save(&out, format)?;

    let s = scores.scores();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in s {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    println!(
        "scored {} rows with {}: min {:.6} mean {:.6} max {:.6}",
        s.len(),
        scorer.method.name(),
        lo,
        sum / s.len() as f64,
        hi
    );
    println!("wrote {}", out.display());
    Ok(0)
}
