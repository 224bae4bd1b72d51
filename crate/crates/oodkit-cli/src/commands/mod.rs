//! One submodule per subcommand, plus the flag/config/default resolution
//! helpers they share.

pub mod eval;
pub mod report;
pub mod score;
pub mod select_n;
pub mod simulate;
pub mod synth_ood;

use std::path::Path;

use oodkit::datastore::{self, Format, Matrix};
use oodkit::scoring::ScorerConfig;
use oodkit::selection::SynthesisConfig;

use crate::config::{self, ScorerSection};
use crate::record::{self, FileFingerprint};
use crate::{CliError, ScorerFlags};

/// Resolution ladder for a required setting: flag → config → default.
pub fn pick<T>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}

/// Resolution ladder for an optional setting: flag → config → absent.
pub fn pick_opt<T>(flag: Option<T>, cfg: Option<T>) -> Option<T> {
    flag.or(cfg)
}

/// Merge scorer flags over a config section onto the library defaults.
pub fn resolve_scorer(
    flags: &ScorerFlags,
    section: &ScorerSection,
) -> Result<ScorerConfig, CliError> {
    let method = match (flags.method, &section.method) {
        (Some(m), _) => m,
        (None, Some(s)) => config::parse_setting(s, "method")?,
        (None, None) => oodkit::scoring::Method::Logitgap,
    };
    let mut cfg = ScorerConfig::new(method);
    cfg.tau = pick(flags.tau, section.tau, cfg.tau);
    cfg.top_n = pick_opt(flags.top_n, section.top_n);
    cfg.gamma = pick(flags.gamma, section.gamma, cfg.gamma);
    cfg.gen_m = pick_opt(flags.gen_m, section.gen_m);
    cfg.energy_t = pick(flags.energy_t, section.energy_t, cfg.energy_t);
    cfg.transform = match (flags.transform, &section.transform) {
        (Some(t), _) => t,
        (None, Some(s)) => config::parse_setting(s, "transform")?,
        (None, None) => cfg.transform,
    };
    cfg.normalization = match (flags.normalization, &section.normalization) {
        (Some(n), _) => n,
        (None, Some(s)) => config::parse_setting(s, "normalization")?,
        (None, None) => cfg.normalization,
    };
    Ok(cfg)
}

/// Inputs to synthesis resolution, from either flags or a config section.
#[derive(Default)]
pub struct SynthInputs {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub val_size: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub pair_policy: Option<String>,
}

/// Merge synthesis flags over a config section onto the library defaults.
pub fn resolve_synthesis(
    flag: SynthInputs,
    cfgv: SynthInputs,
) -> Result<SynthesisConfig, CliError> {
    let mut syn = SynthesisConfig::default();
    syn.alpha = pick(flag.alpha, cfgv.alpha, syn.alpha);
    syn.beta = pick_opt(flag.beta, cfgv.beta).or(syn.beta);
    syn.val_size = pick(flag.val_size, cfgv.val_size, syn.val_size);
    syn.count = pick_opt(flag.count, cfgv.count).or(syn.count);
    syn.seed = pick(flag.seed, cfgv.seed, syn.seed);
    if let Some(pp) = pick_opt(flag.pair_policy, cfgv.pair_policy) {
        syn.pair_policy = config::parse_setting(&pp, "pair_policy")?;
    }
    Ok(syn)
}

/// Parse an output-format choice for matrix/score files.
pub fn parse_matrix_format(s: &str) -> Result<Format, CliError> {
    match s {
        "csv" => Ok(Format::Csv),
        "binary" => Ok(Format::Binary),
        other => Err(CliError::Config(format!(
            "unknown output format {other:?} (want csv or binary)"
        ))),
    }
}

/// Load a matrix (auto-detecting the container) and fingerprint the file.
pub fn load_matrix_fingerprinted(path: &Path) -> Result<(Matrix, FileFingerprint), CliError> {
    let m = datastore::load_matrix(path, Format::Auto)?;
    let fp = record::fingerprint(path, m.rows(), m.cols())?;
    Ok((m, fp))
}

/// Index of the largest entry in a row (first index on ties).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
