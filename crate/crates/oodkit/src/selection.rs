//! Top-N subspace selection.
//!
//! Restricting the gap score to the N largest logits suppresses the noisy
//! low-rank tail. This module provides the three ways to pick N:
//!
//! * [`fixed_n`] — the class-count rule: 20% of K for K >= 50, 50% of K for
//!   smaller K (clamped to at least 2).
//! * [`select_n_maxgap`] — given ID and OOD logit cohorts, pick the N that
//!   maximizes the gap between the cohorts' mean tail statistics
//!   `E_OOD[z̄'_N] - E_ID[z̄'_N]`, where `z̄'_N` is the mean of the logits
//!   ranked 2nd through N-th. Because both cohorts share the `E[z'_1]` term,
//!   this argmax equals the argmax of the mean score difference of the
//!   top-N gap scorer — the expensive scorer never needs to run.
//! * [`select_n_pipeline`] — the adaptive end-to-end path with no real OOD
//!   data: sample a small ID validation subset, synthesize outlier features
//!   by inter-class interpolation plus Gaussian noise ([`synthesize_ood`]),
//!   project both through cosine logits, and run the max-gap search.
//!
//! ## Determinism
//!
//! All randomness flows from one 64-bit seed through ChaCha12 streams with a
//! fixed draw order: synthesis uses stream 0, drawing per output row the
//! pair indices `i`, then `j` (rejection-sampled under the inter-class
//! policy), then d standard-normal noise values; the validation-subset draw
//! uses stream 1 (a partial Fisher-Yates shuffle). Row curves are computed
//! in parallel but reduced serially in row order, so every result is
//! byte-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::{LabelVector, Matrix};
use crate::error::{Error, Result};
use crate::projection::{cosine_logits, PrototypeSet};

/// How interpolation pairs are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    /// The two samples must carry different labels (the default).
    InterClass,
    /// Any pair, labels ignored (ablation knob).
    Any,
}

impl std::str::FromStr for PairPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inter_class" => Ok(PairPolicy::InterClass),
            "any" => Ok(PairPolicy::Any),
            _ => Err(Error::InvalidParameter {
                name: "pair_policy",
                detail: format!("unknown pair policy `{s}` (expected inter_class or any)"),
            }),
        }
    }
}

/// Parameters of synthetic outlier generation
/// `x_OOD = α·x_i + (1-α)·x_j + β·N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Mixing coefficient between the two parent samples.
    pub alpha: f64,
    /// Noise weight. `None` resolves by class count at synthesis time:
    /// 0.8 when K >= 50, 0.0 otherwise (small label spaces need no noise).
    pub beta: Option<f64>,
    /// Size of the ID validation subset the pipeline samples.
    pub val_size: usize,
    /// Synthetic samples to produce; `None` means `val_size`.
    pub count: Option<usize>,
    pub seed: u64,
    pub pair_policy: PairPolicy,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            alpha: 0.3,
            beta: None,
            val_size: 100,
            count: None,
            seed: 0,
            pair_policy: PairPolicy::InterClass,
        }
    }
}

/// Class-count threshold separating the "large K" and "small K" defaults
/// (both the fixed-N rule and the noise-weight default switch here).
pub const LARGE_K_THRESHOLD: usize = 50;

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                detail: format!("must be in [0, 1], got {}", self.alpha),
            });
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    detail: format!("must be nonnegative, got {b}"),
                });
            }
        }
        if self.val_size < 2 {
            return Err(Error::InvalidParameter {
                name: "val_size",
                detail: format!("must be >= 2, got {}", self.val_size),
            });
        }
        if self.count == Some(0) {
            return Err(Error::InvalidParameter {
                name: "count",
                detail: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// Noise weight after applying the class-count default.
    pub fn resolved_beta(&self, k: usize) -> f64 {
        self.beta
            .unwrap_or(if k >= LARGE_K_THRESHOLD { 0.8 } else { 0.0 })
    }

    /// Synthetic sample count after applying the `val_size` default.
    pub fn resolved_count(&self) -> usize {
        self.count.unwrap_or(self.val_size)
    }
}

/// Outcome of a max-gap N search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSelection {
    /// The selected N (smallest argmax of `gap_curve`).
    pub n_star: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// `gap_curve[i]` = `E_OOD[z̄'_N] - E_ID[z̄'_N]` at N = `n_min + i`.
    pub gap_curve: Vec<f64>,
}

/// The fixed-N rule: `round(0.2·K)` for K >= 50, `round(0.5·K)` below,
/// clamped to at least 2. Implemented in integer arithmetic
/// (`(2K+5)/10` resp. `(K+1)/2`), so no float rounding is involved.
pub fn fixed_n(k: usize) -> Result<usize> {
    if k < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: k,
        });
    }
    let n = if k >= LARGE_K_THRESHOLD {
        (2 * k + 5) / 10
    } else {
        k.div_ceil(2)
    };
    Ok(n.max(2))
}

/// Generate `count` synthetic outlier feature rows by inter-class
/// interpolation of ID features plus isotropic Gaussian noise.
///
/// Fully deterministic given `cfg.seed`; see the module docs for the exact
/// draw order. With `β = 0` the outputs are exact interpolations (the noise
/// values are still drawn, keeping the stream layout independent of β).
pub fn synthesize_ood(
    features: &Matrix,
    labels: &LabelVector,
    cfg: &SynthesisConfig,
) -> Result<Matrix> {
    cfg.validate()?;
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "label count vs feature rows".into(),
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if features.rows() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: features.rows(),
        });
    }
    let ls = labels.as_slice();
    if cfg.pair_policy == PairPolicy::InterClass && ls.iter().all(|&l| l == ls[0]) {
        return Err(Error::SingleClassDataset);
    }

    let n = features.rows();
    let d = features.cols();
    let count = cfg.resolved_count();
    let beta = cfg.resolved_beta(labels.num_classes());
    let alpha = cfg.alpha;

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut data = Vec::with_capacity(count * d);
    for _ in 0..count {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        if cfg.pair_policy == PairPolicy::InterClass {
            while ls[j] == ls[i] {
                j = rng.random_range(0..n);
            }
        }
        let xi = features.row(i);
        let xj = features.row(j);
        for c in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(alpha * xi[c] + (1.0 - alpha) * xj[c] + beta * noise);
        }
    }
    Matrix::from_vec(count, d, data)
}

/// Mean of the logits ranked 2nd through n-th of a descending-sorted row.
pub fn mean_tail(z_sorted: &[f64], n: usize) -> Result<f64> {
    let k = z_sorted.len();
    if n < 2 || n > k {
        return Err(Error::BadN {
            detail: format!("n must satisfy 2 <= n <= K = {k}, got {n}"),
        });
    }
    for (i, w) in z_sorted.windows(2).enumerate() {
        if w[0] < w[1] {
            return Err(Error::NotSorted { index: i + 1 });
        }
    }
    Ok(z_sorted[1..n].iter().sum::<f64>() / (n - 1) as f64)
}

/// One cohort's raw tail sums `Σ_rows Σ_{j=2..N} z'_j` for every N in
/// `[n_min, n_max]` (no divisions yet).
///
/// One sort + prefix sums per row (parallel), then a serial row-order
/// reduction so the result is thread-count independent.
fn tail_sums(m: &Matrix, n_min: usize, n_max: usize) -> Vec<f64> {
    let prefixes: Vec<Vec<f64>> = m
        .data()
        .par_chunks(m.cols())
        .map(|row| {
            let mut zs = row.to_vec();
            zs.sort_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            for v in zs.iter_mut() {
                acc += *v;
                *v = acc; // zs[i] = z'_1 + ... + z'_{i+1}
            }
            zs
        })
        .collect();

    let mut sums = vec![0.0; n_max - n_min + 1];
    for pref in &prefixes {
        let top = pref[0];
        for (slot, sum) in sums.iter_mut().enumerate() {
            *sum += pref[n_min + slot - 1] - top;
        }
    }
    sums
}

/// Max-gap N search over explicit ID and OOD logit cohorts.
///
/// Returns the full gap curve and the smallest N attaining its maximum.
pub fn select_n_maxgap(
    id_logits: &Matrix,
    ood_logits: &Matrix,
    n_min: usize,
    n_max: usize,
) -> Result<NSelection> {
    let k = id_logits.cols();
    if ood_logits.cols() != k {
        return Err(Error::DimensionMismatch {
            context: "ID vs OOD logit columns".into(),
            expected: k,
            found: ood_logits.cols(),
        });
    }
    if id_logits.rows() == 0 || ood_logits.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if n_min < 2 || n_min > n_max || n_max > k {
        return Err(Error::BadN {
            detail: format!("need 2 <= n_min <= n_max <= K = {k}, got [{n_min}, {n_max}]"),
        });
    }

    // Combine the cohorts' raw tail sums over one common denominator:
    //   gap(N) = (S_ood·R_id - S_id·R_ood) / ((N-1)·R_ood·R_id).
    // Mathematically this is E_OOD[z̄'_N] - E_ID[z̄'_N]; numerically the
    // single division makes the curve ratio-free — a constant added to
    // every logit of both matrices cancels in the numerator before any
    // rounding from the division can separate the two cohorts.
    let id_sums = tail_sums(id_logits, n_min, n_max);
    let ood_sums = tail_sums(ood_logits, n_min, n_max);
    let (r_id, r_ood) = (id_logits.rows() as f64, ood_logits.rows() as f64);
    let gap_curve: Vec<f64> = ood_sums
        .iter()
        .zip(&id_sums)
        .enumerate()
        .map(|(slot, (so, si))| {
            let n = (n_min + slot) as f64;
            (so * r_id - si * r_ood) / ((n - 1.0) * r_ood * r_id)
        })
        .collect();

    let mut best = 0;
    for (i, g) in gap_curve.iter().enumerate() {
        if *g > gap_curve[best] {
            best = i;
        }
    }
    Ok(NSelection {
        n_star: n_min + best,
        n_min,
        n_max,
        gap_curve,
    })
}

/// Adaptive N selection with no real OOD data: ID validation subset +
/// synthetic outliers + cosine projection + max-gap search.
///
/// `n_range` defaults to the exhaustive `[2, K]`.
pub fn select_n_pipeline(
    features: &Matrix,
    labels: &LabelVector,
    protos: &PrototypeSet,
    scale: f64,
    cfg: &SynthesisConfig,
    n_range: Option<(usize, usize)>,
) -> Result<NSelection> {
    cfg.validate()?;
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "label count vs feature rows".into(),
            expected: features.rows(),
            found: labels.len(),
        });
    }
    labels.validate_classes(protos.num_classes())?;

    // Validation subset: uniform without replacement via partial
    // Fisher-Yates on stream 1 (stream 0 belongs to synthesis).
    let rows = features.rows();
    let m = cfg.val_size.min(rows);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut indices: Vec<usize> = (0..rows).collect();
    for t in 0..m {
        let r = rng.random_range(t..rows);
        indices.swap(t, r);
    }
    let mut subset = Vec::with_capacity(m * features.cols());
    for &i in &indices[..m] {
        subset.extend_from_slice(features.row(i));
    }
    let subset = Matrix::from_vec(m, features.cols(), subset)?;

    let synthetic = synthesize_ood(features, labels, cfg)?;

    let id_logits = cosine_logits(&subset, protos, scale)?;
    let ood_logits = cosine_logits(&synthetic, protos, scale)?;

    let (n_min, n_max) = n_range.unwrap_or((2, protos.num_classes()));
    select_n_maxgap(&id_logits, &ood_logits, n_min, n_max)
}
