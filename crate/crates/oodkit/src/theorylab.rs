//! Seeded Monte Carlo simulators that make the theory behind the scorers
//! executable.
//!
//! The centerpiece is [`GaussianWorld`]: ID features are per-class diagonal
//! Gaussians `φ ~ N(μ_y, Σ_y)`, outliers interpolate two ID classes plus
//! isotropic-style noise `φ_OOD = α·N(μ_1, Σ_1) + (1-α)·N(μ_0, Σ_0) +
//! β·N(0, Σ)`, and a linear head `z = W·φ` turns features into logits. Two
//! executable checks are built on it:
//!
//! * [`check_nonmax_order`] — in the two-class world, the expected
//!   *non-predicted* logit is strictly larger under the outlier distribution
//!   than under ID data. This is the ordering that makes the logit tail
//!   informative in the first place.
//! * [`check_mcm_dominance`] — (a) the algebraic identity tying the
//!   softmax-form gap score to max-softmax (`gap_softmax = mcm - 1/K`),
//!   (b) the bound `Σ_j (z'_1 - z'_j) ≤ 2(K-1)` on `[-1,1]^K`, and (c) the
//!   operational consequence: with temperature above that bound, the gap
//!   score's FPR at TPR 0.95 does not exceed max-softmax's beyond Monte
//!   Carlo slack.
//!
//! [`logit_statistics`] summarizes a logit matrix by its mean sorted-rank
//! curve — the view in which the ID/OOD tail separation is visible.
//!
//! ## Determinism
//!
//! Every simulation consumes a ChaCha12 stream seeded from the world's (or
//! the check's) 64-bit seed with a fixed serial draw order, documented per
//! operation; results are bitwise reproducible for any thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::Matrix;
use crate::error::{Error, Result};
use crate::metrics::fpr_at_tpr;
use crate::scoring::{score_logitgap, score_logitgap_softmax, score_mcm};

/// Report name of the non-predicted-logit ordering check.
pub const THEOREM_NONMAX_ORDER: &str = "nonmax-order";
/// Report name of the gap-vs-max-softmax dominance check.
pub const THEOREM_MCM_DOMINANCE: &str = "mcm-dominance";

/// A synthetic classification world with Gaussian class features, a linear
/// head, and interpolated-mixture outliers.
///
/// `sigma` and `noise_sigma` hold per-dimension standard deviations
/// (diagonal covariance); the outlier mixture always interpolates classes 1
/// and 0, which is the whole story for `k = 2` and a fixed convention above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWorld {
    /// Class count (>= 2).
    pub k: usize,
    /// Feature dimension.
    pub d: usize,
    /// Per-class feature means, k rows of d.
    pub mu: Vec<Vec<f64>>,
    /// Per-class per-dimension standard deviations, k rows of d.
    pub sigma: Vec<Vec<f64>>,
    /// Classifier weights, k rows of d; logits are `z_j = w_j · φ`.
    pub w: Vec<Vec<f64>>,
    /// Interpolation weight of the class-1 component.
    pub alpha: f64,
    /// Noise weight of the outlier mixture.
    pub beta: f64,
    /// Per-dimension standard deviation of the outlier noise term.
    pub noise_sigma: Vec<f64>,
    pub seed: u64,
}

impl GaussianWorld {
    /// The reference two-class world: `μ_0 = 2e_1`, `μ_1 = -2e_1`, unit
    /// variances, head rows `e_1` and `-e_1`, `α = 0.5`, `β = 0.1`, `d = 16`.
    ///
    /// Closed forms: the expected non-predicted logit is -2 under ID data
    /// and 0 under the outlier mixture, for both classes.
    pub fn default_binary() -> Self {
        let d = 16;
        let e1 = |s: f64| {
            let mut v = vec![0.0; d];
            v[0] = s;
            v
        };
        GaussianWorld {
            k: 2,
            d,
            mu: vec![e1(2.0), e1(-2.0)],
            sigma: vec![vec![1.0; d]; 2],
            w: vec![e1(1.0), e1(-1.0)],
            alpha: 0.5,
            beta: 0.1,
            noise_sigma: vec![1.0; d],
            seed: 0,
        }
    }

    /// The reference k-class world: `d = k`, `μ_c = 2e_c`, unit variances,
    /// identity head, `α = 0.5`, `β = 0.1`.
    pub fn default_multiclass(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::BadWorld {
                detail: format!("class count must be >= 2, got {k}"),
            });
        }
        let basis = |c: usize, s: f64| {
            let mut v = vec![0.0; k];
            v[c] = s;
            v
        };
        Ok(GaussianWorld {
            k,
            d: k,
            mu: (0..k).map(|c| basis(c, 2.0)).collect(),
            sigma: vec![vec![1.0; k]; k],
            w: (0..k).map(|c| basis(c, 1.0)).collect(),
            alpha: 0.5,
            beta: 0.1,
            noise_sigma: vec![1.0; k],
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::BadWorld { detail });
        if self.k < 2 {
            return fail(format!("class count must be >= 2, got {}", self.k));
        }
        if self.d == 0 {
            return fail("feature dimension must be >= 1".into());
        }
        for (name, rows) in [("mu", &self.mu), ("sigma", &self.sigma), ("w", &self.w)] {
            if rows.len() != self.k {
                return fail(format!(
                    "{name} must have k = {} rows, got {}",
                    self.k,
                    rows.len()
                ));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != self.d {
                    return fail(format!(
                        "{name}[{i}] must have d = {} entries, got {}",
                        self.d,
                        row.len()
                    ));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return fail(format!("{name}[{i}] contains a non-finite value"));
                }
            }
        }
        if self.noise_sigma.len() != self.d {
            return fail(format!(
                "noise_sigma must have d = {} entries, got {}",
                self.d,
                self.noise_sigma.len()
            ));
        }
        if self.noise_sigma.iter().any(|v| !v.is_finite()) {
            return fail("noise_sigma contains a non-finite value".into());
        }
        if self.sigma.iter().flatten().any(|&s| s < 0.0)
            || self.noise_sigma.iter().any(|&s| s < 0.0)
        {
            return fail("standard deviations must be nonnegative".into());
        }
        for a in 0..self.k {
            for b in (a + 1)..self.k {
                if self.mu[a] == self.mu[b] {
                    return fail(format!("class means {a} and {b} coincide"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            ));
        }
        Ok(())
    }

    fn logit_row(&self, phi: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|wj| wj.iter().zip(phi).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Outcome of one theorem check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    /// Monte Carlo sample count per cohort.
    pub samples: usize,
    /// Named intermediate quantities (means, standard errors, bounds, ...).
    pub statistics: BTreeMap<String, f64>,
    pub passed: bool,
    /// How far the decisive inequality held, in Monte Carlo standard errors
    /// (or in absolute tolerance units where no SE applies).
    pub margin: f64,
}

/// Draw `n_id` ID logit rows and `n_ood` outlier logit rows from a world.
///
/// ID rows are class-balanced with class `r mod k` for row `r`; each row
/// consumes d standard-normal draws. Each outlier row consumes 3d draws —
/// class-1 component, class-0 component, then noise, in that order — and
/// composes `α·x_1 + (1-α)·x_0 + β·noise` per dimension. All three
/// components are drawn regardless of `α`/`β`, so the stream layout never
/// depends on coefficient values. ID rows are drawn before OOD rows from a
/// single ChaCha12 stream seeded by `world.seed`.
pub fn simulate_world(
    world: &GaussianWorld,
    n_id: usize,
    n_ood: usize,
) -> Result<(Matrix, Matrix)> {
    world.validate()?;
    if n_id == 0 || n_ood == 0 {
        return Err(Error::EmptySet {
            context: "simulation sample counts".into(),
        });
    }
    let (k, d) = (world.k, world.d);
    let mut rng = ChaCha12Rng::seed_from_u64(world.seed);
    let mut phi = vec![0.0; d];

    let mut id_data = Vec::with_capacity(n_id * k);
    for r in 0..n_id {
        let y = r % k;
        for (c, slot) in phi.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *slot = world.mu[y][c] + world.sigma[y][c] * eps;
        }
        id_data.extend(world.logit_row(&phi));
    }

    let mut ood_data = Vec::with_capacity(n_ood * k);
    for _ in 0..n_ood {
        for (c, slot) in phi.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *slot = world.alpha * (world.mu[1][c] + world.sigma[1][c] * eps);
        }
        for (c, slot) in phi.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *slot += (1.0 - world.alpha) * (world.mu[0][c] + world.sigma[0][c] * eps);
        }
        for (c, slot) in phi.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *slot += world.beta * (world.noise_sigma[c] * eps);
        }
        ood_data.extend(world.logit_row(&phi));
    }

    Ok((
        Matrix::from_vec(n_id, k, id_data)?,
        Matrix::from_vec(n_ood, k, ood_data)?,
    ))
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::MAX);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Check the non-predicted-logit ordering in a two-class world: for each
/// class `i`, the mean of logit `1-i` over ID class-`i` samples must be
/// strictly below its mean over outlier samples.
///
/// Requires a well-trained head (`w_{1-i}·μ_i < w_{1-i}·μ_{1-i}` for both
/// classes) and a non-degenerate mixture (`0 < α < 1`); otherwise the
/// ordering is vacuous or simply false and the check refuses to run.
/// `margin` is the smaller of the two mean differences in units of the
/// standard error of that difference. The closed-form expectations
/// `w_{1-i}·μ_i` (ID) and `w_{1-i}·(α·μ_1 + (1-α)·μ_0)` (outlier) are
/// reported in `statistics` for external validation.
pub fn check_nonmax_order(world: &GaussianWorld, n: usize) -> Result<TheoremReport> {
    world.validate()?;
    if world.k != 2 {
        return Err(Error::BadWorld {
            detail: format!(
                "this check is defined for k = 2 worlds, got k = {}",
                world.k
            ),
        });
    }
    if world.alpha == 0.0 || world.alpha == 1.0 {
        return Err(Error::DegenerateMixture { alpha: world.alpha });
    }
    for i in 0..2 {
        let other = 1 - i;
        if !(dot(&world.w[other], &world.mu[i]) < dot(&world.w[other], &world.mu[other])) {
            return Err(Error::IllTrainedClassifier {
                detail: format!(
                    "head row {other} does not prefer its own class mean over class {i}'s"
                ),
            });
        }
    }
    if n < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            found: n,
        });
    }

    let (id_logits, ood_logits) = simulate_world(world, n, n)?;

    let mut stats = BTreeMap::new();
    let mut margin = f64::MAX;
    let mut passed = true;
    for i in 0..2usize {
        let other = 1 - i;
        // ID rows of class i are rows with r mod 2 == i.
        let id_vals: Vec<f64> = (0..id_logits.rows())
            .filter(|r| r % 2 == i)
            .map(|r| id_logits.get(r, other))
            .collect();
        let ood_vals: Vec<f64> = (0..ood_logits.rows())
            .map(|r| ood_logits.get(r, other))
            .collect();
        let (id_mean, id_se) = mean_and_se(&id_vals);
        let (ood_mean, ood_se) = mean_and_se(&ood_vals);
        let diff_se = (id_se * id_se + ood_se * ood_se).sqrt();
        let m = (ood_mean - id_mean) / diff_se;

        let expected_id = dot(&world.w[other], &world.mu[i]);
        let mix: Vec<f64> = (0..world.d)
            .map(|c| world.alpha * world.mu[1][c] + (1.0 - world.alpha) * world.mu[0][c])
            .collect();
        let expected_ood = dot(&world.w[other], &mix);

        stats.insert(format!("id_nonmax_mean_i{i}"), id_mean);
        stats.insert(format!("id_nonmax_se_i{i}"), id_se);
        stats.insert(format!("id_nonmax_expected_i{i}"), expected_id);
        stats.insert(format!("ood_nonmax_mean_i{i}"), ood_mean);
        stats.insert(format!("ood_nonmax_se_i{i}"), ood_se);
        stats.insert(format!("ood_nonmax_expected_i{i}"), expected_ood);
        stats.insert(format!("margin_se_i{i}"), m);

        passed &= id_mean < ood_mean;
        margin = margin.min(m);
    }

    Ok(TheoremReport {
        name: THEOREM_NONMAX_ORDER.into(),
        samples: n,
        statistics: stats,
        passed,
        margin,
    })
}

/// Check the chain connecting the gap score to max-softmax.
///
/// Three stages, all folded into one report:
///
/// (a) on `n` logit vectors drawn uniformly from `[-1,1]^k` (ChaCha12
/// stream 2 of `seed`), the identity `gap_softmax = mcm - 1/k` holds to
/// 1e-12 at the given `tau`;
///
/// (b) on the same vectors, `Σ_j (z'_1 - z'_j) ≤ 2(k-1)`, with exact
/// equality at the extremal vector `[1, -1, ..., -1]`;
///
/// (c) on the reference k-class world re-seeded with `seed` (`n` samples
/// per cohort), the gap score's FPR at TPR 0.95 does not exceed
/// max-softmax's by more than 0.02 Monte Carlo slack — the operational
/// content of "temperature above `2(k-1)` makes max-softmax no better".
///
/// `margin` reports stage (c)'s headroom in standard errors of the FPR
/// difference. `passed` requires all three stages.
pub fn check_mcm_dominance(k: usize, tau: f64, n: usize, seed: u64) -> Result<TheoremReport> {
    if k < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: k,
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tau",
            detail: format!("must be positive and finite, got {tau}"),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: n,
        });
    }

    // Stage (a) + (b): uniform vectors on stream 2 (streams 0/1 belong to
    // the synthesis/subsampling conventions elsewhere in the crate).
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut identity_max_dev = 0.0f64;
    let mut gapsum_max = 0.0f64;
    let mut z = vec![0.0; k];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        let lhs = score_logitgap_softmax(&z, tau)?;
        let rhs = score_mcm(&z, tau)? - 1.0 / k as f64;
        identity_max_dev = identity_max_dev.max((lhs - rhs).abs());

        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gapsum = z.iter().map(|v| zmax - v).sum::<f64>();
        gapsum_max = gapsum_max.max(gapsum);
    }
    let bound = 2.0 * (k as f64 - 1.0);
    let mut extremal = vec![-1.0; k];
    extremal[0] = 1.0;
    let extremal_gapsum = extremal.iter().map(|v| 1.0 - v).sum::<f64>();

    // Stage (c): operational FPR comparison on the reference world.
    let mut world = GaussianWorld::default_multiclass(k)?;
    world.seed = seed;
    let (id_logits, ood_logits) = simulate_world(&world, n, n)?;
    let score_all = |m: &Matrix, f: &(dyn Fn(&[f64]) -> Result<f64> + Sync)| -> Result<Vec<f64>> {
        m.data()
            .par_chunks(m.cols())
            .map(f)
            .collect::<Result<Vec<f64>>>()
    };
    let id_lg = score_all(&id_logits, &score_logitgap)?;
    let ood_lg = score_all(&ood_logits, &score_logitgap)?;
    let id_mcm = score_all(&id_logits, &|z| score_mcm(z, tau))?;
    let ood_mcm = score_all(&ood_logits, &|z| score_mcm(z, tau))?;
    let (fpr_lg, _) = fpr_at_tpr(&id_lg, &ood_lg, 0.95)?;
    let (fpr_mcm, _) = fpr_at_tpr(&id_mcm, &ood_mcm, 0.95)?;

    const SLACK: f64 = 0.02;
    let n_f = n as f64;
    let se = ((fpr_lg * (1.0 - fpr_lg) + fpr_mcm * (1.0 - fpr_mcm)) / n_f)
        .sqrt()
        .max(1.0 / n_f); // floor keeps the margin finite at degenerate FPRs
    let margin = (fpr_mcm + SLACK - fpr_lg) / se;

    let passed = identity_max_dev <= 1e-12
        && gapsum_max <= bound + 1e-12
        && extremal_gapsum == bound
        && fpr_lg <= fpr_mcm + SLACK;

    let mut stats = BTreeMap::new();
    stats.insert("identity_max_abs_dev".into(), identity_max_dev);
    stats.insert("gapsum_max".into(), gapsum_max);
    stats.insert("gapsum_bound".into(), bound);
    stats.insert("extremal_gapsum".into(), extremal_gapsum);
    stats.insert("fpr95_logitgap".into(), fpr_lg);
    stats.insert("fpr95_mcm".into(), fpr_mcm);
    stats.insert("fpr_slack".into(), SLACK);
    stats.insert("fpr_diff_se".into(), se);
    stats.insert("tau".into(), tau);

    Ok(TheoremReport {
        name: THEOREM_MCM_DOMINANCE.into(),
        samples: n,
        statistics: stats,
        passed,
        margin,
    })
}

/// Summary of a logit matrix in the sorted-rank view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitStatistics {
    /// Mean over rows of the largest logit `z'_1`.
    pub mean_max: f64,
    /// Mean over rows of `mean(z'_2..z'_N)` at the requested `top_n`.
    pub mean_tail_topn: f64,
    /// Mean over rows of `mean(z'_2..z'_K)` (the full non-predicted tail).
    pub mean_tail_full: f64,
    /// `rank_curve[r]` = mean over rows of the (r+1)-th largest logit;
    /// non-increasing by construction.
    pub rank_curve: Vec<f64>,
}

/// Per-rank mean statistics of a logit matrix (rows sorted descending in
/// parallel, then reduced serially in row order).
pub fn logit_statistics(logits: &Matrix, top_n: usize) -> Result<LogitStatistics> {
    let k = logits.cols();
    if k < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: k,
        });
    }
    if top_n < 2 || top_n > k {
        return Err(Error::BadN {
            detail: format!("top_n must satisfy 2 <= top_n <= K = {k}, got {top_n}"),
        });
    }
    let sorted_rows: Vec<Vec<f64>> = logits
        .data()
        .par_chunks(k)
        .map(|row| {
            let mut zs = row.to_vec();
            zs.sort_by(|a, b| b.total_cmp(a));
            zs
        })
        .collect();

    let mut rank_curve = vec![0.0; k];
    for row in &sorted_rows {
        for (acc, v) in rank_curve.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n_rows = logits.rows() as f64;
    for acc in rank_curve.iter_mut() {
        *acc /= n_rows;
    }

    let tail_mean = |n: usize| rank_curve[1..n].iter().sum::<f64>() / (n - 1) as f64;
    Ok(LogitStatistics {
        mean_max: rank_curve[0],
        mean_tail_topn: tail_mean(top_n),
        mean_tail_full: tail_mean(k),
        rank_curve,
    })
}
