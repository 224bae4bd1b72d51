//! OOD scoring functions over logit vectors.
//!
//! Every scorer follows one convention: **higher score ⇒ more
//! in-distribution**. All scorers are pure functions of the logit multiset
//! (permutation-invariant) and are vectorized over a matrix by
//! [`score_batch`], which evaluates rows in parallel but writes each result
//! to its pre-assigned slot, so output order never depends on scheduling.
//!
//! The gap family measures how far the top logit sits above the rest:
//!
//! * [`score_logitgap`] — mean gap between the max logit and all others,
//!   `(1/(K-1)) Σ_j (z'_1 - z'_j)`, equivalently `z'_1 - mean(z'_2..z'_K)`.
//! * [`score_logitgap_topn`] — the same gap restricted to the N largest
//!   logits, with a choice of `1/(N-1)` or `1/N` normalization. The two
//!   normalizations differ by the constant factor `(N-1)/N` — implemented as
//!   a literal final rescale so the factor relation is bit-exact — and
//!   therefore induce identical rankings and identical threshold metrics.
//! * [`score_logitgap_softmax`] — the softmax-space bridge
//!   `Σ_i [e^{z'_1/τ} - e^{z'_i/τ}] / (K Σ_j e^{z'_j/τ})`, which equals
//!   `score_mcm(z, τ) - 1/K` algebraically. Both sides accumulate the
//!   denominator with the same loop, so the identity holds to ~1 ulp.
//! * [`score_logitgap_variant`] — elementwise transforms of each gap
//!   (`exp(g)-1`, `g²`, `√g`), anchored so uniform logits score 0.
//!
//! Numerical stability: every softmax-based scorer subtracts the row max
//! before exponentiating.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::{self, Format, Matrix};
use crate::error::{Error, Result};

/// Which scoring function to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Maximum raw logit.
    Maxlogit,
    /// Maximum softmax probability with temperature τ.
    Mcm,
    /// `T · logsumexp(z / T)`.
    Energy,
    /// Generalized entropy over the M largest probabilities:
    /// `-Σ p_c^γ (1-p_c)^γ`.
    Gen,
    /// Difference of the two largest softmax probabilities.
    Margin,
    /// Mean gap between the top logit and the remaining K-1.
    Logitgap,
    /// Mean gap restricted to the N largest logits.
    LogitgapTopn,
    /// Softmax-space gap score; equals `mcm - 1/K`.
    LogitgapSoftmax,
    /// Elementwise-transformed gaps over the N largest logits.
    LogitgapVariant,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Maxlogit,
        Method::Mcm,
        Method::Energy,
        Method::Gen,
        Method::Margin,
        Method::Logitgap,
        Method::LogitgapTopn,
        Method::LogitgapSoftmax,
        Method::LogitgapVariant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Maxlogit => "maxlogit",
            Method::Mcm => "mcm",
            Method::Energy => "energy",
            Method::Gen => "gen",
            Method::Margin => "margin",
            Method::Logitgap => "logitgap",
            Method::LogitgapTopn => "logitgap_topn",
            Method::LogitgapSoftmax => "logitgap_softmax",
            Method::LogitgapVariant => "logitgap_variant",
        }
    }

    /// Scorers built on gaps or probability margins need at least 2 classes;
    /// maxlogit, energy, MCM, and GEN degrade gracefully at K = 1.
    fn needs_two_classes(self) -> bool {
        matches!(
            self,
            Method::Margin | Method::Logitgap | Method::LogitgapTopn | Method::LogitgapVariant
        )
    }

    fn uses_top_n(self) -> bool {
        matches!(self, Method::LogitgapTopn | Method::LogitgapVariant)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "method",
                detail: format!("unknown method `{s}`"),
            })
    }
}

/// Elementwise gap transform for [`Method::LogitgapVariant`].
///
/// Each is anchored so that a zero gap contributes zero, keeping the
/// "uniform logits score 0" property of the plain gap score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `exp(g) - 1` (computed as `exp_m1` for accuracy near 0).
    Exp,
    /// `g²`.
    Square,
    /// `√g` (gaps are nonnegative by construction).
    Sqrt,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Exp => "exp",
            Transform::Square => "square",
            Transform::Sqrt => "sqrt",
        }
    }

    fn apply(self, g: f64) -> f64 {
        match self {
            Transform::Exp => g.exp_m1(),
            Transform::Square => g * g,
            Transform::Sqrt => g.sqrt(),
        }
    }
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Transform::Exp),
            "square" => Ok(Transform::Square),
            "sqrt" => Ok(Transform::Sqrt),
            _ => Err(Error::InvalidParameter {
                name: "transform",
                detail: format!("unknown transform `{s}` (expected exp, square, or sqrt)"),
            }),
        }
    }
}

/// Normalization of the top-N gap sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide the N-1 nonzero gaps by N-1 (the canonical form).
    OverNMinus1,
    /// Divide all N gaps (the j = 1 gap is 0) by N. Equals the canonical
    /// score times `(N-1)/N` exactly, so rankings and threshold metrics are
    /// unchanged.
    OverN,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::OverNMinus1 => "over_n_minus_1",
            Normalization::OverN => "over_n",
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "over_n_minus_1" => Ok(Normalization::OverNMinus1),
            "over_n" => Ok(Normalization::OverN),
            _ => Err(Error::InvalidParameter {
                name: "normalization",
                detail: format!("unknown normalization `{s}` (expected over_n_minus_1 or over_n)"),
            }),
        }
    }
}

/// Full configuration of one scoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub method: Method,
    /// Softmax temperature τ (mcm, gen, margin, logitgap_softmax).
    pub tau: f64,
    /// N for the top-N methods; must satisfy 2 ≤ N ≤ K at scoring time.
    pub top_n: Option<usize>,
    /// GEN exponent γ ∈ (0, 1).
    pub gamma: f64,
    /// GEN truncation M ≤ K; `None` means use all K probabilities.
    pub gen_m: Option<usize>,
    /// Energy temperature T.
    pub energy_t: f64,
    /// Gap transform (logitgap_variant only).
    pub transform: Transform,
    /// Gap-sum normalization (logitgap_topn only).
    pub normalization: Normalization,
}

impl ScorerConfig {
    /// A config with the documented defaults: τ = 1, γ = 0.1, M = K,
    /// T = 1, exp transform, 1/(N-1) normalization.
    pub fn new(method: Method) -> Self {
        ScorerConfig {
            method,
            tau: 1.0,
            top_n: None,
            gamma: 0.1,
            gen_m: None,
            energy_t: 1.0,
            transform: Transform::Exp,
            normalization: Normalization::OverNMinus1,
        }
    }

    /// Builder-style top-N setter.
    pub fn with_top_n(mut self, n: usize) -> Self {
        self.top_n = Some(n);
        self
    }

    /// Validate every field against a concrete class count K.
    pub fn validate(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::EmptyRow);
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                detail: format!("must be positive, got {}", self.tau),
            });
        }
        if !(self.energy_t > 0.0) {
            return Err(Error::InvalidParameter {
                name: "energy_t",
                detail: format!("must be positive, got {}", self.energy_t),
            });
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                detail: format!("must be in (0, 1), got {}", self.gamma),
            });
        }
        if let Some(m) = self.gen_m {
            if m == 0 || m > k {
                return Err(Error::InvalidParameter {
                    name: "gen_m",
                    detail: format!("must satisfy 1 <= M <= K = {k}, got {m}"),
                });
            }
        }
        if self.method.needs_two_classes() && k < 2 {
            return Err(Error::TooFewClasses {
                needed: 2,
                found: k,
            });
        }
        if self.method.uses_top_n() {
            match self.top_n {
                None => {
                    return Err(Error::BadN {
                        detail: format!("method {} requires top_n", self.method),
                    })
                }
                Some(n) if n < 2 || n > k => {
                    return Err(Error::BadN {
                        detail: format!("top_n must satisfy 2 <= N <= K = {k}, got {n}"),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Per-sample scalar scores under the convention "higher = ID".
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    config: ScorerConfig,
}

impl ScoreVector {
    /// The score polarity every scorer in this crate follows.
    pub const CONVENTION: &'static str = "higher = ID";

    /// Wrap scores, rejecting NaN/infinity so metrics never see them.
    pub fn new(scores: Vec<f64>, config: ScorerConfig) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: format!("score index {i}"),
            });
        }
        Ok(ScoreVector { scores, config })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// View as an n x 1 matrix (the binary-container representation).
    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::from_vec(self.scores.len(), 1, self.scores.clone())
    }

    /// Persist as `index,score` CSV or as an n x 1 binary container.
    pub fn save(&self, path: impl AsRef<std::path::Path>, format: Format) -> Result<()> {
        let path = path.as_ref();
        match format {
            Format::Csv => {
                let mut out = String::from("index,score\n");
                for (i, s) in self.scores.iter().enumerate() {
                    out.push_str(&format!("{i},{}\n", datastore::fmt_f64(*s)));
                }
                std::fs::write(path, out).map_err(|e| Error::io(path, e))
            }
            Format::Binary => datastore::save_matrix(&self.to_matrix()?, path, Format::Binary),
            Format::Auto => Err(Error::InvalidParameter {
                name: "format",
                detail: "auto is a load-time detector; pick csv or binary to save".into(),
            }),
        }
    }
}

/// Load a score file written by [`ScoreVector::save`] (or compatible):
/// a CSV with a `score` column, a single-column CSV, or an n x 1 binary
/// container.
pub fn load_scores(path: impl AsRef<std::path::Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    match datastore::load_matrix(path, Format::Auto)? {
        m if m.cols() == 1 => Ok(m.data().to_vec()),
        m => {
            // Multi-column: only CSVs can say which column holds the scores.
            let (names, table, _) = datastore::load_csv_columns(path)?;
            let col =
                names
                    .iter()
                    .position(|n| n == "score")
                    .ok_or_else(|| Error::MalformedHeader {
                        path: path.to_path_buf(),
                        detail: format!("{} columns but none named `score`", m.cols()),
                    })?;
            Ok((0..table.rows()).map(|r| table.get(r, col)).collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Individual scorers
// ---------------------------------------------------------------------------

/// Sort a logit row descending: `z'_1 >= z'_2 >= ... >= z'_K`.
pub fn sort_desc(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptyRow);
    }
    let mut out = z.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Maximum raw logit.
pub fn score_maxlogit(z: &[f64]) -> Result<f64> {
    z.iter().copied().reduce(f64::max).ok_or(Error::EmptyRow)
}

/// Row max and the softmax denominator `Σ_j e^{(z_j - max)/τ}`, accumulated
/// in input order. Shared by every softmax-based scorer so that algebraic
/// identities between them hold at the bit level.
fn softmax_denom(z: &[f64], tau: f64) -> Result<(f64, f64)> {
    check_tau(tau)?;
    let m = score_maxlogit(z)?;
    let mut denom = 0.0;
    for &v in z {
        denom += ((v - m) / tau).exp();
    }
    Ok((m, denom))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tau",
            detail: format!("must be positive, got {tau}"),
        })
    }
}

/// Maximum softmax probability at temperature τ (max-subtracted for
/// stability): `max_k e^{z_k/τ} / Σ_j e^{z_j/τ}`.
pub fn score_mcm(z: &[f64], tau: f64) -> Result<f64> {
    let (_, denom) = softmax_denom(z, tau)?;
    Ok(1.0 / denom)
}

/// Energy score `T · logsumexp(z/T)`, computed as
/// `max + T · ln Σ e^{(z - max)/T}`.
pub fn score_energy(z: &[f64], energy_t: f64) -> Result<f64> {
    if !(energy_t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "energy_t",
            detail: format!("must be positive, got {energy_t}"),
        });
    }
    let (m, denom) = softmax_denom(z, energy_t)?;
    Ok(m + energy_t * denom.ln())
}

fn softmax_probs(z: &[f64], tau: f64) -> Result<Vec<f64>> {
    let (m, denom) = softmax_denom(z, tau)?;
    Ok(z.iter().map(|&v| ((v - m) / tau).exp() / denom).collect())
}

/// Generalized-entropy score `-Σ_{c=1}^{M} p_c^γ (1-p_c)^γ` over the M
/// largest softmax probabilities.
pub fn score_gen(z: &[f64], gamma: f64, gen_m: usize, tau: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            detail: format!("must be in (0, 1), got {gamma}"),
        });
    }
    if gen_m == 0 || gen_m > z.len() {
        return Err(Error::InvalidParameter {
            name: "gen_m",
            detail: format!("must satisfy 1 <= M <= K = {}, got {gen_m}", z.len()),
        });
    }
    // Evaluate entirely in sorted order, and form the complement 1 - p_c
    // from the positive tail sum Σ_{j≠c} e_j instead of subtracting from 1:
    // near-saturated probabilities would otherwise quantize 1 - p_c at
    // ulp(1) and the γ-power would amplify that into the leading digits,
    // breaking the scorer's permutation-invariance contract.
    let (zmax, _) = softmax_denom(z, tau)?;
    let k = z.len();
    let mut e: Vec<f64> = z.iter().map(|&v| ((v - zmax) / tau).exp()).collect();
    e.sort_by(|a, b| b.total_cmp(a));
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + e[i];
    }
    let denom = suffix[0];
    let mut prefix = 0.0;
    let mut sum = 0.0;
    for c in 0..gen_m {
        let p = e[c] / denom;
        let q = (prefix + suffix[c + 1]) / denom; // 1 - p_c, no cancellation
        sum += (p * q).powf(gamma);
        prefix += e[c];
    }
    Ok(-sum)
}

/// Margin score: difference of the two largest softmax probabilities.
pub fn score_margin(z: &[f64], tau: f64) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: z.len(),
        });
    }
    let p = softmax_probs(z, tau)?;
    let (mut p1, mut p2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in &p {
        if v > p1 {
            p2 = p1;
            p1 = v;
        } else if v > p2 {
            p2 = v;
        }
    }
    Ok(p1 - p2)
}

/// Mean gap between the top logit and the remaining K-1:
/// `(1/(K-1)) Σ_{j=2}^{K} (z'_1 - z'_j)`.
pub fn score_logitgap(z: &[f64]) -> Result<f64> {
    score_logitgap_topn(z, z.len().max(1), Normalization::OverNMinus1)
}

/// Mean gap restricted to the N largest logits.
///
/// `OverNMinus1`: `(1/(N-1)) Σ_{j=2}^{N} (z'_1 - z'_j)`.
/// `OverN`: the same sum over N (the j = 1 term is 0), implemented as the
/// canonical score times `(N-1)/N` so the factor relation is bit-exact.
pub fn score_logitgap_topn(z: &[f64], top_n: usize, normalization: Normalization) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::EmptyRow);
    }
    if z.len() < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: z.len(),
        });
    }
    if top_n < 2 || top_n > z.len() {
        return Err(Error::BadN {
            detail: format!("top_n must satisfy 2 <= N <= K = {}, got {top_n}", z.len()),
        });
    }
    let zs = sort_desc(z)?;
    let top = zs[0];
    let mut acc = 0.0;
    for &v in &zs[1..top_n] {
        acc += top - v;
    }
    let base = acc / (top_n - 1) as f64;
    Ok(match normalization {
        Normalization::OverNMinus1 => base,
        Normalization::OverN => base * ((top_n - 1) as f64 / top_n as f64),
    })
}

/// Softmax-space gap score
/// `Σ_{i=1}^{K} [e^{z'_1/τ} - e^{z'_i/τ}] / (K Σ_j e^{z'_j/τ})`.
///
/// After max-subtraction the numerator telescopes to `K - D` with
/// `D = Σ_j e^{(z_j - z'_1)/τ}`, giving `(K - D) / (K·D)`, which equals
/// `score_mcm(z, τ) - 1/K` algebraically; both sides share [`softmax_denom`],
/// so the identity holds to a few ulps.
pub fn score_logitgap_softmax(z: &[f64], tau: f64) -> Result<f64> {
    let (_, denom) = softmax_denom(z, tau)?;
    let k = z.len() as f64;
    Ok((k - denom) / (k * denom))
}

/// Elementwise-transformed gap score
/// `(1/(N-1)) Σ_{j=2}^{N} φ(z'_1 - z'_j)` with φ from [`Transform`].
pub fn score_logitgap_variant(z: &[f64], top_n: usize, transform: Transform) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::EmptyRow);
    }
    if z.len() < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: z.len(),
        });
    }
    if top_n < 2 || top_n > z.len() {
        return Err(Error::BadN {
            detail: format!("top_n must satisfy 2 <= N <= K = {}, got {top_n}", z.len()),
        });
    }
    let zs = sort_desc(z)?;
    let top = zs[0];
    let mut acc = 0.0;
    for &v in &zs[1..top_n] {
        acc += transform.apply(top - v);
    }
    Ok(acc / (top_n - 1) as f64)
}

/// Apply the configured scorer to one logit row.
pub fn score_row(z: &[f64], cfg: &ScorerConfig) -> Result<f64> {
    match cfg.method {
        Method::Maxlogit => score_maxlogit(z),
        Method::Mcm => score_mcm(z, cfg.tau),
        Method::Energy => score_energy(z, cfg.energy_t),
        Method::Gen => score_gen(z, cfg.gamma, cfg.gen_m.unwrap_or(z.len()), cfg.tau),
        Method::Margin => score_margin(z, cfg.tau),
        Method::Logitgap => score_logitgap(z),
        Method::LogitgapTopn => score_logitgap_topn(z, cfg.top_n.unwrap_or(0), cfg.normalization),
        Method::LogitgapSoftmax => score_logitgap_softmax(z, cfg.tau),
        Method::LogitgapVariant => score_logitgap_variant(z, cfg.top_n.unwrap_or(0), cfg.transform),
    }
}

/// Score every row of a logit matrix.
///
/// Rows are evaluated in parallel; each result lands in its row's slot, so
/// the output is identical for any thread count. Per-row failures are
/// annotated with the offending row index.
pub fn score_batch(m: &Matrix, cfg: &ScorerConfig) -> Result<ScoreVector> {
    cfg.validate(m.cols())?;
    let scores = m
        .data()
        .par_chunks(m.cols())
        .enumerate()
        .map(|(row, z)| {
            score_row(z, cfg).map_err(|e| Error::ScoreRow {
                row,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreVector::new(scores, cfg.clone())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle constants keep all 17 digits
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Worked 3-class example vectors used across the test suite: two logit
    /// rows whose max-softmax scores collapse to the same 0.70 while their
    /// gap scores still separate them.
    pub const Z1: [f64; 3] = [0.5596, -0.9808, -0.9808];
    pub const Z2: [f64; 3] = [0.9783, -0.6311, -0.4976];

    #[test]
    fn sort_desc_orders_and_preserves_multiset() {
        assert_eq!(sort_desc(&[1.0, 3.0, 2.0]).unwrap(), vec![3.0, 2.0, 1.0]);
        assert_eq!(sort_desc(&[2.0, 2.0, 2.0]).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(sort_desc(&Z1).unwrap(), Z1.to_vec()); // already sorted
        assert!(matches!(sort_desc(&[]), Err(Error::EmptyRow)));
    }

    #[test]
    fn maxlogit_examples() {
        assert_eq!(score_maxlogit(&Z1).unwrap(), 0.5596);
        assert_eq!(score_maxlogit(&[3.0, 3.0, 3.0]).unwrap(), 3.0);
        assert_eq!(score_maxlogit(&[-1.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(score_maxlogit(&[]), Err(Error::EmptyRow)));
    }

    #[test]
    fn mcm_matches_worked_example() {
        // softmax(Z1) = [0.70, 0.15, 0.15]; softmax(Z2) = [0.70, 0.14, 0.16]
        assert!((score_mcm(&Z1, 1.0).unwrap() - 0.70).abs() < 0.005);
        assert!((score_mcm(&Z2, 1.0).unwrap() - 0.70).abs() < 0.005);
        // Frozen oracles (direct evaluation of the stable formula).
        assert!((score_mcm(&Z1, 1.0).unwrap() - 0.69999054131589478).abs() < 1e-15);
        assert!((score_mcm(&Z2, 1.0).unwrap() - 0.69999555431820848).abs() < 1e-15);
    }

    #[test]
    fn mcm_uniform_is_one_over_k() {
        for tau in [0.5, 1.0, 19.0, 100.0] {
            assert_eq!(score_mcm(&[3.0; 4], tau).unwrap(), 0.25);
        }
    }

    #[test]
    fn mcm_single_class_is_one() {
        assert_eq!(score_mcm(&[42.0], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn mcm_rejects_bad_tau() {
        assert!(matches!(
            score_mcm(&[1.0, 2.0], 0.0),
            Err(Error::InvalidParameter { name: "tau", .. })
        ));
    }

    #[test]
    fn energy_closed_forms() {
        assert!((score_energy(&[0.0, 0.0], 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(score_energy(&[7.5], 1.0).unwrap(), 7.5);
    }

    #[test]
    fn energy_shift_identity_on_integer_logits() {
        let z = [3.0, 1.0, -2.0];
        let shifted = [3.0 + 8.0, 1.0 + 8.0, -2.0 + 8.0];
        let a = score_energy(&z, 1.0).unwrap();
        let b = score_energy(&shifted, 1.0).unwrap();
        assert_eq!(b, a + 8.0);
    }

    #[test]
    fn gen_closed_forms() {
        // p = [0.5, 0.5]: -2 · 0.25^0.1
        let s = score_gen(&[0.0, 0.0], 0.1, 2, 1.0).unwrap();
        assert!((s - (-1.7411011265922482)).abs() < 1e-14);
        // M = 1, p = [0.7, 0.3]: -√(0.7·0.3)
        let z = [(0.7f64).ln(), (0.3f64).ln()];
        let s = score_gen(&z, 0.5, 1, 1.0).unwrap();
        assert!((s - (-0.45825756949558399)).abs() < 1e-14);
    }

    #[test]
    fn gen_one_hot_limit_vanishes() {
        let s = score_gen(&[60.0, 0.0, 0.0], 0.1, 3, 1.0).unwrap();
        assert!(
            s <= 0.0 && s > -1e-2,
            "score {s} should approach 0 from below"
        );
    }

    #[test]
    fn gen_parameter_validation() {
        assert!(score_gen(&[0.0, 0.0], 0.0, 2, 1.0).is_err());
        assert!(score_gen(&[0.0, 0.0], 1.0, 2, 1.0).is_err());
        assert!(score_gen(&[0.0, 0.0], 0.1, 3, 1.0).is_err());
        assert!(score_gen(&[0.0, 0.0], 0.1, 0, 1.0).is_err());
    }

    #[test]
    fn margin_examples() {
        // Constructed so softmax gives exactly [0.7, 0.2, 0.1].
        let z = [(0.7f64).ln(), (0.2f64).ln(), (0.1f64).ln()];
        assert!((score_margin(&z, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(score_margin(&[2.0, 2.0, 2.0], 1.0).unwrap(), 0.0);
        assert!((score_margin(&[60.0, 0.0], 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            score_margin(&[1.0], 1.0),
            Err(Error::TooFewClasses { .. })
        ));
    }

    #[test]
    fn logitgap_matches_worked_examples() {
        assert!((score_logitgap(&Z1).unwrap() - 1.5404).abs() < 1e-12);
        assert!((score_logitgap(&Z2).unwrap() - 1.54265).abs() < 1e-12);
        assert_eq!(score_logitgap(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(
            score_logitgap(&[1.0]),
            Err(Error::TooFewClasses { .. })
        ));
    }

    #[test]
    fn logitgap_equals_top_minus_tail_mean() {
        let z = [0.3, -1.2, 4.5, 0.0, 2.25];
        let zs = sort_desc(&z).unwrap();
        let tail_mean = zs[1..].iter().sum::<f64>() / 4.0;
        assert!((score_logitgap(&z).unwrap() - (zs[0] - tail_mean)).abs() < 1e-12);
    }

    #[test]
    fn logitgap_topn_examples() {
        let z = [5.0, 3.0, 1.0, -1.0];
        assert_eq!(
            score_logitgap_topn(&z, 2, Normalization::OverNMinus1).unwrap(),
            2.0
        );
        // Over-N form with N = 3: (0 + 2 + 4)/3 = 2.
        let s = score_logitgap_topn(&z, 3, Normalization::OverN).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        // N = K reduces to the plain score, bit-exactly.
        let full = score_logitgap_topn(&z, 4, Normalization::OverNMinus1).unwrap();
        assert_eq!(full.to_bits(), score_logitgap(&z).unwrap().to_bits());
    }

    #[test]
    fn logitgap_topn_normalizations_differ_by_exact_factor() {
        let z = [0.93, -0.11, 0.48, -0.77, 0.21];
        for n in 2..=5usize {
            let a = score_logitgap_topn(&z, n, Normalization::OverNMinus1).unwrap();
            let b = score_logitgap_topn(&z, n, Normalization::OverN).unwrap();
            let factor = (n - 1) as f64 / n as f64;
            assert_eq!(b.to_bits(), (a * factor).to_bits());
        }
    }

    #[test]
    fn logitgap_topn_validates_n() {
        let z = [1.0, 2.0, 3.0];
        assert!(matches!(
            score_logitgap_topn(&z, 1, Normalization::OverNMinus1),
            Err(Error::BadN { .. })
        ));
        assert!(matches!(
            score_logitgap_topn(&z, 4, Normalization::OverNMinus1),
            Err(Error::BadN { .. })
        ));
    }

    #[test]
    fn logitgap_softmax_identity_and_anchors() {
        // Uniform logits: every term cancels.
        assert_eq!(score_logitgap_softmax(&[1.0; 5], 1.0).unwrap(), 0.0);
        // Worked example: mcm - 1/3.
        let s = score_logitgap_softmax(&Z1, 1.0).unwrap();
        assert!((s - (0.69999054131589478 - 1.0 / 3.0)).abs() < 1e-14);
        // Identity against mcm on assorted vectors and temperatures.
        let z = [0.9, -0.4, 0.2, -1.0, 0.5];
        for tau in [0.5, 1.0, 19.0, 100.0] {
            let lhs = score_logitgap_softmax(&z, tau).unwrap();
            let rhs = score_mcm(&z, tau).unwrap() - 1.0 / 5.0;
            assert!((lhs - rhs).abs() < 1e-12);
        }
        // Single class: identity still holds (mcm = 1, 1/K = 1).
        assert_eq!(score_logitgap_softmax(&[3.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn variant_transforms_anchor_at_zero_and_match_closed_forms() {
        for t in [Transform::Exp, Transform::Square, Transform::Sqrt] {
            assert_eq!(score_logitgap_variant(&[2.0; 4], 4, t).unwrap(), 0.0);
        }
        assert_eq!(
            score_logitgap_variant(&[2.0, 1.0], 2, Transform::Square).unwrap(),
            1.0
        );
        assert_eq!(
            score_logitgap_variant(&[2.0, 1.0], 2, Transform::Sqrt).unwrap(),
            1.0
        );
        let e = score_logitgap_variant(&[2.0, 1.0], 2, Transform::Exp).unwrap();
        assert!((e - std::f64::consts::E + 1.0).abs() < 1e-15);
    }

    #[test]
    fn score_batch_matches_per_row_loop() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..1000 * 7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = Matrix::from_vec(1000, 7, data).unwrap();
        let cfg = ScorerConfig::new(Method::Logitgap);
        let batch = score_batch(&m, &cfg).unwrap();
        assert_eq!(batch.len(), 1000);
        for (i, row) in m.row_iter().enumerate() {
            assert_eq!(
                batch.scores()[i].to_bits(),
                score_logitgap(row).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn score_batch_on_worked_matrix() {
        let m = Matrix::from_rows(&[Z1.to_vec(), Z2.to_vec()]).unwrap();
        let mcm = score_batch(&m, &ScorerConfig::new(Method::Mcm)).unwrap();
        assert!((mcm.scores()[0] - 0.70).abs() < 0.005);
        assert!((mcm.scores()[1] - 0.70).abs() < 0.005);
        let lg = score_batch(&m, &ScorerConfig::new(Method::Logitgap)).unwrap();
        assert!((lg.scores()[0] - 1.5404).abs() < 1e-12);
        assert!((lg.scores()[1] - 1.54265).abs() < 1e-12);
    }

    #[test]
    fn config_validation_catches_bad_n_and_k1() {
        let m = Matrix::from_rows(&[Z1.to_vec()]).unwrap();
        let cfg = ScorerConfig::new(Method::LogitgapTopn).with_top_n(1);
        assert!(matches!(score_batch(&m, &cfg), Err(Error::BadN { .. })));
        let cfg = ScorerConfig::new(Method::LogitgapTopn);
        assert!(matches!(score_batch(&m, &cfg), Err(Error::BadN { .. })));

        let one = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            score_batch(&one, &ScorerConfig::new(Method::Logitgap)),
            Err(Error::TooFewClasses { .. })
        ));
        // maxlogit and energy degrade gracefully at K = 1.
        score_batch(&one, &ScorerConfig::new(Method::Maxlogit)).unwrap();
        score_batch(&one, &ScorerConfig::new(Method::Energy)).unwrap();
    }

    #[test]
    fn score_vector_rejects_non_finite() {
        let cfg = ScorerConfig::new(Method::Maxlogit);
        assert!(matches!(
            ScoreVector::new(vec![1.0, f64::NAN], cfg),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn score_vector_roundtrips_csv_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScorerConfig::new(Method::Logitgap);
        let sv = ScoreVector::new(vec![1.5404, -0.25, 1.0 / 3.0], cfg).unwrap();

        let csv = dir.path().join("s.csv");
        sv.save(&csv, Format::Csv).unwrap();
        let back = load_scores(&csv).unwrap();
        assert_eq!(back, sv.scores());

        let bin = dir.path().join("s.bin");
        sv.save(&bin, Format::Binary).unwrap();
        let back = load_scores(&bin).unwrap();
        assert_eq!(back, sv.scores());
    }

    #[test]
    fn load_scores_requires_identifiable_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odd.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(
            load_scores(&path),
            Err(Error::MalformedHeader { .. })
        ));
        // Single column under any name is accepted.
        let path = dir.path().join("one.csv");
        std::fs::write(&path, "whatever\n0.5\n0.25\n").unwrap();
        assert_eq!(load_scores(&path).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
        assert_eq!("exp".parse::<Transform>().unwrap(), Transform::Exp);
        assert_eq!(
            "over_n".parse::<Normalization>().unwrap(),
            Normalization::OverN
        );
    }
}
