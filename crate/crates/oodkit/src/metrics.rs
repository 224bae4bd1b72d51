//! Detector-quality metrics: FPR at fixed TPR, AUROC, and AUPR.
//!
//! Conventions (matching the rest of the toolkit):
//!
//! * Scores follow "higher ⇒ more ID"; ID is the positive class.
//! * The decision rule is `score >= λ ⇒ ID`, so ties at the threshold count
//!   as ID.
//! * FPR at TPR uses the empirical quantile (a k-th order statistic of the
//!   ID scores), no interpolation.
//! * AUROC is the tie-corrected rank statistic: each (ID, OOD) pair
//!   contributes 1 if the ID score is larger, ½ if equal. An independent
//!   brute-force pair loop ([`auroc_bruteforce`]) serves as its oracle.
//! * AUPR is average precision with ID positive, sweeping distinct score
//!   values descending and processing ties as a block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three headline metrics plus the threshold that realized TPR = 0.95.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// False positive rate (OOD accepted as ID) at 95% ID true positive rate.
    pub fpr95: f64,
    /// Probability a random ID sample outscores a random OOD sample.
    pub auroc: f64,
    /// Average precision with ID as the positive class.
    pub aupr: f64,
    /// The score threshold λ that realized TPR = 0.95 under `>= ⇒ ID`.
    pub lambda95: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

fn check_nonempty(scores: &[f64], context: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptySet {
            context: context.into(),
        });
    }
    Ok(())
}

/// False positive rate at a fixed ID true positive rate.
///
/// The threshold is the `ceil(tpr · n_ID)`-th largest ID score — the largest
/// λ with `#(ID >= λ)/n_ID >= tpr` — computed with an integer-robust
/// adjustment so that e.g. `tpr = 0.9, n = 10` needs exactly 9 ID positives
/// despite `0.9 × 10` rounding up in floating point. Returns `(fpr, λ)`.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr: f64) -> Result<(f64, f64)> {
    check_nonempty(id_scores, "ID scores")?;
    check_nonempty(ood_scores, "OOD scores")?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "tpr",
            detail: format!("must be in (0, 1], got {tpr}"),
        });
    }

    let n = id_scores.len();
    let product = tpr * n as f64;
    let mut k = product.ceil() as usize;
    // ceil() can overshoot when tpr·n is an integer that picked up rounding
    // error (0.9 × 10 = 9.000000000000002); step back while k-1 still meets
    // the requirement up to 1 part in 1e12.
    while k > 1 && (k - 1) as f64 >= product * (1.0 - 1e-12) {
        k -= 1;
    }
    let k = k.clamp(1, n);

    let mut sorted = id_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let lambda = sorted[k - 1];

    let fp = ood_scores.iter().filter(|&&s| s >= lambda).count();
    Ok((fp as f64 / ood_scores.len() as f64, lambda))
}

/// Tie-corrected AUROC via the rank-sum statistic, `O((n+m) log(n+m))`.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_nonempty(id_scores, "ID scores")?;
    check_nonempty(ood_scores, "OOD scores")?;

    let mut joint: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    joint.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of 1-based midranks of the ID scores. Midranks are half-integers
    // and all partial sums stay well below 2^53, so the arithmetic is exact.
    let mut id_rank_sum = 0.0;
    let mut start = 0;
    while start < joint.len() {
        let mut end = start + 1;
        while end < joint.len() && joint[end].0 == joint[start].0 {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let id_in_group = joint[start..end].iter().filter(|(_, is_id)| *is_id).count();
        id_rank_sum += midrank * id_in_group as f64;
        start = end;
    }

    let n_id = id_scores.len() as f64;
    let n_ood = ood_scores.len() as f64;
    let u = id_rank_sum - n_id * (n_id + 1.0) / 2.0;
    Ok(u / (n_id * n_ood))
}

/// Pair limit for [`auroc_bruteforce`].
pub const BRUTEFORCE_PAIR_LIMIT: u128 = 100_000_000;

/// Definitional AUROC oracle: explicit loop over all (ID, OOD) pairs with
/// the same tie convention as [`auroc`]. Refuses more than 10^8 pairs.
pub fn auroc_bruteforce(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_nonempty(id_scores, "ID scores")?;
    check_nonempty(ood_scores, "OOD scores")?;
    let pairs = id_scores.len() as u128 * ood_scores.len() as u128;
    if pairs > BRUTEFORCE_PAIR_LIMIT {
        return Err(Error::TooLarge {
            pairs,
            limit: BRUTEFORCE_PAIR_LIMIT,
        });
    }
    let mut wins = 0.0;
    for &i in id_scores {
        for &o in ood_scores {
            if i > o {
                wins += 1.0;
            } else if i == o {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (id_scores.len() as f64 * ood_scores.len() as f64))
}

/// Average precision with ID as the positive class.
///
/// Thresholds sweep the distinct score values descending; a tie group enters
/// as one block, and each block k with recall gain contributes
/// `(R_k - R_{k-1}) · P_k`.
pub fn aupr(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_nonempty(id_scores, "ID scores")?;
    check_nonempty(ood_scores, "OOD scores")?;

    let mut joint: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    joint.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n_id = id_scores.len() as f64;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut start = 0;
    while start < joint.len() {
        let mut end = start + 1;
        while end < joint.len() && joint[end].0 == joint[start].0 {
            end += 1;
        }
        let block_id = joint[start..end].iter().filter(|(_, is_id)| *is_id).count();
        tp += block_id;
        fp += (end - start) - block_id;
        let recall = tp as f64 / n_id;
        if block_id > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (recall - prev_recall) * precision;
        }
        prev_recall = recall;
        start = end;
    }
    Ok(ap)
}

/// Bundle the three metrics with counts and the realized threshold.
pub fn evaluate(id_scores: &[f64], ood_scores: &[f64]) -> Result<EvalResult> {
    let (fpr95, lambda95) = fpr_at_tpr(id_scores, ood_scores, 0.95)?;
    Ok(EvalResult {
        fpr95,
        auroc: auroc(id_scores, ood_scores)?,
        aupr: aupr(id_scores, ood_scores)?,
        lambda95,
        n_id: id_scores.len(),
        n_ood: ood_scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn fpr_perfect_separation() {
        let (fpr, lambda) = fpr_at_tpr(&[1.0, 1.0, 1.0], &[0.0, 0.0], 0.95).unwrap();
        assert_eq!((fpr, lambda), (0.0, 1.0));
    }

    #[test]
    fn fpr_three_vs_two_worked_example() {
        // Needs ceil(0.95 · 3) = 3 ID positives, so λ = 1; one of two OOD
        // scores (2.5) clears it.
        let (fpr, lambda) = fpr_at_tpr(&[3.0, 2.0, 1.0], &[2.5, 0.5], 0.95).unwrap();
        assert_eq!(lambda, 1.0);
        assert_eq!(fpr, 0.5);
    }

    #[test]
    fn fpr_all_ties_is_one() {
        let (fpr, _) = fpr_at_tpr(&[2.0, 2.0], &[2.0, 2.0, 2.0], 0.95).unwrap();
        assert_eq!(fpr, 1.0);
    }

    #[test]
    fn fpr_integer_product_rounding_is_robust() {
        // 0.9 × 10 must need 9 positives, not 10, despite fp rounding.
        let id: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let (_, lambda) = fpr_at_tpr(&id, &[0.0], 0.9).unwrap();
        assert_eq!(lambda, 2.0); // 9th largest of 1..=10
    }

    #[test]
    fn fpr_tpr_one_uses_min_id_score() {
        let id = [5.0, 1.0, 3.0];
        let (_, lambda) = fpr_at_tpr(&id, &[0.0], 1.0).unwrap();
        assert_eq!(lambda, 1.0);
    }

    #[test]
    fn fpr_rejects_empty_and_bad_tpr() {
        assert!(matches!(
            fpr_at_tpr(&[], &[1.0], 0.95),
            Err(Error::EmptySet { .. })
        ));
        assert!(matches!(
            fpr_at_tpr(&[1.0], &[], 0.95),
            Err(Error::EmptySet { .. })
        ));
        assert!(fpr_at_tpr(&[1.0], &[1.0], 0.0).is_err());
        assert!(fpr_at_tpr(&[1.0], &[1.0], 1.5).is_err());
    }

    #[test]
    fn auroc_three_vs_two_worked_example() {
        // Pairs: (3,2.5)+ (3,0.5)+ (2,2.5)- (2,0.5)+ (1,2.5)- (1,0.5)+ = 4/6.
        let a = auroc(&[3.0, 2.0, 1.0], &[2.5, 0.5]).unwrap();
        assert!((a - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn auroc_degenerate_cases() {
        assert_eq!(auroc(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(auroc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auroc_bruteforce(&[1.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(auroc_bruteforce(&[2.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn auroc_matches_bruteforce_with_ties() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..=200);
            let m = rng.random_range(1..=200);
            // Coarse grid injects plenty of exact ties.
            let id: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..20) as f64 / 4.0)
                .collect();
            let ood: Vec<f64> = (0..m)
                .map(|_| rng.random_range(0..20) as f64 / 4.0)
                .collect();
            let fast = auroc(&id, &ood).unwrap();
            let slow = auroc_bruteforce(&id, &ood).unwrap();
            assert!((fast - slow).abs() < 1e-12, "rank {fast} vs brute {slow}");
        }
    }

    #[test]
    fn auroc_bruteforce_guards_pair_count() {
        let big = vec![0.0; 20_000];
        assert!(matches!(
            auroc_bruteforce(&big, &big),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn aupr_worked_example() {
        // Order: 3 (ID), 2 (OOD), 1 (ID) → AP = 0.5·1 + 0.5·(2/3).
        let ap = aupr(&[3.0, 1.0], &[2.0]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn aupr_degenerate_cases() {
        assert_eq!(aupr(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(aupr(&[2.0], &[1.0]).unwrap(), 1.0);
        // All tied: one block, precision = prevalence.
        let ap = aupr(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((ap - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aupr_tie_block_at_threshold() {
        // ID = [2, 1, 1], OOD = [1, 0]: the three 1s form one block.
        // Block 2: R 1/3, P 1. Block 1: tp 3, fp 1 → R 1, P 3/4.
        let ap = aupr(&[2.0, 1.0, 1.0], &[1.0, 0.0]).unwrap();
        let expected = (1.0 / 3.0) * 1.0 + (1.0 - 1.0 / 3.0) * 0.75;
        assert!((ap - expected).abs() < 1e-15);
    }

    #[test]
    fn evaluate_bundles_everything() {
        let r = evaluate(&[3.0, 2.0, 1.0], &[2.5, 0.5]).unwrap();
        assert_eq!(r.fpr95, 0.5);
        assert!((r.auroc - 4.0 / 6.0).abs() < 1e-15);
        // Hand sweep: hits at ranks 1, 3, 4 → AP = (1/3)(1 + 2/3 + 3/4).
        assert!((r.aupr - 29.0 / 36.0).abs() < 1e-12);
        assert_eq!(r.lambda95, 1.0);
        assert_eq!((r.n_id, r.n_ood), (3, 2));

        let perfect = evaluate(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert_eq!(
            (perfect.fpr95, perfect.auroc, perfect.aupr),
            (0.0, 1.0, 1.0)
        );
    }

    #[test]
    fn auroc_role_swap_complements_without_ties() {
        let id = [5.0, 3.5, 2.0];
        let ood = [4.0, 1.0];
        let a = auroc(&id, &ood).unwrap();
        let b = auroc(&ood, &id).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }
}
