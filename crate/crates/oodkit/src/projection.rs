//! Feature-to-logit projection via normalized-prototype similarity.
//!
//! Zero-shot CLIP-style classifiers produce a logit per class as the cosine
//! similarity between an image embedding and a class prototype embedding.
//! This module reproduces that pathway so that synthetic outlier features
//! (which are not unit-norm) can be scored: both sides are defensively
//! re-normalized unless the prototype set asserts it is already normalized.
//!
//! With `scale = 1` every logit is a raw cosine and therefore lies in
//! `[-1, 1]` — the regime the temperature-dominance theory assumes.

use rayon::prelude::*;

use crate::datastore::Matrix;
use crate::error::{Error, Result};

/// A K x d matrix of class prototype embeddings.
#[derive(Debug, Clone)]
pub struct PrototypeSet {
    prototypes: Matrix,
    normalized: bool,
}

/// Tolerance for the `normalized` flag's unit-norm invariant.
const NORM_TOL: f64 = 1e-9;

impl PrototypeSet {
    /// Wrap raw (possibly unnormalized) prototypes; [`cosine_logits`] will
    /// normalize them on the fly.
    pub fn new(prototypes: Matrix) -> Self {
        PrototypeSet {
            prototypes,
            normalized: false,
        }
    }

    /// Wrap prototypes the caller asserts are unit rows; verified to 1e-9.
    pub fn new_normalized(prototypes: Matrix) -> Result<Self> {
        for (i, row) in prototypes.row_iter().enumerate() {
            let norm = l2_norm(row);
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter {
                    name: "prototypes",
                    detail: format!("row {i} has norm {norm}, not unit as asserted"),
                });
            }
        }
        Ok(PrototypeSet {
            prototypes,
            normalized: true,
        })
    }

    /// L2-normalize the rows now and skip the per-call normalization later.
    pub fn normalize(prototypes: &Matrix) -> Result<Self> {
        Ok(PrototypeSet {
            prototypes: l2_normalize_rows(prototypes)?,
            normalized: true,
        })
    }

    /// Number of classes K.
    pub fn num_classes(&self) -> usize {
        self.prototypes.rows()
    }

    /// Embedding dimension d.
    pub fn dim(&self) -> usize {
        self.prototypes.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.prototypes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

fn l2_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scale every row of `m` to unit L2 norm; direction is preserved.
pub fn l2_normalize_rows(m: &Matrix) -> Result<Matrix> {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for (i, row) in m.row_iter().enumerate() {
        let norm = l2_norm(row);
        if norm == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        data.extend(row.iter().map(|v| v / norm));
    }
    Matrix::from_vec(m.rows(), m.cols(), data)
}

/// Cosine logits: entry `(i, k)` is `scale * <f̂_i, ĉ_k>` where `f̂` and `ĉ`
/// are the unit-normalized feature and prototype rows.
///
/// Features are always normalized internally (synthetic features never are);
/// prototypes are normalized unless the set asserts it already happened.
/// Scale homogeneity is exact: the output with `scale = s` is the `scale = 1`
/// output with every dot product multiplied by `s` as a final step.
pub fn cosine_logits(features: &Matrix, protos: &PrototypeSet, scale: f64) -> Result<Matrix> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter {
            name: "scale",
            detail: format!("must be positive, got {scale}"),
        });
    }
    if features.cols() != protos.dim() {
        return Err(Error::DimensionMismatch {
            context: "feature dim vs prototype dim".into(),
            expected: protos.dim(),
            found: features.cols(),
        });
    }

    let fhat = l2_normalize_rows(features)?;
    let phat_owned;
    let phat: &Matrix = if protos.is_normalized() {
        protos.matrix()
    } else {
        phat_owned = l2_normalize_rows(protos.matrix())?;
        &phat_owned
    };

    let k = phat.rows();
    let d = phat.cols();
    let mut data = vec![0.0; fhat.rows() * k];
    // Rows are independent; each output slot is written by exactly one task,
    // so the result is deterministic regardless of scheduling.
    data.par_chunks_mut(k)
        .zip(fhat.data().par_chunks(d))
        .for_each(|(out_row, f)| {
            for (c, out) in out_row.iter_mut().enumerate() {
                let p = phat.row(c);
                let dot: f64 = f.iter().zip(p).map(|(a, b)| a * b).sum();
                *out = scale * dot;
            }
        });
    Matrix::from_vec(fhat.rows(), k, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn eye(k: usize) -> Matrix {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Matrix::from_vec(k, k, data).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let m = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        let n = l2_normalize_rows(&m).unwrap();
        assert_eq!(n.data(), &[0.6, 0.8]);
    }

    #[test]
    fn normalize_leaves_unit_row_unchanged() {
        let m = Matrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(l2_normalize_rows(&m).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            l2_normalize_rows(&m),
            Err(Error::ZeroRow { row: 1 })
        ));
    }

    #[test]
    fn orthonormal_basis_gives_indicator_logits() {
        let f = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let protos = PrototypeSet::new(eye(2));
        let z = cosine_logits(&f, &protos, 1.0).unwrap();
        assert_eq!(z.data(), &[1.0, 0.0]);
    }

    #[test]
    fn diagonal_feature_is_symmetric_across_prototypes() {
        let f = Matrix::from_vec(1, 2, vec![SQRT_HALF, SQRT_HALF]).unwrap();
        let protos = PrototypeSet::new(eye(2));
        let z = cosine_logits(&f, &protos, 1.0).unwrap();
        assert!((z.get(0, 0) - SQRT_HALF).abs() < 1e-12);
        assert!((z.get(0, 1) - SQRT_HALF).abs() < 1e-12);
        // Un-normalized input pointing the same way gives the same logits.
        let f2 = Matrix::from_vec(1, 2, vec![3.0, 3.0]).unwrap();
        let z2 = cosine_logits(&f2, &protos, 1.0).unwrap();
        assert!((z2.get(0, 0) - z.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn scale_multiplies_logits_exactly() {
        let f = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let protos = PrototypeSet::new(Matrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap());
        let z = cosine_logits(&f, &protos, 100.0).unwrap();
        assert_eq!(z.data(), &[100.0, -100.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let f = Matrix::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let protos = PrototypeSet::new(eye(2));
        assert!(matches!(
            cosine_logits(&f, &protos, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nonpositive_scale_is_rejected() {
        let f = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let protos = PrototypeSet::new(eye(2));
        assert!(matches!(
            cosine_logits(&f, &protos, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn asserted_normalization_is_verified() {
        let bad = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert!(PrototypeSet::new_normalized(bad).is_err());
        let good = Matrix::from_vec(1, 2, vec![0.6, 0.8]).unwrap();
        let p = PrototypeSet::new_normalized(good).unwrap();
        assert!(p.is_normalized());
    }

    #[test]
    fn normalize_constructor_normalizes_once() {
        let raw = Matrix::from_vec(2, 2, vec![3.0, 4.0, 0.0, 2.0]).unwrap();
        let p = PrototypeSet::normalize(&raw).unwrap();
        assert!(p.is_normalized());
        assert_eq!(p.matrix().row(0), &[0.6, 0.8]);
        assert_eq!(p.matrix().row(1), &[0.0, 1.0]);
        assert_eq!((p.num_classes(), p.dim()), (2, 2));
    }
}
