//! oodkit — post-hoc out-of-distribution (OOD) detection on precomputed
//! classifier logits.
//!
//! The toolkit covers the full desk-scale workflow:
//!
//! * [`datastore`] — load/save logit, feature, and prototype matrices in CSV
//!   or a self-describing binary container, plus label vectors.
//! * [`projection`] — turn feature embeddings into cosine logits against
//!   class prototypes (the pathway used by CLIP-style zero-shot classifiers).
//! * [`scoring`] — every scoring function in scope (MaxLogit, max-softmax,
//!   energy, GEN, margin, and the logit-gap family), vectorized over a logit
//!   matrix under the uniform convention "higher score ⇒ more in-distribution".
//! * [`selection`] — the top-N subspace machinery: the fixed-N rule,
//!   synthetic-OOD generation by inter-class feature interpolation, and the
//!   max-gap criterion for picking N adaptively.
//! * [`metrics`] — FPR at fixed TPR, AUROC, and AUPR with exact rank-based
//!   implementations and an independent brute-force AUROC oracle.
//! * [`theorylab`] — seeded Monte Carlo simulators that make the theory
//!   behind the scorers executable: a Gaussian feature world with
//!   interpolated-mixture outliers, logit-ordering checks, and the
//!   temperature-dominance check relating the gap score to max-softmax.
//!
//! All randomized components take explicit 64-bit seeds and document their
//! draw order, so results are bitwise reproducible within one build
//! regardless of thread count.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN, which must never pass a range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datastore;
pub mod error;
pub mod metrics;
pub mod projection;
pub mod scoring;
pub mod selection;
pub mod theorylab;

pub use error::{Error, Result};
