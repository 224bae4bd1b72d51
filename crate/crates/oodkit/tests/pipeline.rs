//! Library-level integration tests over the bundled fixture files: the full
//! no-real-OOD workflow (features → synthetic outliers → projection → N
//! selection → scoring → metrics) plus the worked-example anchors.

use std::path::PathBuf;

use oodkit::datastore::{load_matrix_with_labels, Format};
use oodkit::metrics::evaluate;
use oodkit::projection::{cosine_logits, PrototypeSet};
use oodkit::scoring::{load_scores, score_batch, Method, ScorerConfig};
use oodkit::selection::{select_n_pipeline, synthesize_ood, SynthesisConfig};
use oodkit::theorylab::GaussianWorld;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn worked_example_logits_reproduce_reference_scores() {
    let (logits, labels) =
        load_matrix_with_labels(fixture("toy_logits.csv"), Format::Auto).unwrap();
    assert!(labels.is_none());
    assert_eq!((logits.rows(), logits.cols()), (2, 3));

    let mcm = score_batch(&logits, &ScorerConfig::new(Method::Mcm)).unwrap();
    assert!((mcm.scores()[0] - 0.70).abs() < 0.005);
    assert!((mcm.scores()[1] - 0.70).abs() < 0.005);

    let gap = score_batch(&logits, &ScorerConfig::new(Method::Logitgap)).unwrap();
    assert!((gap.scores()[0] - 1.5404).abs() < 1e-4);
    assert!((gap.scores()[1] - 1.54265).abs() < 1e-4);
}

#[test]
fn metric_fixture_reproduces_reference_numbers() {
    let id = load_scores(fixture("metrics_id_scores.csv")).unwrap();
    let ood = load_scores(fixture("metrics_ood_scores.csv")).unwrap();
    let r = evaluate(&id, &ood).unwrap();
    assert_eq!(r.fpr95, 0.5);
    assert!((r.auroc - 4.0 / 6.0).abs() < 1e-12);
    assert!((r.aupr - 29.0 / 36.0).abs() < 1e-12);
    assert_eq!(r.lambda95, 1.0);

    let id = load_scores(fixture("perfect_id_scores.csv")).unwrap();
    let ood = load_scores(fixture("perfect_ood_scores.csv")).unwrap();
    let r = evaluate(&id, &ood).unwrap();
    assert_eq!((r.fpr95, r.auroc, r.aupr), (0.0, 1.0, 1.0));
}

#[test]
fn end_to_end_adaptive_pipeline_on_toy_features() {
    let (features, labels) =
        load_matrix_with_labels(fixture("toy_features.csv"), Format::Auto).unwrap();
    let labels = labels.expect("toy features carry a label column");
    assert_eq!((features.rows(), features.cols()), (60, 8));

    let protos = PrototypeSet::new_normalized(
        oodkit::datastore::load_matrix(fixture("toy_prototypes.csv"), Format::Auto).unwrap(),
    )
    .unwrap();

    // α = 0.5 makes each synthetic point an even blend of two classes —
    // the farthest a noiseless interpolation gets from every prototype.
    let cfg = SynthesisConfig {
        alpha: 0.5,
        val_size: 40,
        seed: 11,
        ..Default::default()
    };
    let sel = select_n_pipeline(&features, &labels, &protos, 10.0, &cfg, None).unwrap();
    assert_eq!((sel.n_min, sel.n_max), (2, 3));
    assert!(sel.gap_curve.iter().all(|g| g.is_finite()));

    // Score real ID rows vs fresh synthetic outliers with the selected N.
    let id_logits = cosine_logits(&features, &protos, 10.0).unwrap();
    let synth = synthesize_ood(&features, &labels, &cfg).unwrap();
    let ood_logits = cosine_logits(&synth, &protos, 10.0).unwrap();
    let scorer = ScorerConfig::new(Method::LogitgapTopn).with_top_n(sel.n_star);
    let id_scores = score_batch(&id_logits, &scorer).unwrap();
    let ood_scores = score_batch(&ood_logits, &scorer).unwrap();
    let r = evaluate(id_scores.scores(), ood_scores.scores()).unwrap();

    // The toy classes are well-separated one-hot-ish clusters; interpolated
    // outliers must be clearly detectable.
    assert!(r.auroc > 0.9, "auroc = {}", r.auroc);
    assert!(r.fpr95 < 0.5, "fpr95 = {}", r.fpr95);
    assert_eq!((r.n_id, r.n_ood), (60, 40));
}

#[test]
fn bundled_world_config_matches_reference_world() {
    let text = std::fs::read_to_string(fixture("world_default.json")).unwrap();
    let world: GaussianWorld = serde_json::from_str(&text).unwrap();
    assert_eq!(world, GaussianWorld::default_binary());
}
