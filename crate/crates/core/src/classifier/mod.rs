//! Shape recognition: synthetic stroke generators, a KNN classifier over
//! hull features and an evaluation harness.

pub mod eval;
pub mod knn;
pub mod shapes;

use std::sync::{Arc, OnceLock};

pub use eval::{evaluate, evaluate_features, Report};
pub use knn::{fit, fit_features, ClassifierError, KnnConfig, Prediction, TrainedModel};
pub use shapes::{generate_corpus, generate_shape, NoiseProfile, ShapeClass};

/// Samples per generated stroke: one 3-second window at 20 Hz.
pub const STROKE_SAMPLES: usize = 60;

pub const DEFAULT_TRAINING_PER_CLASS: usize = 50;
pub const DEFAULT_TRAINING_SEED: u64 = 42;

/// Seed of the held-out evaluation strokes; distinct from the training seed.
pub const DEFAULT_TEST_SEED: u64 = 2024;

/// 50 strokes per class at the training noise level, seed 42.
pub fn default_training_corpus() -> Vec<(crate::trajectory::Trajectory, ShapeClass)> {
    generate_corpus(
        DEFAULT_TRAINING_PER_CLASS,
        &NoiseProfile::training(DEFAULT_TRAINING_SEED),
        STROKE_SAMPLES,
    )
}

/// The model shipped with the engine, built once per process from
/// [`default_training_corpus`] with k = 3.
pub fn default_model() -> Arc<TrainedModel> {
    static MODEL: OnceLock<Arc<TrainedModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            Arc::new(
                fit(&default_training_corpus(), KnnConfig::default())
                    .expect("generated corpus covers every class"),
            )
        })
        .clone()
}
