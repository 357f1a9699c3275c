//! Local Mahalanobis metric learning from pairwise similarities.
//!
//! The model is a conical combination of K low-rank metrics: each metric is
//! a linear transform `L_k`, and every sample carries a simplex-constrained
//! coefficient vector saying how relevant each metric is to distances
//! involving it. Training alternates three kinds of block minimization:
//!
//! 1. a proximal subgradient step on the transforms, with singular-value
//!    thresholding for the nuclear-norm regularizer ([`psd`]);
//! 2. a majorize-minimize pass over the coefficient vectors, solved in
//!    closed form per sample with a bisection on the Lagrange multiplier
//!    ([`mm`]);
//! 3. for the transductive variant only, an optimal re-assignment of the
//!    test-involving similarity entries ([`transductive`]).
//!
//! Classification uses a k-nearest-neighbor rule under the learned local
//! distances ([`eval`]), and paired-model comparison is provided through
//! McNemar tests with Holm's step-down correction.
//!
//! All numeric code is generic over the [`Scalar`] type (`f32` or `f64`);
//! concrete aliases for the common choices live at the crate root.
//!
//! ```
//! use r2lml::{
//!     evaluate, standardize, synth_gaussian_mixture, train_e_r2lml, Hyperparams, Method,
//!     SynthConfig, SynthKind,
//! };
//!
//! let (train, test) = synth_gaussian_mixture::<f64>(&SynthConfig {
//!     kind: SynthKind::Overlap,
//!     dim: 4,
//!     n_train: 30,
//!     n_test: 40,
//!     mean_offset: Some(0.8),
//!     seed: 1,
//!     ..SynthConfig::default()
//! })?;
//! let (train, mut rest, _) = standardize(&train, &[&test])?;
//! let test = rest.pop().unwrap();
//!
//! let hyper = Hyperparams {
//!     k: 2,
//!     lambda: 0.5,
//!     step_length: 1e-3,
//!     epochs: 2,
//!     psd_iters_per_epoch: 40,
//!     ..Hyperparams::default()
//! };
//! let (model, trace) = train_e_r2lml(&train, &hyper)?;
//! assert!(trace.final_objective <= trace.initial_objective);
//!
//! let (accuracy, _) = evaluate(&model, &test, Method::Efficient, None, 5)?;
//! assert!(accuracy > 0.0);
//! # Ok::<(), r2lml::Error>(())
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
mod linalg;
pub mod mm;
pub mod model;
pub mod model_io;
pub mod psd;
pub mod rng;
pub mod scalar;
pub mod trainer;
pub mod transductive;

pub use dataset::{
    load_csv, load_features_csv, similarity_from_labels, split, standardize,
    synth_gaussian_mixture, write_csv, write_features_csv, Dataset, SimilarityMatrix, SplitReport,
    StandardizationParams, SynthConfig, SynthKind,
};
pub use error::{Error, Result};
pub use eval::{
    chi_square_survival_1df, evaluate, holm, knn_predict, mcnemar, McNemarBranch, McNemarOutcome,
    PredictionSet,
};
pub use mm::{build_sbar, largest_eigenvalue, mm_block, theorem1_project, MmResult, QuadraticForm};
pub use model::{nuclear_norm, objective, Hyperparams, LocalMetricModel, Method};
pub use model_io::{load_model, save_model};
pub use psd::{loss_subgradient, psd_block, svt, PsdBlockResult, PsdConfig, PsdTraceRow};
pub use scalar::Scalar;
pub use trainer::{
    cross_validate, train_e_r2lml, train_e_r2lml_restarted, train_t_r2lml, train_t_r2lml_restarted,
    HyperGrid, OuterRecord, ScoreRow, Termination, TrainingTrace, PROTOCOL_KNN,
};
pub use transductive::{compute_psi, row_assignment, solve_similarity, PsiMatrix};

/// Double-precision dataset.
pub type Dataset64 = Dataset<f64>;
/// Single-precision dataset.
pub type Dataset32 = Dataset<f32>;
/// Double-precision model, the default for the CLI and file formats.
pub type LocalMetricModel64 = LocalMetricModel<f64>;
/// Single-precision model.
pub type LocalMetricModel32 = LocalMetricModel<f32>;
