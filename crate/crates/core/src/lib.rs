//! Language-only selection of vision-language models.
//!
//! Given the text-side assets of a target task (class names, generated
//! captions and synonyms, per-model text classifiers) and class-level
//! statistics of a model zoo on open-source datasets, the engine predicts a
//! performance ranking of the zoo on the target task. Two predictions are
//! combined:
//!
//! * a learning branch that scores gap-corrected caption embeddings with a
//!   linear ranker ([`text_scores`], [`gap_bridge`], [`ranker`]);
//! * a non-parametric branch that transfers per-class model rankings
//!   ([`capability`]).
//!
//! Both branches reuse open-source statistics through an optimal-transport
//! plan between class-name embeddings ([`transport`]). [`eval`] holds the
//! ensemble, the evaluation metrics, the leave-one-dataset-out harness and
//! the synthetic universe generator.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! default `f64` working precision.

// Negated comparisons double as NaN rejection; index loops read closer to
// the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capability;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gap_bridge;
pub mod ranker;
pub mod scalar;
pub mod text_scores;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::{FlowValue, Scalar};

/// Working-precision matrix.
pub type Matrix = data::DenseMatrix<f64>;
/// Storage-precision matrix.
pub type Matrix32 = data::DenseMatrix<f32>;
pub type Bundle = data::AssetBundle<f64>;
pub type Plan = transport::TransportPlan<f64>;
pub type Gaps = gap_bridge::GapTable<f64>;
pub type Ranks = capability::RankTable<f64>;
pub type Scores = text_scores::ScoreVector<f64>;
pub type Ranker = ranker::LinearRanker<f64>;
