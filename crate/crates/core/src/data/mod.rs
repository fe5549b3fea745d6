//! Domain containers, normalization primitives, validation and file IO
//! shared by every other module.

pub mod bundle;
pub mod format;
pub mod matrix;
pub mod normalize;
pub mod validate;

pub use bundle::{AssetBundle, ClassVocabulary, ModelAssets, ModelZoo};
pub use matrix::{cosine, dot, norm, DenseMatrix, Normalization};
pub use normalize::{l2_normalize, l2_normalize_in_place, zscore_normalize, ZStats, DEFAULT_STD_EPS};
pub use validate::{validate_bundle, ValidationReport, Violation};
