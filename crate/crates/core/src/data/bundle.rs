//! Per-dataset asset bundles and the model zoo they describe.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered class names of one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    pub dataset_id: String,
    pub names: Vec<String>,
}

impl ClassVocabulary {
    pub fn new(dataset_id: impl Into<String>, names: Vec<String>) -> Result<Self> {
        let vocab = Self { dataset_id: dataset_id.into(), names };
        if vocab.names.is_empty() {
            return Err(Error::Validation(format!("dataset {} has an empty vocabulary", vocab.dataset_id)));
        }
        if let Some(dup) = vocab.first_duplicate() {
            return Err(Error::Validation(format!("duplicate class name {dup:?} in dataset {}", vocab.dataset_id)));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub(crate) fn first_duplicate(&self) -> Option<&str> {
        let mut seen = std::collections::BTreeSet::new();
        self.names.iter().find(|n| !seen.insert(n.as_str())).map(String::as_str)
    }
}

/// Everything known about one model on one dataset.
///
/// Every per-class list follows the owning vocabulary order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelAssets<T> {
    /// Text classifier embeddings, one row per class.
    pub classifier_embeddings: DenseMatrix<T>,
    /// Generated caption embeddings, one block per class.
    pub caption_embeddings: Vec<DenseMatrix<T>>,
    /// Generated synonym embeddings, one block per class; empty when absent.
    pub synonym_embeddings: Vec<DenseMatrix<T>>,
    /// Class-level modality gap vectors, one row per class.
    pub class_gap_vectors: Option<DenseMatrix<T>>,
    /// Classes whose gap row could not be measured.
    pub missing_gap_rows: Vec<usize>,
    /// Raw image embeddings per class, when exported for recomputation.
    pub image_embeddings: Option<Vec<DenseMatrix<T>>>,
    /// Per-class zero-shot accuracy in `[0, 1]`.
    pub class_accuracies: Option<Vec<T>>,
    /// Zero-shot ImageNet accuracy, the general-ability feature.
    pub imagenet_accuracy: Option<T>,
}

impl<T: Scalar> ModelAssets<T> {
    pub fn dim(&self) -> usize {
        self.classifier_embeddings.cols()
    }

    pub fn has_synonyms(&self) -> bool {
        !self.synonym_embeddings.is_empty() && self.synonym_embeddings.iter().any(|s| s.rows() > 0)
    }

    /// Unweighted mean of per-class accuracies.
    pub fn mean_accuracy(&self) -> Option<T> {
        self.class_accuracies
            .as_ref()
            .filter(|a| !a.is_empty())
            .map(|a| a.iter().copied().sum::<T>() / T::of_usize(a.len()))
    }
}

/// All assets for one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetBundle<T> {
    pub dataset_id: String,
    pub vocabulary: ClassVocabulary,
    /// Auxiliary sentence-encoder embeddings of the class names, `k × d_φ`.
    pub classname_embeddings: DenseMatrix<T>,
    pub models: BTreeMap<String, ModelAssets<T>>,
}

impl<T: Scalar> AssetBundle<T> {
    pub fn class_count(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn model(&self, model_id: &str) -> Result<&ModelAssets<T>> {
        self.models.get(model_id).ok_or_else(|| Error::MissingAssets(vec![format!("{}/{model_id}", self.dataset_id)]))
    }

    /// Ground-truth accuracy of each zoo model: mean of its per-class
    /// accuracies.
    pub fn ground_truth_accuracies(&self, zoo: &ModelZoo) -> Result<Vec<T>> {
        zoo.model_ids
            .iter()
            .map(|id| {
                self.model(id)?
                    .mean_accuracy()
                    .ok_or_else(|| Error::MissingAssets(vec![format!("{}/{id}/class_accuracies", self.dataset_id)]))
            })
            .collect()
    }

    /// Converts every matrix and scalar into another precision.
    pub fn cast<U: Scalar>(&self) -> AssetBundle<U> {
        let cast_vec = |v: &Vec<T>| v.iter().map(|&x| U::of(x.as_f64())).collect::<Vec<U>>();
        AssetBundle {
            dataset_id: self.dataset_id.clone(),
            vocabulary: self.vocabulary.clone(),
            classname_embeddings: self.classname_embeddings.cast(),
            models: self
                .models
                .iter()
                .map(|(id, m)| {
                    (
                        id.clone(),
                        ModelAssets {
                            classifier_embeddings: m.classifier_embeddings.cast(),
                            caption_embeddings: m.caption_embeddings.iter().map(|c| c.cast()).collect(),
                            synonym_embeddings: m.synonym_embeddings.iter().map(|c| c.cast()).collect(),
                            class_gap_vectors: m.class_gap_vectors.as_ref().map(|g| g.cast()),
                            missing_gap_rows: m.missing_gap_rows.clone(),
                            image_embeddings: m
                                .image_embeddings
                                .as_ref()
                                .map(|blocks| blocks.iter().map(|b| b.cast()).collect()),
                            class_accuracies: m.class_accuracies.as_ref().map(cast_vec),
                            imagenet_accuracy: m.imagenet_accuracy.map(|a| U::of(a.as_f64())),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// The ordered set of candidate models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelZoo {
    pub model_ids: Vec<String>,
    /// Feature dimension of each model, aligned with `model_ids`.
    pub dims: Vec<usize>,
}

impl ModelZoo {
    pub fn new(model_ids: Vec<String>, dims: Vec<usize>) -> Result<Self> {
        if model_ids.len() < 2 {
            return Err(Error::Validation(format!("model zoo needs at least 2 models, got {}", model_ids.len())));
        }
        if dims.len() != model_ids.len() {
            return Err(Error::DimensionMismatch {
                what: "zoo dimension list",
                expected: model_ids.len(),
                got: dims.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = model_ids.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::Validation(format!("duplicate model id {dup:?}")));
        }
        Ok(Self { model_ids, dims })
    }

    /// Derives the zoo from a bundle's model entries (sorted by id).
    pub fn from_bundle<T: Scalar>(bundle: &AssetBundle<T>) -> Result<Self> {
        let ids: Vec<String> = bundle.models.keys().cloned().collect();
        let dims = bundle.models.values().map(|m| m.dim()).collect();
        Self::new(ids, dims)
    }

    pub fn len(&self) -> usize {
        self.model_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_ids.is_empty()
    }

    pub fn position(&self, model_id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == model_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(ClassVocabulary::new("d", vec![]).is_err());
        assert!(ClassVocabulary::new("d", vec!["a".into(), "a".into()]).is_err());
        assert_eq!(ClassVocabulary::new("d", vec!["a".into(), "b".into()]).unwrap().len(), 2);
    }

    #[test]
    fn zoo_needs_two_unique_models() {
        assert!(ModelZoo::new(vec!["a".into()], vec![4]).is_err());
        assert!(ModelZoo::new(vec!["a".into(), "a".into()], vec![4, 4]).is_err());
        assert!(ModelZoo::new(vec!["a".into(), "b".into()], vec![4]).is_err());
        let zoo = ModelZoo::new(vec!["a".into(), "b".into()], vec![4, 8]).unwrap();
        assert_eq!(zoo.position("b"), Some(1));
    }
}
