//! Bundle consistency checks.

use std::fmt;

use serde::Serialize;

use super::bundle::{AssetBundle, ModelZoo};
use super::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// One problem found in a bundle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    /// Where the problem is, e.g. `cifar/m3/class_accuracies`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Result of [`validate_bundle`]; empty iff the bundle is usable.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dataset_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: String, message: impl Into<String>) {
        self.violations.push(Violation { location, message: message.into() });
    }
}

fn check_finite<T: Scalar>(report: &mut ValidationReport, loc: &str, m: &DenseMatrix<T>) {
    if m.values().iter().any(|v| !v.is_finite()) {
        report.push(loc.to_string(), "non-finite value");
    }
}

/// Checks alignment, dimensions and value ranges of `bundle` against `zoo`.
pub fn validate_bundle<T: Scalar>(bundle: &AssetBundle<T>, zoo: &ModelZoo) -> ValidationReport {
    let mut report = ValidationReport { dataset_id: bundle.dataset_id.clone(), ..Default::default() };
    let ds = &bundle.dataset_id;
    let k = bundle.vocabulary.len();

    if k == 0 {
        report.push(format!("{ds}/vocabulary"), "empty vocabulary");
    }
    if let Some(dup) = bundle.vocabulary.first_duplicate() {
        report.push(format!("{ds}/vocabulary"), format!("duplicate class name {dup:?}"));
    }
    if bundle.vocabulary.dataset_id != bundle.dataset_id {
        report.push(
            format!("{ds}/vocabulary"),
            format!("vocabulary belongs to dataset {:?}", bundle.vocabulary.dataset_id),
        );
    }
    if bundle.classname_embeddings.rows() != k {
        report.push(
            format!("{ds}/classname_embeddings"),
            format!("{} rows for {k} classes", bundle.classname_embeddings.rows()),
        );
    }
    check_finite(&mut report, &format!("{ds}/classname_embeddings"), &bundle.classname_embeddings);

    for (idx, model_id) in zoo.model_ids.iter().enumerate() {
        let loc = format!("{ds}/{model_id}");
        let Some(m) = bundle.models.get(model_id) else {
            report.push(loc, "model missing from bundle");
            continue;
        };
        let d = zoo.dims[idx];
        let cls = &m.classifier_embeddings;
        if cls.rows() != k {
            report.push(format!("{loc}/classifier_embeddings"), format!("{} rows for {k} classes", cls.rows()));
        }
        if cls.cols() != d {
            report
                .push(format!("{loc}/classifier_embeddings"), format!("dimension {} but zoo declares {d}", cls.cols()));
        }
        check_finite(&mut report, &format!("{loc}/classifier_embeddings"), cls);

        let mut check_blocks = |role: &str, blocks: &[DenseMatrix<T>], required: bool| {
            if blocks.is_empty() && !required {
                return;
            }
            if blocks.len() != k {
                report.push(format!("{loc}/{role}"), format!("{} class blocks for {k} classes", blocks.len()));
            }
            for (c, b) in blocks.iter().enumerate() {
                if b.rows() > 0 && b.cols() != d {
                    report.push(format!("{loc}/{role}[{c}]"), format!("dimension {} but zoo declares {d}", b.cols()));
                }
                if required && b.rows() == 0 {
                    report.push(format!("{loc}/{role}[{c}]"), "class has no rows");
                }
                check_finite(&mut report, &format!("{loc}/{role}[{c}]"), b);
            }
        };
        check_blocks("caption_embeddings", &m.caption_embeddings, true);
        check_blocks("synonym_embeddings", &m.synonym_embeddings, false);
        if let Some(images) = &m.image_embeddings {
            check_blocks("image_embeddings", images, false);
        }

        if let Some(g) = &m.class_gap_vectors {
            if g.rows() != k || g.cols() != d {
                report.push(
                    format!("{loc}/class_gap_vectors"),
                    format!("shape {}x{} but expected {k}x{d}", g.rows(), g.cols()),
                );
            }
            check_finite(&mut report, &format!("{loc}/class_gap_vectors"), g);
        }
        if let Some(&bad) = m.missing_gap_rows.iter().find(|&&r| r >= k) {
            report.push(format!("{loc}/missing_gap_rows"), format!("row {bad} out of range"));
        }

        if let Some(acc) = &m.class_accuracies {
            if acc.len() != k {
                report.push(format!("{loc}/class_accuracies"), format!("{} accuracies for {k} classes", acc.len()));
            }
            for (c, &a) in acc.iter().enumerate() {
                if !(a >= T::zero() && a <= T::one()) {
                    report.push(format!("{loc}/class_accuracies[{c}]"), format!("accuracy {a} outside [0, 1]"));
                }
            }
        }
        if let Some(a) = m.imagenet_accuracy {
            if !(a >= T::zero() && a <= T::one()) {
                report.push(format!("{loc}/imagenet_accuracy"), format!("accuracy {a} outside [0, 1]"));
            }
        }
    }
    for model_id in bundle.models.keys() {
        if zoo.position(model_id).is_none() {
            report.push(format!("{ds}/{model_id}"), "model not in zoo");
        }
    }
    report
}
