//! Class-level modality gaps: estimation on open-source classes, transfer
//! to target classes through a transport plan, and correction of target
//! text embeddings.
//!
//! Texts and images are first z-scored with the statistics of their own
//! modality and then L2-normalized; gaps live in that space and are added
//! to texts prepared the same way (see [`prepare_texts`]).

use serde::{Deserialize, Serialize};

use crate::data::{DenseMatrix, ZStats};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::TransportPlan;

/// Weight above which a plan may not touch a missing source row.
pub const MISSING_WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapLevel {
    #[default]
    ClassMean,
    DatasetMean,
}

impl GapLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            GapLevel::ClassMean => "class_mean",
            GapLevel::DatasetMean => "dataset_mean",
        }
    }
}

/// Per-class gap vectors of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct GapTable<T> {
    pub model_id: String,
    pub matrix: DenseMatrix<T>,
    /// Rows whose class had no images; they carry zeros and may not be used
    /// as transfer sources.
    pub missing: Vec<bool>,
    pub level: GapLevel,
}

impl<T: Scalar> GapTable<T> {
    pub fn new(model_id: impl Into<String>, matrix: DenseMatrix<T>, missing_rows: &[usize]) -> Result<Self> {
        let mut missing = vec![false; matrix.rows()];
        for &r in missing_rows {
            let slot =
                missing.get_mut(r).ok_or_else(|| Error::Validation(format!("missing gap row {r} out of range")))?;
            *slot = true;
        }
        Ok(Self { model_id: model_id.into(), matrix, missing, level: GapLevel::ClassMean })
    }

    pub fn zeros(model_id: impl Into<String>, k: usize, dim: usize) -> Self {
        Self {
            model_id: model_id.into(),
            matrix: DenseMatrix::zeros(k, dim),
            missing: vec![false; k],
            level: GapLevel::ClassMean,
        }
    }

    pub fn class_count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Stacks tables of the same model (e.g. one per open-source dataset).
    pub fn concat(tables: &[GapTable<T>]) -> Result<Self> {
        let first = tables.first().ok_or(Error::Empty("gap tables"))?;
        let blocks: Vec<&DenseMatrix<T>> = tables.iter().map(|t| &t.matrix).collect();
        Ok(Self {
            model_id: first.model_id.clone(),
            matrix: DenseMatrix::vstack(&blocks)?,
            missing: tables.iter().flat_map(|t| t.missing.iter().copied()).collect(),
            level: first.level,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            model_id: self.model_id.clone(),
            matrix: self.matrix.select_rows(rows),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
            level: self.level,
        }
    }

    /// Replaces every row by the unweighted mean of the present rows.
    pub fn to_dataset_mean(&self) -> Self {
        let present: Vec<usize> = (0..self.class_count()).filter(|&r| !self.missing[r]).collect();
        let mut mean = vec![T::zero(); self.dim()];
        for &r in &present {
            for (m, &x) in mean.iter_mut().zip(self.matrix.row(r)) {
                *m = *m + x;
            }
        }
        if !present.is_empty() {
            let n = T::of_usize(present.len());
            mean.iter_mut().for_each(|m| *m = *m / n);
        }
        let values = (0..self.class_count()).flat_map(|_| mean.iter().copied()).collect();
        Self {
            model_id: self.model_id.clone(),
            matrix: DenseMatrix::new(self.class_count(), self.dim(), values).expect("shape preserved"),
            missing: self.missing.clone(),
            level: GapLevel::DatasetMean,
        }
    }
}

fn unit<T: Scalar>(row: &[T]) -> Vec<T> {
    let n = crate::data::norm(row);
    if n == T::zero() {
        row.to_vec()
    } else {
        row.iter().map(|&x| x / n).collect()
    }
}

/// Modality statistics used to z-score images and texts before the gap
/// formula.
#[derive(Clone, Debug)]
pub struct ModalityStats<T> {
    pub image: ZStats<T>,
    pub text: ZStats<T>,
}

/// Row `k` is the mean over class-`k` images of
/// `x/‖x‖ − p_k/‖p_k‖`, after the optional z-score of each modality.
/// Classes without images are flagged missing.
pub fn compute_class_gap_vectors<T: Scalar>(
    model_id: &str,
    images: &[DenseMatrix<T>],
    prototypes: &DenseMatrix<T>,
    stats: Option<&ModalityStats<T>>,
) -> Result<GapTable<T>> {
    if images.len() != prototypes.rows() {
        return Err(Error::DimensionMismatch {
            what: "image blocks vs prototypes",
            expected: prototypes.rows(),
            got: images.len(),
        });
    }
    let dim = prototypes.cols();
    let mut values = Vec::with_capacity(images.len() * dim);
    let mut missing = Vec::with_capacity(images.len());
    let mut buf = vec![T::zero(); dim];
    for (k, block) in images.iter().enumerate() {
        if block.rows() > 0 && block.cols() != dim {
            return Err(Error::DimensionMismatch {
                what: "image embedding dimension",
                expected: dim,
                got: block.cols(),
            });
        }
        let proto = match stats {
            Some(s) => {
                s.text.apply_row(prototypes.row(k), &mut buf);
                unit(&buf)
            }
            None => unit(prototypes.row(k)),
        };
        if block.rows() == 0 {
            log::warn!("model {model_id}: class {k} has no images, gap row flagged missing");
            values.extend(std::iter::repeat_n(T::zero(), dim));
            missing.push(true);
            continue;
        }
        let mut acc = vec![T::zero(); dim];
        for x in block.row_iter() {
            let img = match stats {
                Some(s) => {
                    s.image.apply_row(x, &mut buf);
                    unit(&buf)
                }
                None => unit(x),
            };
            for ((a, &i), &p) in acc.iter_mut().zip(&img).zip(&proto) {
                *a = *a + (i - p);
            }
        }
        let n = T::of_usize(block.rows());
        values.extend(acc.into_iter().map(|a| a / n));
        missing.push(false);
    }
    Ok(GapTable {
        model_id: model_id.to_string(),
        matrix: DenseMatrix::new(images.len(), dim, values)?,
        missing,
        level: GapLevel::ClassMean,
    })
}

/// Target row `j` is `k_T · Σ_i γ_ij G_i`.
pub fn transfer_gap_vectors<T: Scalar>(
    plan: &TransportPlan<T>,
    source: &GapTable<T>,
    k_t: usize,
) -> Result<GapTable<T>> {
    let (ks, kt) = plan.plan.shape();
    if ks != source.class_count() {
        return Err(Error::DimensionMismatch {
            what: "plan rows vs source gap rows",
            expected: source.class_count(),
            got: ks,
        });
    }
    if kt != k_t {
        return Err(Error::DimensionMismatch { what: "plan columns vs target classes", expected: k_t, got: kt });
    }
    let tol = T::of(MISSING_WEIGHT_TOL);
    for (i, _) in source.missing.iter().enumerate().filter(|(_, &m)| m) {
        if plan.plan.row(i).iter().any(|&w| w > tol) {
            return Err(Error::MissingGapRow(i));
        }
    }
    let scale = T::of_usize(k_t);
    let dim = source.dim();
    let mut values = vec![T::zero(); kt * dim];
    for j in 0..kt {
        let out = &mut values[j * dim..(j + 1) * dim];
        for i in 0..ks {
            let w = plan.plan.get(i, j);
            if w == T::zero() {
                continue;
            }
            for (o, &g) in out.iter_mut().zip(source.matrix.row(i)) {
                *o = *o + w * g;
            }
        }
        out.iter_mut().for_each(|o| *o = *o * scale);
    }
    Ok(GapTable {
        model_id: source.model_id.clone(),
        matrix: DenseMatrix::new(kt, dim, values)?,
        missing: vec![false; kt],
        level: source.level,
    })
}

/// Maps per-class text blocks into the gap space: z-score with `stats` (if
/// any), then L2-normalize each row.
pub fn prepare_texts<T: Scalar>(blocks: &[DenseMatrix<T>], stats: Option<&ZStats<T>>) -> Result<Vec<DenseMatrix<T>>> {
    blocks
        .iter()
        .map(|b| {
            b.map_rows(|_, row, out| {
                match stats {
                    Some(s) => s.apply_row(row, out),
                    None => out.copy_from_slice(row),
                }
                crate::data::l2_normalize_in_place(out);
            })
        })
        .collect()
}

/// Adds gap row `j` to every text of class `j`.
pub fn apply_gap_to_texts<T: Scalar>(texts: &[DenseMatrix<T>], gaps: &GapTable<T>) -> Result<Vec<DenseMatrix<T>>> {
    if texts.len() != gaps.class_count() {
        return Err(Error::DimensionMismatch {
            what: "text blocks vs gap rows",
            expected: gaps.class_count(),
            got: texts.len(),
        });
    }
    texts
        .iter()
        .enumerate()
        .map(|(j, block)| {
            if block.rows() > 0 && block.cols() != gaps.dim() {
                return Err(Error::DimensionMismatch {
                    what: "text embedding dimension vs gap dimension",
                    expected: gaps.dim(),
                    got: block.cols(),
                });
            }
            let g = gaps.matrix.row(j);
            block.map_rows(|_, row, out| {
                for ((o, &t), &d) in out.iter_mut().zip(row).zip(g) {
                    *o = t + d;
                }
            })
        })
        .collect()
}
