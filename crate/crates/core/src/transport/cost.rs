use serde::{Deserialize, Serialize};

use crate::data::{norm, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nonnegative `k_S × k_T` transport cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<T> {
    pub matrix: DenseMatrix<T>,
    pub exponentiated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostShape {
    pub source: usize,
    pub target: usize,
}

impl<T: Scalar> CostMatrix<T> {
    /// Wraps an arbitrary nonnegative matrix.
    pub fn from_matrix(matrix: DenseMatrix<T>) -> Result<Self> {
        if matrix.values().iter().any(|&v| v < T::zero()) {
            return Err(Error::Validation("cost entries must be nonnegative".into()));
        }
        Ok(Self { matrix, exponentiated: false })
    }

    pub fn shape(&self) -> CostShape {
        CostShape { source: self.matrix.rows(), target: self.matrix.cols() }
    }

    /// Keeps the listed source rows.
    pub fn select_sources(&self, rows: &[usize]) -> Self {
        Self { matrix: self.matrix.select_rows(rows), exponentiated: self.exponentiated }
    }
}

fn unit_rows<T: Scalar>(m: &DenseMatrix<T>, what: &'static str) -> Result<Vec<Vec<T>>> {
    m.row_iter()
        .enumerate()
        .map(|(r, row)| {
            let n = norm(row);
            if n == T::zero() {
                Err(Error::ZeroNorm { what, row: r })
            } else {
                Ok(row.iter().map(|&v| v / n).collect())
            }
        })
        .collect()
}

/// Cosine similarity between every source row and every target row.
pub fn similarity_matrix<T: Scalar>(src: &DenseMatrix<T>, tgt: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if src.cols() != tgt.cols() {
        return Err(Error::DimensionMismatch {
            what: "class-name embedding dimension",
            expected: src.cols(),
            got: tgt.cols(),
        });
    }
    if src.rows() == 0 || tgt.rows() == 0 {
        return Err(Error::Empty("class-name embeddings"));
    }
    let s = unit_rows(src, "source embedding")?;
    let t = unit_rows(tgt, "target embedding")?;
    let mut values = Vec::with_capacity(s.len() * t.len());
    for a in &s {
        for b in &t {
            let c = crate::data::dot(a, b);
            values.push(c.max(-T::one()).min(T::one()));
        }
    }
    DenseMatrix::new(s.len(), t.len(), values)
}

/// `cost_ij = 1 - cos(src_i, tgt_j)`, optionally replaced by `e^{cost_ij}`.
pub fn build_cost_matrix<T: Scalar>(
    src_emb: &DenseMatrix<T>,
    tgt_emb: &DenseMatrix<T>,
    exponentiate: bool,
) -> Result<CostMatrix<T>> {
    let sim = similarity_matrix(src_emb, tgt_emb)?;
    let matrix = sim.map_rows(|_, row, out| {
        for (o, &s) in out.iter_mut().zip(row) {
            let c = (T::one() - s).max(T::zero());
            *o = if exponentiate { c.exp() } else { c };
        }
    })?;
    Ok(CostMatrix { matrix, exponentiated: exponentiate })
}

/// Indices of source classes whose best cosine similarity to any target
/// class exceeds `lambda`, in source order.
pub fn filter_source_classes<T: Scalar>(
    src_emb: &DenseMatrix<T>,
    tgt_emb: &DenseMatrix<T>,
    lambda: T,
) -> Result<Vec<usize>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidConfig(format!("filter threshold {lambda} outside [0, 1]")));
    }
    let sim = similarity_matrix(src_emb, tgt_emb)?;
    let kept: Vec<usize> = sim
        .row_iter()
        .enumerate()
        .filter(|(_, row)| row.iter().copied().fold(T::neg_infinity(), T::max) > lambda)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoRelevantSourceClasses { threshold: lambda.as_f64() });
    }
    Ok(kept)
}
