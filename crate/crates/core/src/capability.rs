//! Non-parametric branch: per-class model rankings on open-source classes,
//! carried to target classes by the transport plan and averaged.

use crate::data::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::TransportPlan;

/// Columns receiving less mass than this are left out of the mean.
pub const MIN_COLUMN_MASS: f64 = 1e-9;

/// Ranks `values` so that the largest gets rank 1; tied values share the
/// mean of the positions they span.
pub fn rank_descending<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NaN("ranking input"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("no NaN").then(a.cmp(&b)));
    let mut ranks = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let avg = T::of_usize(start + 1 + end) / T::of(2.0);
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

/// Model ranks per class, `M × k`; rank 1 is the most accurate model.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable<T> {
    pub model_ids: Vec<String>,
    pub matrix: DenseMatrix<T>,
}

impl<T: Scalar> RankTable<T> {
    pub fn class_count(&self) -> usize {
        self.matrix.cols()
    }

    pub fn model_count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn select_classes(&self, classes: &[usize]) -> Self {
        let t = self.matrix.transpose().select_rows(classes).transpose();
        Self { model_ids: self.model_ids.clone(), matrix: t }
    }
}

/// `accuracies[m][c]` is the accuracy of model `m` on class `c`.
pub fn class_rankings<T: Scalar>(model_ids: &[String], accuracies: &[Vec<T>]) -> Result<RankTable<T>> {
    let m = accuracies.len();
    if m < 2 {
        return Err(Error::Validation("class rankings need at least two models".into()));
    }
    if model_ids.len() != m {
        return Err(Error::DimensionMismatch { what: "model ids vs accuracy rows", expected: m, got: model_ids.len() });
    }
    let k = accuracies[0].len();
    if let Some(bad) = accuracies.iter().find(|a| a.len() != k) {
        return Err(Error::DimensionMismatch { what: "per-class accuracy count", expected: k, got: bad.len() });
    }
    let mut values = vec![T::zero(); m * k];
    let mut column = vec![T::zero(); m];
    for c in 0..k {
        for (slot, acc) in column.iter_mut().zip(accuracies) {
            *slot = acc[c];
        }
        for (r, rank) in rank_descending(&column)?.into_iter().enumerate() {
            values[r * k + c] = rank;
        }
    }
    Ok(RankTable { model_ids: model_ids.to_vec(), matrix: DenseMatrix::new(m, k, values)? })
}

/// Row `m` of the result is `r_m γ` (no rescaling).
pub fn transfer_rankings<T: Scalar>(ranks: &RankTable<T>, plan: &TransportPlan<T>) -> Result<DenseMatrix<T>> {
    if plan.plan.rows() != ranks.class_count() {
        return Err(Error::DimensionMismatch {
            what: "plan rows vs ranked classes",
            expected: ranks.class_count(),
            got: plan.plan.rows(),
        });
    }
    ranks.matrix.matmul(&plan.plan)
}

/// Mean transferred rank per model over target columns; smaller is better.
/// Columns with mass below [`MIN_COLUMN_MASS`] in `column_mass` are
/// skipped.
pub fn aggregate_target_rank<T: Scalar>(transferred: &DenseMatrix<T>, column_mass: Option<&[T]>) -> Result<Vec<T>> {
    let k = transferred.cols();
    if k == 0 {
        return Err(Error::Empty("target classes"));
    }
    let keep: Vec<usize> = match column_mass {
        Some(mass) => (0..k).filter(|&j| mass[j] >= T::of(MIN_COLUMN_MASS)).collect(),
        None => (0..k).collect(),
    };
    if keep.len() < k {
        log::info!("{} of {k} target columns carry no mass and are skipped", k - keep.len());
    }
    if keep.is_empty() {
        return Err(Error::Validation("no target column received mass".into()));
    }
    let n = T::of_usize(keep.len());
    Ok(transferred.row_iter().map(|row| keep.iter().map(|&j| row[j]).sum::<T>() / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{PlanKind, SolverTag};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    fn plan(p: DenseMatrix<f64>) -> TransportPlan<f64> {
        TransportPlan {
            row_marginal: p.row_sums(),
            col_marginal: p.col_sums(),
            total_mass: p.sum(),
            plan: p,
            objective: 0.0,
            solver: SolverTag::Independent,
            kind: PlanKind::Full,
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_descending(&[0.9, 0.5, 0.1]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_descending(&[0.5, 0.5]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(rank_descending(&[0.2, 0.9, 0.5]).unwrap(), vec![3.0, 1.0, 2.0]);
        assert_eq!(rank_descending(&[0.3, 0.7, 0.3, 0.3]).unwrap(), vec![3.0, 1.0, 3.0, 3.0]);
        assert!(rank_descending(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn class_rankings_columns() {
        let acc = vec![vec![0.9, 0.1], vec![0.5, 0.1], vec![0.1, 0.3]];
        let t = class_rankings(&ids(3), &acc).unwrap();
        assert_eq!(t.matrix.column(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(t.matrix.column(1), vec![2.5, 2.5, 1.0]);
        assert!(class_rankings(&ids(1), &acc[..1]).is_err());
    }

    #[test]
    fn scaled_identity_transfer() {
        let acc = vec![vec![0.9, 0.1], vec![0.5, 0.3]];
        let t = class_rankings(&ids(2), &acc).unwrap();
        let p = plan(DenseMatrix::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap());
        let out = transfer_rankings(&t, &p).unwrap();
        assert_eq!(out.values(), t.matrix.scaled(0.5).values());
    }

    #[test]
    fn aggregate_examples() {
        let x = DenseMatrix::from_rows(&[[2.0, 4.0], [3.0, 3.0]]).unwrap();
        assert_eq!(aggregate_target_rank(&x, None).unwrap(), vec![3.0, 3.0]);
        assert_eq!(aggregate_target_rank(&x, Some(&[1.0, 0.0])).unwrap(), vec![2.0, 3.0]);
        let one = DenseMatrix::from_rows(&[[7.0], [1.0]]).unwrap();
        assert_eq!(aggregate_target_rank(&one, None).unwrap(), vec![7.0, 1.0]);
    }
}
