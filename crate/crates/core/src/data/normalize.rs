//! Row L2 normalization and column z-scoring.

use log::warn;
use serde::{Deserialize, Serialize};

use super::matrix::{norm, DenseMatrix, Normalization};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default floor for zero-variance columns.
pub const DEFAULT_STD_EPS: f64 = 1e-12;

/// Scales every row to unit Euclidean norm.
///
/// All-zero rows are returned unchanged; their indices are returned
/// alongside the matrix.
pub fn l2_normalize<T: Scalar>(m: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Vec<usize>)> {
    let mut zero_rows = Vec::new();
    let out = m.map_rows(|r, row, out| {
        let n = norm(row);
        if n == T::zero() {
            zero_rows.push(r);
            out.copy_from_slice(row);
        } else {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = v / n;
            }
        }
    })?;
    if !zero_rows.is_empty() {
        warn!("l2_normalize: {} all-zero row(s) left unchanged", zero_rows.len());
    }
    Ok((out.with_normalization(Normalization::L2), zero_rows))
}

/// Normalizes a single vector in place; zero vectors are left as is.
pub fn l2_normalize_in_place<T: Scalar>(v: &mut [T]) {
    let n = norm(v);
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / n);
    }
}

/// Per-column statistics of a z-score transform (population convention).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub eps: T,
}

impl<T: Scalar> ZStats<T> {
    /// Estimates column statistics from the rows of `m`.
    pub fn fit(m: &DenseMatrix<T>, eps: T) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::Empty("z-score input matrix"));
        }
        let n = T::of_usize(m.rows());
        let mut mean = vec![T::zero(); m.cols()];
        for row in m.row_iter() {
            for (acc, &v) in mean.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        mean.iter_mut().for_each(|v| *v = *v / n);
        let mut var = vec![T::zero(); m.cols()];
        for row in m.row_iter() {
            for ((acc, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - mu;
                *acc = *acc + d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, std, eps })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    fn scale(&self, col: usize) -> T {
        self.std[col].max(self.eps)
    }

    /// Applies `(x - mean) / max(std, eps)` to every row.
    pub fn apply(&self, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_dim(m)?;
        Ok(m.map_rows(|_, row, out| self.apply_row(row, out))?.with_normalization(Normalization::Zscore))
    }

    pub fn apply_row(&self, row: &[T], out: &mut [T]) {
        for (c, (o, &v)) in out.iter_mut().zip(row).enumerate() {
            *o = (v - self.mean[c]) / self.scale(c);
        }
    }

    /// Inverts [`ZStats::apply`].
    pub fn invert(&self, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_dim(m)?;
        m.map_rows(|_, row, out| {
            for (c, (o, &v)) in out.iter_mut().zip(row).enumerate() {
                *o = v * self.scale(c) + self.mean[c];
            }
        })
    }

    fn check_dim(&self, m: &DenseMatrix<T>) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch { what: "z-score columns", expected: self.dim(), got: m.cols() });
        }
        Ok(())
    }
}

/// Z-scores the columns of `m` and returns the fitted statistics for reuse
/// on held-out rows.
pub fn zscore_normalize<T: Scalar>(m: &DenseMatrix<T>, eps: T) -> Result<(DenseMatrix<T>, ZStats<T>)> {
    let stats = ZStats::fit(m, eps)?;
    Ok((stats.apply(m)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..rows * cols).map(|_| rng.random_range(-3.0..5.0)).collect();
        DenseMatrix::new(rows, cols, v).unwrap()
    }

    #[test]
    fn three_four_five() {
        let m = DenseMatrix::from_rows(&[[3.0f64, 4.0]]).unwrap();
        let (n, zero) = l2_normalize(&m).unwrap();
        assert!(zero.is_empty());
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(n.normalization(), Normalization::L2);
    }

    #[test]
    fn zero_row_is_reported() {
        let m = DenseMatrix::from_rows(&[[0.0f64, 0.0], [1.0, 0.0]]).unwrap();
        let (n, zero) = l2_normalize(&m).unwrap();
        assert_eq!(zero, vec![0]);
        assert_eq!(n.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn random_rows_have_unit_norm() {
        let m = random_matrix(5, 8, 1);
        let (n, _) = l2_normalize(&m).unwrap();
        for row in n.row_iter() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zscore_column_examples() {
        let m = DenseMatrix::from_rows(&[[1.0f64, 5.0], [3.0, 5.0]]).unwrap();
        let (z, stats) = zscore_normalize(&m, DEFAULT_STD_EPS).unwrap();
        assert_eq!(stats.mean, vec![2.0, 5.0]);
        assert_eq!(stats.std, vec![1.0, 0.0]);
        assert_eq!(z.column(0), vec![-1.0, 1.0]);
        assert_eq!(z.column(1), vec![0.0, 0.0]);

        let c = DenseMatrix::from_rows(&[[5.0f64], [5.0], [5.0]]).unwrap();
        let (z, _) = zscore_normalize(&c, DEFAULT_STD_EPS).unwrap();
        assert_eq!(z.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zscore_random_moments() {
        let m = random_matrix(100, 4, 7);
        let (z, _) = zscore_normalize(&m, DEFAULT_STD_EPS).unwrap();
        for c in 0..4 {
            let col = z.column(c);
            let mean = col.iter().sum::<f64>() / 100.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 100.0;
            assert!(mean.abs() < 1e-6);
            assert!((var.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zscore_empty_is_error() {
        let m = DenseMatrix::<f64>::zeros(0, 3);
        assert!(matches!(zscore_normalize(&m, 1e-12), Err(Error::Empty(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = DenseMatrix<f64>> {
            (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
                proptest::collection::vec(-100.0f64..100.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
            })
        }

        proptest! {
            #[test]
            fn l2_is_idempotent(m in matrix()) {
                let (once, _) = l2_normalize(&m).unwrap();
                let (twice, _) = l2_normalize(&once).unwrap();
                for (a, b) in once.values().iter().zip(twice.values()) {
                    prop_assert!((a - b).abs() <= 1e-7);
                }
            }

            #[test]
            fn zscore_round_trips(m in matrix()) {
                let (z, stats) = zscore_normalize(&m, DEFAULT_STD_EPS).unwrap();
                let back = stats.invert(&z).unwrap();
                for (a, b) in m.values().iter().zip(back.values()) {
                    prop_assert!((a - b).abs() <= 1e-5);
                }
            }
        }
    }
}
