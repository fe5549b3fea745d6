//! Log-domain Sinkhorn iterations with a final rounding step onto the
//! transport polytope.

use serde::{Deserialize, Serialize};

use crate::data::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Entropic regularization; `None` means `0.01 · mean(cost)`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Tolerance on the ℓ1 row-marginal residual.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { epsilon: None, max_iter: 10_000, tol: 1e-9 }
    }
}

pub(crate) struct SinkhornOutput<T> {
    pub plan: DenseMatrix<T>,
    pub epsilon: T,
    pub iterations: usize,
}

fn log_sum_exp<T: Scalar>(it: impl Iterator<Item = T> + Clone) -> T {
    let max = it.clone().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + it.map(|x| (x - max).exp()).sum::<T>().ln()
}

pub(crate) fn sinkhorn<T: Scalar>(
    cost: &DenseMatrix<T>,
    u: &[T],
    v: &[T],
    params: &SinkhornParams,
) -> Result<SinkhornOutput<T>> {
    let (m, n) = cost.shape();
    let eps = match params.epsilon {
        Some(e) => T::of(e),
        None => {
            let mean = cost.sum() / T::of_usize(m * n);
            T::of(0.01) * mean.max(T::of(1e-12))
        }
    };
    if !(eps > T::zero()) {
        return Err(Error::InvalidConfig(format!("sinkhorn epsilon {eps} must be positive")));
    }
    let log_u: Vec<T> = u.iter().map(|&x| x.ln()).collect();
    let log_v: Vec<T> = v.iter().map(|&x| x.ln()).collect();
    let mut f = vec![T::zero(); m];
    let mut g = vec![T::zero(); n];
    let tol = T::of(params.tol);
    let mut residual = T::infinity();
    let mut iterations = 0;

    let row_residual = |f: &[T], g: &[T]| -> T {
        (0..m)
            .map(|i| {
                if u[i] == T::zero() {
                    return T::zero();
                }
                let s: T = (0..n).map(|j| ((f[i] + g[j] - cost.get(i, j)) / eps).exp()).sum();
                (s - u[i]).abs()
            })
            .sum()
    };

    while iterations < params.max_iter {
        iterations += 1;
        for i in 0..m {
            f[i] = if u[i] == T::zero() {
                T::neg_infinity()
            } else {
                eps * (log_u[i] - log_sum_exp((0..n).map(|j| (g[j] - cost.get(i, j)) / eps)))
            };
        }
        for j in 0..n {
            g[j] = if v[j] == T::zero() {
                T::neg_infinity()
            } else {
                eps * (log_v[j] - log_sum_exp((0..m).map(|i| (f[i] - cost.get(i, j)) / eps)))
            };
        }
        if iterations % 10 == 0 || iterations == params.max_iter {
            residual = row_residual(&f, &g);
            if residual <= tol {
                break;
            }
        }
    }
    if !(residual <= tol) {
        return Err(Error::SinkhornNotConverged { iterations, residual: residual.as_f64() });
    }

    let mut values = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let x = (f[i] + g[j] - cost.get(i, j)) / eps;
            values.push(if x == T::neg_infinity() { T::zero() } else { x.exp() });
        }
    }
    let plan = DenseMatrix::new(m, n, values)?;
    Ok(SinkhornOutput { plan: round_to_polytope(&plan, u, v)?, epsilon: eps, iterations })
}

/// Projects a nonnegative matrix onto the set of couplings of `u` and `v`:
/// rows and columns are scaled down where they exceed their marginals, and
/// the remaining deficit is added back as a rank-one correction.
pub fn round_to_polytope<T: Scalar>(p: &DenseMatrix<T>, u: &[T], v: &[T]) -> Result<DenseMatrix<T>> {
    let (m, n) = p.shape();
    let mut x = p.values().to_vec();
    let rows = p.row_sums();
    for i in 0..m {
        if rows[i] > u[i] {
            let s = u[i] / rows[i];
            x[i * n..(i + 1) * n].iter_mut().for_each(|e| *e = *e * s);
        }
    }
    let mut cols = vec![T::zero(); n];
    for i in 0..m {
        for j in 0..n {
            cols[j] = cols[j] + x[i * n + j];
        }
    }
    for j in 0..n {
        if cols[j] > v[j] {
            let s = v[j] / cols[j];
            for i in 0..m {
                x[i * n + j] = x[i * n + j] * s;
            }
        }
    }
    let mut err_r = u.to_vec();
    let mut err_c = v.to_vec();
    for i in 0..m {
        for j in 0..n {
            err_r[i] = err_r[i] - x[i * n + j];
            err_c[j] = err_c[j] - x[i * n + j];
        }
    }
    err_r.iter_mut().for_each(|e| *e = e.max(T::zero()));
    err_c.iter_mut().for_each(|e| *e = e.max(T::zero()));
    let total: T = err_c.iter().copied().sum();
    if total > T::zero() {
        for i in 0..m {
            for j in 0..n {
                x[i * n + j] = x[i * n + j] + err_r[i] * err_c[j] / total;
            }
        }
    }
    DenseMatrix::new(m, n, x)
}
