//! Linear ranker mapping score vectors to accuracies.
//!
//! Features are standardized with training statistics and a ridge problem
//! is solved in closed form; the intercept is not penalized, which on
//! centred features makes it the mean target.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::capability::rank_descending;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_RIDGE: f64 = 1e-3;
/// Features whose training std falls below this are held at weight zero.
pub const STD_FLOOR: f64 = 1e-9;
const CONDITION_LIMIT: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub datasets: Vec<String>,
    pub rows: usize,
    /// Mean squared training residual.
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRanker<T> {
    pub feature_names: Vec<String>,
    pub weights: Vec<T>,
    pub bias: T,
    pub ridge: f64,
    pub feature_mean: Vec<T>,
    pub feature_std: Vec<T>,
    /// Features with usable variance; inactive ones carry zero weight.
    pub active: Vec<bool>,
    pub training: TrainingInfo,
}

fn row_cmp(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> Ordering {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(a.1.total_cmp(&b.1))
}

impl<T: Scalar> LinearRanker<T> {
    /// Fits on `(features, accuracy)` rows.
    pub fn fit(feature_names: &[&str], rows: &[(Vec<T>, T)], ridge: f64, datasets: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge coefficient {ridge} must be nonnegative")));
        }
        if rows.len() < p + 1 {
            return Err(Error::Validation(format!(
                "ranker needs at least {} rows for {p} features, got {}",
                p + 1,
                rows.len()
            )));
        }
        // Sorting makes every accumulation independent of the input order.
        let mut data: Vec<(Vec<f64>, f64)> = Vec::with_capacity(rows.len());
        for (x, y) in rows {
            if x.len() != p {
                return Err(Error::DimensionMismatch { what: "ranker feature count", expected: p, got: x.len() });
            }
            let y = y.as_f64();
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::Validation(format!("training accuracy {y} outside [0, 1]")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NaN("ranker feature"));
            }
            data.push((x.iter().map(|v| v.as_f64()).collect(), y));
        }
        data.sort_by(row_cmp);

        let n = data.len() as f64;
        let mut mean = vec![0.0; p];
        for (x, _) in &data {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; p];
        for (x, _) in &data {
            for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        let active: Vec<bool> = std.iter().map(|&s| s > STD_FLOOR).collect();
        let cols: Vec<usize> = (0..p).filter(|&c| active[c]).collect();
        let y_mean = data.iter().map(|(_, y)| y).sum::<f64>() / n;

        let mut weights = vec![0.0; p];
        if !cols.is_empty() {
            let x = DMatrix::from_fn(data.len(), cols.len(), |r, c| {
                let f = cols[c];
                (data[r].0[f] - mean[f]) / std[f]
            });
            let y = DVector::from_iterator(data.len(), data.iter().map(|(_, y)| y - y_mean));
            // Objective: mean squared error + ridge·‖w‖².
            let mut gram = x.transpose() * &x;
            for d in 0..cols.len() {
                gram[(d, d)] += ridge * n;
            }
            let eig = gram.clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            let min = eig.eigenvalues.min();
            if !(min > CONDITION_LIMIT * max.max(1.0)) {
                return Err(Error::RankDeficient);
            }
            let rhs = x.transpose() * y;
            let w = gram.cholesky().ok_or(Error::RankDeficient)?.solve(&rhs);
            for (c, &f) in cols.iter().enumerate() {
                weights[f] = w[c];
            }
        }

        let mut model = Self {
            feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
            weights: weights.iter().map(|&w| T::of(w)).collect(),
            bias: T::of(y_mean),
            ridge,
            feature_mean: mean.iter().map(|&m| T::of(m)).collect(),
            feature_std: std.iter().map(|&s| T::of(s.max(STD_FLOOR))).collect(),
            active,
            training: TrainingInfo { datasets, rows: data.len(), loss: 0.0 },
        };
        let mut loss = 0.0;
        for (x, y) in &data {
            let xt: Vec<T> = x.iter().map(|&v| T::of(v)).collect();
            loss += (model.predict(&xt)?.as_f64() - y).powi(2);
        }
        model.training.loss = loss / n;
        Ok(model)
    }

    /// `wᵀ standardize(s) + b`, unclamped.
    pub fn predict(&self, features: &[T]) -> Result<T> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "ranker feature count",
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        let mut out = self.bias;
        for (f, &x) in features.iter().enumerate() {
            if self.active[f] {
                out = out + self.weights[f] * (x - self.feature_mean[f]) / self.feature_std[f];
            }
        }
        Ok(out)
    }
}

/// Rank 1 for the largest prediction, ties averaged.
pub fn rank_from_predictions<T: Scalar>(preds: &[T]) -> Result<Vec<T>> {
    if preds.len() < 2 {
        return Err(Error::Validation("ranking needs at least two models".into()));
    }
    rank_descending(preds)
}
