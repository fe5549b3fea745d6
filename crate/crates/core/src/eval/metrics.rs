//! Rank vectors, the weighted Borda ensemble, and the top-5 metrics.

use serde::{Deserialize, Serialize};

use crate::capability::rank_descending;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ranks per model; 1 is best and ties share their mean position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankVector<T> {
    pub model_ids: Vec<String>,
    pub ranks: Vec<T>,
}

impl<T: Scalar> RankVector<T> {
    /// Ranks models by score, larger is better.
    pub fn from_scores_desc(model_ids: Vec<String>, scores: &[T]) -> Result<Self> {
        Self::check_len(&model_ids, scores)?;
        Ok(Self { model_ids, ranks: rank_descending(scores)? })
    }

    /// Ranks models by value, smaller is better.
    pub fn from_scores_asc(model_ids: Vec<String>, values: &[T]) -> Result<Self> {
        Self::check_len(&model_ids, values)?;
        let neg: Vec<T> = values.iter().map(|&v| -v).collect();
        Ok(Self { model_ids, ranks: rank_descending(&neg)? })
    }

    fn check_len(ids: &[String], v: &[T]) -> Result<()> {
        if ids.len() != v.len() {
            return Err(Error::DimensionMismatch {
                what: "model ids vs rank values",
                expected: ids.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Model indices best first, ties by model index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.ranks[a].partial_cmp(&self.ranks[b]).expect("finite ranks").then(a.cmp(&b)));
        idx
    }

    fn same_models(&self, other: &Self) -> Result<()> {
        if self.model_ids != other.model_ids {
            return Err(Error::Validation("rank vectors cover different model sets".into()));
        }
        Ok(())
    }
}

/// `α·r1 + (1−α)·r2`, re-ranked ascending.
pub fn borda_ensemble<T: Scalar>(r1: &RankVector<T>, r2: &RankVector<T>, alpha: T) -> Result<RankVector<T>> {
    r1.same_models(r2)?;
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    let scores: Vec<T> = r1.ranks.iter().zip(&r2.ranks).map(|(&a, &b)| alpha * a + (T::one() - alpha) * b).collect();
    RankVector::from_scores_asc(r1.model_ids.clone(), &scores)
}

fn top5<T: Scalar>(r: &RankVector<T>, what: &str) -> Vec<usize> {
    let order = r.order();
    if order.len() > 5 && r.ranks[order[4]] == r.ranks[order[5]] {
        log::debug!("{what}: tie straddles the top-5 boundary, cut by model index");
    }
    order[..5].to_vec()
}

fn check_top5<T: Scalar>(pred: &RankVector<T>, truth: &RankVector<T>) -> Result<()> {
    pred.same_models(truth)?;
    if pred.len() < 5 {
        return Err(Error::Validation(format!("top-5 metrics need at least 5 models, got {}", pred.len())));
    }
    Ok(())
}

/// Fraction of the true top five found in the predicted top five.
pub fn top5_recall<T: Scalar>(pred: &RankVector<T>, truth: &RankVector<T>) -> Result<T> {
    check_top5(pred, truth)?;
    let p = top5(pred, "prediction");
    let t = top5(truth, "ground truth");
    let hits = p.iter().filter(|i| t.contains(i)).count();
    Ok(T::of_usize(hits) / T::of(5.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauTop5<T> {
    pub tau: T,
    /// Size of the intersection of the two top-5 sets.
    pub intersection: usize,
}

/// Kendall tau-b restricted to the intersection of the two top-5 sets;
/// zero when the intersection has at most one model.
pub fn kendall_tau_top5<T: Scalar>(pred: &RankVector<T>, truth: &RankVector<T>) -> Result<TauTop5<T>> {
    check_top5(pred, truth)?;
    let p = top5(pred, "prediction");
    let t = top5(truth, "ground truth");
    let mut common: Vec<usize> = p.into_iter().filter(|i| t.contains(i)).collect();
    common.sort_unstable();
    if common.len() <= 1 {
        log::debug!("top-5 intersection has {} model(s), tau set to 0", common.len());
        return Ok(TauTop5 { tau: T::zero(), intersection: common.len() });
    }
    let x: Vec<T> = common.iter().map(|&i| pred.ranks[i]).collect();
    let y: Vec<T> = common.iter().map(|&i| truth.ranks[i]).collect();
    Ok(TauTop5 { tau: kendall_tau_b(&x, &y), intersection: common.len() })
}

/// Tie-corrected Kendall correlation; zero if either side is constant.
pub fn kendall_tau_b<T: Scalar>(x: &[T], y: &[T]) -> T {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).expect("finite");
            let dy = y[i].partial_cmp(&y[j]).expect("finite");
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tx += 1;
                    ty += 1;
                }
                (Equal, _) => tx += 1,
                (_, Equal) => ty += 1,
                (a, b) if a == b => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tx) * (n0 - ty)) as f64).sqrt();
    if denom == 0.0 {
        return T::zero();
    }
    T::of((conc - disc) as f64 / denom)
}
