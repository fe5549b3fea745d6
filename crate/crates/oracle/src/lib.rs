//! Slow, exact reference implementations for tests.
//!
//! Nothing here shares code with the engine: the LP solver is a dense
//! two-phase tableau simplex in arbitrary-precision rationals, and the
//! ranking metrics are computed from their set and tie-group definitions.

#![allow(clippy::needless_range_loop)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(x: f64) -> Q {
    BigRational::from_float(x).expect("finite float")
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("representable")
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = &*v / &p;
        }
        self.rhs[r] = &self.rhs[r] / &p;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for j in 0..self.rows[i].len() {
                let d = &f * &self.rows[r][j];
                self.rows[i][j] -= d;
            }
            let d = &f * &self.rhs[r];
            self.rhs[i] -= d;
        }
        self.basis[r] = c;
    }

    /// Bland's rule on columns `< allowed`; returns false if unbounded.
    fn optimize(&mut self, cost: &[Q], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    reduced -= &cost[b] * &self.rows[i][j];
                }
                if reduced.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if a.is_positive() {
                    let ratio = &self.rhs[i] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Minimizes `cᵀx` subject to `Ax = b`, `x ≥ 0`. Returns the optimal
/// objective and a solution, or `None` if infeasible or unbounded.
pub fn lp_minimize(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> Option<(Q, Vec<Q>)> {
    let n = c.len();
    let m = a.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, (row, bi)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n);
        let flip = bi.is_negative();
        let mut r: Vec<Q> = row.iter().map(|v| if flip { -v.clone() } else { v.clone() }).collect();
        r.extend((0..m).map(|k| if k == i { Q::one() } else { Q::zero() }));
        rows.push(r);
        rhs.push(if flip { -bi.clone() } else { bi.clone() });
    }
    let mut t = Tableau { rows, rhs, basis: (n..n + m).collect() };
    let phase1: Vec<Q> = (0..n + m).map(|j| if j < n { Q::zero() } else { Q::one() }).collect();
    t.optimize(&phase1, n + m);
    let infeas: Q = t.basis.iter().zip(&t.rhs).filter(|(&b, _)| b >= n).map(|(_, v)| v.clone()).sum();
    if infeas.is_positive() {
        return None;
    }
    // Drive remaining artificials out of the basis or drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut cost: Vec<Q> = c.to_vec();
    cost.extend((0..m).map(|_| Q::zero()));
    if !t.optimize(&cost, n) {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[i].clone();
        }
    }
    let obj = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Some((obj, x))
}

/// Exact optimum of the balanced transport problem. The last column
/// marginal absorbs any rounding imbalance between `Σu` and `Σv`.
pub fn transport_optimum(cost: &[f64], m: usize, n: usize, u: &[f64], v: &[f64]) -> Q {
    let c: Vec<Q> = cost.iter().map(|&x| q(x)).collect();
    let uq: Vec<Q> = u.iter().map(|&x| q(x)).collect();
    let mut vq: Vec<Q> = v.iter().map(|&x| q(x)).collect();
    let su: Q = uq.iter().cloned().sum();
    let rest: Q = vq[..n - 1].iter().cloned().sum();
    vq[n - 1] = su - rest;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        a.push((0..m * n).map(|k| if k / n == i { Q::one() } else { Q::zero() }).collect());
        b.push(uq[i].clone());
    }
    for j in 0..n {
        a.push((0..m * n).map(|k| if k % n == j { Q::one() } else { Q::zero() }).collect());
        b.push(vq[j].clone());
    }
    lp_minimize(&c, &a, &b).expect("balanced transport is feasible").0
}

/// Exact optimum of the partial transport problem shipping `mass` under
/// `γ1 ≤ u`, `γᵀ1 ≤ v`, written with explicit slack variables.
pub fn partial_transport_optimum(cost: &[f64], m: usize, n: usize, u: &[f64], v: &[f64], mass: f64) -> Q {
    let vars = m * n + m + n;
    let mut c: Vec<Q> = cost.iter().map(|&x| q(x)).collect();
    c.extend((0..m + n).map(|_| Q::zero()));
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        a.push(
            (0..vars).map(|k| if (k < m * n && k / n == i) || k == m * n + i { Q::one() } else { Q::zero() }).collect(),
        );
        b.push(q(u[i]));
    }
    for j in 0..n {
        a.push(
            (0..vars)
                .map(|k| if (k < m * n && k % n == j) || k == m * n + m + j { Q::one() } else { Q::zero() })
                .collect(),
        );
        b.push(q(v[j]));
    }
    a.push((0..vars).map(|k| if k < m * n { Q::one() } else { Q::zero() }).collect());
    b.push(q(mass));
    lp_minimize(&c, &a, &b).expect("partial transport is feasible").0
}

/// Indices of the five smallest rank values; equal ranks are cut by index.
pub fn top5_by_sort(ranks: &[f64]) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = ranks.iter().copied().zip(0..).collect();
    idx.sort_by(|a, b| a.partial_cmp(b).unwrap());
    idx.into_iter().take(5).map(|(_, i)| i).collect()
}

pub fn recall_by_sets(pred: &[f64], truth: &[f64]) -> f64 {
    let p = top5_by_sort(pred);
    let t = top5_by_sort(truth);
    let mut hits = 0;
    for i in &p {
        if t.contains(i) {
            hits += 1;
        }
    }
    hits as f64 / 5.0
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn tie_pairs(x: &[f64]) -> i64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Tau-b from the sign-product sum and tie-group sizes.
pub fn tau_b_by_signs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as i64;
    let mut s = 0i64;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i < j {
                s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
            }
        }
    }
    let n0 = n * (n - 1) / 2;
    let d = ((n0 - tie_pairs(x)) as f64 * (n0 - tie_pairs(y)) as f64).sqrt();
    if d == 0.0 {
        0.0
    } else {
        s as f64 / d
    }
}

/// Top-5 tau as defined on the intersection of the two top-5 sets.
pub fn tau_top5_by_signs(pred: &[f64], truth: &[f64]) -> f64 {
    let p = top5_by_sort(pred);
    let t = top5_by_sort(truth);
    let common: Vec<usize> = (0..pred.len()).filter(|i| p.contains(i) && t.contains(i)).collect();
    if common.len() <= 1 {
        return 0.0;
    }
    let x: Vec<f64> = common.iter().map(|&i| pred[i]).collect();
    let y: Vec<f64> = common.iter().map(|&i| truth[i]).collect();
    tau_b_by_signs(&x, &y)
}

/// Ranks with 1 for the largest value and tied values averaged, computed
/// by counting.
pub fn ranks_by_counting(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let greater = values.iter().filter(|&&w| w > v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}
