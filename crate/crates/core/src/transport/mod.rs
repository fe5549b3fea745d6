//! Semantic cost construction and optimal-transport solvers producing the
//! bridge matrix between open-source and target classes.
//!
//! * [`solve_ot`] solves the balanced problem exactly (transportation
//!   simplex) or approximately (Sinkhorn followed by rounding).
//! * [`solve_partial_ot`] ships only a fraction of the mass, by adding one
//!   dummy row and one dummy column that absorb the unshipped mass.

mod cost;
mod simplex;
mod sinkhorn;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cost::{build_cost_matrix, filter_source_classes, similarity_matrix, CostMatrix, CostShape};
pub use simplex::{transportation_simplex, SimplexSolution};
pub use sinkhorn::{round_to_polytope, SinkhornParams};

use crate::data::format::{role, write_mat, MatHeader};
use crate::data::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Marginal tolerance of every plan produced here.
pub const MARGINAL_TOL: f64 = 1e-8;
/// Allowed difference between `Σu` and `Σv` for balanced problems.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtMethod {
    #[default]
    Exact,
    Sinkhorn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverTag {
    NetworkSimplex { pivots: usize },
    Sinkhorn { epsilon: f64, iterations: usize },
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanKind {
    Full,
    Partial { mass_fraction: f64 },
}

/// A transport plan γ with its marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    pub plan: DenseMatrix<T>,
    pub row_marginal: Vec<T>,
    pub col_marginal: Vec<T>,
    pub total_mass: T,
    pub objective: T,
    pub solver: SolverTag,
    pub kind: PlanKind,
}

/// JSON sidecar written next to a serialized plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSidecar {
    pub objective: f64,
    pub total_mass: f64,
    #[serde(flatten)]
    pub solver: SolverTag,
    #[serde(flatten)]
    pub kind: PlanKind,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Scalar> TransportPlan<T> {
    /// The independent coupling `u vᵀ / Σu`; every source class is spread
    /// over the targets in proportion to `v`.
    pub fn independent(cost: Option<&CostMatrix<T>>, u: &[T], v: &[T]) -> Result<Self> {
        let total: T = u.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Validation("independent coupling needs positive mass".into()));
        }
        let mut values = Vec::with_capacity(u.len() * v.len());
        for &a in u {
            for &b in v {
                values.push(a * b / total);
            }
        }
        let plan = DenseMatrix::new(u.len(), v.len(), values)?;
        let objective = cost.map_or(T::zero(), |c| frobenius(&plan, &c.matrix));
        Ok(Self {
            plan,
            row_marginal: u.to_vec(),
            col_marginal: v.to_vec(),
            total_mass: total,
            objective,
            solver: SolverTag::Independent,
            kind: PlanKind::Full,
        })
    }

    pub fn source_count(&self) -> usize {
        self.plan.rows()
    }

    pub fn target_count(&self) -> usize {
        self.plan.cols()
    }

    /// Mass received by each target column.
    pub fn column_mass(&self) -> Vec<T> {
        self.plan.col_sums()
    }

    /// Checks nonnegativity, marginal and mass invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let tol = T::of(MARGINAL_TOL);
        if self.plan.values().iter().any(|&x| x < T::zero()) {
            return Err(Error::Validation("negative transport entry".into()));
        }
        let rows = self.plan.row_sums();
        let cols = self.plan.col_sums();
        let total = self.plan.sum();
        match self.kind {
            PlanKind::Full => {
                let bad_row = rows.iter().zip(&self.row_marginal).any(|(&a, &b)| (a - b).abs() > tol);
                let bad_col = cols.iter().zip(&self.col_marginal).any(|(&a, &b)| (a - b).abs() > tol);
                if bad_row || bad_col {
                    return Err(Error::Validation("plan marginals violate equality constraints".into()));
                }
            }
            PlanKind::Partial { .. } => {
                let bad_row = rows.iter().zip(&self.row_marginal).any(|(&a, &b)| a > b + tol);
                let bad_col = cols.iter().zip(&self.col_marginal).any(|(&a, &b)| a > b + tol);
                if bad_row || bad_col {
                    return Err(Error::Validation("plan marginals exceed their bounds".into()));
                }
            }
        }
        if (total - self.total_mass).abs() > tol {
            return Err(Error::Validation(format!("plan mass {total} differs from declared {}", self.total_mass)));
        }
        Ok(())
    }

    pub fn sidecar(&self) -> PlanSidecar {
        PlanSidecar {
            objective: self.objective.as_f64(),
            total_mass: self.total_mass.as_f64(),
            solver: self.solver,
            kind: self.kind,
            rows: self.plan.rows(),
            cols: self.plan.cols(),
        }
    }

    /// Writes the plan as `SWAB-MAT` (role `transport_plan`) plus a JSON
    /// sidecar at `path` with extension `.json`.
    pub fn write(&self, path: &Path, dataset_id: &str) -> Result<()> {
        write_mat(path, &MatHeader::new(role::TRANSPORT_PLAN, dataset_id, 0, 0), &self.plan)?;
        let sidecar = serde_json::to_string_pretty(&self.sidecar())?;
        fs::write(path.with_extension("json"), sidecar + "\n")?;
        Ok(())
    }
}

fn frobenius<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> T {
    a.values().iter().zip(b.values()).map(|(&x, &y)| x * y).sum()
}

/// Uniform weights `1/k`.
pub fn uniform<T: Scalar>(k: usize) -> Vec<T> {
    vec![T::one() / T::of_usize(k); k]
}

fn check_marginals<T: Scalar>(cost: &CostMatrix<T>, u: &[T], v: &[T]) -> Result<()> {
    let (m, n) = cost.matrix.shape();
    if u.len() != m {
        return Err(Error::DimensionMismatch { what: "row marginal length", expected: m, got: u.len() });
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch { what: "column marginal length", expected: n, got: v.len() });
    }
    if m == 0 || n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    if let Some(&bad) = u.iter().chain(v).find(|&&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::NegativeMarginal(bad.as_f64()));
    }
    Ok(())
}

fn max_pivots(m: usize, n: usize) -> usize {
    100 * m * n + 10_000
}

/// Solves the balanced problem `min ⟨γ, cost⟩` s.t. `γ1 = u`, `γᵀ1 = v`.
pub fn solve_ot<T: Scalar>(
    cost: &CostMatrix<T>,
    u: &[T],
    v: &[T],
    method: OtMethod,
    params: &SinkhornParams,
) -> Result<TransportPlan<T>> {
    check_marginals(cost, u, v)?;
    let su: T = u.iter().copied().sum();
    let sv: T = v.iter().copied().sum();
    if (su - sv).abs() > T::of(BALANCE_TOL) {
        return Err(Error::MarginalMismatch { row_sum: su.as_f64(), col_sum: sv.as_f64() });
    }
    let (m, n) = cost.matrix.shape();
    let (plan, solver) = match method {
        OtMethod::Exact => {
            let sol = transportation_simplex(cost.matrix.values(), m, n, u, v, max_pivots(m, n))?;
            (DenseMatrix::new(m, n, sol.flows)?, SolverTag::NetworkSimplex { pivots: sol.pivots })
        }
        OtMethod::Sinkhorn => {
            let out = sinkhorn::sinkhorn(&cost.matrix, u, v, params)?;
            (out.plan, SolverTag::Sinkhorn { epsilon: out.epsilon.as_f64(), iterations: out.iterations })
        }
    };
    let objective = frobenius(&plan, &cost.matrix);
    let result = TransportPlan {
        total_mass: plan.sum(),
        plan,
        row_marginal: u.to_vec(),
        col_marginal: v.to_vec(),
        objective,
        solver,
        kind: PlanKind::Full,
    };
    Ok(result)
}

/// Solves the partial problem that ships exactly
/// `mass_fraction · min(‖u‖₁, ‖v‖₁)` under `γ1 ≤ u`, `γᵀ1 ≤ v`.
///
/// The problem is reduced to a balanced one with a dummy row (mass
/// `‖v‖₁ − mass`) and a dummy column (mass `‖u‖₁ − mass`) of zero cost; the
/// dummy/dummy cell is priced above every real cost so no mass bypasses
/// the real classes.
pub fn solve_partial_ot<T: Scalar>(
    cost: &CostMatrix<T>,
    u: &[T],
    v: &[T],
    mass_fraction: T,
) -> Result<TransportPlan<T>> {
    if !(mass_fraction > T::zero() && mass_fraction <= T::one()) {
        return Err(Error::MassFraction(mass_fraction.as_f64()));
    }
    check_marginals(cost, u, v)?;
    let (m, n) = cost.matrix.shape();
    let su: T = u.iter().copied().sum();
    let sv: T = v.iter().copied().sum();
    let mass = mass_fraction * su.min(sv);
    let max_cost = cost.matrix.values().iter().copied().fold(T::zero(), T::max);

    let (em, en) = (m + 1, n + 1);
    let mut ext = vec![T::zero(); em * en];
    for i in 0..m {
        ext[i * en..i * en + n].copy_from_slice(cost.matrix.row(i));
    }
    ext[m * en + n] = max_cost + T::one();
    let mut eu = u.to_vec();
    eu.push((sv - mass).max(T::zero()));
    let mut ev = v.to_vec();
    ev.push((su - mass).max(T::zero()));

    let sol = transportation_simplex(&ext, em, en, &eu, &ev, max_pivots(em, en))?;
    let mut values = Vec::with_capacity(m * n);
    for i in 0..m {
        values.extend_from_slice(&sol.flows[i * en..i * en + n]);
    }
    let plan = DenseMatrix::new(m, n, values)?;
    let objective = frobenius(&plan, &cost.matrix);
    Ok(TransportPlan {
        total_mass: plan.sum(),
        plan,
        row_marginal: u.to_vec(),
        col_marginal: v.to_vec(),
        objective,
        solver: SolverTag::NetworkSimplex { pivots: sol.pivots },
        kind: PlanKind::Partial { mass_fraction: mass_fraction.as_f64() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(rows: &[&[f64]]) -> CostMatrix<f64> {
        CostMatrix::from_matrix(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn zero_cost_diagonal() {
        let c = cost(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let u = [0.5, 0.5];
        for method in [OtMethod::Exact, OtMethod::Sinkhorn] {
            let p =
                solve_ot(&c, &u, &u, method, &SinkhornParams { epsilon: Some(0.02), ..Default::default() }).unwrap();
            p.check_invariants().unwrap();
            if method == OtMethod::Exact {
                assert_eq!(p.plan.values(), &[0.5, 0.0, 0.0, 0.5]);
                assert_eq!(p.objective, 0.0);
            } else {
                assert!(p.objective < 1e-6);
            }
        }
    }

    #[test]
    fn single_source_row_is_forced() {
        let c = cost(&[&[3.0, 1.0, 2.0]]);
        let v = [0.2, 0.3, 0.5];
        let p = solve_ot(&c, &[1.0], &v, OtMethod::Exact, &SinkhornParams::default()).unwrap();
        assert_eq!(p.plan.row(0), &v);
    }

    #[test]
    fn marginal_mismatch_is_rejected() {
        let c = cost(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let err = solve_ot(&c, &[0.5, 0.5], &[0.5, 0.6], OtMethod::Exact, &SinkhornParams::default());
        assert!(matches!(err, Err(Error::MarginalMismatch { .. })));
    }

    #[test]
    fn sinkhorn_non_convergence_reports_residual() {
        let c = cost(&[&[0.0, 5.0], &[5.0, 0.0]]);
        let params = SinkhornParams { epsilon: Some(1e-3), max_iter: 1, tol: 1e-30 };
        match solve_ot(&c, &[0.3, 0.7], &[0.6, 0.4], OtMethod::Sinkhorn, &params) {
            Err(Error::SinkhornNotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_ships_on_cheap_diagonal() {
        let c = cost(&[&[0.0, 10.0], &[10.0, 0.0]]);
        let u = [0.5, 0.5];
        let p = solve_partial_ot(&c, &u, &u, 0.5).unwrap();
        p.check_invariants().unwrap();
        assert!((p.total_mass - 0.5).abs() < 1e-12);
        assert_eq!(p.objective, 0.0);
        assert_eq!(p.plan.get(0, 1), 0.0);
        assert_eq!(p.plan.get(1, 0), 0.0);
    }

    #[test]
    fn partial_mass_fraction_range() {
        let c = cost(&[&[1.0]]);
        assert!(matches!(solve_partial_ot(&c, &[1.0], &[1.0], 0.0), Err(Error::MassFraction(_))));
        assert!(matches!(solve_partial_ot(&c, &[1.0], &[1.0], 1.5), Err(Error::MassFraction(_))));
    }

    #[test]
    fn partial_handles_unbalanced_totals() {
        let c = cost(&[&[1.0, 2.0], &[3.0, 1.0], &[2.0, 2.0]]);
        let u = [0.5, 0.3, 0.4];
        let v = [0.2, 0.6];
        let p = solve_partial_ot(&c, &u, &v, 0.9).unwrap();
        p.check_invariants().unwrap();
        assert!((p.total_mass - 0.72).abs() < 1e-12);
    }

    #[test]
    fn independent_coupling() {
        let p = TransportPlan::<f64>::independent(None, &[0.25, 0.75], &[0.5, 0.5]).unwrap();
        assert_eq!(p.plan.values(), &[0.125, 0.125, 0.375, 0.375]);
        p.check_invariants().unwrap();
    }

    #[test]
    fn plan_serializes_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let c = cost(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = solve_partial_ot(&c, &[0.5, 0.5], &[0.5, 0.5], 0.9).unwrap();
        let path = dir.path().join("plan.swab");
        p.write(&path, "toy").unwrap();
        let (h, m) = crate::data::format::read_mat::<f64>(&path).unwrap();
        assert_eq!(h.role, "transport_plan");
        assert_eq!(m.shape(), (2, 2));
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        assert_eq!(side["kind"], "partial");
        assert_eq!(side["solver"], "network_simplex");
        assert!((side["mass_fraction"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    }
}
