//! Transportation simplex on a spanning-tree basis.
//!
//! The basis is a spanning tree of the bipartite row/column graph with
//! `m + n - 1` cells, seeded by the north-west corner rule. Entering cells
//! are chosen by the most negative reduced cost; after a run of degenerate
//! pivots the solver switches to Bland's rule (lowest cell index enters,
//! lowest cell index leaves among ties) until a non-degenerate pivot occurs,
//! which rules out cycling.

use crate::error::{Error, Result};
use crate::scalar::FlowValue;

/// Optimal vertex of a balanced transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSolution<V> {
    /// Row-major `m × n` flows.
    pub flows: Vec<V>,
    pub objective: V,
    pub pivots: usize,
}

struct Basis {
    cells: Vec<(usize, usize)>,
    in_basis: Vec<bool>,
}

fn north_west_corner<V: FlowValue>(m: usize, n: usize, supply: &[V], demand: &[V]) -> (Basis, Vec<V>) {
    let mut flows = vec![V::zero(); m * n];
    let mut in_basis = vec![false; m * n];
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut s = supply[0];
    let mut d = demand[0];
    let (mut i, mut j) = (0, 0);
    loop {
        let last_row = i + 1 == m;
        let last_col = j + 1 == n;
        if last_row && last_col {
            // Whatever remains closes the tree; any mismatch between total
            // supply and demand lands here.
            let x = if s < d { s } else { d };
            let x = if x < V::zero() { V::zero() } else { x };
            flows[i * n + j] = x;
            in_basis[i * n + j] = true;
            cells.push((i, j));
            break;
        }
        let advance_row = !last_row && (last_col || s <= d);
        let x = if advance_row { s } else { d };
        let x = if x < V::zero() { V::zero() } else { x };
        flows[i * n + j] = x;
        in_basis[i * n + j] = true;
        cells.push((i, j));
        if advance_row {
            d = d - x;
            i += 1;
            s = supply[i];
        } else {
            s = s - x;
            j += 1;
            d = demand[j];
        }
    }
    debug_assert_eq!(cells.len(), m + n - 1);
    (Basis { cells, in_basis }, flows)
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply`, column sums
/// `demand` and `x ≥ 0`. `cost` is row-major `m × n`.
///
/// Totals of `supply` and `demand` are assumed equal; the caller checks.
pub fn transportation_simplex<V: FlowValue>(
    cost: &[V],
    m: usize,
    n: usize,
    supply: &[V],
    demand: &[V],
    max_pivots: usize,
) -> Result<SimplexSolution<V>> {
    assert_eq!(cost.len(), m * n, "cost length must equal m * n");
    assert!(m > 0 && n > 0, "transportation problem needs at least one row and column");
    let cost_scale = cost.iter().map(|c| c.abs()).fold(V::zero(), |a, b| if b > a { b } else { a });
    let tol = V::pivot_tolerance(cost_scale);
    let nodes = m + n;

    let (mut basis, mut flows) = north_west_corner(m, n, supply, demand);
    let mut pot = vec![V::zero(); nodes];
    let mut known = vec![false; nodes];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut queue = Vec::with_capacity(nodes);
    let mut degenerate_run = 0usize;
    let bland_after = nodes;
    let mut pivots = 0usize;

    loop {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (b, &(i, j)) in basis.cells.iter().enumerate() {
            adj[i].push((m + j, b));
            adj[m + j].push((i, b));
        }

        // Potentials: u_i + v_j = c_ij on basic cells, rooted at row 0.
        known.iter_mut().for_each(|k| *k = false);
        pot[0] = V::zero();
        known[0] = true;
        queue.clear();
        queue.push(0);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &(next, b) in &adj[node] {
                if known[next] {
                    continue;
                }
                let (i, j) = basis.cells[b];
                pot[next] = cost[i * n + j] - pot[node];
                known[next] = true;
                queue.push(next);
            }
        }
        debug_assert!(known.iter().all(|&k| k), "basis must span all nodes");

        let use_bland = degenerate_run >= bland_after;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = V::zero();
        'scan: for i in 0..m {
            for j in 0..n {
                if basis.in_basis[i * n + j] {
                    continue;
                }
                let r = cost[i * n + j] - pot[i] - pot[m + j];
                if r < -tol {
                    if use_bland {
                        entering = Some((i, j));
                        break 'scan;
                    }
                    if entering.is_none() || r < best {
                        best = r;
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };
        if pivots >= max_pivots {
            return Err(Error::PivotLimit(max_pivots));
        }
        pivots += 1;

        // Tree path from row `ei` to column `ej`.
        parent.iter_mut().for_each(|p| *p = None);
        known.iter_mut().for_each(|k| *k = false);
        known[ei] = true;
        queue.clear();
        queue.push(ei);
        let mut head = 0;
        let target = m + ej;
        while head < queue.len() && !known[target] {
            let node = queue[head];
            head += 1;
            for &(next, b) in &adj[node] {
                if !known[next] {
                    known[next] = true;
                    parent[next] = Some((node, b));
                    queue.push(next);
                }
            }
        }
        // Walk back from the column: edges alternate -, +, -, ... and the
        // last one (touching row `ei`) is negative.
        let mut path = Vec::new();
        let mut node = target;
        while node != ei {
            let (prev, b) = parent[node].expect("tree path exists");
            path.push(b);
            node = prev;
        }
        // Leaving cell: smallest flow on a negative edge, lowest index on ties.
        let mut leave: Option<(V, usize, usize)> = None;
        for (k, &b) in path.iter().enumerate().step_by(2) {
            let (i, j) = basis.cells[b];
            let (f, idx) = (flows[i * n + j], i * n + j);
            let better = match leave {
                None => true,
                Some((t, _, best_idx)) => f < t || (f == t && idx < best_idx),
            };
            if better {
                leave = Some((f, k, idx));
            }
        }
        let (theta, leave_pos, _) = leave.expect("cycle has a negative edge");
        for (k, &b) in path.iter().enumerate() {
            let (i, j) = basis.cells[b];
            let idx = i * n + j;
            if k % 2 == 0 {
                flows[idx] = flows[idx] - theta;
            } else {
                flows[idx] = flows[idx] + theta;
            }
        }
        flows[ei * n + ej] = theta;

        let leave_b = path[leave_pos];
        let (li, lj) = basis.cells[leave_b];
        flows[li * n + lj] = V::zero();
        basis.in_basis[li * n + lj] = false;
        basis.in_basis[ei * n + ej] = true;
        basis.cells[leave_b] = (ei, ej);

        if theta <= tol {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }

    let objective = flows.iter().zip(cost).fold(V::zero(), |acc, (&f, &c)| acc + f * c);
    Ok(SimplexSolution { flows, objective, pivots })
}
