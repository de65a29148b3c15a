//! Transportation simplex on a spanning-tree basis.
//!
//! Supplies are perturbed (`aᵢ + ε`, last demand `+ mε`) so every basis met
//! along the way is nondegenerate; the final flows are recomputed from the
//! optimal basis with the exact marginals. Entering cells are chosen by most
//! negative reduced cost, ties going to the smallest row-major index; with the
//! perturbation in place the objective drops strictly at every pivot.

use std::collections::VecDeque;

use crate::{Error, Result};

/// Degeneracy perturbation added to each supply.
pub const PERTURBATION: f64 = 1e-13;

/// Relative tolerance on reduced costs.
const REDUCED_COST_TOL: f64 = 1e-12;

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// `slot[i * n + j]` is the position of `(i, j)` in `cells`, or `usize::MAX`.
    slot: Vec<usize>,
}

impl Basis {
    fn node_edges(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(e);
            adj[self.m + j].push(e);
        }
        adj
    }

    fn other_end(&self, e: usize, node: usize) -> usize {
        let (i, j) = self.cells[e];
        if node == i {
            self.m + j
        } else {
            i
        }
    }
}

fn northwest_corner(a: &[f64], b: &[f64]) -> Basis {
    let (m, n) = (a.len(), b.len());
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut basis = Basis { m, n, cells: Vec::with_capacity(m + n - 1), flow: Vec::new(), slot: vec![usize::MAX; m * n] };
    let (mut i, mut j) = (0, 0);
    loop {
        let f = supply[i].min(demand[j]);
        basis.slot[i * n + j] = basis.cells.len();
        basis.cells.push((i, j));
        basis.flow.push(f);
        supply[i] -= f;
        demand[j] -= f;
        if i + 1 == m && j + 1 == n {
            break;
        }
        // Exhaust the smaller side; on the last row or column only one move remains.
        if j + 1 == n || (i + 1 < m && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Exact flows on a spanning tree for the given marginals, by leaf elimination.
fn tree_flows(basis: &Basis, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (m, n) = (basis.m, basis.n);
    let adj = basis.node_edges();
    let mut rem: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut used = vec![false; basis.cells.len()];
    let mut flow = vec![0.0; basis.cells.len()];
    let mut leaves: Vec<usize> = (0..m + n).filter(|&k| degree[k] == 1).collect();
    while let Some(k) = leaves.pop() {
        let Some(&e) = adj[k].iter().find(|&&e| !used[e]) else {
            continue;
        };
        used[e] = true;
        let o = basis.other_end(e, k);
        flow[e] = rem[k];
        rem[o] -= rem[k];
        rem[k] = 0.0;
        degree[k] -= 1;
        degree[o] -= 1;
        if degree[o] == 1 {
            leaves.push(o);
        }
    }
    flow
}

/// Minimise `Σ cᵢⱼ πᵢⱼ` over plans with row sums `a` and column sums `b`.
///
/// `cost` is row-major `a.len() × b.len()`. Returns the dense plan.
pub fn solve_transport(cost: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::Invalid("transport needs at least one source and one target".into()));
    }
    if cost.len() != m * n {
        return Err(Error::Dimension { expected: m * n, got: cost.len() });
    }
    if a.iter().chain(b).any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Domain("marginal weights must be positive and finite".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid("transport costs must be finite".into()));
    }

    let pa: Vec<f64> = a.iter().map(|w| w + PERTURBATION).collect();
    let mut pb = b.to_vec();
    pb[n - 1] += m as f64 * PERTURBATION;
    let mut basis = northwest_corner(&pa, &pb);

    let scale = cost.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
    let tol = REDUCED_COST_TOL * scale.max(f64::MIN_POSITIVE);
    let max_iter = 50 * m * n + 1000;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut iter = 0;
    loop {
        let adj = basis.node_edges();
        potentials(&basis, &adj, cost, &mut u, &mut v);

        let mut entering = None;
        let mut best = -tol;
        for i in 0..m {
            for j in 0..n {
                let k = i * n + j;
                let r = cost[k] - u[i] - v[j];
                if r < best && basis.slot[k] == usize::MAX {
                    best = r;
                    entering = Some(k);
                }
            }
        }
        let Some(k) = entering else { break };
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence { what: "transportation simplex", iterations: max_iter });
        }
        pivot(&mut basis, &adj, k / n, k % n);
    }

    let flow = tree_flows(&basis, a, b);
    let mut plan = vec![0.0; m * n];
    for (&(i, j), f) in basis.cells.iter().zip(flow) {
        plan[i * n + j] = f.max(0.0);
    }
    Ok(plan)
}

fn potentials(basis: &Basis, adj: &[Vec<usize>], cost: &[f64], u: &mut [f64], v: &mut [f64]) {
    let (m, n) = (basis.m, basis.n);
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &e in &adj[node] {
            let o = basis.other_end(e, node);
            if seen[o] {
                continue;
            }
            seen[o] = true;
            let (i, j) = basis.cells[e];
            if o >= m {
                v[j] = cost[i * n + j] - u[i];
            } else {
                u[i] = cost[i * n + j] - v[j];
            }
            queue.push_back(o);
        }
    }
}

fn pivot(basis: &mut Basis, adj: &[Vec<usize>], i: usize, j: usize) {
    let (m, n) = (basis.m, basis.n);
    // Tree path from column node j to row node i.
    let mut parent_edge = vec![usize::MAX; m + n];
    let mut seen = vec![false; m + n];
    let start = m + j;
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == i {
            break;
        }
        for &e in &adj[node] {
            let o = basis.other_end(e, node);
            if !seen[o] {
                seen[o] = true;
                parent_edge[o] = e;
                queue.push_back(o);
            }
        }
    }
    // Walking back from row i reaches column j; edges alternate −, +, −, …
    // starting with the one at row i.
    let mut path = Vec::new();
    let mut node = i;
    while node != start {
        let e = parent_edge[node];
        path.push(e);
        node = basis.other_end(e, node);
    }

    let mut leave = usize::MAX;
    for &e in path.iter().step_by(2) {
        let better = leave == usize::MAX
            || basis.flow[e] < basis.flow[leave]
            || (basis.flow[e] == basis.flow[leave] && basis.cells[e] < basis.cells[leave]);
        if better {
            leave = e;
        }
    }
    let theta = basis.flow[leave];
    for (k, &e) in path.iter().enumerate() {
        if k % 2 == 0 {
            basis.flow[e] -= theta;
        } else {
            basis.flow[e] += theta;
        }
    }

    let (li, lj) = basis.cells[leave];
    basis.slot[li * n + lj] = usize::MAX;
    basis.slot[i * n + j] = leave;
    basis.cells[leave] = (i, j);
    basis.flow[leave] = theta;
}
