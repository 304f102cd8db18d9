//! Exact transport by the network simplex on the bipartite row/column graph.
//!
//! The basis is a spanning tree with `n + m − 1` cells; degenerate zero-flow
//! cells are kept explicitly. Node ids: rows `0..n`, columns `n..n+m`; the tree
//! is rooted at row 0.
//!
//! Duals depend only on the tree and the cost, so a solved basis stays dual
//! feasible when the marginals change. [`TransportBasis::resolve`] recomputes
//! the tree flows and, if any turned negative, repairs them with dual simplex
//! pivots; small changes of the marginals usually need none.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransportBasis {
    n: usize,
    m: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
    pub pivots: usize,
}

const NONE: usize = usize::MAX;

impl TransportBasis {
    /// Cold start from the north-west corner rule, then primal pivots.
    pub fn solve(cost: &Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<Self> {
        let (n, m) = cost.dim();
        if a.len() != n || b.len() != m || n == 0 || m == 0 {
            return Err(Error::Shape(format!("marginals {}/{} for a {n}x{m} cost", a.len(), b.len())));
        }
        let (supply, demand) = balanced(a, b);
        let mut cells = Vec::with_capacity(n + m - 1);
        let (mut rs, mut rd) = (supply.clone(), demand.clone());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = rs[i].min(rd[j]);
            cells.push((i, j));
            rs[i] -= x;
            rd[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || rs[i] <= rd[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut basis = TransportBasis {
            n,
            m,
            flow: vec![0.0; cells.len()],
            cells,
            u: vec![0.0; n],
            v: vec![0.0; m],
            adj: vec![Vec::new(); n + m],
            parent: vec![NONE; n + m],
            parent_cell: vec![NONE; n + m],
            depth: vec![0; n + m],
            order: Vec::with_capacity(n + m),
            cursor: 0,
            pivots: 0,
        };
        for (e, &(i, j)) in basis.cells.iter().enumerate() {
            basis.adj[i].push(e);
            basis.adj[n + j].push(e);
        }
        basis.rebuild(cost);
        basis.compute_flows(&supply, &demand);
        basis.primal(cost)?;
        Ok(basis)
    }

    /// Re-solves for new marginals starting from this basis.
    pub fn resolve(&mut self, cost: &Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<()> {
        if a.len() != self.n || b.len() != self.m {
            return Err(Error::Shape("marginals do not match the stored basis".into()));
        }
        let (supply, demand) = balanced(a, b);
        self.compute_flows(&supply, &demand);
        self.dual(cost, &supply, &demand)?;
        self.primal(cost)
    }

    pub fn value(&self, cost: &Array2<f64>) -> f64 {
        self.cells.iter().zip(&self.flow).map(|(&(i, j), &x)| x * cost[[i, j]]).sum()
    }

    /// Optimal value and potentials centred so that `⟨f,a⟩ = ⟨g,b⟩`.
    pub fn result(&self, cost: &Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> super::OtResult {
        let mut f = Array1::from(self.u.clone());
        let mut g = Array1::from(self.v.clone());
        super::ot::center(&mut f, &mut g, a, b);
        super::OtResult {
            value: self.value(cost),
            f,
            g,
            iterations: self.pivots,
        }
    }

    /// Transport plan as a dense matrix.
    pub fn plan(&self) -> Array2<f64> {
        let mut p = Array2::zeros((self.n, self.m));
        for (&(i, j), &x) in self.cells.iter().zip(&self.flow) {
            p[[i, j]] += x;
        }
        p
    }

    /// Rooted tree structure and duals `u_i + v_j = c_ij` on basis cells.
    fn rebuild(&mut self, cost: &Array2<f64>) {
        let n = self.n;
        self.parent.fill(NONE);
        self.order.clear();
        self.order.push(0);
        self.parent[0] = 0;
        self.parent_cell[0] = NONE;
        self.depth[0] = 0;
        self.u[0] = 0.0;
        let mut head = 0;
        while head < self.order.len() {
            let node = self.order[head];
            head += 1;
            for &e in &self.adj[node] {
                let (i, j) = self.cells[e];
                let next = if node < n { n + j } else { i };
                if self.parent[next] != NONE {
                    continue;
                }
                self.parent[next] = node;
                self.parent_cell[next] = e;
                self.depth[next] = self.depth[node] + 1;
                if next < n {
                    self.u[i] = cost[[i, j]] - self.v[j];
                } else {
                    self.v[j] = cost[[i, j]] - self.u[i];
                }
                self.order.push(next);
            }
        }
        debug_assert_eq!(self.order.len(), n + self.m, "basis is not a spanning tree");
    }

    /// Tree flows implied by the marginals (leaves first).
    fn compute_flows(&mut self, supply: &[f64], demand: &[f64]) {
        let n = self.n;
        let mut excess: Vec<f64> = supply.iter().copied().chain(demand.iter().map(|d| -d)).collect();
        for &node in self.order.iter().skip(1).rev() {
            let e = self.parent_cell[node];
            self.flow[e] = if node < n { excess[node] } else { -excess[node] };
            let p = self.parent[node];
            excess[p] += excess[node];
        }
    }

    fn reduced(&self, cost: &Array2<f64>, i: usize, j: usize) -> f64 {
        cost[[i, j]] - self.u[i] - self.v[j]
    }

    fn swap_cell(&mut self, leave: usize, enter: (usize, usize), cost: &Array2<f64>) {
        let n = self.n;
        let (li, lj) = self.cells[leave];
        self.adj[li].retain(|&e| e != leave);
        self.adj[n + lj].retain(|&e| e != leave);
        self.cells[leave] = enter;
        self.adj[enter.0].push(leave);
        self.adj[n + enter.1].push(leave);
        self.rebuild(cost);
        self.pivots += 1;
    }

    fn cost_tolerance(cost: &Array2<f64>) -> f64 {
        1e-12 * cost.iter().fold(0.0f64, |a, &c| a.max(c.abs())).max(1e-300)
    }

    /// Primal simplex with block pricing; requires nonnegative tree flows.
    fn primal(&mut self, cost: &Array2<f64>) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let total = n * m;
        let block = ((total as f64).sqrt().ceil() as usize).max(16).min(total);
        let tol = Self::cost_tolerance(cost);
        let limit = 50 * (n + m) * (n + m) + 1000;
        for _ in 0..limit {
            // scan cyclically, stopping at the first block holding a candidate
            let mut best = (-tol, NONE);
            let mut scanned = 0;
            while scanned < total {
                let stop = (scanned + block).min(total);
                while scanned < stop {
                    let cell = (self.cursor + scanned) % total;
                    let r = self.reduced(cost, cell / m, cell % m);
                    if r < best.0 {
                        best = (r, cell);
                    }
                    scanned += 1;
                }
                if best.1 != NONE {
                    break;
                }
            }
            if best.1 == NONE {
                return Ok(());
            }
            self.cursor = (self.cursor + scanned) % total;
            let (ei, ej) = (best.1 / m, best.1 % m);
            // cycle: enter i→j, then back from column j to row i through the tree
            let (mut x, mut y) = (n + ej, ei);
            let mut minus: Vec<usize> = Vec::new();
            let mut plus: Vec<usize> = Vec::new();
            let step = |node: usize, from_col_side: bool, minus: &mut Vec<usize>, plus: &mut Vec<usize>| {
                let e = self.parent_cell[node];
                let node_is_col = node >= n;
                if node_is_col == from_col_side {
                    minus.push(e);
                } else {
                    plus.push(e);
                }
                self.parent[node]
            };
            while x != y {
                if self.depth[x] >= self.depth[y] {
                    x = step(x, true, &mut minus, &mut plus);
                } else {
                    y = step(y, false, &mut minus, &mut plus);
                }
            }
            let mut leave = NONE;
            let mut theta = f64::INFINITY;
            for &e in &minus {
                if self.flow[e] < theta {
                    theta = self.flow[e];
                    leave = e;
                }
            }
            let theta = theta.max(0.0);
            for &e in &minus {
                self.flow[e] -= theta;
            }
            for &e in &plus {
                self.flow[e] += theta;
            }
            self.swap_cell(leave, (ei, ej), cost);
            self.flow[leave] = theta;
        }
        Err(Error::SolverDivergence {
            iterations: limit,
            residual: f64::NAN,
        })
    }

    /// Dual simplex: drives negative tree flows out while keeping reduced costs nonnegative.
    fn dual(&mut self, cost: &Array2<f64>, supply: &[f64], demand: &[f64]) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let ftol = 1e-14;
        let limit = 10 * (n + m) + 100;
        let mut in_sub = vec![false; n + m];
        for _ in 0..limit {
            let (mut worst, mut leave) = (-ftol, NONE);
            for (e, &x) in self.flow.iter().enumerate() {
                if x < worst {
                    worst = x;
                    leave = e;
                }
            }
            if leave == NONE {
                for x in &mut self.flow {
                    *x = x.max(0.0);
                }
                return Ok(());
            }
            let (li, lj) = self.cells[leave];
            let child = if self.parent_cell[li] == leave { li } else { n + lj };
            in_sub.fill(false);
            in_sub[child] = true;
            for &node in &self.order {
                if node != child && node != 0 && in_sub[self.parent[node]] {
                    in_sub[node] = true;
                }
            }
            // the subtree must receive flow if the child is a row, send flow otherwise
            let (rows_inside, cols_inside) = if child < n { (false, true) } else { (true, false) };
            let mut best = (f64::INFINITY, NONE, NONE);
            for i in (0..n).filter(|&i| in_sub[i] == rows_inside) {
                for j in (0..m).filter(|&j| in_sub[n + j] == cols_inside) {
                    let r = self.reduced(cost, i, j);
                    if r < best.0 {
                        best = (r, i, j);
                    }
                }
            }
            if best.1 == NONE {
                return Err(Error::Numeric("transport problem became infeasible".into()));
            }
            self.swap_cell(leave, (best.1, best.2), cost);
            self.compute_flows(supply, demand);
        }
        Err(Error::SolverDivergence {
            iterations: limit,
            residual: f64::NAN,
        })
    }
}

/// Marginals with the (tiny) total-mass mismatch absorbed into the demands.
fn balanced(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (Vec<f64>, Vec<f64>) {
    let scale = a.sum() / b.sum();
    (a.to_vec(), b.iter().map(|v| v * scale).collect())
}
