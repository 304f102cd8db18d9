//! Optimal transport between two weighted empirical measures on the same
//! support: an exact transportation-simplex solver and an entropic
//! (Sinkhorn) solver working on log-domain potentials.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::simplex::TransportBasis;
use crate::error::{Error, Result};
use crate::geometry::{AffinityMatrix, AffinityTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OtSolverKind {
    Exact,
    Entropic,
}

/// Settings of the transport solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtSolver {
    pub kind: OtSolverKind,
    /// Entropic regularisation as a multiple of the mean cost.
    pub epsilon_scale: f64,
    pub max_iterations: usize,
    /// Stop when the L1 marginal residual falls below this value.
    pub tolerance: f64,
}

impl Default for OtSolver {
    fn default() -> Self {
        OtSolver {
            kind: OtSolverKind::Exact,
            epsilon_scale: 0.05,
            max_iterations: 1000,
            tolerance: 1e-9,
        }
    }
}

impl OtSolver {
    pub fn exact() -> Self {
        OtSolver {
            kind: OtSolverKind::Exact,
            ..OtSolver::default()
        }
    }

    pub fn entropic(epsilon_scale: f64) -> Self {
        OtSolver {
            kind: OtSolverKind::Entropic,
            epsilon_scale,
            ..OtSolver::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == OtSolverKind::Entropic && !(self.epsilon_scale > 0.0 && self.epsilon_scale.is_finite()) {
            return Err(Error::Config(format!(
                "entropic regularisation must be positive, got {}",
                self.epsilon_scale
            )));
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Config("solver needs positive iterations and tolerance".into()));
        }
        Ok(())
    }
}

/// Transport value and centred dual potentials.
///
/// For the exact solver `value = ⟨f,w₁⟩ + ⟨g,w₂⟩` is the optimal cost. For the
/// entropic solver `value` is the regularised cost
/// `min_P ⟨P,C⟩ + ε·KL(P ‖ w₁⊗w₂)`, which obeys the same dual identity and whose
/// gradients with respect to `w₁` and `w₂` are `f` and `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct OtResult {
    pub value: f64,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub iterations: usize,
}

fn check_marginal(w: ArrayView1<f64>, n: usize, name: &str) -> Result<()> {
    if w.len() != n {
        return Err(Error::InvalidInput(format!("{name} has length {}, cost is {n}x{n}", w.len())));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} has negative or non-finite weights")));
    }
    let total = w.sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

/// Shifts potentials (f + c, g − c) so that ⟨f,w₁⟩ = ⟨g,w₂⟩.
pub(crate) fn center(f: &mut Array1<f64>, g: &mut Array1<f64>, w1: ArrayView1<f64>, w2: ArrayView1<f64>) {
    let c = 0.5 * (w2.dot(g) - w1.dot(f));
    *f += c;
    *g -= c;
}

/// Solves OT between `w1` and `w2` under the ground cost `cost`.
pub fn ot_distance(
    w1: ArrayView1<f64>,
    w2: ArrayView1<f64>,
    cost: &AffinityMatrix,
    solver: &OtSolver,
) -> Result<OtResult> {
    if cost.tag() != AffinityTag::Distance {
        return Err(Error::InvalidInput("transport cost must be a distance matrix".into()));
    }
    solver.validate()?;
    let n = cost.len();
    check_marginal(w1, n, "first marginal")?;
    check_marginal(w2, n, "second marginal")?;
    match solver.kind {
        OtSolverKind::Exact => exact_transport(w1, w2, cost.values()),
        OtSolverKind::Entropic => {
            let kernel = GibbsKernel::new(cost.values(), solver.epsilon_scale * cost.mean());
            kernel.solve(w1, w2, None, solver.max_iterations, solver.tolerance)
        }
    }
}

/// Exact optimal transport, solved from scratch.
pub fn exact_transport(w1: ArrayView1<f64>, w2: ArrayView1<f64>, cost: &Array2<f64>) -> Result<OtResult> {
    let basis = TransportBasis::solve(cost, w1, w2)?;
    Ok(basis.result(cost, w1, w2))
}

// ---------------------------------------------------------------------------
// Entropic solver.
// ---------------------------------------------------------------------------

/// Gibbs kernel `exp(−C/ε)` of a cost matrix, shared by every Sinkhorn solve
/// on the same geometry.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    cost: Array2<f64>,
    epsilon: f64,
    /// `exp(−C/ε)`, kept only when it does not underflow.
    base: Option<Array2<f64>>,
    relaxation: f64,
}

/// Largest |potential|/ε absorbed by rescaling the cached kernel.
const SCALING_LIMIT: f64 = 250.0;
/// Scalings outside `exp(±ABSORB)` are folded back into the potentials.
const ABSORB: f64 = 40.0;
const DEFAULT_RELAXATION: f64 = 1.8;

/// `s^(1−ω) · (1/k)^ω`
fn relax(s: &Array1<f64>, k: &Array1<f64>, omega: f64) -> Array1<f64> {
    if omega == 1.0 {
        return k.mapv(|x| 1.0 / x);
    }
    Array1::from_shape_fn(s.len(), |i| s[i].powf(1.0 - omega) * k[i].powf(-omega))
}

impl GibbsKernel {
    pub fn new(cost: &Array2<f64>, epsilon: f64) -> Self {
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let base = (max_cost / epsilon < 600.0).then(|| cost.mapv(|c| (-c / epsilon).exp()));
        GibbsKernel {
            cost: cost.clone(),
            epsilon,
            base,
            relaxation: DEFAULT_RELAXATION,
        }
    }

    /// Over-relaxation factor in `[1, 2)` for [`Self::solve`]; 1 gives plain Sinkhorn.
    pub fn with_relaxation(mut self, omega: f64) -> Self {
        assert!((1.0..2.0).contains(&omega), "relaxation must lie in [1, 2)");
        self.relaxation = omega;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn len(&self) -> usize {
        self.cost.nrows()
    }

    /// `exp((f_i + g_j − C_ij)/ε)`.
    fn stabilized(&self, f: &Array1<f64>, g: &Array1<f64>) -> Array2<f64> {
        let eps = self.epsilon;
        let fits = |p: &Array1<f64>| p.iter().all(|v| (v / eps).abs() < SCALING_LIMIT);
        match &self.base {
            Some(base) if fits(f) && fits(g) => {
                let ef = f.mapv(|v| (v / eps).exp());
                let eg = g.mapv(|v| (v / eps).exp());
                let mut k = base.clone();
                for (i, mut row) in k.rows_mut().into_iter().enumerate() {
                    let fi = ef[i];
                    row.iter_mut().zip(eg.iter()).for_each(|(kij, gj)| *kij *= fi * gj);
                }
                k
            }
            _ => {
                let mut k = Array2::zeros(self.cost.raw_dim());
                for (i, mut row) in k.rows_mut().into_iter().enumerate() {
                    for (j, kij) in row.iter_mut().enumerate() {
                        *kij = ((f[i] + g[j] - self.cost[[i, j]]) / eps).exp();
                    }
                }
                k
            }
        }
    }

    /// Exact log-domain update `f_i = −ε log Σ_j w_j exp((g_j − C_ij)/ε)`.
    fn log_update(&self, w: &Array1<f64>, g: &Array1<f64>, transpose: bool) -> Array1<f64> {
        let eps = self.epsilon;
        let n = self.len();
        Array1::from_shape_fn(n, |i| {
            let term = |j: usize| {
                let c = if transpose { self.cost[[j, i]] } else { self.cost[[i, j]] };
                if w[j] > 0.0 {
                    w[j].ln() + (g[j] - c) / eps
                } else {
                    f64::NEG_INFINITY
                }
            };
            let max = (0..n).map(term).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (0..n).map(|j| (term(j) - max).exp()).sum();
            -eps * (max + sum.ln())
        })
    }

    /// Sinkhorn iterations on stabilised scalings; `warm` supplies starting potentials.
    pub fn solve(
        &self,
        a: ArrayView1<f64>,
        b: ArrayView1<f64>,
        warm: Option<(&Array1<f64>, &Array1<f64>)>,
        max_iterations: usize,
        tolerance: f64,
    ) -> Result<OtResult> {
        // near-equal marginals make plain Sinkhorn crawl; the symmetric
        // iteration solves the same problem and the gap stays within tolerance
        let gap: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
        if gap <= 0.5 * tolerance {
            let warm = warm.map(|(f, g)| (f + g) * 0.5);
            let r = self.solve_symmetric(a, warm.as_ref(), max_iterations, 0.5 * tolerance)?;
            let value = a.dot(&r.f) + b.dot(&r.g);
            let (mut f, mut g) = (r.f, r.g);
            center(&mut f, &mut g, a, b);
            return Ok(OtResult {
                value,
                f,
                g,
                iterations: r.iterations,
            });
        }
        let a = a.to_owned();
        let b = b.to_owned();
        let (mut f, mut g) = match warm {
            Some((f, g)) => (f.clone(), g.clone()),
            None => self.anneal(&a, &b),
        };
        let eps = self.epsilon;
        let mut kernel = self.stabilized(&f, &g);
        let n = self.len();
        let mut u = Array1::<f64>::ones(n);
        let mut v = Array1::<f64>::ones(n);
        let mut residual = f64::INFINITY;
        let mut col_residual = f64::INFINITY;
        let mut omega = self.relaxation;
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        for it in 0..max_iterations {
            let kv = kernel.dot(&(&v * &b));
            let row_residual: f64 = a.iter().zip(u.iter()).zip(kv.iter()).map(|((ai, ui), ki)| ai * (ui * ki - 1.0).abs()).sum();
            residual = row_residual + col_residual;
            if residual < tolerance {
                f.zip_mut_with(&u, |fi, ui| *fi += eps * ui.ln());
                g.zip_mut_with(&v, |gi, vi| *gi += eps * vi.ln());
                let value = a.dot(&f) + b.dot(&g);
                center(&mut f, &mut g, a.view(), b.view());
                return Ok(OtResult {
                    value,
                    f,
                    g,
                    iterations: it,
                });
            }
            // over-relaxation can stall far from the solution; plain steps always converge
            if residual < best {
                best = residual;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > 50 {
                    omega = 1.0;
                }
            }
            let u_new = relax(&u, &kv, omega);
            let ktu = kernel.t().dot(&(&u_new * &a));
            let v_new = relax(&v, &ktu, omega);
            col_residual = b.iter().zip(v_new.iter()).zip(ktu.iter()).map(|((bj, vj), kj)| bj * (vj * kj - 1.0).abs()).sum();
            let bad = |s: &Array1<f64>| s.iter().any(|&x| !x.is_finite() || x <= 0.0 || x.ln().abs() > ABSORB);
            if bad(&u_new) || bad(&v_new) {
                // fold the last good scalings in, then redo this half-step in log space
                f.zip_mut_with(&u, |fi, ui| *fi += eps * ui.ln());
                g.zip_mut_with(&v, |gi, vi| *gi += eps * vi.ln());
                f = self.log_update(&b, &g, false);
                g = self.log_update(&a, &f, true);
                kernel = self.stabilized(&f, &g);
                u.fill(1.0);
                v.fill(1.0);
                col_residual = f64::INFINITY;
            } else {
                u = u_new;
                v = v_new;
            }
        }
        Err(Error::SolverDivergence {
            iterations: max_iterations,
            residual,
        })
    }

    /// Entropic self-transport `OT_ε(a, a)` through the symmetric fixed point
    /// `f = −ε log Σ_j a_j exp((f_j − C_ij)/ε)` with averaged updates.
    /// The returned potentials satisfy `f == g`.
    pub fn solve_symmetric(
        &self,
        a: ArrayView1<f64>,
        warm: Option<&Array1<f64>>,
        max_iterations: usize,
        tolerance: f64,
    ) -> Result<OtResult> {
        let a = a.to_owned();
        let eps = self.epsilon;
        let mut f = match warm {
            Some(f) => f.clone(),
            None => a.mapv(|ai| if ai > 0.0 { -0.5 * eps * ai.ln() } else { 0.0 }),
        };
        let mut kernel = self.stabilized(&f, &f);
        let mut s = Array1::<f64>::ones(self.len());
        let mut residual = f64::INFINITY;
        for it in 0..max_iterations {
            let ks = kernel.dot(&(&s * &a));
            residual = a.iter().zip(s.iter()).zip(ks.iter()).map(|((ai, si), ki)| ai * (si * ki - 1.0).abs()).sum();
            if residual < tolerance {
                f.zip_mut_with(&s, |fi, si| *fi += eps * si.ln());
                let value = 2.0 * a.dot(&f);
                return Ok(OtResult {
                    value,
                    g: f.clone(),
                    f,
                    iterations: it,
                });
            }
            let s_new = Array1::from_shape_fn(s.len(), |i| (s[i] / ks[i]).sqrt());
            if s_new.iter().any(|&x| !x.is_finite() || x <= 0.0 || x.ln().abs() > ABSORB) {
                f.zip_mut_with(&s, |fi, si| *fi += eps * si.ln());
                let t = self.log_update(&a, &f, false);
                f = (&f + &t) * 0.5;
                kernel = self.stabilized(&f, &f);
                s.fill(1.0);
            } else {
                s = s_new;
            }
        }
        Err(Error::SolverDivergence {
            iterations: max_iterations,
            residual,
        })
    }

    /// Cold start: a short ε-scaling schedule from the largest cost down to ε.
    fn anneal(&self, a: &Array1<f64>, b: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let n = self.len();
        let mut f = Array1::zeros(n);
        let mut g = Array1::zeros(n);
        let max_cost = self.cost.iter().fold(0.0f64, |m, &c| m.max(c));
        let mut stage = GibbsKernel {
            cost: self.cost.clone(),
            epsilon: max_cost.max(self.epsilon),
            base: None,
            relaxation: 1.0,
        };
        while stage.epsilon > 2.0 * self.epsilon {
            for _ in 0..20 {
                f = stage.log_update(b, &g, false);
                g = stage.log_update(a, &f, true);
            }
            stage.epsilon *= 0.5;
        }
        (f, g)
    }
}
