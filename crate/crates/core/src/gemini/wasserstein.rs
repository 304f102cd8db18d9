//! Wasserstein-GEMINI.
//!
//! With the exact solver the cluster distance is the order-1 transport cost.
//! With the entropic solver it is the debiased Sinkhorn divergence
//! `OT_ε(a,b) − ½·OT_ε(a,a) − ½·OT_ε(b,b)`, which vanishes when `a = b` and
//! whose gradient is read off the dual potentials.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::ot::{GibbsKernel, OtSolverKind};
use super::simplex::TransportBasis;
use super::{cluster_weights, GeminiSpec, Mode, OtSolver};
use crate::error::{Error, Result};
use crate::geometry::{AffinityMatrix, AffinityTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Cluster(usize),
    Uniform,
}

/// Solver state reused across evaluations on one distance matrix.
#[derive(Debug, Clone)]
pub struct TransportCache {
    fingerprint: (usize, u64, u64),
    kernel: Option<GibbsKernel>,
    uniform_self: Option<(f64, Array1<f64>)>,
    warm: HashMap<(Slot, Slot), (Array1<f64>, Array1<f64>)>,
    bases: HashMap<(Slot, Slot), TransportBasis>,
}

fn fingerprint(dist: &AffinityMatrix) -> (usize, u64, u64) {
    let (mut s, mut t) = (0.0f64, 0.0f64);
    for (i, v) in dist.values().iter().enumerate() {
        s += v;
        t += v * ((i % 97) as f64 + 1.0);
    }
    (dist.len(), s.to_bits(), t.to_bits())
}

impl TransportCache {
    pub fn new(dist: &AffinityMatrix, solver: &OtSolver) -> Result<Self> {
        if dist.tag() != AffinityTag::Distance {
            return Err(Error::InvalidInput("Wasserstein GEMINI needs a distance matrix".into()));
        }
        let kernel = match solver.kind {
            OtSolverKind::Exact => None,
            OtSolverKind::Entropic => {
                let eps = solver.epsilon_scale * dist.mean();
                if !(eps > 0.0) {
                    return Err(Error::DegenerateGeometry("all pairwise distances are zero".into()));
                }
                Some(GibbsKernel::new(dist.values(), eps))
            }
        };
        Ok(TransportCache {
            fingerprint: fingerprint(dist),
            kernel,
            uniform_self: None,
            warm: HashMap::new(),
            bases: HashMap::new(),
        })
    }

    pub(crate) fn matches(&self, dist: &AffinityMatrix) -> bool {
        self.fingerprint == fingerprint(dist)
    }

    fn sinkhorn(
        &mut self,
        key: (Slot, Slot),
        a: ArrayView1<f64>,
        b: ArrayView1<f64>,
        solver: &OtSolver,
    ) -> Result<(f64, Array1<f64>, Array1<f64>)> {
        let kernel = self.kernel.as_ref().expect("entropic kernel");
        let warm = self.warm.get(&key);
        let attempt = kernel.solve(a, b, warm.map(|(f, g)| (f, g)), solver.max_iterations, solver.tolerance);
        let result = match attempt {
            Err(Error::SolverDivergence { .. }) if warm.is_some() => {
                kernel.solve(a, b, None, solver.max_iterations, solver.tolerance)?
            }
            other => other?,
        };
        self.warm.insert(key, (result.f.clone(), result.g.clone()));
        Ok((result.value, result.f, result.g))
    }

    /// Exact transport, warm-started from the last optimal basis of this pair.
    fn exact(
        &mut self,
        key: (Slot, Slot),
        a: ArrayView1<f64>,
        b: ArrayView1<f64>,
        cost: &Array2<f64>,
    ) -> Result<(f64, Array1<f64>, Array1<f64>)> {
        let refreshed = match self.bases.get_mut(&key) {
            Some(basis) => basis.resolve(cost, a, b).is_ok(),
            None => false,
        };
        if !refreshed {
            self.bases.insert(key, TransportBasis::solve(cost, a, b)?);
        }
        let basis = &self.bases[&key];
        let r = basis.result(cost, a, b);
        Ok((r.value, r.f, r.g))
    }

    /// OT_ε(a,a) and its gradient `f + g` with respect to `a`.
    fn self_term(&mut self, slot: Slot, a: ArrayView1<f64>, solver: &OtSolver) -> Result<(f64, Array1<f64>)> {
        if slot == Slot::Uniform {
            if let Some(cached) = &self.uniform_self {
                return Ok(cached.clone());
            }
        }
        let kernel = self.kernel.as_ref().expect("entropic kernel");
        let key = (slot, slot);
        let warm = self.warm.get(&key).map(|(f, _)| f);
        let r = kernel.solve_symmetric(a, warm, solver.max_iterations, solver.tolerance)?;
        self.warm.insert(key, (r.f.clone(), r.g.clone()));
        let out = (r.value, r.f + r.g);
        if slot == Slot::Uniform {
            self.uniform_self = Some(out.clone());
        }
        Ok(out)
    }
}

/// Distance value and gradients with respect to both measures.
struct Divergence {
    value: f64,
    grad_a: Array1<f64>,
    grad_b: Array1<f64>,
}

fn divergence(
    cache: &mut TransportCache,
    dist: &AffinityMatrix,
    (sa, a): (Slot, ArrayView1<f64>),
    (sb, b): (Slot, ArrayView1<f64>),
    self_terms: &HashMap<Slot, (f64, Array1<f64>)>,
    solver: &OtSolver,
) -> Result<Divergence> {
    match solver.kind {
        OtSolverKind::Exact => {
            let (value, f, g) = cache.exact((sa, sb), a, b, dist.values())?;
            Ok(Divergence {
                value,
                grad_a: f,
                grad_b: g,
            })
        }
        OtSolverKind::Entropic => {
            let (cross, f, g) = cache.sinkhorn((sa, sb), a, b, solver)?;
            let (va, ga) = &self_terms[&sa];
            let (vb, gb) = &self_terms[&sb];
            Ok(Divergence {
                value: cross - 0.5 * va - 0.5 * vb,
                grad_a: f - &(ga * 0.5),
                grad_b: g - &(gb * 0.5),
            })
        }
    }
}

/// Wasserstein-GEMINI value.
pub fn wasserstein_gemini(tau: ArrayView2<f64>, dist: &AffinityMatrix, mode: Mode, solver: &OtSolver) -> Result<f64> {
    let mut spec = GeminiSpec::new(super::Distance::Wasserstein, mode);
    spec.solver = *solver;
    wasserstein_gemini_with_grad(tau, dist, &spec, None).map(|(v, _)| v)
}

/// Wasserstein-GEMINI value and gradient with respect to `tau`.
pub fn wasserstein_gemini_with_grad(
    tau: ArrayView2<f64>,
    dist: &AffinityMatrix,
    spec: &GeminiSpec,
    cache: Option<&mut TransportCache>,
) -> Result<(f64, Array2<f64>)> {
    if dist.tag() != AffinityTag::Distance {
        return Err(Error::InvalidInput("Wasserstein GEMINI needs a distance matrix".into()));
    }
    if tau.nrows() != dist.len() {
        return Err(Error::Shape(format!(
            "assignments have {} rows, distance matrix is {}x{}",
            tau.nrows(),
            dist.len(),
            dist.len()
        )));
    }
    let solver = spec.solver;
    let mut local;
    let cache = match cache {
        Some(c) => c,
        None => {
            local = TransportCache::new(dist, &solver)?;
            &mut local
        }
    };
    let w = cluster_weights(tau, spec.empty_cluster);
    let (n, k) = tau.dim();
    let nf = n as f64;
    let uniform = Array1::from_elem(n, 1.0 / nf);
    let live: Vec<usize> = (0..k).filter(|&c| !w.empty[c]).collect();

    let mut self_terms = HashMap::new();
    if solver.kind == OtSolverKind::Entropic {
        for &c in &live {
            let term = cache.self_term(Slot::Cluster(c), w.alpha.column(c), &solver)?;
            self_terms.insert(Slot::Cluster(c), term);
        }
        if spec.mode == Mode::Ova {
            let term = cache.self_term(Slot::Uniform, uniform.view(), &solver)?;
            self_terms.insert(Slot::Uniform, term);
        }
    }

    let mut value = 0.0;
    let mut grad = Array2::zeros((n, k));
    // ∂/∂τ_jc of π_c·D(α_c, ·) is (D + ∇D_j − ⟨∇D, α_c⟩)/N
    let accumulate = |grad: &mut Array2<f64>, c: usize, weight: f64, d: f64, g: &Array1<f64>| {
        let alpha = w.alpha.column(c);
        let along = g.dot(&alpha);
        grad.column_mut(c)
            .zip_mut_with(g, |o, &gj| *o += weight * (d + gj - along) / nf);
    };
    match spec.mode {
        Mode::Ova => {
            for &c in &live {
                let div = divergence(
                    cache,
                    dist,
                    (Slot::Cluster(c), w.alpha.column(c)),
                    (Slot::Uniform, uniform.view()),
                    &self_terms,
                    &solver,
                )?;
                value += w.proportions[c] * div.value.max(0.0);
                accumulate(&mut grad, c, 1.0, div.value, &div.grad_a);
            }
        }
        Mode::Ovo => {
            for (i, &a) in live.iter().enumerate() {
                for &b in &live[i + 1..] {
                    let div = divergence(
                        cache,
                        dist,
                        (Slot::Cluster(a), w.alpha.column(a)),
                        (Slot::Cluster(b), w.alpha.column(b)),
                        &self_terms,
                        &solver,
                    )?;
                    let (pa, pb) = (w.proportions[a], w.proportions[b]);
                    value += 2.0 * pa * pb * div.value.max(0.0);
                    accumulate(&mut grad, a, 2.0 * pb, div.value, &div.grad_a);
                    accumulate(&mut grad, b, 2.0 * pa, div.value, &div.grad_b);
                }
            }
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pairwise_affinity, AffinityKind, AffinitySpec};
    use ndarray::array;

    fn two_points() -> AffinityMatrix {
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        pairwise_affinity(x.view(), &AffinitySpec::all(AffinityKind::EuclideanDistance)).unwrap()
    }

    #[test]
    fn uniform_assignments_are_zero() {
        let dist = two_points();
        let tau = Array2::from_elem((2, 3), 1.0 / 3.0);
        for solver in [OtSolver::exact(), OtSolver::entropic(0.05)] {
            for mode in [Mode::Ova, Mode::Ovo] {
                let v = wasserstein_gemini(tau.view(), &dist, mode, &solver).unwrap();
                assert!(v.abs() < 1e-9, "{mode:?} {solver:?}: {v}");
            }
        }
    }

    #[test]
    fn point_mass_clusters() {
        let dist = two_points();
        let tau = Array2::eye(2);
        let ovo = wasserstein_gemini(tau.view(), &dist, Mode::Ovo, &OtSolver::exact()).unwrap();
        let ova = wasserstein_gemini(tau.view(), &dist, Mode::Ova, &OtSolver::exact()).unwrap();
        assert!((ovo - 1.0).abs() < 1e-12);
        assert!((ova - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_gram_matrix() {
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        let gram = pairwise_affinity(x.view(), &AffinitySpec::all(AffinityKind::LinearKernel)).unwrap();
        let tau = Array2::eye(2);
        assert!(wasserstein_gemini(tau.view(), &gram, Mode::Ova, &OtSolver::exact()).is_err());
    }
}
