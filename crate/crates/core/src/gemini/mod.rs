//! Generalised mutual information (GEMINI) estimators.
//!
//! Everything is computed from the soft assignments `τ` (N×K) and one
//! affinity matrix. The cluster-conditional distributions are the
//! reweighted empirical measures `α_k = τ_·k / Σ_i τ_ik`, the data
//! distribution is the uniform measure `u`, and the cluster proportions are
//! `π_k = (1/N)·Σ_i τ_ik`.
//!
//! | distance | one-vs-all | one-vs-one |
//! |----------|------------|------------|
//! | MMD | `Σ_k π_k·MMD(α_k, u)` | `Σ_{k,l} π_k π_l·MMD(α_k, α_l)` |
//! | Wasserstein | `Σ_k π_k·W(α_k, u)` | `Σ_{k,l} π_k π_l·W(α_k, α_l)` |

mod mmd;
mod simplex;
pub mod ot;
mod wasserstein;

pub use mmd::{mmd_gemini, mmd_gemini_with_grad};
pub use simplex::TransportBasis;
pub use ot::{ot_distance, GibbsKernel, OtResult, OtSolver, OtSolverKind};
pub use wasserstein::{wasserstein_gemini, wasserstein_gemini_with_grad, TransportCache};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffinityKind, AffinityMatrix};

/// Relative mass below which a cluster counts as empty.
pub const DEFAULT_EMPTY_CLUSTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Mmd,
    Wasserstein,
}

impl Distance {
    /// Affinity the distance is evaluated with: linear kernel for MMD,
    /// euclidean ground cost for Wasserstein.
    pub fn affinity_kind(self) -> AffinityKind {
        match self {
            Distance::Mmd => AffinityKind::LinearKernel,
            Distance::Wasserstein => AffinityKind::EuclideanDistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ova,
    Ovo,
}

impl std::str::FromStr for Distance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmd" => Ok(Distance::Mmd),
            "wasserstein" => Ok(Distance::Wasserstein),
            _ => Err(Error::Config(format!("unknown GEMINI distance `{s}`"))),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ova" => Ok(Mode::Ova),
            "ovo" => Ok(Mode::Ovo),
            _ => Err(Error::Config(format!("unknown GEMINI mode `{s}`"))),
        }
    }
}

/// Which GEMINI to maximise and how to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeminiSpec {
    pub distance: Distance,
    pub mode: Mode,
    pub solver: OtSolver,
    pub empty_cluster: f64,
}

impl GeminiSpec {
    pub fn new(distance: Distance, mode: Mode) -> Self {
        GeminiSpec {
            distance,
            mode,
            solver: OtSolver::default(),
            empty_cluster: DEFAULT_EMPTY_CLUSTER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.empty_cluster > 0.0 && self.empty_cluster <= 1e-3) {
            return Err(Error::Config(format!(
                "empty-cluster threshold must lie in (0, 1e-3], got {}",
                self.empty_cluster
            )));
        }
        if self.distance == Distance::Wasserstein {
            self.solver.validate()?;
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let d = match self.distance {
            Distance::Mmd => "mmd",
            Distance::Wasserstein => "wasserstein",
        };
        let m = match self.mode {
            Mode::Ova => "ova",
            Mode::Ovo => "ovo",
        };
        format!("{d}-{m}")
    }
}

/// Cluster proportions and normalised within-cluster weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWeights {
    /// π_k
    pub proportions: Array1<f64>,
    /// Column k is α_k; uniform for empty clusters.
    pub alpha: Array2<f64>,
    /// Σ_i τ_ik
    pub mass: Array1<f64>,
    pub empty: Vec<bool>,
}

/// Bayes inversion of the soft assignments into cluster measures.
pub fn cluster_weights(tau: ArrayView2<f64>, empty_threshold: f64) -> ClusterWeights {
    let (n, k) = tau.dim();
    let nf = n as f64;
    let mass = tau.sum_axis(Axis(0));
    let proportions = &mass / nf;
    let mut alpha = Array2::zeros((n, k));
    let mut empty = vec![false; k];
    for c in 0..k {
        if mass[c] <= empty_threshold * nf {
            empty[c] = true;
            alpha.column_mut(c).fill(1.0 / nf);
        } else {
            alpha.column_mut(c).assign(&(&tau.column(c) / mass[c]));
        }
    }
    ClusterWeights {
        proportions,
        alpha,
        mass,
        empty,
    }
}

/// GEMINI value for the given assignments.
pub fn gemini_value(tau: ArrayView2<f64>, affinity: &AffinityMatrix, spec: &GeminiSpec) -> Result<f64> {
    gemini_grad(tau, affinity, spec).map(|(v, _)| v)
}

/// GEMINI value and gradient with respect to `tau`.
pub fn gemini_grad(
    tau: ArrayView2<f64>,
    affinity: &AffinityMatrix,
    spec: &GeminiSpec,
) -> Result<(f64, Array2<f64>)> {
    GeminiEvaluator::new(*spec).evaluate(tau, affinity)
}

/// Stateful evaluator: keeps transport potentials between calls so that
/// successive Sinkhorn solves on slowly moving assignments warm-start.
///
/// Call [`GeminiEvaluator::reset`] whenever the affinity matrix changes.
#[derive(Debug, Clone)]
pub struct GeminiEvaluator {
    spec: GeminiSpec,
    transport: Option<TransportCache>,
}

impl GeminiEvaluator {
    pub fn new(spec: GeminiSpec) -> Self {
        GeminiEvaluator { spec, transport: None }
    }

    pub fn spec(&self) -> &GeminiSpec {
        &self.spec
    }

    pub fn reset(&mut self) {
        self.transport = None;
    }

    pub fn evaluate(&mut self, tau: ArrayView2<f64>, affinity: &AffinityMatrix) -> Result<(f64, Array2<f64>)> {
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite soft assignments".into()));
        }
        match self.spec.distance {
            Distance::Mmd => mmd_gemini_with_grad(tau, affinity, self.spec.mode, self.spec.empty_cluster),
            Distance::Wasserstein => {
                let cache = match &mut self.transport {
                    Some(c) if c.matches(affinity) => c,
                    slot => slot.insert(TransportCache::new(affinity, &self.spec.solver)?),
                };
                wasserstein_gemini_with_grad(tau, affinity, &self.spec, Some(cache))
            }
        }
    }
}
