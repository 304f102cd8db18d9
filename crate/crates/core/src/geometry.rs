//! Pairwise affinities between samples: linear-kernel Gram matrices and
//! euclidean distance matrices, optionally restricted to a feature subset.

use ndarray::{Array2, ArrayView2, Axis};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffinityKind {
    LinearKernel,
    EuclideanDistance,
}

impl AffinityKind {
    pub fn tag(self) -> AffinityTag {
        match self {
            AffinityKind::LinearKernel => AffinityTag::Gram,
            AffinityKind::EuclideanDistance => AffinityTag::Distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffinityTag {
    Gram,
    Distance,
}

/// Which affinity to build and on which features (`None` means all).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinitySpec {
    pub kind: AffinityKind,
    pub active: Option<Vec<usize>>,
}

impl AffinitySpec {
    pub fn all(kind: AffinityKind) -> Self {
        AffinitySpec { kind, active: None }
    }

    pub fn restricted(kind: AffinityKind, active: Vec<usize>) -> Self {
        AffinitySpec {
            kind,
            active: Some(active),
        }
    }

    fn validate(&self, features: usize) -> Result<()> {
        if let Some(active) = &self.active {
            if active.is_empty() {
                return Err(Error::DegenerateGeometry("empty active feature set".into()));
            }
            let mut seen = vec![false; features];
            for &j in active {
                if j >= features {
                    return Err(Error::InvalidInput(format!("feature index {j} out of range {features}")));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidInput(format!("duplicate feature index {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Symmetric N×N matrix of kernel values or distances.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: Array2<f64>,
    tag: AffinityTag,
}

impl AffinityMatrix {
    /// Wraps a precomputed matrix after checking symmetry (and, for
    /// distances, zero diagonal and nonnegativity).
    pub fn new(values: Array2<f64>, tag: AffinityTag) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::Shape(format!("affinity must be square, got {:?}", values.dim())));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite affinity entry".into()));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (values[[i, j]] - values[[j, i]]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidInput(format!("affinity not symmetric at ({i},{j})")));
                }
            }
        }
        if tag == AffinityTag::Distance
            && ((0..n).any(|i| values[[i, i]] != 0.0) || values.iter().any(|&v| v < 0.0))
        {
            return Err(Error::InvalidInput(
                "distance matrix needs zero diagonal and nonnegative entries".into(),
            ));
        }
        Ok(AffinityMatrix { values, tag })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn tag(&self) -> AffinityTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.values.diag().sum()
    }

    /// Mean over all N² entries.
    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        AffinityMatrix {
            values: &self.values * c,
            tag: self.tag,
        }
    }
}

/// Builds κ(x_i|I, x_j|I) or δ(x_i|I, x_j|I) for every pair of rows.
pub fn pairwise_affinity(x: ArrayView2<f64>, spec: &AffinitySpec) -> Result<AffinityMatrix> {
    spec.validate(x.ncols())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite data entry".into()));
    }
    let restricted = match &spec.active {
        Some(active) => x.select(Axis(1), active),
        None => x.to_owned(),
    };
    let n = restricted.nrows();
    let values = match spec.kind {
        AffinityKind::LinearKernel => {
            let g = restricted.dot(&restricted.t());
            // matrix products may round the two triangles differently
            let mut sym = g.clone();
            for i in 0..n {
                for j in 0..i {
                    let v = 0.5 * (g[[i, j]] + g[[j, i]]);
                    sym[[i, j]] = v;
                    sym[[j, i]] = v;
                }
            }
            sym
        }
        AffinityKind::EuclideanDistance => {
            let row = |i: usize| -> Vec<f64> {
                let xi = restricted.row(i);
                (0..n)
                    .map(|j| {
                        let xj = restricted.row(j);
                        xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                    })
                    .collect()
            };
            #[cfg(feature = "parallel")]
            let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(row).collect();
            #[cfg(not(feature = "parallel"))]
            let rows: Vec<Vec<f64>> = (0..n).map(row).collect();
            Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect())
                .expect("square distance matrix")
        }
    };
    Ok(AffinityMatrix {
        values,
        tag: spec.kind.tag(),
    })
}
