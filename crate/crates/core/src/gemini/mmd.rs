//! MMD-GEMINI: cluster-conditional measures are reweighted empirical
//! measures, so every MMD is a quadratic form in the Gram matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{cluster_weights, ClusterWeights, Mode, DEFAULT_EMPTY_CLUSTER};
use crate::error::{Error, Result};
use crate::geometry::{AffinityMatrix, AffinityTag};

/// Quadratic forms below this are treated as the sqrt kink.
const KINK: f64 = 1e-12;

fn clamp_form(q: f64, trace: f64) -> Result<f64> {
    if q < -1e-8 * trace.abs().max(1e-300) {
        return Err(Error::Numeric(format!(
            "negative MMD quadratic form {q:.3e}: kernel matrix is not PSD"
        )));
    }
    Ok(q.max(0.0))
}

fn check(tau: ArrayView2<f64>, gram: &AffinityMatrix) -> Result<()> {
    if gram.tag() != AffinityTag::Gram {
        return Err(Error::InvalidInput("MMD needs a kernel (Gram) matrix".into()));
    }
    if tau.nrows() != gram.len() {
        return Err(Error::Shape(format!(
            "assignments have {} rows, Gram matrix is {}x{}",
            tau.nrows(),
            gram.len(),
            gram.len()
        )));
    }
    Ok(())
}

/// MMD-GEMINI value.
pub fn mmd_gemini(tau: ArrayView2<f64>, gram: &AffinityMatrix, mode: Mode) -> Result<f64> {
    mmd_gemini_with_grad(tau, gram, mode, DEFAULT_EMPTY_CLUSTER).map(|(v, _)| v)
}

/// MMD-GEMINI value and its gradient with respect to `tau`.
pub fn mmd_gemini_with_grad(
    tau: ArrayView2<f64>,
    gram: &AffinityMatrix,
    mode: Mode,
    empty_threshold: f64,
) -> Result<(f64, Array2<f64>)> {
    check(tau, gram)?;
    let weights = cluster_weights(tau, empty_threshold);
    let g = gram.values();
    // G·α_k for every cluster, and G·u
    let g_alpha = g.dot(&weights.alpha);
    let g_u = g.mean_axis(Axis(1)).expect("nonempty Gram matrix");
    match mode {
        Mode::Ova => ova(&weights, &g_alpha, &g_u, gram.trace()),
        Mode::Ovo => ovo(&weights, &g_alpha, gram.trace()),
    }
}

fn ova(w: &ClusterWeights, g_alpha: &Array2<f64>, g_u: &Array1<f64>, trace: f64) -> Result<(f64, Array2<f64>)> {
    let (n, k) = w.alpha.dim();
    let nf = n as f64;
    let u_g_u = g_u.mean().unwrap_or(0.0);
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, k));
    for c in 0..k {
        if w.empty[c] {
            continue;
        }
        let alpha = w.alpha.column(c);
        let g_a = g_alpha.column(c);
        // (α−u)ᵀG(α−u) = αᵀGα − 2αᵀGu + uᵀGu
        let q = alpha.dot(&g_a) - 2.0 * alpha.dot(g_u) + u_g_u;
        let q = clamp_form(q, trace)?;
        let root = q.sqrt();
        value += w.proportions[c] * root;
        if q < KINK {
            continue;
        }
        // ∂/∂τ_·c = H·G(α−u) / (N·√q), H the centring projector
        let mut dir = &g_a - g_u;
        let mean = dir.mean().unwrap_or(0.0);
        dir.mapv_inplace(|v| (v - mean) / (nf * root));
        grad.column_mut(c).assign(&dir);
    }
    Ok((value, grad))
}

fn ovo(w: &ClusterWeights, g_alpha: &Array2<f64>, trace: f64) -> Result<(f64, Array2<f64>)> {
    let (n, k) = w.alpha.dim();
    let nf = n as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, k));
    for a in 0..k {
        for b in (a + 1)..k {
            if w.empty[a] || w.empty[b] {
                continue;
            }
            let (alpha_a, alpha_b) = (w.alpha.column(a), w.alpha.column(b));
            let diff_g = &g_alpha.column(a) - &g_alpha.column(b);
            let q = alpha_a.dot(&diff_g) - alpha_b.dot(&diff_g);
            let q = clamp_form(q, trace)?;
            let root = q.sqrt();
            let (pa, pb) = (w.proportions[a], w.proportions[b]);
            // (a,b) and (b,a) are equal ordered terms
            value += 2.0 * pa * pb * root;
            if q < KINK {
                continue;
            }
            let dir = diff_g / root;
            let along_a = dir.dot(&alpha_a);
            let along_b = dir.dot(&alpha_b);
            let mut ga = grad.column_mut(a);
            ga.zip_mut_with(&dir, |o, &d| *o += 2.0 * pb * (d - along_b) / nf);
            let mut gb = grad.column_mut(b);
            gb.zip_mut_with(&dir, |o, &d| *o += 2.0 * pa * (along_a - d) / nf);
        }
    }
    Ok((value, grad))
}
