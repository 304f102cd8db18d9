//! Group-lasso penalty on skip columns and the hierarchical proximal
//! operator tying first-layer weights to their skip column.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::nn::SkipConnectedModel;

/// Σ_j ‖S_j‖₂ over the columns of the skip matrix.
pub fn group_penalty(skip: ArrayView2<f64>) -> f64 {
    skip.columns().into_iter().map(|c| c.dot(&c).sqrt()).sum()
}

/// Solves, for one feature,
///
/// ```text
/// min_{v,u} ½‖v − b‖² + ½‖u − a‖² + λ̄‖v‖₂   s.t.  ‖u‖∞ ≤ M‖v‖₂
/// ```
///
/// where `b` is the skip column and `a` the first-layer weights reading the
/// feature. Returns `(ṽ, ũ)`; eliminated features come back as exact zeros.
pub fn hier_prox(b: ArrayView1<f64>, a: ArrayView1<f64>, threshold: f64, hierarchy: f64) -> (Array1<f64>, Array1<f64>) {
    let b_norm = b.dot(&b).sqrt();
    if hierarchy == 0.0 {
        let scale = if b_norm > 0.0 { (b_norm - threshold).max(0.0) / b_norm } else { 0.0 };
        return (b.mapv(|v| v * scale), Array1::zeros(a.len()));
    }
    if b_norm == 0.0 {
        // no direction to grow the skip column along, so the feature stays dead
        return (Array1::zeros(b.len()), Array1::zeros(a.len()));
    }

    let mut sorted: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let m2 = hierarchy * hierarchy;
    // t is the output skip norm; the cap on |u| is M·t
    let mut prefix = 0.0;
    let mut radius = None;
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    for m in 0..=sorted.len() {
        if m > 0 {
            prefix += sorted[m - 1];
        }
        let t = (b_norm + hierarchy * prefix - threshold).max(0.0) / (1.0 + m as f64 * m2);
        let w = hierarchy * t;
        let upper = if m == 0 { f64::INFINITY } else { sorted[m - 1] };
        let lower = sorted.get(m).copied().unwrap_or(0.0);
        if upper >= w && w >= lower {
            radius = Some(t);
            break;
        }
        candidates.push(t);
    }
    // rounding can break every bracket; fall back to the best candidate
    let radius = radius.unwrap_or_else(|| {
        let profile = |t: f64| {
            let clip: f64 = sorted.iter().map(|x| (x - hierarchy * t).max(0.0).powi(2)).sum();
            0.5 * (t - b_norm).powi(2) + threshold * t + 0.5 * clip
        };
        candidates.into_iter().fold(0.0, |best, t| if profile(t) < profile(best) { t } else { best })
    });
    if radius == 0.0 {
        return (Array1::zeros(b.len()), Array1::zeros(a.len()));
    }
    let cap = hierarchy * radius;
    let v = b.mapv(|x| x * (radius / b_norm));
    let u = a.mapv(|x| x.signum() * x.abs().min(cap));
    (v, u)
}

/// Applies [`hier_prox`] to every feature of the model in place.
pub fn apply_prox(model: &mut SkipConnectedModel, threshold: f64, hierarchy: f64) {
    for j in 0..model.features() {
        let (v, u) = hier_prox(
            model.skip.column(j),
            model.mlp.layers[0].weight.column(j),
            threshold,
            hierarchy,
        );
        model.skip.column_mut(j).assign(&v);
        model.mlp.layers[0].weight.column_mut(j).assign(&u);
    }
}

/// Features whose skip column is not exactly zero, in increasing order.
pub fn active_set(model: &SkipConnectedModel) -> Vec<usize> {
    model
        .skip
        .columns()
        .into_iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
pub(crate) mod oracle {
    use ndarray::ArrayView1;

    /// Convex profile of the prox objective along the output skip norm `t`:
    /// for fixed `t` the best `v` is `t·b/‖b‖` and the best `u` clips `a` at `M·t`.
    pub fn profile(t: f64, b_norm: f64, a: ArrayView1<f64>, threshold: f64, hierarchy: f64) -> f64 {
        let clip: f64 = a.iter().map(|x| (x.abs() - hierarchy * t).max(0.0).powi(2)).sum();
        0.5 * (t - b_norm).powi(2) + threshold * t + 0.5 * clip
    }

    /// Golden-section minimiser of the profile; returns the optimal `t`.
    pub fn minimize(b_norm: f64, a: ArrayView1<f64>, threshold: f64, hierarchy: f64) -> f64 {
        let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut hi = b_norm.max(if hierarchy > 0.0 { amax / hierarchy } else { 0.0 }) + 1.0;
        let mut lo = 0.0;
        let phi = |t: f64| profile(t, b_norm, a, threshold, hierarchy);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (phi(x1), phi(x2));
        for _ in 0..400 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = phi(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = phi(x2);
            }
        }
        let mid = 0.5 * (lo + hi);
        // the minimiser may sit on the boundary t = 0
        if phi(0.0) <= phi(mid) {
            0.0
        } else {
            mid
        }
    }

    /// Full prox objective of a candidate point.
    pub fn objective(
        v: ArrayView1<f64>,
        u: ArrayView1<f64>,
        b: ArrayView1<f64>,
        a: ArrayView1<f64>,
        threshold: f64,
    ) -> f64 {
        let dv: f64 = v.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        let du: f64 = u.iter().zip(a.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        0.5 * dv + 0.5 * du + threshold * v.dot(&v).sqrt()
    }
}
