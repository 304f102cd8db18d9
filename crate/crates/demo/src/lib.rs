//! Browser bindings for three small interactive operations:
//!
//! * [`prox_sweep`]: output of the hierarchical proximal operator for one
//!   feature as the threshold grows;
//! * [`gemini_toy`]: the four GEMINI values of a labelled 2-D point cloud;
//! * [`fit_toy`]: a complete regularisation path on a small synthetic mixture.
//!
//! Every binding returns a JSON string. The `*_json` functions hold the logic
//! and run natively as well.

use ndarray::{Array1, Array2};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sparse_gemini::datagen::{gen_dataset1, Scenario1Params};
use sparse_gemini::gemini::{gemini_value, Distance, GeminiSpec, Mode};
use sparse_gemini::geometry::{pairwise_affinity, AffinitySpec};
use sparse_gemini::metrics::{ari, SelectionTruth};
use sparse_gemini::path::{fit_path, predict, select_model, PathConfig, Regime};
use sparse_gemini::sparsity::hier_prox;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct ProxPoint {
    threshold: f64,
    skip_norm: f64,
    layer_max: f64,
}

/// Sweeps the threshold over `[0, max_threshold]` in `steps` steps.
pub fn prox_sweep_json(skip: &[f64], layer: &[f64], hierarchy: f64, max_threshold: f64, steps: usize) -> Result<String, String> {
    if skip.is_empty() || layer.is_empty() || steps == 0 {
        return Err("need a skip column, first-layer weights and at least one step".into());
    }
    if !(hierarchy >= 0.0 && max_threshold >= 0.0) {
        return Err("hierarchy and threshold must be nonnegative".into());
    }
    let b = Array1::from(skip.to_vec());
    let a = Array1::from(layer.to_vec());
    let points: Vec<ProxPoint> = (0..=steps)
        .map(|s| {
            let threshold = max_threshold * s as f64 / steps as f64;
            let (v, u) = hier_prox(b.view(), a.view(), threshold, hierarchy);
            ProxPoint {
                threshold,
                skip_norm: v.dot(&v).sqrt(),
                layer_max: u.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            }
        })
        .collect();
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn prox_sweep(skip: &[f64], layer: &[f64], hierarchy: f64, max_threshold: f64, steps: usize) -> Result<String, JsValue> {
    to_js(prox_sweep_json(skip, layer, hierarchy, max_threshold, steps))
}

#[derive(Serialize)]
struct GeminiValues {
    mmd_ova: f64,
    mmd_ovo: f64,
    wasserstein_ova: f64,
    wasserstein_ovo: f64,
}

/// GEMINI values of hard labels on 2-D points given as `[x0, y0, x1, y1, …]`.
pub fn gemini_toy_json(points: &[f64], labels: &[u32], clusters: usize) -> Result<String, String> {
    if !points.len().is_multiple_of(2) || points.len() / 2 != labels.len() || labels.len() < 2 {
        return Err("need at least two points and one label per point".into());
    }
    if clusters < 2 || labels.iter().any(|&l| l as usize >= clusters) {
        return Err("labels must lie in 0..clusters with at least two clusters".into());
    }
    let n = labels.len();
    let x = Array2::from_shape_vec((n, 2), points.to_vec()).map_err(|e| e.to_string())?;
    let mut tau = Array2::zeros((n, clusters));
    for (i, &l) in labels.iter().enumerate() {
        tau[[i, l as usize]] = 1.0;
    }
    let value = |distance: Distance, mode: Mode| -> Result<f64, String> {
        let affinity = pairwise_affinity(x.view(), &AffinitySpec::all(distance.affinity_kind())).map_err(|e| e.to_string())?;
        gemini_value(tau.view(), &affinity, &GeminiSpec::new(distance, mode)).map_err(|e| e.to_string())
    };
    let values = GeminiValues {
        mmd_ova: value(Distance::Mmd, Mode::Ova)?,
        mmd_ovo: value(Distance::Mmd, Mode::Ovo)?,
        wasserstein_ova: value(Distance::Wasserstein, Mode::Ova)?,
        wasserstein_ovo: value(Distance::Wasserstein, Mode::Ovo)?,
    };
    serde_json::to_string(&values).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn gemini_toy(points: &[f64], labels: &[u32], clusters: usize) -> Result<String, JsValue> {
    to_js(gemini_toy_json(points, labels, clusters))
}

#[derive(Serialize)]
struct ToyStep {
    lambda: f64,
    n_active: usize,
    gemini: f64,
}

#[derive(Serialize)]
struct ToyFit {
    trace: Vec<ToyStep>,
    snapshots: Vec<ToyStep>,
    selected: Vec<usize>,
    chosen_snapshot: usize,
    ari: f64,
    vser: f64,
    /// First two features of every sample, for plotting.
    points: Vec<[f64; 2]>,
    truth: Vec<usize>,
    labels: Vec<usize>,
}

/// Fits a short path on a fresh mixture with `noise` irrelevant variables.
pub fn fit_toy_json(samples: usize, alpha: f64, noise: usize, objective: &str, seed: u64) -> Result<String, String> {
    if samples > 400 || noise > 30 {
        return Err("keep the toy small: at most 400 samples and 30 noise variables".into());
    }
    let err = |e: sparse_gemini::Error| e.to_string();
    let (distance, mode) = objective.split_once('-').ok_or("objective looks like `mmd-ovo`")?;
    let spec = GeminiSpec::new(distance.parse().map_err(err)?, mode.parse().map_err(err)?);
    let data = gen_dataset1(&Scenario1Params { samples, alpha, noise }, seed).map_err(err)?;
    let config = PathConfig {
        gemini: spec,
        hidden: vec![20],
        epochs: 40,
        rho: 1.2,
        f_thres: Scenario1Params::INFORMATIVE.min(data.features() - 1),
        seed,
        ..PathConfig::default()
    };
    let path = fit_path(data.x.view(), &config).map_err(err)?;
    let selection = select_model(&path.snapshots, Regime::Static).map_err(err)?;
    let snap = &path.snapshots[selection.index];
    let (_, labels) = predict(&snap.model.to_model().map_err(err)?, data.x.view()).map_err(err)?;
    let truth = data.labels.clone().unwrap_or_default();
    let st = SelectionTruth::new(data.features(), data.informative.iter().copied(), snap.active.iter().copied()).map_err(err)?;
    let fit = ToyFit {
        trace: path
            .trace
            .iter()
            .map(|r| ToyStep {
                lambda: r.lambda,
                n_active: r.n_active,
                gemini: r.gemini,
            })
            .collect(),
        snapshots: path
            .snapshots
            .iter()
            .map(|s| ToyStep {
                lambda: s.lambda,
                n_active: s.n_active,
                gemini: s.gemini,
            })
            .collect(),
        selected: snap.active.clone(),
        chosen_snapshot: selection.index,
        ari: ari(&truth, &labels).map_err(err)?,
        vser: sparse_gemini::metrics::vser(&st),
        points: data.x.rows().into_iter().map(|r| [r[0], r[1]]).collect(),
        truth,
        labels,
    };
    serde_json::to_string(&fit).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fit_toy(samples: usize, alpha: f64, noise: usize, objective: &str, seed: u64) -> Result<String, JsValue> {
    to_js(fit_toy_json(samples, alpha, noise, objective, seed))
}
