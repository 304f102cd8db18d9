//! Feed-forward clustering model: an MLP plus a linear skip connection,
//! a softmax head and hand-written reverse-mode gradients.

mod optim;
mod serial;

pub use optim::{OptimizerKind, OptimizerState};
pub use serial::ModelDocument;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale of the uniform noise used to initialise the skip matrix.
pub const SKIP_INIT_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer, `out = act(W·in + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    pub layers: Vec<Layer>,
}

impl MlpNetwork {
    /// Builds a zero-initialised network. `hidden` lists hidden widths; all
    /// hidden layers use ReLU and the output layer is linear.
    pub fn zeros(inputs: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(inputs);
        dims.extend_from_slice(hidden);
        dims.push(outputs);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer::zeros(w[0], w[1], act)
            })
            .collect();
        MlpNetwork { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map(Layer::outputs).unwrap_or(0)
    }

    /// Weights reading the input features: one column per feature.
    pub fn first_layer(&self) -> &Array2<f64> {
        &self.layers[0].weight
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer {} outputs {} but layer {} reads {}",
                    i,
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Shape(format!("layer {i} bias length mismatch")));
            }
            if !layer.weight.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite { layer: i });
            }
        }
        Ok(())
    }
}

/// MLP plus linear skip connection: `f(x) = g(x) + S·x` with `S` of shape K×d.
///
/// Column `j` of `skip` gathers every skip weight reading feature `j`; its
/// euclidean norm decides whether the feature is alive.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipConnectedModel {
    pub mlp: MlpNetwork,
    pub skip: Array2<f64>,
    pub hierarchy: f64,
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer (the first one is the data batch).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer.
    pre_activations: Vec<Array2<f64>>,
}

/// Gradients shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub skip: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &SkipConnectedModel) -> Self {
        Gradients {
            weights: model.mlp.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: model.mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            skip: Array2::zeros(model.skip.raw_dim()),
        }
    }

    /// Flat views in the same order as [`SkipConnectedModel::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len() + 1);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out.push(self.skip.as_slice().expect("standard layout"));
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
        self.skip *= factor;
    }
}

impl SkipConnectedModel {
    pub fn zeros(inputs: usize, hidden: &[usize], clusters: usize, hierarchy: f64) -> Self {
        SkipConnectedModel {
            mlp: MlpNetwork::zeros(inputs, hidden, clusters),
            skip: Array2::zeros((clusters, inputs)),
            hierarchy,
        }
    }

    /// Fan-scaled uniform weights, zero biases, and a small nonzero skip matrix
    /// so that every feature starts alive.
    pub fn init(inputs: usize, hidden: &[usize], clusters: usize, hierarchy: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(inputs, hidden, clusters, hierarchy);
        for layer in &mut model.mlp.layers {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            layer.weight.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        model.skip.mapv_inplace(|_| {
            let v: f64 = rng.random_range(-SKIP_INIT_SCALE..SKIP_INIT_SCALE);
            // keep every column strictly nonzero
            if v == 0.0 {
                SKIP_INIT_SCALE * 0.5
            } else {
                v
            }
        });
        model
    }

    pub fn clusters(&self) -> usize {
        self.skip.nrows()
    }

    pub fn features(&self) -> usize {
        self.skip.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        if self.mlp.inputs() != self.features() || self.mlp.outputs() != self.clusters() {
            return Err(Error::Shape(format!(
                "mlp maps {}->{} but skip matrix is {}x{}",
                self.mlp.inputs(),
                self.mlp.outputs(),
                self.clusters(),
                self.features()
            )));
        }
        if !(self.hierarchy >= 0.0 && self.hierarchy.is_finite()) {
            return Err(Error::InvalidInput(format!("hierarchy coefficient {}", self.hierarchy)));
        }
        if !self.skip.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { layer: self.mlp.layers.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward_cached(x).map(|(logits, _)| logits)
    }

    /// Forward pass returning the logits and the cache needed by [`Self::backward`].
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.features() {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.features()
            )));
        }
        let mut inputs = Vec::with_capacity(self.mlp.layers.len());
        let mut pre = Vec::with_capacity(self.mlp.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.mlp.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight.t());
            z += &layer.bias;
            if !z.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { layer: i });
            }
            let act = layer.activation;
            let out = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        let mut logits = h;
        logits += &x.dot(&self.skip.t());
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { layer: self.mlp.layers.len() });
        }
        Ok((
            logits,
            ForwardCache {
                inputs,
                pre_activations: pre,
            },
        ))
    }

    /// Gradient of `Σ_i grad_logits_i · logits_i` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: ArrayView2<f64>) -> Result<Gradients> {
        let x = &cache.inputs[0];
        if grad_logits.dim() != (x.nrows(), self.clusters()) {
            return Err(Error::Shape(format!(
                "gradient is {:?}, logits are {:?}",
                grad_logits.dim(),
                (x.nrows(), self.clusters())
            )));
        }
        let depth = self.mlp.layers.len();
        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        let skip = grad_logits.t().dot(x);

        let mut delta = grad_logits.to_owned();
        for i in (0..depth).rev() {
            let layer = &self.mlp.layers[i];
            let act = layer.activation;
            if act != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(&cache.pre_activations[i])
                    .for_each(|d, &z| *d *= act.derivative(z));
            }
            weights.push(delta.t().dot(&cache.inputs[i]));
            biases.push(delta.sum_axis(Axis(0)));
            if i > 0 {
                delta = delta.dot(&layer.weight);
            }
        }
        weights.reverse();
        biases.reverse();
        Ok(Gradients { weights, biases, skip })
    }

    /// Flat mutable views over all parameters: per layer weight then bias, then the skip matrix.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.mlp.layers.len() + 1);
        for layer in &mut self.mlp.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.skip.as_slice_mut().expect("standard layout"));
        out
    }

    /// Sets the skip column and every first-layer weight of feature `j` to zero.
    pub fn zero_feature(&mut self, j: usize) {
        self.skip.column_mut(j).fill(0.0);
        self.mlp.layers[0].weight.column_mut(j).fill(0.0);
    }
}

/// Row-wise softmax with max subtraction.
pub fn soft_assign(logits: ArrayView2<f64>) -> Result<Array2<f64>> {
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let mut tau = logits.to_owned();
    for mut row in tau.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Ok(tau)
}

/// Backpropagates a gradient with respect to soft assignments through the softmax.
pub fn softmax_backward(tau: ArrayView2<f64>, grad_tau: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(tau.raw_dim());
    for ((t, g), mut o) in tau.rows().into_iter().zip(grad_tau.rows()).zip(out.rows_mut()) {
        let inner = t.dot(&g);
        ndarray::Zip::from(&mut o)
            .and(&t)
            .and(&g)
            .for_each(|o, &t, &g| *o = t * (g - inner));
    }
    out
}

/// Row argmax with ties resolved toward the lowest index.
pub fn hard_labels(tau: ArrayView2<f64>) -> Vec<usize> {
    tau.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
