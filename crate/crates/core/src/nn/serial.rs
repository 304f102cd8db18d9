use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Layer, MlpNetwork, SkipConnectedModel};
use crate::error::{Error, Result};

/// JSON form of a [`SkipConnectedModel`]. Arrays are row-major; floats are
/// written with shortest round-trip formatting so reload is bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub clusters: usize,
    pub features: usize,
    pub hierarchy: f64,
    /// Input width followed by every layer's output width.
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// K×d skip matrix, row-major.
    pub skip: Vec<f64>,
    pub seed: u64,
    pub config_digest: String,
}

impl ModelDocument {
    pub fn from_model(model: &SkipConnectedModel, seed: u64, config_digest: &str) -> Self {
        let mut layer_dims = vec![model.features()];
        layer_dims.extend(model.mlp.layers.iter().map(Layer::outputs));
        ModelDocument {
            clusters: model.clusters(),
            features: model.features(),
            hierarchy: model.hierarchy,
            layer_dims,
            activations: model.mlp.layers.iter().map(|l| l.activation).collect(),
            weights: model.mlp.layers.iter().map(|l| l.weight.iter().copied().collect()).collect(),
            biases: model.mlp.layers.iter().map(|l| l.bias.to_vec()).collect(),
            skip: model.skip.iter().copied().collect(),
            seed,
            config_digest: config_digest.to_string(),
        }
    }

    pub fn to_model(&self) -> Result<SkipConnectedModel> {
        let depth = self.layer_dims.len().saturating_sub(1);
        if depth == 0
            || self.activations.len() != depth
            || self.weights.len() != depth
            || self.biases.len() != depth
        {
            return Err(Error::Data("model document: inconsistent layer count".into()));
        }
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let (inp, out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let weight = Array2::from_shape_vec((out, inp), self.weights[l].clone())
                .map_err(|e| Error::Data(format!("layer {l} weights: {e}")))?;
            if self.biases[l].len() != out {
                return Err(Error::Data(format!("layer {l} bias length")));
            }
            layers.push(Layer {
                weight,
                bias: Array1::from(self.biases[l].clone()),
                activation: self.activations[l],
            });
        }
        let skip = Array2::from_shape_vec((self.clusters, self.features), self.skip.clone())
            .map_err(|e| Error::Data(format!("skip matrix: {e}")))?;
        let model = SkipConnectedModel {
            mlp: MlpNetwork { layers },
            skip,
            hierarchy: self.hierarchy,
        };
        model.validate()?;
        Ok(model)
    }
}
