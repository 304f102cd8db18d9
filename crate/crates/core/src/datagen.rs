//! Synthetic benchmark generators: a Gaussian mixture with independent
//! noise variables, and a four-component mixture whose informative pair is
//! shadowed by linearly dependent (redundant) variables.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples, feature names and (evaluation-only) ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<usize>>,
    /// 0-based indices of informative features, when known.
    pub informative: Vec<usize>,
}

impl Dataset {
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Parameters of the noisy Gaussian-mixture family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Params {
    pub samples: usize,
    /// Mean scale: components sit at +α·1, −α·1 and 0.
    pub alpha: f64,
    /// Number of pure-noise variables.
    pub noise: usize,
}

impl Scenario1Params {
    pub const INFORMATIVE: usize = 5;
    pub const CLASSES: usize = 3;

    pub fn validate(&self) -> Result<()> {
        if self.samples < Self::CLASSES {
            return Err(Error::Config(format!("need at least {} samples", Self::CLASSES)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The five published settings of the first synthetic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Scenario {
    pub fn params(self) -> Scenario1Params {
        let (samples, alpha, noise) = match self {
            Scenario::S1 => (30, 0.6, 20),
            Scenario::S2 => (30, 1.7, 20),
            Scenario::S3 => (300, 0.6, 20),
            Scenario::S4 => (300, 1.7, 20),
            Scenario::S5 => (300, 1.7, 95),
        };
        Scenario1Params { samples, alpha, noise }
    }
}

/// Draws one dataset of the noisy mixture family.
pub fn gen_dataset1(params: &Scenario1Params, seed: u64) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Scenario1Params::INFORMATIVE + params.noise;
    let mut x = Array2::zeros((params.samples, d));
    let mut labels = Vec::with_capacity(params.samples);
    for mut row in x.rows_mut() {
        let label = rng.random_range(0..Scenario1Params::CLASSES);
        let mean = match label {
            0 => params.alpha,
            1 => -params.alpha,
            _ => 0.0,
        };
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = if j < Scenario1Params::INFORMATIVE { mean + z } else { z };
        }
        labels.push(label);
    }
    Ok(Dataset {
        x,
        feature_names: default_names(d),
        labels: Some(labels),
        informative: (0..Scenario1Params::INFORMATIVE).collect(),
    })
}

pub const DATASET2_SAMPLES: usize = 2000;
const DATASET2_MEANS: [[f64; 2]; 4] = [[0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [4.0, 2.0]];
const DATASET2_OFFSET: [f64; 9] = [0.0, 0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 2.8];
const DATASET2_COEFFS: [[f64; 9]; 2] = [
    [0.5, 2.0, 0.0, -1.0, 2.0, 0.5, 4.0, 3.0, 2.0],
    [1.0, 0.0, 3.0, 2.0, -4.0, 0.0, 0.5, 0.0, 1.0],
];
const DATASET2_TAIL_MEANS: [f64; 3] = [3.2, 3.6, 4.0];

/// `Rot(θ)·diag(√s₁, √s₂)·z`: a draw with covariance `Rot·diag(s)·Rotᵀ`.
fn rotated_pair(rng: &mut ChaCha8Rng, variances: [f64; 2], angle: f64) -> [f64; 2] {
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    let (a, b) = (variances[0].sqrt() * z0, variances[1].sqrt() * z1);
    let (s, c) = angle.sin_cos();
    [c * a - s * b, s * a + c * b]
}

/// Draws the 2000×14 redundant-variable dataset.
pub fn gen_dataset2(seed: u64) -> Dataset {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 14;
    let mut x = Array2::zeros((DATASET2_SAMPLES, d));
    let mut labels = Vec::with_capacity(DATASET2_SAMPLES);
    for mut row in x.rows_mut() {
        let label = rng.random_range(0..4);
        let mut base = [0.0; 2];
        for (k, b) in base.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *b = DATASET2_MEANS[label][k] + z;
        }
        let mut noise = [0.0; 9];
        for n in noise.iter_mut().take(3) {
            *n = StandardNormal.sample(&mut rng);
        }
        for n in noise.iter_mut().skip(3).take(2) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *n = 0.5f64.sqrt() * z;
        }
        let [e5, e6] = rotated_pair(&mut rng, [1.0, 3.0], PI / 3.0);
        let [e7, e8] = rotated_pair(&mut rng, [2.0, 6.0], PI / 6.0);
        noise[5] = e5;
        noise[6] = e6;
        noise[7] = e7;
        noise[8] = e8;

        row[0] = base[0];
        row[1] = base[1];
        for c in 0..9 {
            row[2 + c] = DATASET2_OFFSET[c]
                + base[0] * DATASET2_COEFFS[0][c]
                + base[1] * DATASET2_COEFFS[1][c]
                + noise[c];
        }
        for (c, mean) in DATASET2_TAIL_MEANS.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[11 + c] = mean + z;
        }
        labels.push(label);
    }
    Dataset {
        x,
        feature_names: default_names(d),
        labels: Some(labels),
        informative: vec![0, 1],
    }
}
