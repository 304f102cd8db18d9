use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Adam with bias-corrected moments.
    AdaptiveMoments,
    /// Heavy-ball SGD: `v ← 0.9·v − lr·g; p ← p + v`.
    MomentumSgd,
}

/// Optimizer accumulators, shaped like the parameter list they update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: &[usize]) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let second = match kind {
            OptimizerKind::AdaptiveMoments => zeros(),
            OptimizerKind::MomentumSgd => Vec::new(),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            first: zeros(),
            second,
            step: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (t, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.first[t].len() {
                return Err(Error::Shape(format!("tensor {t} length mismatch")));
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::AdaptiveMoments => {
                let c1 = 1.0 - BETA1.powi(self.step as i32);
                let c2 = 1.0 - BETA2.powi(self.step as i32);
                for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = &mut self.first[t];
                    let v = &mut self.second[t];
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
            OptimizerKind::MomentumSgd => {
                for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let vel = &mut self.first[t];
                    for i in 0..p.len() {
                        vel[i] = MOMENTUM * vel[i] - lr * g[i];
                        p[i] += vel[i];
                    }
                }
            }
        }
        Ok(())
    }

    /// Clears the accumulators of selected entries of one tensor.
    pub fn reset_entries(&mut self, tensor: usize, entries: impl Iterator<Item = usize>) {
        for i in entries {
            self.first[tensor][i] = 0.0;
            if let Some(v) = self.second.get_mut(tensor) {
                v[i] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [OptimizerKind::MomentumSgd, OptimizerKind::AdaptiveMoments] {
            let mut state = OptimizerState::new(kind, 1e-3, &[3]).unwrap();
            let mut p = vec![1.0, -2.0, 0.5];
            state.step(&mut [&mut p[..]], &[&[0.0; 3][..]]).unwrap();
            assert_eq!(p, vec![1.0, -2.0, 0.5]);
            assert_eq!(state.steps(), 1);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut state = OptimizerState::new(OptimizerKind::AdaptiveMoments, 1e-3, &[1]).unwrap();
        let mut p = [0.0];
        state.step(&mut [&mut p[..]], &[&[1.0][..]]).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + 1e-8)
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn momentum_second_step_accumulates() {
        let mut state = OptimizerState::new(OptimizerKind::MomentumSgd, 0.1, &[1]).unwrap();
        let g = 2.0;
        let mut p = [0.0];
        state.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        let after_first = p[0];
        state.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        let displacement = p[0] - after_first;
        assert!((displacement - (-0.1 * g * 1.9)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = OptimizerState::new(OptimizerKind::MomentumSgd, 0.1, &[2]).unwrap();
        let mut p = [0.0; 3];
        assert!(state.step(&mut [&mut p[..]], &[&[0.0; 3][..]]).is_err());
        assert!(OptimizerState::new(OptimizerKind::MomentumSgd, 0.0, &[2]).is_err());
    }
}
