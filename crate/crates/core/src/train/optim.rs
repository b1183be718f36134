use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::profiler::{Category, OpKind, Recorder};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Usage(format!("unknown optimizer {other:?} (sgd or adam)"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
/// FLOPs charged per parameter for one update.
const ADAM_FLOPS: u64 = 10;
const SGD_FLOPS: u64 = 2;

/// Optimizer with its per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Element> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer { kind, learning_rate, steps: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update of every tensor in `params` from `grads` (same order as
    /// [`ModelParams::named_tensors`]).
    pub fn apply(&mut self, params: &mut ModelParams<T>, grads: &[Tensor<T>], recorder: &mut Recorder) -> Result<()> {
        let mut slots = params.tensors_mut();
        if slots.len() != grads.len() {
            return Err(Error::Usage(format!("{} gradients for {} parameters", grads.len(), slots.len())));
        }
        let name = match self.kind {
            OptimizerKind::Sgd => "optimizer/sgd",
            OptimizerKind::Adam => "optimizer/adam",
        };
        let sw = recorder.start();
        self.steps += 1;
        let lr = T::from_f64(self.learning_rate);
        let mut numel = 0u64;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in slots.iter_mut().zip(grads) {
                    numel += p.numel() as u64;
                    for (x, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x = *x - lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
                    self.v = self.m.clone();
                }
                let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
                let (c1, c2) = (T::one() - b1, T::one() - b2);
                let t = self.steps as i32;
                let bias1 = T::from_f64(1.0 - ADAM_BETA1.powi(t));
                let bias2 = T::from_f64(1.0 - ADAM_BETA2.powi(t));
                let eps = T::from_f64(ADAM_EPSILON);
                for ((p, g), (m, v)) in slots.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
                    numel += p.numel() as u64;
                    let (m, v) = (m.data_mut(), v.data_mut());
                    for (i, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[i] = b1 * m[i] + c1 * d;
                        v[i] = b2 * v[i] + c2 * d * d;
                        let step = (m[i] / bias1) / ((v[i] / bias2).sqrt() + eps);
                        *x = *x - lr * step;
                    }
                }
            }
        }
        let esize = T::DTYPE.size_bytes() as u64;
        let (flops, touched) = match self.kind {
            OptimizerKind::Sgd => (SGD_FLOPS, 3),
            OptimizerKind::Adam => (ADAM_FLOPS, 7),
        };
        recorder.finish(sw, name, Category::forward(OpKind::Optimizer), flops * numel, touched * esize * numel);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn grads(p: &ModelParams<f64>, value: f64) -> Vec<Tensor<f64>> {
        p.named_tensors().iter().map(|(_, t)| Tensor::full(t.shape(), value)).collect()
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let cfg = ModelConfig { hidden_sizes: vec![4], iterations: 1, ..Default::default() };
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = init_params::<f64>(&cfg).unwrap();
            let before = p.clone();
            let g = grads(&p, 0.3);
            Optimizer::new(kind, 0.0).apply(&mut p, &g, &mut Recorder::disabled()).unwrap();
            assert!(p.bit_eq(&before));
        }
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let cfg = ModelConfig { hidden_sizes: vec![4], iterations: 1, ..Default::default() };
        let mut p = init_params::<f64>(&cfg).unwrap();
        let before = p.clone();
        let g = grads(&p, -2.0);
        let mut rec = Recorder::default();
        Optimizer::new(OptimizerKind::Adam, 0.01).apply(&mut p, &g, &mut rec).unwrap();
        for ((_, a), (_, b)) in p.named_tensors().iter().zip(before.named_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y - 0.01).abs() < 1e-9);
            }
        }
        assert_eq!(rec.records()[0].category, Category::forward(OpKind::Optimizer));
        assert_eq!(rec.records()[0].flops, 10 * crate::model::count_params(&p) as u64);
    }

    #[test]
    fn sgd_step() {
        let cfg = ModelConfig { hidden_sizes: vec![2], iterations: 0, ..Default::default() };
        let mut p = init_params::<f64>(&cfg).unwrap();
        let b0 = p.decoder.layers[0].bias.data()[0];
        let g = grads(&p, 1.5);
        Optimizer::new(OptimizerKind::Sgd, 0.1).apply(&mut p, &g, &mut Recorder::disabled()).unwrap();
        assert_eq!(p.decoder.layers[0].bias.data()[0], b0 - 0.1 * 1.5);
    }
}
