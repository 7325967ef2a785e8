//! Parameter update rules: Adam (default) and plain gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::numeric::matrix::Matrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ModelParameters) -> Self {
        let moments: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            first_moment: moments.clone(),
            second_moment: moments,
        }
    }

    /// One update over all tensors; `grads` must follow the canonical
    /// tensor order.
    pub fn step(&mut self, params: &mut ModelParameters, grads: &[Matrix]) -> Result<()> {
        let tensors = params.tensors_mut();
        if grads.len() != tensors.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} tensors",
                grads.len(),
                tensors.len()
            )));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (tensor, grad) in tensors.into_iter().zip(grads) {
                    for (p, g) in tensor.data_mut().iter_mut().zip(grad.data()) {
                        *p -= self.learning_rate * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as f64;
                let bias1 = 1.0 - ADAM_BETA1.powf(t);
                let bias2 = 1.0 - ADAM_BETA2.powf(t);
                for ((tensor, grad), (m, v)) in tensors
                    .into_iter()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
                {
                    if tensor.shape() != grad.shape() {
                        return Err(Error::Shape(format!(
                            "gradient {:?} vs tensor {:?}",
                            grad.shape(),
                            tensor.shape()
                        )));
                    }
                    for i in 0..tensor.data().len() {
                        let g = grad.data()[i];
                        let mi = ADAM_BETA1 * m.data()[i] + (1.0 - ADAM_BETA1) * g;
                        let vi = ADAM_BETA2 * v.data()[i] + (1.0 - ADAM_BETA2) * g * g;
                        m.data_mut()[i] = mi;
                        v.data_mut()[i] = vi;
                        let m_hat = mi / bias1;
                        let v_hat = vi / bias2;
                        tensor.data_mut()[i] -=
                            self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}
