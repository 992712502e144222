//! SGD and Adam updates over a [`ParameterSet`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::params::{Gradients, ParamId, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl core::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step_count: u64,
    first_moment: Vec<Option<Vec<f64>>>,
    second_moment: Vec<Option<Vec<f64>>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update. `grads` must hold a slot for every trainable
    /// parameter and for no frozen one.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &Gradients) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "gradient map covers {} parameters, set has {}",
                grads.len(),
                params.len()
            )));
        }
        for ((_, p), slot) in params.iter().zip(grads.slots()) {
            match (p.trainable, slot) {
                (false, Some(_)) => {
                    return Err(Error::Contract(format!(
                        "gradient supplied for frozen parameter `{}`",
                        p.name
                    )))
                }
                (true, None) => {
                    return Err(Error::Contract(format!(
                        "missing gradient for trainable parameter `{}`",
                        p.name
                    )))
                }
                (true, Some(g)) if g.shape() != p.value.shape() => {
                    return Err(Error::Shape {
                        expected: p.value.shape().to_vec(),
                        found: g.shape().to_vec(),
                    })
                }
                _ => {}
            }
        }

        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, slot) in grads.slots().iter().enumerate() {
                    if let Some(g) = slot {
                        let theta = params.get_mut(ParamId::at(i));
                        for (t, gi) in theta.data_mut().iter_mut().zip(g.data()) {
                            *t -= lr * gi;
                        }
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.len() != params.len() {
                    self.first_moment = vec![None; params.len()];
                    self.second_moment = vec![None; params.len()];
                }
                let t = self.step_count as i32;
                let c1 = 1.0 - math::powi(ADAM_BETA1, t);
                let c2 = 1.0 - math::powi(ADAM_BETA2, t);
                for (i, slot) in grads.slots().iter().enumerate() {
                    let Some(g) = slot else { continue };
                    let m = self.first_moment[i].get_or_insert_with(|| vec![0.0; g.len()]);
                    let v = self.second_moment[i].get_or_insert_with(|| vec![0.0; g.len()]);
                    let theta = params.get_mut(ParamId::at(i));
                    for (((t, gi), mi), vi) in theta
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *t -= lr * m_hat / (math::sqrt(v_hat) + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}
