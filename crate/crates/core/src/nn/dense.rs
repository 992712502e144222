//! Fully connected layers with explicit backward passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::params::{Gradients, ParamId, ParameterSet};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => math::tanh(x),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Gradients produced by [`DenseBackward::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// State captured by [`dense_apply`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseBackward {
    input: Tensor,
    output: Tensor,
    weights: Tensor,
    activation: Activation,
}

/// `act(input · weights + bias)` over a `[batch, in]` input.
pub fn dense_apply(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
) -> Result<(Tensor, DenseBackward)> {
    if input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 {
        return Err(Error::Shape {
            expected: vec![2, 2, 1],
            found: vec![input.rank(), weights.rank(), bias.rank()],
        });
    }
    let (batch, fan_in) = (input.shape()[0], input.shape()[1]);
    let (w_in, fan_out) = (weights.shape()[0], weights.shape()[1]);
    if w_in != fan_in {
        return Err(Error::Shape {
            expected: input.shape().to_vec(),
            found: weights.shape().to_vec(),
        });
    }
    bias.expect_shape(&[fan_out])?;

    let mut out = vec![0.0; batch * fan_out];
    for (x, y) in input.row_iter().zip(out.chunks_exact_mut(fan_out)) {
        y.copy_from_slice(bias.data());
        math::vec_mat_acc(x, weights.data(), fan_out, y);
        for v in y.iter_mut() {
            *v = activation.apply(*v);
        }
    }
    let output = Tensor::matrix(batch, fan_out, out)?;
    Ok((
        output.clone(),
        DenseBackward {
            input: input.clone(),
            output,
            weights: weights.clone(),
            activation,
        },
    ))
}

impl DenseBackward {
    pub fn backward(&self, grad_output: &Tensor) -> Result<DenseGrads> {
        grad_output.expect_shape(self.output.shape())?;
        let fan_in = self.input.shape()[1];
        let fan_out = self.output.shape()[1];
        let batch = self.input.shape()[0];
        let mut d_in = vec![0.0; batch * fan_in];
        let mut d_w = vec![0.0; fan_in * fan_out];
        let mut d_b = vec![0.0; fan_out];
        let mut dz = vec![0.0; fan_out];
        for b in 0..batch {
            let y = self.output.row(b);
            for ((d, g), yi) in dz.iter_mut().zip(grad_output.row(b)).zip(y) {
                *d = g * self.activation.derivative_at_output(*yi);
            }
            for (acc, d) in d_b.iter_mut().zip(&dz) {
                *acc += d;
            }
            math::outer_acc(self.input.row(b), &dz, &mut d_w);
            math::mat_vec_acc(
                self.weights.data(),
                &dz,
                &mut d_in[b * fan_in..(b + 1) * fan_in],
            );
        }
        Ok(DenseGrads {
            input: Tensor::matrix(batch, fan_in, d_in)?,
            weights: Tensor::matrix(fan_in, fan_out, d_w)?,
            bias: Tensor::vector(d_b)?,
        })
    }
}

/// A dense layer whose weights live in a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl Dense {
    /// Registers `{name}.w` (Glorot uniform) and `{name}.b` (zeros).
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::Config(format!(
                "dense layer `{name}` needs positive widths, got {inputs}x{outputs}"
            )));
        }
        let weights = params.insert_glorot(&format!("{name}.w"), inputs, outputs, rng)?;
        let bias = params.insert(&format!("{name}.b"), Tensor::zeros(&[outputs]), true)?;
        Ok(Self {
            weights,
            bias,
            inputs,
            outputs,
            activation,
        })
    }

    pub fn scalar_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    /// Single-row forward; returns the post-activation output.
    pub fn forward(&self, params: &ParameterSet, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        let mut y = params.get(self.bias).data().to_vec();
        math::vec_mat_acc(x, params.get(self.weights).data(), self.outputs, &mut y);
        for v in y.iter_mut() {
            *v = self.activation.apply(*v);
        }
        y
    }

    /// Backward for one row given its input `x`, output `y` and upstream `dy`.
    /// Parameter gradients accumulate into `grads`; the input gradient is
    /// computed only when `need_input` is set.
    pub fn backward(
        &self,
        params: &ParameterSet,
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        grads: &mut Gradients,
        need_input: bool,
    ) -> Option<Vec<f64>> {
        let dx = self.backward_from(params, x, y, dy, grads, if need_input { 0 } else { self.inputs });
        need_input.then_some(dx)
    }

    /// As [`Dense::backward`], returning the input gradient for inputs `from..` only.
    pub fn backward_from(
        &self,
        params: &ParameterSet,
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        grads: &mut Gradients,
        from: usize,
    ) -> Vec<f64> {
        let dz: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(g, yi)| g * self.activation.derivative_at_output(*yi))
            .collect();
        if let Some(gb) = grads.slot_mut(self.bias) {
            for (a, d) in gb.iter_mut().zip(&dz) {
                *a += d;
            }
        }
        if let Some(gw) = grads.slot_mut(self.weights) {
            math::outer_acc(x, &dz, gw);
        }
        let mut dx = vec![0.0; self.inputs - from];
        if !dx.is_empty() {
            let w = params.get(self.weights).data();
            math::mat_vec_acc(&w[from * self.outputs..], &dz, &mut dx);
        }
        dx
    }
}

/// Row-wise softmax with max-subtraction; a rank-1 input is one row.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let mut out = logits.clone();
    let w = if out.rank() == 1 { out.len() } else { out.row_len() };
    for row in out.data_mut().chunks_exact_mut(w) {
        softmax_in_place(row);
    }
    Ok(out)
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Gradient with respect to logits given probabilities `p` and upstream `dp`:
/// `p ⊙ (dp − ⟨dp, p⟩)`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - dot)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::numeric_gradient;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.25]).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = Tensor::matrix(3, 3, eye).unwrap();
        let b = Tensor::zeros(&[3]);
        let (y, _) = dense_apply(&x, &w, &b, Activation::Identity).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::zeros(&[2, 4]);
        let w = random_tensor(&mut rng, &[4, 3]);
        let b = Tensor::zeros(&[3]);
        let (y, _) = dense_apply(&x, &w, &b, Activation::Tanh).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let x = Tensor::zeros(&[2, 4]);
        let w = Tensor::zeros(&[3, 3]);
        let b = Tensor::zeros(&[3]);
        match dense_apply(&x, &w, &b, Activation::Identity) {
            Err(Error::Shape { expected, found }) => {
                assert_eq!(expected, vec![2, 4]);
                assert_eq!(found, vec![3, 3]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for act in [Activation::Identity, Activation::Tanh, Activation::Relu] {
            let x = random_tensor(&mut rng, &[3, 4]);
            let w = random_tensor(&mut rng, &[4, 5]);
            let b = random_tensor(&mut rng, &[5]);
            let up = random_tensor(&mut rng, &[3, 5]);
            let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
                let (y, _) = dense_apply(x, w, b, act).unwrap();
                y.data().iter().zip(up.data()).map(|(a, c)| a * c).sum()
            };
            let (_, back) = dense_apply(&x, &w, &b, act).unwrap();
            let g = back.backward(&up).unwrap();

            let num_x = numeric_gradient(
                |v| loss(&Tensor::new(x.shape().to_vec(), v.to_vec()).unwrap(), &w, &b),
                x.data(),
                1e-5,
            );
            let num_w = numeric_gradient(
                |v| loss(&x, &Tensor::new(w.shape().to_vec(), v.to_vec()).unwrap(), &b),
                w.data(),
                1e-5,
            );
            let num_b = numeric_gradient(
                |v| loss(&x, &w, &Tensor::vector(v.to_vec()).unwrap()),
                b.data(),
                1e-5,
            );
            for (a, n) in [
                (g.input.data(), &num_x),
                (g.weights.data(), &num_w),
                (g.bias.data(), &num_b),
            ] {
                let err = crate::nn::gradcheck::max_relative_error(a, n);
                assert!(err < 1e-6, "{act:?}: relative error {err}");
            }
        }
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&Tensor::vector(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
        let p = softmax(&Tensor::vector(vec![math::ln(1.0), math::ln(3.0)]).unwrap()).unwrap();
        assert!((p.data()[0] - 0.25).abs() < 1e-15);
        assert!((p.data()[1] - 0.75).abs() < 1e-15);
        let p = softmax(&Tensor::vector(vec![1000.0, 0.0]).unwrap()).unwrap();
        assert!(p.is_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-15);
        assert!(p.data()[1] < 1e-300);
    }

    #[test]
    fn softmax_rows_independent() {
        let m = Tensor::matrix(2, 2, vec![0.0, 0.0, 1000.0, 0.0]).unwrap();
        let p = softmax(&m).unwrap();
        assert_eq!(p.row(0), &[0.5, 0.5]);
        assert!((p.row(1)[0] - 1.0).abs() < 1e-15);
    }
}
