//! LSTM cell and bidirectional stacks with hand-written backpropagation
//! through time.
//!
//! Gate layout inside the `4H` pre-activation vector is `[input | forget | cell | output]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::math;
use crate::nn::params::{Gradients, ParamId, ParameterSet};
use crate::tensor::Tensor;

/// Initial forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_weights: ParamId,
    pub recurrent_weights: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

/// Values saved by one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i | f | g | o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    /// Registers `{name}.wx` `[d_in, 4H]`, `{name}.wh` `[H, 4H]`, `{name}.b` `[4H]`.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "LSTM `{name}` needs positive sizes, got input {input_dim}, hidden {hidden}"
            )));
        }
        let input_weights =
            params.insert_glorot(&format!("{name}.wx"), input_dim, 4 * hidden, rng)?;
        let recurrent_weights =
            params.insert_glorot(&format!("{name}.wh"), hidden, 4 * hidden, rng)?;
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(FORGET_BIAS_INIT);
        let bias = params.insert(&format!("{name}.b"), Tensor::vector(b)?, true)?;
        Ok(Self {
            input_weights,
            recurrent_weights,
            bias,
            input_dim,
            hidden,
        })
    }

    pub fn scalar_count(&self) -> usize {
        4 * self.hidden * (self.input_dim + self.hidden + 1)
    }

    /// One step; returns `(h', c', cache)`.
    pub fn step(
        &self,
        params: &ParameterSet,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> (Vec<f64>, Vec<f64>, LstmStepCache) {
        let hs = self.hidden;
        let mut z = params.get(self.bias).data().to_vec();
        math::vec_mat_acc(x, params.get(self.input_weights).data(), 4 * hs, &mut z);
        math::vec_mat_acc(h, params.get(self.recurrent_weights).data(), 4 * hs, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hs..3 * hs).contains(&k) {
                math::tanh(*v)
            } else {
                math::sigmoid(*v)
            };
        }
        let mut c_new = vec![0.0; hs];
        let mut h_new = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = math::tanh(c_new[j]);
            h_new[j] = o * tanh_c[j];
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            gates: z,
            tanh_c,
        };
        (h_new, c_new, cache)
    }

    /// Backward through one step given gradients on `h'` and `c'`.
    /// Returns `(dx, dh_prev, dc_prev)`; `dx` is empty when `need_input` is false.
    pub fn step_backward(
        &self,
        params: &ParameterSet,
        cache: &LstmStepCache,
        dh: &[f64],
        dc_next: &[f64],
        grads: &mut Gradients,
        need_input: bool,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (dz, dh_prev, dc_prev) = self.gate_backward(params, cache, dh, dc_next);
        self.accumulate(&[cache], &dz, grads);
        let dx = if need_input {
            let mut dx = vec![0.0; self.input_dim];
            math::mat_vec_acc(params.get(self.input_weights).data(), &dz, &mut dx);
            dx
        } else {
            Vec::new()
        };
        (dx, dh_prev, dc_prev)
    }

    /// Gate pre-activation gradient `dz` plus `(dh_prev, dc_prev)` for one step.
    fn gate_backward(
        &self,
        params: &ParameterSet,
        cache: &LstmStepCache,
        dh: &[f64],
        dc_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let z = &cache.gates;
        let mut dz = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * cache.c_prev[j];
            dc_prev[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[hs + j] = d_f * f * (1.0 - f);
            dz[2 * hs + j] = d_g * (1.0 - g * g);
            dz[3 * hs + j] = d_o * o * (1.0 - o);
        }
        let mut dh_prev = vec![0.0; hs];
        math::mat_vec_acc(params.get(self.recurrent_weights).data(), &dz, &mut dh_prev);
        (dz, dh_prev, dc_prev)
    }

    /// Adds the weight and bias gradients of several steps at once; row `t`
    /// of the `[steps, 4H]` matrix `dz` belongs to `caches[t]`.
    fn accumulate(&self, caches: &[&LstmStepCache], dz: &[f64], grads: &mut Gradients) {
        let width = 4 * self.hidden;
        if let Some(gb) = grads.slot_mut(self.bias) {
            for row in dz.chunks_exact(width) {
                for (a, d) in gb.iter_mut().zip(row) {
                    *a += d;
                }
            }
        }
        let mut column = vec![0.0; caches.len()];
        if let Some(gw) = grads.slot_mut(self.input_weights) {
            for (k, row) in gw.chunks_exact_mut(width).enumerate() {
                for (c, cache) in column.iter_mut().zip(caches) {
                    *c = cache.x[k];
                }
                math::vec_mat_acc(&column, dz, width, row);
            }
        }
        if let Some(gw) = grads.slot_mut(self.recurrent_weights) {
            for (k, row) in gw.chunks_exact_mut(width).enumerate() {
                for (c, cache) in column.iter_mut().zip(caches) {
                    *c = cache.h_prev[k];
                }
                math::vec_mat_acc(&column, dz, width, row);
            }
        }
    }
}

/// Shape-checked single LSTM step over tensors.
pub fn lstm_step(
    cell: &LstmCell,
    params: &ParameterSet,
    x: &Tensor,
    h: &Tensor,
    c: &Tensor,
) -> Result<(Tensor, Tensor)> {
    x.expect_shape(&[cell.input_dim])?;
    h.expect_shape(&[cell.hidden])?;
    c.expect_shape(&[cell.hidden])?;
    let (h2, c2, _) = cell.step(params, x.data(), h.data(), c.data());
    Ok((Tensor::vector(h2)?, Tensor::vector(c2)?))
}

/// One bidirectional layer: a left-to-right and a right-to-left cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Stack of one or two bidirectional layers summarised by
/// `concat(final forward hidden, final backward hidden)` of the top layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    layers: Vec<BiLayer>,
    input_dim: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Forward-direction step caches, indexed by time.
    fwd: Vec<LstmStepCache>,
    /// Backward-direction step caches, indexed by time.
    bwd: Vec<LstmStepCache>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    layers: Vec<LayerCache>,
    steps: usize,
}

impl BiLstm {
    /// Registers cells `{name}.l{k}.fwd` and `{name}.l{k}.bwd` for each layer.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(1..=2).contains(&depth) {
            return Err(Error::Config(format!("LSTM depth must be 1 or 2, got {depth}")));
        }
        let mut layers = Vec::with_capacity(depth);
        for k in 0..depth {
            let d_in = if k == 0 { input_dim } else { 2 * hidden };
            let forward = LstmCell::init(params, &format!("{name}.l{k}.fwd"), d_in, hidden, rng)?;
            let backward = LstmCell::init(params, &format!("{name}.l{k}.bwd"), d_in, hidden, rng)?;
            layers.push(BiLayer { forward, backward });
        }
        Ok(Self {
            layers,
            input_dim,
            hidden,
        })
    }

    pub fn layers(&self) -> &[BiLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Width of the summary vector, `2·H`.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn scalar_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.forward.scalar_count() + l.backward.scalar_count())
            .sum()
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        sequence: &[Vec<f64>],
    ) -> Result<(Vec<f64>, BiLstmCache)> {
        if sequence.is_empty() {
            return Err(Error::InvalidInput("BiLSTM input sequence is empty".into()));
        }
        for x in sequence {
            if x.len() != self.input_dim {
                return Err(shape_err(&[self.input_dim], &[x.len()]));
            }
        }
        let steps = sequence.len();
        let hs = self.hidden;
        let mut inputs: Vec<Vec<f64>> = sequence.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut outputs = vec![vec![0.0; 2 * hs]; steps];
            let mut fwd = Vec::with_capacity(steps);
            let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
            for (t, x) in inputs.iter().enumerate() {
                let (h2, c2, cache) = layer.forward.step(params, x, &h, &c);
                outputs[t][..hs].copy_from_slice(&h2);
                fwd.push(cache);
                h = h2;
                c = c2;
            }
            let mut bwd: Vec<Option<LstmStepCache>> = vec![None; steps];
            let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
            for t in (0..steps).rev() {
                let (h2, c2, cache) = layer.backward.step(params, &inputs[t], &h, &c);
                outputs[t][hs..].copy_from_slice(&h2);
                bwd[t] = Some(cache);
                h = h2;
                c = c2;
            }
            caches.push(LayerCache {
                fwd,
                bwd: bwd.into_iter().map(|c| c.expect("every step visited")).collect(),
            });
            inputs = outputs;
        }
        let mut summary = Vec::with_capacity(2 * hs);
        summary.extend_from_slice(&inputs[steps - 1][..hs]);
        summary.extend_from_slice(&inputs[0][hs..]);
        Ok((
            summary,
            BiLstmCache {
                layers: caches,
                steps,
            },
        ))
    }

    /// Backpropagates a gradient on the summary vector; returns the gradient
    /// with respect to each input step.
    pub fn backward(
        &self,
        params: &ParameterSet,
        cache: &BiLstmCache,
        d_summary: &[f64],
        grads: &mut Gradients,
    ) -> Vec<Vec<f64>> {
        self.backward_inner(params, cache, d_summary, grads, true)
    }

    /// Parameter gradients only; the input sequence gradient is not formed.
    pub fn backward_params(&self, params: &ParameterSet, cache: &BiLstmCache, d_summary: &[f64], grads: &mut Gradients) {
        self.backward_inner(params, cache, d_summary, grads, false);
    }

    fn backward_inner(
        &self,
        params: &ParameterSet,
        cache: &BiLstmCache,
        d_summary: &[f64],
        grads: &mut Gradients,
        need_input: bool,
    ) -> Vec<Vec<f64>> {
        let hs = self.hidden;
        let steps = cache.steps;
        let mut d_out = vec![vec![0.0; 2 * hs]; steps];
        d_out[steps - 1][..hs].copy_from_slice(&d_summary[..hs]);
        d_out[0][hs..].copy_from_slice(&d_summary[hs..]);

        for (k, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let d_in_width = if need_input || k > 0 { layer.forward.input_dim } else { 0 };
            let mut d_in = vec![vec![0.0; d_in_width]; steps];
            for (cell, caches, half, reversed) in [
                (&layer.forward, &lc.fwd, 0..hs, false),
                (&layer.backward, &lc.bwd, hs..2 * hs, true),
            ] {
                let mut order: Vec<usize> = (0..steps).collect();
                if !reversed {
                    order.reverse();
                }
                let mut dz = vec![0.0; steps * 4 * hs];
                let (mut dh_next, mut dc_next) = (vec![0.0; hs], vec![0.0; hs]);
                for &t in &order {
                    let dh: Vec<f64> = d_out[t][half.clone()].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                    let (dz_t, dh_prev, dc_prev) = cell.gate_backward(params, &caches[t], &dh, &dc_next);
                    if d_in_width > 0 {
                        math::mat_vec_acc(params.get(cell.input_weights).data(), &dz_t, &mut d_in[t]);
                    }
                    dz[t * 4 * hs..(t + 1) * 4 * hs].copy_from_slice(&dz_t);
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                }
                let refs: Vec<&LstmStepCache> = caches.iter().collect();
                cell.accumulate(&refs, &dz, grads);
            }
            d_out = d_in;
        }
        d_out
    }
}

/// Runs `lstm` over a `[T, d_in]` sequence and returns the `[2H]` summary.
pub fn bilstm_apply(lstm: &BiLstm, params: &ParameterSet, sequence: &Tensor) -> Result<Tensor> {
    if sequence.rank() != 2 {
        return Err(shape_err(&[0, lstm.input_dim], sequence.shape()));
    }
    let rows: Vec<Vec<f64>> = sequence.row_iter().map(<[f64]>::to_vec).collect();
    let (summary, _) = lstm.forward(params, &rows)?;
    Tensor::vector(summary)
}
