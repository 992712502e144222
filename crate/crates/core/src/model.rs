//! The fusion model: STAT pooling over a frame block, BiLSTM temporal
//! features, feature fusion and the classification/regression heads, plus the
//! six ablation variants.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::NUM_CLASSES;
use crate::error::{shape_err, Error, Result};
use crate::features::FaceFeatureOutput;
use crate::nn::lstm::BiLstmCache;
use crate::nn::{softmax_in_place, Activation, BiLstm, Dense, Gradients, ParameterSet};
use crate::tensor::Tensor;

/// One of the six ablation configurations.
///
/// | id | blocks | LSTM | outputs |
/// |----|--------|------|---------|
/// | 1 | no | no | expression |
/// | 2 | no | no | expression, valence-arousal |
/// | 3 | yes | no | expression |
/// | 4 | yes | no | expression, valence-arousal |
/// | 5 | yes | yes | expression |
/// | 6 | yes | yes | expression, valence-arousal |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    id: u8,
    block_size: usize,
}

impl ModelVariant {
    pub const IDS: [u8; 6] = [1, 2, 3, 4, 5, 6];

    pub fn new(id: u8, block_size: usize) -> Result<Self> {
        if !(1..=6).contains(&id) {
            return Err(Error::Config(format!("model variant must be 1..=6, got {id}")));
        }
        if block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        Ok(Self { id, block_size })
    }

    pub fn id(self) -> u8 {
        self.id
    }

    pub fn block_size(self) -> usize {
        self.block_size
    }

    pub fn uses_blocks(self) -> bool {
        self.id >= 3
    }

    pub fn uses_lstm(self) -> bool {
        self.id >= 5
    }

    pub fn multitask(self) -> bool {
        self.id % 2 == 0
    }

    /// Frames consumed per prediction.
    pub fn window(self) -> usize {
        if self.uses_blocks() {
            self.block_size
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self.id {
            1 => "Emotion Image",
            2 => "Emotion VA Image",
            3 => "Emotion Frame",
            4 => "Emotion VA Frame",
            5 => "Emotion Frame with LSTM",
            _ => "Emotion VA Frame with LSTM",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    /// Backbone feature width `d_f`.
    pub feature_dim: usize,
    /// Per-direction LSTM hidden size.
    pub lstm_hidden: usize,
    pub lstm_depth: usize,
    /// Hidden widths of every head.
    pub head_hidden: Vec<usize>,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            feature_dim: 32,
            lstm_hidden: 32,
            lstm_depth: 1,
            head_hidden: vec![64, 32],
        }
    }
}

/// Column-wise `[mean; max; min]` over the rows of a block. Returns the pooled
/// vector and the winning row of every max/min column.
pub fn pool_rows(rows: &[&[f64]]) -> Result<(Vec<f64>, PoolIndices)> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidInput("cannot pool an empty block".into()));
    };
    let w = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != w) {
        return Err(shape_err(&[w], &[bad.len()]));
    }
    let mut out = vec![0.0; 3 * w];
    let mut argmax = vec![0usize; w];
    let mut argmin = vec![0usize; w];
    out[w..2 * w].copy_from_slice(first);
    out[2 * w..].copy_from_slice(first);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j] += v;
            if v > out[w + j] {
                out[w + j] = v;
                argmax[j] = i;
            }
            if v < out[2 * w + j] {
                out[2 * w + j] = v;
                argmin[j] = i;
            }
        }
    }
    let n = rows.len() as f64;
    for v in out[..w].iter_mut() {
        *v /= n;
    }
    Ok((
        out,
        PoolIndices {
            rows: rows.len(),
            argmax,
            argmin,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    rows: usize,
    argmax: Vec<usize>,
    argmin: Vec<usize>,
}

impl PoolIndices {
    /// Routes a gradient on the pooled vector back to the block rows.
    pub fn backward(&self, d_pooled: &[f64]) -> Vec<Vec<f64>> {
        let w = self.argmax.len();
        let n = self.rows as f64;
        let mut d = vec![vec![0.0; w]; self.rows];
        for row in d.iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = d_pooled[j] / n;
            }
        }
        for j in 0..w {
            d[self.argmax[j]][j] += d_pooled[w + j];
            d[self.argmin[j]][j] += d_pooled[2 * w + j];
        }
        d
    }
}

/// STAT pooling of a block's `[probs | features]` rows: `[mean; max; min]`,
/// length `3·(C + d_f)`.
pub fn stat_pool(block_probs: &Tensor, block_features: &Tensor) -> Result<Vec<f64>> {
    if block_probs.rank() != 2 || block_features.rank() != 2 {
        return Err(shape_err(&[2, 2], &[block_probs.rank(), block_features.rank()]));
    }
    if block_probs.rows() != block_features.rows() {
        return Err(shape_err(block_probs.shape(), block_features.shape()));
    }
    let rows: Vec<Vec<f64>> = block_probs
        .row_iter()
        .zip(block_features.row_iter())
        .map(|(p, f)| [p, f].concat())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Ok(pool_rows(&refs)?.0)
}

/// BiLSTM summary over the block's probability rows in chronological order.
pub fn temporal_features(lstm: &BiLstm, params: &ParameterSet, block_probs: &Tensor) -> Result<Vec<f64>> {
    if block_probs.rank() != 2 || block_probs.row_len() != lstm.input_dim() {
        return Err(shape_err(&[0, lstm.input_dim()], block_probs.shape()));
    }
    let rows: Vec<Vec<f64>> = block_probs.row_iter().map(<[f64]>::to_vec).collect();
    Ok(lstm.forward(params, &rows)?.0)
}

/// Auxiliary regression target `[a, v, m, a − m, v − m]` with `m = (a + v) / 2`.
pub fn derive_mse_target(arousal: f64, valence: f64) -> Result<[f64; 5]> {
    for (name, x) in [("arousal", arousal), ("valence", valence)] {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Range(format!("{name} {x} outside [-1, 1]")));
        }
    }
    let m = (arousal + valence) / 2.0;
    Ok([arousal, valence, m, arousal - m, valence - m])
}

/// Stack of tanh hidden layers and one output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    layers: Vec<Dense>,
}

impl Head {
    fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for (k, &h) in hidden.iter().enumerate() {
            layers.push(Dense::init(params, &format!("{name}.l{k}"), width, h, Activation::Tanh, rng)?);
            width = h;
        }
        layers.push(Dense::init(
            params,
            &format!("{name}.l{}", hidden.len()),
            width,
            output,
            output_activation,
            rng,
        )?);
        Ok(Self { layers })
    }

    pub fn scalar_count(&self) -> usize {
        self.layers.iter().map(Dense::scalar_count).sum()
    }

    /// All activations, starting with the input.
    fn forward(&self, params: &ParameterSet, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let y = layer.forward(params, acts.last().expect("non-empty"));
            acts.push(y);
        }
        acts
    }

    /// Gradient on the head input from position `from` onwards.
    fn backward(&self, params: &ParameterSet, acts: &[Vec<f64>], d_out: &[f64], grads: &mut Gradients, from: usize) -> Vec<f64> {
        let mut dy = d_out.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let start = if k == 0 { from } else { 0 };
            dy = layer.backward_from(params, &acts[k], &acts[k + 1], &dy, grads, start);
        }
        dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub arousal: f64,
    pub valence: f64,
    /// Auxiliary branch; never reported as a prediction.
    pub mse_vector: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub class_probs: Vec<f64>,
    pub regression: Option<Regression>,
}

/// Upstream gradients on the model's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrads {
    /// Gradient on the class logits (pre-softmax).
    pub class_logits: Vec<f64>,
    pub arousal: f64,
    pub valence: f64,
    pub mse_vector: [f64; 5],
}

/// Gradient on one frame's backbone output.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrad {
    pub features: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Gradients on the model inputs: the standalone current frame and each block row.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrads {
    pub current: FeatureGrad,
    pub block: Vec<FeatureGrad>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    class_acts: Vec<Vec<f64>>,
    regression_acts: Option<[Vec<Vec<f64>>; 3]>,
    pool: Option<PoolIndices>,
    lstm: Option<BiLstmCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    variant: ModelVariant,
    dims: ModelDims,
    lstm: Option<BiLstm>,
    class_head: Head,
    /// Arousal, valence and auxiliary 5-vector heads.
    regression_heads: Option<[Head; 3]>,
}

impl FusionModel {
    /// Registers `lstm.*` and `head.*` parameters.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        variant: ModelVariant,
        dims: &ModelDims,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.feature_dim == 0 || dims.lstm_hidden == 0 || dims.head_hidden.contains(&0) {
            return Err(Error::Config("model widths must be positive".into()));
        }
        let lstm = if variant.uses_lstm() {
            Some(BiLstm::init(params, "lstm", NUM_CLASSES, dims.lstm_hidden, dims.lstm_depth, rng)?)
        } else {
            None
        };
        let width = fusion_width(variant, dims);
        let class_head = Head::init(
            params,
            "head.class",
            width,
            &dims.head_hidden,
            NUM_CLASSES,
            Activation::Identity,
            rng,
        )?;
        let regression_heads = if variant.multitask() {
            Some([
                Head::init(params, "head.arousal", width, &dims.head_hidden, 1, Activation::Tanh, rng)?,
                Head::init(params, "head.valence", width, &dims.head_hidden, 1, Activation::Tanh, rng)?,
                Head::init(params, "head.mse", width, &dims.head_hidden, 5, Activation::Tanh, rng)?,
            ])
        } else {
            None
        };
        Ok(Self {
            variant,
            dims: dims.clone(),
            lstm,
            class_head,
            regression_heads,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn lstm(&self) -> Option<&BiLstm> {
        self.lstm.as_ref()
    }

    pub fn fusion_width(&self) -> usize {
        fusion_width(self.variant, &self.dims)
    }

    /// Parameters owned by the model (LSTM and heads).
    pub fn scalar_count(&self) -> usize {
        self.lstm.as_ref().map_or(0, BiLstm::scalar_count)
            + self.class_head.scalar_count()
            + self
                .regression_heads
                .as_ref()
                .map_or(0, |h| h.iter().map(Head::scalar_count).sum())
    }

    /// Builds the fusion vector and applies the heads. `block` (oldest first,
    /// current frame last) must be present exactly when the variant uses blocks.
    pub fn forward(
        &self,
        params: &ParameterSet,
        current: &FaceFeatureOutput,
        block: Option<&[FaceFeatureOutput]>,
    ) -> Result<(ModelOutput, ForwardCache)> {
        let df = self.dims.feature_dim;
        if current.features.len() != df || current.probs.len() != NUM_CLASSES {
            return Err(shape_err(&[NUM_CLASSES, df], &[current.probs.len(), current.features.len()]));
        }
        let block = match (self.variant.uses_blocks(), block) {
            (true, Some(b)) if !b.is_empty() => Some(b),
            (false, None) => None,
            (true, _) => {
                return Err(Error::Contract(format!(
                    "variant {} needs a non-empty frame block",
                    self.variant.id
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Contract(format!(
                    "variant {} takes no frame block",
                    self.variant.id
                )))
            }
        };

        let mut fusion = Vec::with_capacity(self.fusion_width());
        fusion.extend_from_slice(&current.probs);
        fusion.extend_from_slice(&current.features);
        let mut pool = None;
        let mut lstm_cache = None;
        if let Some(block) = block {
            let rows: Vec<Vec<f64>> = block
                .iter()
                .map(|f| {
                    if f.features.len() != df || f.probs.len() != NUM_CLASSES {
                        return Err(shape_err(&[NUM_CLASSES, df], &[f.probs.len(), f.features.len()]));
                    }
                    Ok([f.probs.as_slice(), f.features.as_slice()].concat())
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let (pooled, idx) = pool_rows(&refs)?;
            fusion.extend_from_slice(&pooled);
            pool = Some(idx);
            if let Some(lstm) = &self.lstm {
                let seq: Vec<Vec<f64>> = block.iter().map(|f| f.probs.clone()).collect();
                let (summary, cache) = lstm.forward(params, &seq)?;
                fusion.extend_from_slice(&summary);
                lstm_cache = Some(cache);
            }
        }
        debug_assert_eq!(fusion.len(), self.fusion_width());

        let class_acts = self.class_head.forward(params, &fusion);
        let mut class_probs = class_acts.last().expect("head output").clone();
        softmax_in_place(&mut class_probs);

        let (regression, regression_acts) = match &self.regression_heads {
            Some([ha, hv, hm]) => {
                let a = ha.forward(params, &fusion);
                let v = hv.forward(params, &fusion);
                let m = hm.forward(params, &fusion);
                let mut mse_vector = [0.0; 5];
                mse_vector.copy_from_slice(m.last().expect("head output"));
                let r = Regression {
                    arousal: a.last().expect("head output")[0],
                    valence: v.last().expect("head output")[0],
                    mse_vector,
                };
                (Some(r), Some([a, v, m]))
            }
            None => (None, None),
        };
        Ok((
            ModelOutput {
                class_probs,
                regression,
            },
            ForwardCache {
                class_acts,
                regression_acts,
                pool,
                lstm: lstm_cache,
            },
        ))
    }

    pub fn backward(
        &self,
        params: &ParameterSet,
        cache: &ForwardCache,
        upstream: &OutputGrads,
        grads: &mut Gradients,
    ) -> InputGrads {
        self.backward_inner(params, cache, upstream, grads, true)
            .expect("input gradients requested")
    }

    /// Parameter gradients only; skips the work that feeds frame gradients.
    pub fn backward_params(
        &self,
        params: &ParameterSet,
        cache: &ForwardCache,
        upstream: &OutputGrads,
        grads: &mut Gradients,
    ) {
        self.backward_inner(params, cache, upstream, grads, false);
    }

    fn backward_inner(
        &self,
        params: &ParameterSet,
        cache: &ForwardCache,
        upstream: &OutputGrads,
        grads: &mut Gradients,
        need_inputs: bool,
    ) -> Option<InputGrads> {
        let width = self.fusion_width();
        let df = self.dims.feature_dim;
        let row_w = NUM_CLASSES + df;
        // Without frame gradients only the LSTM summary slice is consumed.
        let from = match (need_inputs, cache.lstm.is_some()) {
            (true, _) => 0,
            (false, true) => 4 * row_w,
            (false, false) => width,
        };
        let mut d_fusion = self
            .class_head
            .backward(params, &cache.class_acts, &upstream.class_logits, grads, from);
        if let (Some(heads), Some(acts)) = (&self.regression_heads, &cache.regression_acts) {
            let outs: [&[f64]; 3] = [
                &[upstream.arousal],
                &[upstream.valence],
                &upstream.mse_vector,
            ];
            for ((head, act), d) in heads.iter().zip(acts).zip(outs) {
                let g = head.backward(params, act, d, grads, from);
                for (a, b) in d_fusion.iter_mut().zip(&g) {
                    *a += b;
                }
            }
        }
        debug_assert_eq!(d_fusion.len(), width - from);
        if !need_inputs {
            if let (Some(lstm), Some(lc)) = (&self.lstm, &cache.lstm) {
                lstm.backward_params(params, lc, &d_fusion, grads);
            }
            return None;
        }

        let current = FeatureGrad {
            probs: d_fusion[..NUM_CLASSES].to_vec(),
            features: d_fusion[NUM_CLASSES..row_w].to_vec(),
        };
        let mut block = Vec::new();
        if let Some(pool) = &cache.pool {
            let rows = pool.backward(&d_fusion[row_w..row_w + 3 * row_w]);
            block = rows
                .into_iter()
                .map(|r| FeatureGrad {
                    probs: r[..NUM_CLASSES].to_vec(),
                    features: r[NUM_CLASSES..].to_vec(),
                })
                .collect();
            if let (Some(lstm), Some(lc)) = (&self.lstm, &cache.lstm) {
                let d_summary = &d_fusion[4 * row_w..];
                let d_seq = lstm.backward(params, lc, d_summary, grads);
                for (fg, d) in block.iter_mut().zip(d_seq) {
                    for (a, b) in fg.probs.iter_mut().zip(&d) {
                        *a += b;
                    }
                }
            }
        }
        Some(InputGrads { current, block })
    }
}

/// `7 + d_f + uses_blocks·3·(7 + d_f) + uses_lstm·2H`.
pub fn fusion_width(variant: ModelVariant, dims: &ModelDims) -> usize {
    let frame = NUM_CLASSES + dims.feature_dim;
    frame
        + if variant.uses_blocks() { 3 * frame } else { 0 }
        + if variant.uses_lstm() { 2 * dims.lstm_hidden } else { 0 }
}

/// Seeded model for variant `id` together with its fresh parameter set.
pub fn build_variant(id: u8, block_size: usize, dims: &ModelDims, seed: u64) -> Result<(FusionModel, ParameterSet)> {
    use rand::SeedableRng;
    let variant = ModelVariant::new(id, block_size)?;
    let mut params = ParameterSet::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let model = FusionModel::init(&mut params, variant, dims, &mut rng)?;
    Ok((model, params))
}
