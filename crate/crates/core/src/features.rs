//! Face-feature extraction: a trainable MLP backbone standing in for a
//! pretrained CNN, and a lookup table for features computed elsewhere.
//!
//! Both produce a [`FaceFeatureOutput`]: the penultimate-layer feature vector
//! and a 7-way probability vector.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetManifest, FrameKey, NUM_CLASSES};
use crate::error::{shape_err, Error, Result};
use crate::losses::{cross_entropy_label, cross_entropy_logit_grad};
use crate::nn::{softmax_backward, softmax_in_place, Activation, Dense, Gradients, Optimizer, OptimizerKind, ParameterSet};
use crate::payload::PayloadTable;
use crate::sampler::BalancedSampler;

/// Name prefix of backbone parameters inside a model's parameter set.
pub const BACKBONE_PREFIX: &str = "backbone.";

#[derive(Debug, Clone, PartialEq)]
pub struct FaceFeatureOutput {
    pub features: Vec<f64>,
    pub probs: Vec<f64>,
}

impl FaceFeatureOutput {
    /// Validates that `probs` is a 7-way distribution (within 1e-9) and all values are finite.
    pub fn new(features: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != NUM_CLASSES {
            return Err(shape_err(&[NUM_CLASSES], &[probs.len()]));
        }
        if features.iter().chain(&probs).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature or probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("probabilities do not form a distribution (sum {sum})")));
        }
        Ok(Self { features, probs })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    /// Width of the feature layer (`d_f`).
    pub feature_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Number of leading layers frozen after pretraining.
    pub frozen_prefix_depth: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            feature_dim: 32,
            hidden_dims: vec![64, 32],
            frozen_prefix_depth: 2,
        }
    }
}

impl BackboneConfig {
    /// Hidden layers, the feature layer and the classifier.
    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("backbone widths must be positive".into()));
        }
        if self.frozen_prefix_depth >= self.num_layers() {
            return Err(Error::Config(format!(
                "frozen_prefix_depth {} must leave the classifier trainable ({} layers)",
                self.frozen_prefix_depth,
                self.num_layers()
            )));
        }
        Ok(())
    }
}

/// MLP backbone: tanh hidden layers, a tanh feature layer and a linear
/// classifier followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    layers: Vec<Dense>,
    input_dim: usize,
    config: BackboneConfig,
}

/// Layer outputs saved by [`Backbone::forward`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct BackboneCache {
    activations: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Backbone {
    /// Registers layers `{prefix}l0 …` in `params`.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        prefix: &str,
        input_dim: usize,
        config: &BackboneConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("backbone input dimension must be positive".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend_from_slice(&config.hidden_dims);
        widths.push(config.feature_dim);
        widths.push(NUM_CLASSES);
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n { Activation::Identity } else { Activation::Tanh };
                Dense::init(params, &format!("{prefix}l{k}"), widths[k], widths[k + 1], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            input_dim,
            config: config.clone(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn forward(&self, params: &ParameterSet, payload: &[f64]) -> (FaceFeatureOutput, BackboneCache) {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(payload.to_vec());
        for layer in &self.layers {
            let y = layer.forward(params, activations.last().expect("input present"));
            activations.push(y);
        }
        let mut probs = activations[self.layers.len()].clone();
        softmax_in_place(&mut probs);
        let features = activations[self.layers.len() - 1].clone();
        (
            FaceFeatureOutput {
                features,
                probs: probs.clone(),
            },
            BackboneCache { activations, probs },
        )
    }

    /// Features and probabilities for one payload.
    pub fn extract(&self, params: &ParameterSet, payload: &[f64]) -> Result<FaceFeatureOutput> {
        if payload.len() != self.input_dim {
            return Err(shape_err(&[self.input_dim], &[payload.len()]));
        }
        Ok(self.forward(params, payload).0)
    }

    /// Index of the lowest layer with a trainable parameter.
    fn first_trainable(&self, params: &ParameterSet) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| params.is_trainable(l.weights) || params.is_trainable(l.bias))
    }

    /// Backpropagates gradients on the logits plus, optionally, on the
    /// feature vector. Stops at the lowest trainable layer.
    pub fn backward_logits(
        &self,
        params: &ParameterSet,
        cache: &BackboneCache,
        d_logits: &[f64],
        d_features: Option<&[f64]>,
        grads: &mut Gradients,
    ) {
        let Some(stop) = self.first_trainable(params) else {
            return;
        };
        let n = self.layers.len();
        let mut dy = d_logits.to_vec();
        for k in (stop..n).rev() {
            if k == n - 2 {
                if let Some(df) = d_features {
                    for (a, b) in dy.iter_mut().zip(df) {
                        *a += b;
                    }
                }
            }
            let layer = &self.layers[k];
            let dx = layer.backward(
                params,
                &cache.activations[k],
                &cache.activations[k + 1],
                &dy,
                grads,
                k > stop,
            );
            match dx {
                Some(dx) => dy = dx,
                None => break,
            }
        }
    }

    /// Backpropagates gradients on the output features and probabilities.
    pub fn backward(
        &self,
        params: &ParameterSet,
        cache: &BackboneCache,
        d_features: &[f64],
        d_probs: &[f64],
        grads: &mut Gradients,
    ) {
        let d_logits = softmax_backward(&cache.probs, d_probs);
        self.backward_logits(params, cache, &d_logits, Some(d_features), grads);
    }

    /// Marks the first `frozen_prefix_depth` layers frozen and the rest trainable.
    pub fn apply_freeze(&self, params: &mut ParameterSet) {
        for (k, layer) in self.layers.iter().enumerate() {
            let trainable = k >= self.config.frozen_prefix_depth;
            params.set_trainable(layer.weights, trainable);
            params.set_trainable(layer.bias, trainable);
        }
    }

    pub fn set_all_trainable(&self, params: &mut ParameterSet, trainable: bool) {
        for layer in &self.layers {
            params.set_trainable(layer.weights, trainable);
            params.set_trainable(layer.bias, trainable);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub backbone: BackboneConfig,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneConfig::default(),
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            seed: 0,
        }
    }
}

/// A backbone and its parameters (named with [`BACKBONE_PREFIX`]), with the
/// configured prefix already frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedBackbone {
    pub backbone: Backbone,
    pub params: ParameterSet,
    /// Mean batch cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

impl PretrainedBackbone {
    /// Randomly initialised backbone with no training.
    pub fn untrained(input_dim: usize, config: &BackboneConfig, seed: u64) -> Result<Self> {
        let mut params = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::init(&mut params, BACKBONE_PREFIX, input_dim, config, &mut rng)?;
        backbone.apply_freeze(&mut params);
        Ok(Self {
            backbone,
            params,
            epoch_losses: Vec::new(),
        })
    }

    /// Rebuilds the structure for `config` and adopts `params`, which must
    /// have the matching layout.
    pub fn from_params(input_dim: usize, config: &BackboneConfig, params: ParameterSet) -> Result<Self> {
        let mut shell = Self::untrained(input_dim, config, 0)?;
        shell.params.replace_matching(params)?;
        Ok(shell)
    }

    pub fn extract(&self, payload: &[f64]) -> Result<FaceFeatureOutput> {
        self.backbone.extract(&self.params, payload)
    }
}

/// Fits the backbone with class-balanced cross-entropy over the annotated
/// frames, then freezes its leading layers.
pub fn pretrain_backbone(
    manifest: &DatasetManifest,
    payloads: &PayloadTable,
    config: &PretrainConfig,
) -> Result<PretrainedBackbone> {
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Config("batch_size and epochs must be positive".into()));
    }
    let sampler = BalancedSampler::new(manifest.class_index())?;
    let annotated: usize = manifest.class_index().iter().map(Vec::len).sum();

    let mut params = ParameterSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let backbone = Backbone::init(
        &mut params,
        BACKBONE_PREFIX,
        manifest.descriptor_dim(),
        &config.backbone,
        &mut rng,
    )?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate)?;
    let steps = annotated.div_ceil(config.batch_size);
    let scale = 1.0 / config.batch_size as f64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for step in 0..steps {
            let mut grads = Gradients::for_trainable(&params);
            let mut batch_loss = 0.0;
            for r in sampler.draw_batch(config.batch_size, &mut rng) {
                let frame = manifest.frame(r);
                let label = frame.expression.expect("class index holds annotated frames").index();
                let (out, cache) = backbone.forward(&params, payloads.get(&frame.payload_ref)?);
                batch_loss += cross_entropy_label(label, &out.probs) * scale;
                let d_logits: Vec<f64> = cross_entropy_logit_grad(label, &out.probs)
                    .into_iter()
                    .map(|g| g * scale)
                    .collect();
                backbone.backward_logits(&params, &cache, &d_logits, None, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    step: epoch * steps + step,
                    detail: String::from("backbone cross-entropy"),
                });
            }
            optimizer.step(&mut params, &grads)?;
            total += batch_loss;
        }
        epoch_losses.push(total / steps as f64);
    }
    backbone.apply_freeze(&mut params);
    Ok(PretrainedBackbone {
        backbone,
        params,
        epoch_losses,
    })
}

/// Tolerance on a stored probability row's sum before it is rejected.
pub const PRECOMPUTED_SUM_TOLERANCE: f64 = 1e-3;

/// Features computed by an external backbone, keyed by `(video, frame)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedFeatures {
    feature_dim: usize,
    table: BTreeMap<FrameKey, FaceFeatureOutput>,
}

impl PrecomputedFeatures {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            table: BTreeMap::new(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Stores one row, renormalising probabilities that are off by less than 1e-3.
    pub fn insert(&mut self, video: String, frame: u32, features: Vec<f64>, mut probs: Vec<f64>) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(shape_err(&[self.feature_dim], &[features.len()]));
        }
        if probs.len() != NUM_CLASSES {
            return Err(shape_err(&[NUM_CLASSES], &[probs.len()]));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || !((sum - 1.0).abs() < PRECOMPUTED_SUM_TOLERANCE) {
            return Err(Error::Validation(format!(
                "({video}, {frame}): probabilities sum to {sum}, outside 1 ± {PRECOMPUTED_SUM_TOLERANCE}"
            )));
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        let row = FaceFeatureOutput::new(features, probs)?;
        self.table.insert((video, frame), row);
        Ok(())
    }

    pub fn get(&self, video: &str, frame: u32) -> Result<&FaceFeatureOutput> {
        // BTreeMap lookups need an owned key for tuple types.
        self.table
            .get(&(String::from(video), frame))
            .ok_or_else(|| Error::Coverage(format!("no precomputed features for ({video}, {frame})")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FrameKey, &FaceFeatureOutput)> {
        self.table.iter()
    }

    /// Fails on the first manifest frame without an entry.
    pub fn ensure_covers(&self, manifest: &DatasetManifest) -> Result<()> {
        for r in manifest.frame_refs() {
            let f = manifest.frame(r);
            self.get(&f.video_id, f.frame_index)?;
        }
        Ok(())
    }
}
