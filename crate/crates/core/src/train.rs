//! Mini-batch training over frame blocks, checkpoints, and the evaluation and
//! prediction drivers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::Augmenter;
use crate::data::{block_positions, AnnotationFilter, DatasetManifest, FrameRef, VaAnnotation};
use crate::error::{Error, Result};
use crate::features::{Backbone, BackboneCache, BackboneConfig, FaceFeatureOutput, PrecomputedFeatures, PretrainedBackbone, BACKBONE_PREFIX};
use crate::losses::{ccc_loss, cross_entropy_label, mse_loss, LossTerms, LossWeights, VaLossTerms};
use crate::metrics::MetricsReport;
use crate::model::{derive_mse_target, FusionModel, ModelDims, ModelOutput, ModelVariant, OutputGrads};
use crate::nn::{Gradients, Optimizer, OptimizerKind, ParameterSet};
use crate::payload::PayloadTable;
use crate::predictions::{score_predictions, PredictionRow, PredictionTable, Track};
use crate::sampler::BalancedSampler;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub model_variant: u8,
    pub block_size: usize,
    pub weights: LossWeights,
    pub augment_sigma: f64,
    pub flip_probability: f64,
    /// Per-direction LSTM width.
    pub lstm_hidden: usize,
    pub lstm_depth: usize,
    pub head_hidden: Vec<usize>,
    /// Train the backbone layers above its frozen prefix.
    pub finetune_backbone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            model_variant: 6,
            block_size: 16,
            weights: LossWeights::default(),
            augment_sigma: 0.0,
            flip_probability: 0.0,
            lstm_hidden: 32,
            lstm_depth: 1,
            head_hidden: vec![64, 32],
            finetune_backbone: false,
        }
    }
}

impl TrainConfig {
    pub fn variant(&self) -> Result<ModelVariant> {
        ModelVariant::new(self.model_variant, self.block_size)
    }

    pub fn validate(&self) -> Result<()> {
        let variant = self.variant()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if variant.multitask() && self.batch_size < 2 {
            return Err(Error::Config(format!(
                "variant {} needs batch_size >= 2 for the concordance loss",
                variant.id()
            )));
        }
        self.weights.validate()?;
        Augmenter::new(1, self.flip_probability, self.augment_sigma)?;
        if !(1..=2).contains(&self.lstm_depth) {
            return Err(Error::Config(format!("lstm_depth must be 1 or 2, got {}", self.lstm_depth)));
        }
        if self.lstm_hidden == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config("lstm_hidden and head_hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self, feature_dim: usize) -> ModelDims {
        ModelDims {
            feature_dim,
            lstm_hidden: self.lstm_hidden,
            lstm_depth: self.lstm_depth,
            head_hidden: self.head_hidden.clone(),
        }
    }
}

/// Where per-frame backbone outputs come from.
#[derive(Debug, Clone, Copy)]
pub enum FrameSource<'a> {
    Payloads(&'a PayloadTable),
    Precomputed(&'a PrecomputedFeatures),
}

/// A manifest and the inputs for its frames.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub manifest: &'a DatasetManifest,
    pub source: FrameSource<'a>,
}

impl<'a> Dataset<'a> {
    pub fn payloads(manifest: &'a DatasetManifest, payloads: &'a PayloadTable) -> Self {
        Self {
            manifest,
            source: FrameSource::Payloads(payloads),
        }
    }

    pub fn precomputed(manifest: &'a DatasetManifest, features: &'a PrecomputedFeatures) -> Self {
        Self {
            manifest,
            source: FrameSource::Precomputed(features),
        }
    }
}

/// How a checkpoint obtains frame features.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureInput {
    /// Descriptor payloads through a backbone stored under `backbone.`.
    Backbone { descriptor_dim: usize, config: BackboneConfig },
    Precomputed { feature_dim: usize },
}

impl FeatureInput {
    pub fn feature_dim(&self) -> usize {
        match self {
            FeatureInput::Backbone { config, .. } => config.feature_dim,
            FeatureInput::Precomputed { feature_dim } => *feature_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub input: FeatureInput,
    pub params: ParameterSet,
}

impl Checkpoint {
    pub fn variant(&self) -> Result<ModelVariant> {
        self.config.variant()
    }

    pub fn ensure_variant(&self, id: u8) -> Result<()> {
        if self.config.model_variant != id {
            return Err(Error::Compatibility(format!(
                "checkpoint holds variant {}, variant {id} was requested",
                self.config.model_variant
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Epoch mean of the weighted batch loss.
    pub total: f64,
    /// Epoch means of the individual terms.
    pub terms: LossTerms,
    pub validation: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// One frame of a training sample.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameInput {
    Payload(Vec<f64>),
    Features(FaceFeatureOutput),
}

/// A current frame with its window (oldest first, current last) and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frames: Vec<FrameInput>,
    pub label: usize,
    pub va: Option<VaAnnotation>,
}

/// Optional backbone plus the fusion model.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    backbone: Option<Backbone>,
    model: FusionModel,
}

struct SampleForward {
    frames: Vec<FaceFeatureOutput>,
    caches: Vec<Option<BackboneCache>>,
    output: ModelOutput,
    cache: crate::model::ForwardCache,
}

impl Network {
    pub fn new(backbone: Option<Backbone>, model: FusionModel) -> Self {
        Self { backbone, model }
    }

    pub fn backbone(&self) -> Option<&Backbone> {
        self.backbone.as_ref()
    }

    pub fn model(&self) -> &FusionModel {
        &self.model
    }

    /// Builds the parameter layout for a checkpoint: backbone first (if any), then the model.
    pub fn init(config: &TrainConfig, input: &FeatureInput, params: &mut ParameterSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        let backbone = match input {
            FeatureInput::Backbone { descriptor_dim, config } => {
                Some(Backbone::init(params, BACKBONE_PREFIX, *descriptor_dim, config, rng)?)
            }
            FeatureInput::Precomputed { .. } => None,
        };
        let model = FusionModel::init(params, config.variant()?, &config.dims(input.feature_dim()), rng)?;
        Ok(Self { backbone, model })
    }

    fn frame_output(&self, params: &ParameterSet, frame: &FrameInput) -> Result<(FaceFeatureOutput, Option<BackboneCache>)> {
        match frame {
            FrameInput::Features(f) => Ok((f.clone(), None)),
            FrameInput::Payload(p) => {
                let bb = self
                    .backbone
                    .as_ref()
                    .ok_or_else(|| Error::Contract("payload input but the network has no backbone".into()))?;
                if p.len() != bb.input_dim() {
                    return Err(crate::error::shape_err(&[bb.input_dim()], &[p.len()]));
                }
                let (o, c) = bb.forward(params, p);
                Ok((o, Some(c)))
            }
        }
    }

    /// Model output for a window of frame outputs (current frame last).
    pub fn forward_window(&self, params: &ParameterSet, window: &[FaceFeatureOutput]) -> Result<ModelOutput> {
        let current = window
            .last()
            .ok_or_else(|| Error::InvalidInput("empty frame window".into()))?;
        let block = self.model.variant().uses_blocks().then_some(window);
        Ok(self.model.forward(params, current, block)?.0)
    }

    /// Batch loss terms without gradients.
    pub fn loss(&self, params: &ParameterSet, batch: &[Sample], weights: &LossWeights) -> Result<LossTerms> {
        Ok(self.run_batch(params, batch, weights, false)?.0)
    }

    /// Batch loss terms and the gradient of the weighted total.
    pub fn loss_and_grads(
        &self,
        params: &ParameterSet,
        batch: &[Sample],
        weights: &LossWeights,
    ) -> Result<(LossTerms, Gradients)> {
        let (terms, grads) = self.run_batch(params, batch, weights, true)?;
        Ok((terms, grads.expect("requested")))
    }

    fn run_batch(
        &self,
        params: &ParameterSet,
        batch: &[Sample],
        weights: &LossWeights,
        backprop: bool,
    ) -> Result<(LossTerms, Option<Gradients>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let variant = self.model.variant();
        let mut fwd = Vec::with_capacity(batch.len());
        for s in batch {
            if s.frames.len() != variant.window() {
                return Err(Error::Contract(format!(
                    "sample has {} frames, variant {} needs {}",
                    s.frames.len(),
                    variant.id(),
                    variant.window()
                )));
            }
            let mut frames = Vec::with_capacity(s.frames.len());
            let mut caches = Vec::with_capacity(s.frames.len());
            for f in &s.frames {
                let (o, c) = self.frame_output(params, f)?;
                frames.push(o);
                caches.push(c);
            }
            let current = frames.last().expect("window is non-empty");
            let block = variant.uses_blocks().then_some(frames.as_slice());
            let (output, cache) = self.model.forward(params, current, block)?;
            fwd.push(SampleForward {
                frames,
                caches,
                output,
                cache,
            });
        }

        let n = batch.len() as f64;
        let mut class = 0.0;
        let mut upstream: Vec<OutputGrads> = Vec::with_capacity(batch.len());
        for (s, f) in batch.iter().zip(&fwd) {
            class += cross_entropy_label(s.label, &f.output.class_probs) / n;
            let class_logits = f
                .output
                .class_probs
                .iter()
                .enumerate()
                .map(|(c, p)| weights.class * (p - if c == s.label { 1.0 } else { 0.0 }) / n)
                .collect();
            upstream.push(OutputGrads {
                class_logits,
                arousal: 0.0,
                valence: 0.0,
                mse_vector: [0.0; 5],
            });
        }

        let mut va_terms = None;
        if variant.multitask() {
            let mut pa = Vec::with_capacity(batch.len());
            let mut ta = Vec::with_capacity(batch.len());
            let mut pv = Vec::with_capacity(batch.len());
            let mut tv = Vec::with_capacity(batch.len());
            for (s, f) in batch.iter().zip(&fwd) {
                let va = s
                    .va
                    .ok_or_else(|| Error::Contract("multitask sample without valence-arousal".into()))?;
                let r = f.output.regression.expect("multitask output");
                pa.push(r.arousal);
                ta.push(va.arousal());
                pv.push(r.valence);
                tv.push(va.valence());
            }
            let (la, ga) = ccc_loss(&pa, &ta)?;
            let (lv, gv) = ccc_loss(&pv, &tv)?;
            let mut mse = 0.0;
            for (i, (s, f)) in batch.iter().zip(&fwd).enumerate() {
                let va = s.va.expect("checked above");
                let target = derive_mse_target(va.arousal(), va.valence())?;
                let (l, g) = mse_loss(&f.output.regression.expect("multitask output").mse_vector, &target)?;
                mse += l / n;
                let u = &mut upstream[i];
                u.arousal = weights.arousal * ga[i];
                u.valence = weights.valence * gv[i];
                for (d, gi) in u.mse_vector.iter_mut().zip(g) {
                    *d = weights.mse * gi / n;
                }
            }
            va_terms = Some(VaLossTerms {
                arousal_ccc: la,
                valence_ccc: lv,
                mse,
            });
        }

        let terms = LossTerms { class, va: va_terms };
        if !backprop {
            return Ok((terms, None));
        }
        let mut grads = Gradients::for_trainable(params);
        for (f, up) in fwd.iter().zip(&upstream) {
            let Some(bb) = self.backbone.as_ref().filter(|_| f.caches.iter().any(Option::is_some)) else {
                self.model.backward_params(params, &f.cache, up, &mut grads);
                continue;
            };
            let dinp = self.model.backward(params, &f.cache, up, &mut grads);
            let last = f.frames.len() - 1;
            for (j, cache) in f.caches.iter().enumerate() {
                let Some(cache) = cache else { continue };
                let (mut df, mut dp) = match dinp.block.get(j) {
                    Some(b) => (b.features.clone(), b.probs.clone()),
                    None => (vec![0.0; dinp.current.features.len()], vec![0.0; dinp.current.probs.len()]),
                };
                if j == last {
                    for (a, b) in df.iter_mut().zip(&dinp.current.features) {
                        *a += b;
                    }
                    for (a, b) in dp.iter_mut().zip(&dinp.current.probs) {
                        *a += b;
                    }
                }
                bb.backward(params, cache, &df, &dp, &mut grads);
            }
        }
        Ok((terms, Some(grads)))
    }
}

fn window_refs(r: FrameRef, window: usize) -> impl Iterator<Item = FrameRef> {
    block_positions(r.position, window).map(move |position| FrameRef {
        video: r.video,
        position,
    })
}

/// Backbone outputs for every frame, indexed `[video][position]`.
fn frame_outputs(network: &Network, params: &ParameterSet, data: &Dataset) -> Result<Vec<Vec<FaceFeatureOutput>>> {
    data.manifest
        .videos()
        .iter()
        .map(|video| {
            video
                .frames()
                .iter()
                .map(|f| match data.source {
                    FrameSource::Precomputed(pf) => pf.get(&f.video_id, f.frame_index).cloned(),
                    FrameSource::Payloads(p) => {
                        let bb = network
                            .backbone()
                            .ok_or_else(|| Error::Contract("payload input but the network has no backbone".into()))?;
                        bb.extract(params, p.get(&f.payload_ref)?)
                    }
                })
                .collect()
        })
        .collect()
}

/// Checks that `data` can feed a network built for `input`.
fn check_source(input: &FeatureInput, data: &Dataset) -> Result<()> {
    match (input, data.source) {
        (FeatureInput::Backbone { descriptor_dim, .. }, FrameSource::Payloads(p)) => {
            if data.manifest.descriptor_dim() != *descriptor_dim || p.dim() != *descriptor_dim {
                return Err(Error::Compatibility(format!(
                    "checkpoint expects descriptor_dim {descriptor_dim}, manifest has {} and payloads {}",
                    data.manifest.descriptor_dim(),
                    p.dim()
                )));
            }
            Ok(())
        }
        (FeatureInput::Precomputed { feature_dim }, FrameSource::Precomputed(pf)) => {
            if pf.feature_dim() != *feature_dim {
                return Err(Error::Compatibility(format!(
                    "checkpoint expects {feature_dim}-wide features, got {}",
                    pf.feature_dim()
                )));
            }
            pf.ensure_covers(data.manifest)
        }
        (FeatureInput::Backbone { .. }, FrameSource::Precomputed(_)) => Err(Error::Compatibility(
            "checkpoint carries a backbone and needs descriptor payloads, not precomputed features".into(),
        )),
        (FeatureInput::Precomputed { .. }, FrameSource::Payloads(_)) => Err(Error::Compatibility(
            "checkpoint was trained on precomputed features and has no backbone".into(),
        )),
    }
}

/// Trains the configured variant. `backbone` is required for payload inputs
/// and must be absent for precomputed features.
pub fn train(
    data: &Dataset,
    val: Option<&Dataset>,
    config: &TrainConfig,
    backbone: Option<&PretrainedBackbone>,
) -> Result<(Checkpoint, TrainHistory)> {
    config.validate()?;
    let variant = config.variant()?;
    let manifest = data.manifest;
    if !manifest.has_expression() {
        return Err(Error::Config("training manifest has no expression annotations".into()));
    }
    if variant.multitask() && !manifest.has_va() {
        return Err(Error::Config(format!(
            "variant {} needs valence-arousal annotations, the manifest has none",
            variant.id()
        )));
    }
    let filter = if variant.multitask() {
        AnnotationFilter::Both
    } else {
        AnnotationFilter::Expression
    };
    let class_index = manifest.class_index_where(filter);
    let eligible: usize = class_index.iter().map(Vec::len).sum();
    let sampler = BalancedSampler::new(&class_index)?;

    let (input, mut params) = match (data.source, backbone) {
        (FrameSource::Payloads(_), Some(bb)) => {
            let mut params = bb.params.clone();
            if !config.finetune_backbone {
                bb.backbone.set_all_trainable(&mut params, false);
            }
            let input = FeatureInput::Backbone {
                descriptor_dim: bb.backbone.input_dim(),
                config: bb.backbone.config().clone(),
            };
            (input, params)
        }
        (FrameSource::Payloads(_), None) => {
            return Err(Error::Config("descriptor payloads need a backbone".into()));
        }
        (FrameSource::Precomputed(pf), None) => {
            if config.augment_sigma != 0.0 || config.flip_probability != 0.0 {
                return Err(Error::Config(
                    "augmentation applies to payloads; set augment_sigma and flip_probability to 0 for precomputed features".into(),
                ));
            }
            (
                FeatureInput::Precomputed {
                    feature_dim: pf.feature_dim(),
                },
                ParameterSet::new(),
            )
        }
        (FrameSource::Precomputed(_), Some(_)) => {
            return Err(Error::Config("precomputed features take no backbone".into()));
        }
    };
    check_source(&input, data)?;
    if let Some(v) = val {
        check_source(&input, v)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = FusionModel::init(&mut params, variant, &config.dims(input.feature_dim()), &mut rng)?;
    let network = Network::new(backbone.map(|b| b.backbone.clone()), model);
    let augmenter = Augmenter::new(manifest.descriptor_dim(), config.flip_probability, config.augment_sigma)?;
    let backbone_trains = network
        .backbone()
        .is_some_and(|bb| bb.layers().iter().any(|l| params.is_trainable(l.weights) || params.is_trainable(l.bias)));
    // Frame outputs never change when nothing upstream of the model trains.
    let cache = if backbone_trains || !augmenter.is_identity() {
        None
    } else {
        Some(frame_outputs(&network, &params, data)?)
    };

    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate)?;
    let steps = eligible.div_ceil(config.batch_size);
    let window = variant.window();
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let mut sum = LossTerms {
            class: 0.0,
            va: variant.multitask().then_some(VaLossTerms {
                arousal_ccc: 0.0,
                valence_ccc: 0.0,
                mse: 0.0,
            }),
        };
        let mut total = 0.0;
        for step in 0..steps {
            let mut batch = Vec::with_capacity(config.batch_size);
            for r in sampler.draw_batch(config.batch_size, &mut rng) {
                let frame = manifest.frame(r);
                let frames = match (&cache, data.source) {
                    (Some(c), _) => window_refs(r, window)
                        .map(|w| FrameInput::Features(c[w.video][w.position].clone()))
                        .collect(),
                    (None, FrameSource::Payloads(p)) => {
                        let flip = augmenter.draw_flip(&mut rng);
                        window_refs(r, window)
                            .map(|w| {
                                let payload = p.get(&manifest.frame(w).payload_ref)?;
                                Ok(FrameInput::Payload(augmenter.apply(payload, flip, &mut rng)))
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                    (None, FrameSource::Precomputed(_)) => unreachable!("precomputed inputs are always cached"),
                };
                batch.push(Sample {
                    frames,
                    label: frame.expression.expect("sampled from the class index").index(),
                    va: frame.va,
                });
            }
            let (terms, grads) = network.loss_and_grads(&params, &batch, &config.weights)?;
            let global = epoch * steps + step;
            if !terms.is_finite() {
                return Err(Error::NonFinite {
                    step: global,
                    detail: format!("epoch {epoch}, loss terms {terms:?}"),
                });
            }
            if !grads.is_finite() {
                return Err(Error::NonFinite {
                    step: global,
                    detail: format!("epoch {epoch}, non-finite gradient"),
                });
            }
            optimizer.step(&mut params, &grads)?;
            total += terms.total(&config.weights);
            sum.class += terms.class;
            if let (Some(s), Some(t)) = (sum.va.as_mut(), terms.va) {
                s.arousal_ccc += t.arousal_ccc;
                s.valence_ccc += t.valence_ccc;
                s.mse += t.mse;
            }
        }
        let k = steps as f64;
        sum.class /= k;
        if let Some(s) = sum.va.as_mut() {
            s.arousal_ccc /= k;
            s.valence_ccc /= k;
            s.mse /= k;
        }
        let validation = match val {
            Some(v) => Some(evaluate_network(&network, &params, v)?),
            None => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            total: total / k,
            terms: sum,
            validation,
        });
    }
    Ok((
        Checkpoint {
            config: config.clone(),
            input,
            params,
        },
        history,
    ))
}

fn predict_network(network: &Network, params: &ParameterSet, data: &Dataset) -> Result<PredictionTable> {
    let variant = network.model().variant();
    let outputs = frame_outputs(network, params, data)?;
    let mut table = PredictionTable::new(variant.multitask());
    for (video, frames) in data.manifest.videos().iter().zip(&outputs) {
        for (k, record) in video.frames().iter().enumerate() {
            let window: Vec<FaceFeatureOutput> = block_positions(k, variant.window())
                .map(|p| frames[p].clone())
                .collect();
            let out = network.forward_window(params, &window)?;
            let mut probs = [0.0; crate::data::NUM_CLASSES];
            probs.copy_from_slice(&out.class_probs);
            let va = out.regression.map(|r| (r.arousal, r.valence));
            table.insert(record.video_id.clone(), record.frame_index, PredictionRow { probs, va })?;
        }
    }
    Ok(table)
}

fn evaluate_network(network: &Network, params: &ParameterSet, data: &Dataset) -> Result<MetricsReport> {
    let table = predict_network(network, params, data)?;
    let mut report = MetricsReport::default();
    if data.manifest.has_expression() {
        report.expression = score_predictions(&table, data.manifest, Track::Expression)?.expression;
    }
    if network.model().variant().multitask() && data.manifest.has_va() {
        report.va = score_predictions(&table, data.manifest, Track::Va)?.va;
    }
    Ok(report)
}

/// A checkpoint rebuilt into a runnable network.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    network: Network,
    params: ParameterSet,
    input: FeatureInput,
}

impl TrainedModel {
    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self> {
        checkpoint.config.validate()?;
        let mut params = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let network = Network::init(&checkpoint.config, &checkpoint.input, &mut params, &mut rng)?;
        params.replace_matching(checkpoint.params.clone())?;
        Ok(Self {
            network,
            params,
            input: checkpoint.input.clone(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    /// One row per manifest frame.
    pub fn predict(&self, data: &Dataset) -> Result<PredictionTable> {
        check_source(&self.input, data)?;
        predict_network(&self.network, &self.params, data)
    }

    /// Frame-by-frame metrics over the annotated frames.
    pub fn evaluate(&self, data: &Dataset) -> Result<MetricsReport> {
        check_source(&self.input, data)?;
        evaluate_network(&self.network, &self.params, data)
    }
}

pub fn evaluate(checkpoint: &Checkpoint, data: &Dataset) -> Result<MetricsReport> {
    TrainedModel::from_checkpoint(checkpoint)?.evaluate(data)
}

pub fn predict(checkpoint: &Checkpoint, data: &Dataset) -> Result<PredictionTable> {
    TrainedModel::from_checkpoint(checkpoint)?.predict(data)
}
