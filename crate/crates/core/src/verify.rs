//! Finite-difference gradient suite over every layer, loss and model variant.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::VaAnnotation;
use crate::error::Result;
use crate::features::{Backbone, BackboneConfig, BACKBONE_PREFIX};
use crate::losses::{ccc_loss, cross_entropy_label, cross_entropy_logit_grad, mse_loss, LossWeights};
use crate::model::{pool_rows, PoolIndices};
use crate::nn::{grad_check, relative_error, softmax_backward, softmax_in_place, Activation, BiLstm, Dense, Gradients, LstmCell, ParameterSet};
use crate::train::{FeatureInput, FrameInput, Network, Sample, TrainConfig};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const MODEL_STEP: f64 = 1e-3;


#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCheck {
    pub component: String,
    pub instances: usize,
    pub max_relative_error: f64,
    /// Coordinates left out because a perturbation moved a STAT max/min.
    pub skipped: usize,
}

impl ComponentCheck {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADCHECK_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradSuiteConfig {
    pub instances: usize,
    pub seed: u64,
    /// Two-point step for layers and losses.
    pub step: f64,
    /// Five-point step for the full variants.
    pub model_step: f64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 0,
            step: GRADCHECK_STEP,
            model_step: MODEL_STEP,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks `[param grads | input grads]` of `loss(params, inputs)`.
fn check<F>(params: &ParameterSet, inputs: &[f64], analytic: &[f64], h: f64, mut loss: F) -> Result<f64>
where
    F: FnMut(&ParameterSet, &[f64]) -> f64,
{
    let np = params.trainable_scalar_count();
    let mut theta = params.flatten_trainable();
    theta.extend_from_slice(inputs);
    let mut q = params.clone();
    grad_check(
        |t| {
            q.assign_trainable(&t[..np]).expect("sized from the same set");
            vec![loss(&q, &t[np..])]
        },
        &theta,
        analytic,
        h,
    )
}

fn dense_instance(rng: &mut ChaCha8Rng, act: Activation, h: f64) -> Result<f64> {
    let (din, dout, batch) = (rng.random_range(2..6), rng.random_range(2..6), 3);
    let mut params = ParameterSet::new();
    let layer = Dense::init(&mut params, "d", din, dout, act, rng)?;
    let x = uniform(rng, din * batch);
    let w = uniform(rng, dout * batch);
    let mut grads = Gradients::for_trainable(&params);
    let mut dx = Vec::new();
    for (xi, wi) in x.chunks(din).zip(w.chunks(dout)) {
        let y = layer.forward(&params, xi);
        dx.extend(layer.backward(&params, xi, &y, wi, &mut grads, true).expect("requested"));
    }
    let mut analytic = grads.flatten_trainable(&params);
    analytic.extend(dx);
    check(&params, &x, &analytic, h, |p, x| {
        x.chunks(din)
            .zip(w.chunks(dout))
            .map(|(xi, wi)| dot(&layer.forward(p, xi), wi))
            .sum()
    })
}

fn softmax_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let n = rng.random_range(2..9);
    let z = uniform(rng, n);
    let w = uniform(rng, n);
    let sm = |z: &[f64]| {
        let mut p = z.to_vec();
        softmax_in_place(&mut p);
        p
    };
    let analytic = softmax_backward(&sm(&z), &w);
    check(&ParameterSet::new(), &z, &analytic, h, |_, z| dot(&sm(z), &w))
}

fn lstm_step_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let (din, hs) = (rng.random_range(1..5), 3);
    let mut params = ParameterSet::new();
    let cell = LstmCell::init(&mut params, "c", din, hs, rng)?;
    let inputs = uniform(rng, din + 2 * hs);
    let (wh, wc) = (uniform(rng, hs), uniform(rng, hs));
    let split = |v: &[f64]| (v[..din].to_vec(), v[din..din + hs].to_vec(), v[din + hs..].to_vec());
    let (x, h0, c0) = split(&inputs);
    let (_, _, cache) = cell.step(&params, &x, &h0, &c0);
    let mut grads = Gradients::for_trainable(&params);
    let (dx, dh, dc) = cell.step_backward(&params, &cache, &wh, &wc, &mut grads, true);
    let mut analytic = grads.flatten_trainable(&params);
    analytic.extend(dx);
    analytic.extend(dh);
    analytic.extend(dc);
    check(&params, &inputs, &analytic, h, |p, v| {
        let (x, h0, c0) = split(v);
        let (h1, c1, _) = cell.step(p, &x, &h0, &c0);
        dot(&h1, &wh) + dot(&c1, &wc)
    })
}

fn bilstm_instance(rng: &mut ChaCha8Rng, din: usize, depth: usize, h: f64) -> Result<f64> {
    let (hs, steps) = (3, 3);
    let mut params = ParameterSet::new();
    let lstm = BiLstm::init(&mut params, "lstm", din, hs, depth, rng)?;
    let mut seq: Vec<Vec<f64>> = (0..steps).map(|_| uniform(rng, din)).collect();
    if din == crate::data::NUM_CLASSES {
        seq.iter_mut().for_each(|r| softmax_in_place(r));
    }
    let w = uniform(rng, 2 * hs);
    let (_, cache) = lstm.forward(&params, &seq)?;
    let mut grads = Gradients::for_trainable(&params);
    let dseq = lstm.backward(&params, &cache, &w, &mut grads);
    let mut analytic = grads.flatten_trainable(&params);
    analytic.extend(dseq.concat());
    check(&params, &seq.concat(), &analytic, h, |p, flat| {
        let s: Vec<Vec<f64>> = flat.chunks(din).map(<[f64]>::to_vec).collect();
        dot(&lstm.forward(p, &s).expect("valid sequence").0, &w)
    })
}

fn stat_pool_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let (rows, width) = (3, crate::data::NUM_CLASSES + 4);
    let x = uniform(rng, rows * width);
    let w = uniform(rng, 3 * width);
    let pool = |x: &[f64]| {
        let r: Vec<&[f64]> = x.chunks(width).collect();
        pool_rows(&r).expect("non-empty block")
    };
    let analytic = pool(&x).1.backward(&w).concat();
    check(&ParameterSet::new(), &x, &analytic, h, |_, x| dot(&pool(x).0, &w))
}

fn backbone_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let config = BackboneConfig {
        feature_dim: 4,
        hidden_dims: vec![6],
        frozen_prefix_depth: 0,
    };
    let mut params = ParameterSet::new();
    let bb = Backbone::init(&mut params, "backbone.", 5, &config, rng)?;
    bb.apply_freeze(&mut params);
    let x = uniform(rng, 5);
    let (wf, wp) = (uniform(rng, 4), uniform(rng, 7));
    let (_, cache) = bb.forward(&params, &x);
    let mut grads = Gradients::for_trainable(&params);
    bb.backward(&params, &cache, &wf, &wp, &mut grads);
    let analytic = grads.flatten_trainable(&params);
    check(&params, &[], &analytic, h, |p, _| {
        let o = bb.forward(p, &x).0;
        dot(&o.features, &wf) + dot(&o.probs, &wp)
    })
}

fn cross_entropy_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let z = uniform(rng, 7);
    let label = rng.random_range(0..7);
    let probs = |z: &[f64]| {
        let mut p = z.to_vec();
        softmax_in_place(&mut p);
        p
    };
    let analytic = cross_entropy_logit_grad(label, &probs(&z));
    check(&ParameterSet::new(), &z, &analytic, h, |_, z| cross_entropy_label(label, &probs(z)))
}

fn ccc_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let pred = uniform(rng, 8);
    let target = uniform(rng, 8);
    let (_, analytic) = ccc_loss(&pred, &target)?;
    check(&ParameterSet::new(), &pred, &analytic, h, |_, p| ccc_loss(p, &target).expect("valid batch").0)
}

fn mse_instance(rng: &mut ChaCha8Rng, h: f64) -> Result<f64> {
    let pred = uniform(rng, 5);
    let target = uniform(rng, 5);
    let (_, analytic) = mse_loss(&pred, &target)?;
    check(&ParameterSet::new(), &pred, &analytic, h, |_, p| mse_loss(p, &target).expect("valid vector").0)
}

/// `(8[f(θ+h) − f(θ−h)] − [f(θ+2h) − f(θ−2h)]) / 12h` per coordinate, or
/// `None` where `kinks` differs between any probe and `theta`.
fn five_point_gradient<F, K, T>(mut f: F, mut kinks: K, theta: &[f64], h: f64) -> Vec<Option<f64>>
where
    F: FnMut(&[f64]) -> f64,
    K: FnMut(&[f64]) -> T,
    T: PartialEq,
{
    let base = kinks(theta);
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = probe[i];
            let mut at = |offset: f64, probe: &mut Vec<f64>| {
                probe[i] = orig + offset;
                let same = kinks(probe) == base;
                (f(probe), same)
            };
            let (p1, k1) = at(h, &mut probe);
            let (m1, k2) = at(-h, &mut probe);
            let (p2, k3) = at(2.0 * h, &mut probe);
            let (m2, k4) = at(-2.0 * h, &mut probe);
            probe[i] = orig;
            (k1 && k2 && k3 && k4).then(|| (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    error: f64,
    skipped: usize,
}

impl From<f64> for Outcome {
    fn from(error: f64) -> Self {
        Self { error, skipped: 0 }
    }
}

/// Full network (backbone, fusion model, heads) on a batch of 4 with
/// `d_f = 4`, `H = 3`, `s = 3`.
fn variant_instance(rng: &mut ChaCha8Rng, id: u8, h: f64) -> Result<Outcome> {
    let config = TrainConfig {
        model_variant: id,
        block_size: 3,
        lstm_hidden: 3,
        head_hidden: vec![4, 4],
        ..TrainConfig::default()
    };
    let input = FeatureInput::Backbone {
        descriptor_dim: 5,
        config: BackboneConfig {
            feature_dim: 4,
            hidden_dims: vec![6],
            frozen_prefix_depth: 0,
        },
    };
    let mut params = ParameterSet::new();
    let net = Network::init(&config, &input, &mut params, rng)?;
    let variant = config.variant()?;
    let payloads: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|_| (0..variant.window()).map(|_| uniform(rng, 5)).collect())
        .collect();
    let batch: Vec<Sample> = payloads
        .iter()
        .map(|frames| {
            Ok(Sample {
                frames: frames.iter().map(|p| FrameInput::Payload(p.clone())).collect(),
                label: rng.random_range(0..7),
                va: Some(VaAnnotation::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))?),
            })
        })
        .collect::<Result<_>>()?;
    let weights = LossWeights::default();
    let (_, grads) = net.loss_and_grads(&params, &batch, &weights)?;
    let analytic = grads.flatten_trainable(&params);
    let backbone = net.backbone().expect("built with a backbone");

    let theta = params.flatten_trainable();
    let backbone_len = params.scalar_count_prefix(BACKBONE_PREFIX);
    let pool_signature = |p: &ParameterSet| -> Vec<PoolIndices> {
        if !variant.uses_blocks() {
            return Vec::new();
        }
        payloads
            .iter()
            .map(|frames| {
                let rows: Vec<Vec<f64>> = frames
                    .iter()
                    .map(|x| {
                        let o = backbone.forward(p, x).0;
                        [o.probs, o.features].concat()
                    })
                    .collect();
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                pool_rows(&refs).expect("non-empty block").1
            })
            .collect()
    };
    let base = pool_signature(&params);
    let mut q = params.clone();
    let mut q2 = params.clone();
    let numeric = five_point_gradient(
        |t| {
            q.assign_trainable(t).expect("sized from the same set");
            net.loss(&q, &batch, &weights).expect("valid batch").total(&weights)
        },
        |t| {
            // Pooled rows depend only on the backbone, which leads the flat layout.
            if t[..backbone_len] == theta[..backbone_len] {
                return base.clone();
            }
            q2.assign_trainable(t).expect("sized from the same set");
            pool_signature(&q2)
        },
        &theta,
        h,
    );
    let mut outcome = Outcome {
        error: 0.0,
        skipped: 0,
    };
    for (a, n) in analytic.iter().zip(&numeric) {
        match n {
            Some(n) => outcome.error = outcome.error.max(relative_error(*a, *n)),
            None => outcome.skipped += 1,
        }
    }
    Ok(outcome)
}

type Instance = fn(&mut ChaCha8Rng, &GradSuiteConfig) -> Result<Outcome>;

const COMPONENTS: &[(&str, Instance)] = &[
    ("dense/identity", |r, c| dense_instance(r, Activation::Identity, c.step).map(Into::into)),
    ("dense/relu", |r, c| dense_instance(r, Activation::Relu, c.step).map(Into::into)),
    ("dense/tanh", |r, c| dense_instance(r, Activation::Tanh, c.step).map(Into::into)),
    ("softmax", |r, c| softmax_instance(r, c.step).map(Into::into)),
    ("lstm/step", |r, c| lstm_step_instance(r, c.step).map(Into::into)),
    ("bilstm/depth1", |r, c| bilstm_instance(r, 3, 1, c.step).map(Into::into)),
    ("bilstm/depth2", |r, c| bilstm_instance(r, 3, 2, c.step).map(Into::into)),
    ("stat_pool", |r, c| stat_pool_instance(r, c.step).map(Into::into)),
    ("temporal_features", |r, c| bilstm_instance(r, crate::data::NUM_CLASSES, 1, c.step).map(Into::into)),
    ("backbone", |r, c| backbone_instance(r, c.step).map(Into::into)),
    ("loss/cross_entropy", |r, c| cross_entropy_instance(r, c.step).map(Into::into)),
    ("loss/ccc", |r, c| ccc_instance(r, c.step).map(Into::into)),
    ("loss/mse", |r, c| mse_instance(r, c.step).map(Into::into)),
    ("variant1", |r, c| variant_instance(r, 1, c.model_step)),
    ("variant2", |r, c| variant_instance(r, 2, c.model_step)),
    ("variant3", |r, c| variant_instance(r, 3, c.model_step)),
    ("variant4", |r, c| variant_instance(r, 4, c.model_step)),
    ("variant5", |r, c| variant_instance(r, 5, c.model_step)),
    ("variant6", |r, c| variant_instance(r, 6, c.model_step)),
];

/// Runs every component on `instances` random cases and reports the worst
/// relative error of each.
pub fn gradient_suite(config: &GradSuiteConfig) -> Result<Vec<ComponentCheck>> {
    COMPONENTS
        .iter()
        .enumerate()
        .map(|(k, (name, run))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
            let mut worst: f64 = 0.0;
            let mut skipped = 0;
            for _ in 0..config.instances {
                let o = run(&mut rng, config)?;
                worst = worst.max(o.error);
                skipped += o.skipped;
            }
            Ok(ComponentCheck {
                component: String::from(*name),
                instances: config.instances,
                max_relative_error: worst,
                skipped,
            })
        })
        .collect()
}
