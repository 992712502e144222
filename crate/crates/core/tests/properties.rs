use affect_core::data::{build_blocks, ExpressionLabel, FrameRecord, VaAnnotation, VideoSequence, NUM_CLASSES};
use affect_core::features::{BackboneConfig, FaceFeatureOutput, PretrainedBackbone};
use affect_core::losses::{ccc, total_loss, LossWeights};
use affect_core::metrics::{classification_metrics, ExpressionMetrics, MetricsReport, VaMetrics};
use affect_core::model::{build_variant, derive_mse_target, stat_pool, temporal_features, ModelDims};
use affect_core::nn::{softmax, BiLstm, Gradients, Optimizer, OptimizerKind, ParameterSet};
use affect_core::predictions::{fuse_predictions, PredictionRow, PredictionTable};
use affect_core::synthetic::{generate_synthetic, SyntheticConfig};
use affect_core::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, cols), rows)
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, NUM_CLASSES).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn scan_pool(rows: &[Vec<f64>]) -> Vec<f64> {
    let width = rows[0].len();
    let mut mean = vec![0.0; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    let mut min = vec![f64::INFINITY; width];
    for j in 0..width {
        let mut s = 0.0;
        for r in rows {
            s += r[j];
            if r[j] > max[j] {
                max[j] = r[j];
            }
            if r[j] < min[j] {
                min[j] = r[j];
            }
        }
        mean[j] = s / rows.len() as f64;
    }
    [mean, max, min].concat()
}

fn split(rows: &[Vec<f64>]) -> (Tensor, Tensor) {
    let probs: Vec<&[f64]> = rows.iter().map(|r| &r[..NUM_CLASSES]).collect();
    let feats: Vec<&[f64]> = rows.iter().map(|r| &r[NUM_CLASSES..]).collect();
    (Tensor::from_rows(&probs).unwrap(), Tensor::from_rows(&feats).unwrap())
}

fn ccc_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    2.0 * (sxy / n) / (sxx / n + syy / n + (mx - my) * (mx - my))
}

fn small_dims() -> ModelDims {
    ModelDims {
        feature_dim: 3,
        lstm_hidden: 4,
        lstm_depth: 1,
        head_hidden: vec![5],
    }
}

fn frame_output(row: &[f64]) -> FaceFeatureOutput {
    let mut probs = row[..NUM_CLASSES].iter().map(|x| x.exp()).collect::<Vec<_>>();
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    FaceFeatureOutput::new(row[NUM_CLASSES..].to_vec(), probs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_shift_invariant_distributions(rows in matrix(3, 7), c in -50.0f64..50.0) {
        let t = Tensor::from_rows(&rows).unwrap();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + c).collect()).collect();
        let p = softmax(&t).unwrap();
        let q = softmax(&Tensor::from_rows(&shifted).unwrap()).unwrap();
        for (a, b) in p.row_iter().zip(q.row_iter()) {
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn frozen_parameters_survive_optimizer_steps(seed in any::<u64>(), steps in 1usize..20, adam in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let frozen = params.insert_glorot("frozen", 3, 4, &mut rng).unwrap();
        params.set_trainable(frozen, false);
        let live = params.insert_glorot("live", 4, 2, &mut rng).unwrap();
        let before = params.get(frozen).clone();
        let kind = if adam { OptimizerKind::Adam } else { OptimizerKind::Sgd };
        let mut opt = Optimizer::new(kind, 0.1).unwrap();
        for _ in 0..steps {
            let mut g = Gradients::for_trainable(&params);
            g.accumulate(live, &[1.0; 8]);
            opt.step(&mut params, &g).unwrap();
        }
        prop_assert_eq!(params.get(frozen).data(), before.data());
    }

    #[test]
    fn backbone_probs_are_distributions(seed in any::<u64>(), payload in prop::collection::vec(-100.0f64..100.0, 6)) {
        let cfg = BackboneConfig { feature_dim: 4, hidden_dims: vec![5], frozen_prefix_depth: 0 };
        let bb = PretrainedBackbone::untrained(6, &cfg, seed).unwrap();
        let out = bb.extract(&payload).unwrap();
        prop_assert!(out.probs.iter().all(|p| *p >= 0.0));
        prop_assert!((out.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(out.features.iter().all(|f| f.is_finite()));
    }

    #[test]
    fn stat_pool_matches_scan_and_orders(rows in matrix(5, 10)) {
        let (p, f) = split(&rows);
        let pooled = stat_pool(&p, &f).unwrap();
        let oracle = scan_pool(&rows);
        prop_assert_eq!(&pooled[10..], &oracle[10..]);
        for j in 0..10 {
            prop_assert!((pooled[j] - oracle[j]).abs() <= 1e-12);
            prop_assert!(pooled[20 + j] <= pooled[j] + 1e-12 && pooled[j] <= pooled[10 + j] + 1e-12);
        }
    }

    #[test]
    fn stat_pool_ignores_row_order(rows in matrix(6, 9), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let (p, f) = split(&rows);
        let (q, g) = split(&permuted);
        let a = stat_pool(&p, &f).unwrap();
        let b = stat_pool(&q, &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn mse_target_in_range(a in -1.0f64..=1.0, v in -1.0f64..=1.0) {
        let t = derive_mse_target(a, v).unwrap();
        prop_assert_eq!(t[0], a);
        prop_assert_eq!(t[1], v);
        prop_assert!(t.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn stat_variants_ignore_block_order(rows in matrix(4, 10), seed in any::<u64>(), id in 3u8..=4) {
        let (model, params) = build_variant(id, 4, &small_dims(), seed).unwrap();
        let block: Vec<FaceFeatureOutput> = rows.iter().map(|r| frame_output(r)).collect();
        let reversed: Vec<FaceFeatureOutput> = block.iter().rev().cloned().collect();
        let (a, _) = model.forward(&params, &block[3], Some(&block)).unwrap();
        let (b, _) = model.forward(&params, &block[3], Some(&reversed)).unwrap();
        for (x, y) in a.class_probs.iter().zip(&b.class_probs) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        if let (Some(x), Some(y)) = (a.regression, b.regression) {
            prop_assert!((x.arousal - y.arousal).abs() <= 1e-12);
            prop_assert!((x.valence - y.valence).abs() <= 1e-12);
        }
    }

    #[test]
    fn lstm_variants_see_block_order(rows in matrix(4, 10), seed in any::<u64>(), id in 5u8..=6) {
        let (model, params) = build_variant(id, 4, &small_dims(), seed).unwrap();
        let block: Vec<FaceFeatureOutput> = rows.iter().map(|r| frame_output(r)).collect();
        let reversed: Vec<FaceFeatureOutput> = block.iter().rev().cloned().collect();
        let (a, _) = model.forward(&params, &block[3], Some(&block)).unwrap();
        let (b, _) = model.forward(&params, &block[3], Some(&reversed)).unwrap();
        prop_assert!(a.class_probs.iter().all(|p| p.is_finite()));
        prop_assert_ne!(a, b);
    }

    #[test]
    fn temporal_features_see_row_order(rows in prop::collection::vec(distribution(), 5), seed in any::<u64>()) {
        let mut params = ParameterSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm = BiLstm::init(&mut params, "lstm", NUM_CLASSES, 3, 1, &mut rng).unwrap();
        let fwd = Tensor::from_rows(&rows).unwrap();
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let a = temporal_features(&lstm, &params, &fwd).unwrap();
        let b = temporal_features(&lstm, &params, &Tensor::from_rows(&rev).unwrap()).unwrap();
        prop_assert_eq!(a.len(), 6);
        prop_assert_ne!(a, b);
    }

    #[test]
    fn ccc_symmetric_bounded_and_self_consistent(
        x in prop::collection::vec(-3.0f64..3.0, 2..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 + rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let xy = ccc(&x, &y).unwrap();
        prop_assert!((xy - ccc(&y, &x).unwrap()).abs() <= 1e-12);
        prop_assert!(xy.abs() <= 1.0 + 1e-12);
        prop_assert!((xy - ccc_oracle(&x, &y)).abs() <= 1e-12);
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > 1e-6 {
            prop_assert!((ccc(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ccc_joint_affine_invariance(
        pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..50),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assert!((ccc(&x, &y).unwrap() - ccc(&ax, &ay).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn classification_metrics_match_nested_loops(
        pairs in prop::collection::vec((0usize..7, 0usize..7), 1..80),
    ) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let m = classification_metrics(&pred, &truth).unwrap();
        let mut f1_sum = 0.0;
        for c in 0..NUM_CLASSES {
            let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
            for i in 0..pred.len() {
                if pred[i] == c && truth[i] == c { tp += 1.0 }
                if pred[i] == c && truth[i] != c { fp += 1.0 }
                if pred[i] != c && truth[i] == c { fneg += 1.0 }
            }
            if tp > 0.0 {
                let precision = tp / (tp + fp);
                let recall = tp / (tp + fneg);
                f1_sum += 2.0 * precision * recall / (precision + recall);
            }
            for t in 0..NUM_CLASSES {
                let count = (0..pred.len()).filter(|&i| truth[i] == t && pred[i] == c).count() as u64;
                prop_assert_eq!(m.confusion.counts[t][c], count);
            }
        }
        let correct = (0..pred.len()).filter(|&i| pred[i] == truth[i]).count() as f64;
        prop_assert!((m.accuracy - correct / pred.len() as f64).abs() <= 1e-12);
        prop_assert!((m.macro_f1 - f1_sum / 7.0).abs() <= 1e-12);
    }

    #[test]
    fn total_loss_is_linear_in_each_term(
        terms in prop::array::uniform4(0.0f64..5.0),
        w in prop::array::uniform4(0.01f64..2.0),
        delta in 0.0f64..3.0,
        k in 0usize..4,
    ) {
        let weights = LossWeights::new(w[0], w[1], w[2], w[3]).unwrap();
        let f = |t: [f64; 4]| total_loss(t[0], t[1], t[2], t[3], &weights);
        let mut bumped = terms;
        bumped[k] += delta;
        prop_assert!((f(bumped) - f(terms) - w[k] * delta).abs() <= 1e-12);
    }

    #[test]
    fn reports_are_internally_consistent(
        pairs in prop::collection::vec((0usize..7, 0usize..7, -1.0f64..1.0, -1.0f64..1.0), 3..60),
    ) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let a: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let v: Vec<f64> = pairs.iter().map(|p| p.3).collect();
        let report = MetricsReport {
            expression: Some(ExpressionMetrics::from_labels(&pred, &truth).unwrap()),
            va: Some(VaMetrics::from_values(&a, &v, &v, &a).unwrap()),
        };
        prop_assert!(report.is_consistent());
    }

    #[test]
    fn blocks_cover_every_frame(len in 1usize..50, s in 1usize..20) {
        let frames = (0..len as u32)
            .map(|k| FrameRecord {
                video_id: "v".into(),
                frame_index: 3 * k,
                payload_ref: format!("p{k}"),
                expression: None,
                va: None,
            })
            .collect();
        let video = VideoSequence::new("v".into(), frames).unwrap();
        let blocks = build_blocks(&video, s).unwrap();
        prop_assert_eq!(blocks.len(), len);
        for (b, block) in blocks.iter().enumerate() {
            prop_assert_eq!(block.frames().len(), s);
            prop_assert_eq!(block.current(), &video.frames()[b]);
            prop_assert!(block.frames().windows(2).all(|w| w[0].frame_index <= w[1].frame_index));
        }
    }

    #[test]
    fn fusion_is_order_free_and_idempotent(
        rows in prop::collection::vec((distribution(), distribution(), distribution()), 1..10),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let tables: Vec<PredictionTable> = (0..3)
            .map(|t| {
                let mut table = PredictionTable::new(false);
                for (i, r) in rows.iter().enumerate() {
                    let p = [&r.0, &r.1, &r.2][t];
                    table.insert("v".into(), i as u32, PredictionRow { probs: p[..].try_into().unwrap(), va: None }).unwrap();
                }
                table
            })
            .collect();
        let fused = fuse_predictions(&tables).unwrap();
        let shuffled: Vec<PredictionTable> = perm.iter().map(|&i| tables[i].clone()).collect();
        let refused = fuse_predictions(&shuffled).unwrap();
        for ((_, a), (_, b)) in fused.iter().zip(refused.iter()) {
            for (x, y) in a.probs.iter().zip(&b.probs) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
        let same = fuse_predictions(&[tables[0].clone(), tables[0].clone()]).unwrap();
        for ((_, a), (_, b)) in same.iter().zip(tables[0].iter()) {
            for (x, y) in a.probs.iter().zip(&b.probs) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn synthetic_annotations_stay_in_range(seed in any::<u64>(), sigma in 0.0f64..3.0) {
        let cfg = SyntheticConfig {
            num_videos: 2,
            frames_per_video: 40,
            seed,
            va_noise_sigma: sigma,
            min_segment: 5,
            max_segment: 10,
            ..SyntheticConfig::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        for f in d.manifest.videos().iter().flat_map(|v| v.frames()) {
            let va: VaAnnotation = f.va.unwrap();
            prop_assert!((-1.0..=1.0).contains(&va.valence()) && (-1.0..=1.0).contains(&va.arousal()));
            prop_assert!(ExpressionLabel::ALL.contains(&f.expression.unwrap()));
        }
    }
}
