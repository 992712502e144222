//! Acceptance suite. Criteria run one after another inside a single test so the
//! timed ones get the machine to themselves; each prints one PASS/FAIL line.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use affect::checkpoint::{encode_checkpoint, load_checkpoint, save_checkpoint};
use affect::manifest::load_manifest;
use affect::predictions::{load_predictions, write_predictions};
use affect_core::ablation::ablate;
use affect_core::data::{AnnotationFilter, DatasetManifest, ExpressionLabel, FrameRecord, VideoSequence, NUM_CLASSES};
use affect_core::features::{pretrain_backbone, BackboneConfig, PretrainConfig, PretrainedBackbone, BACKBONE_PREFIX};
use affect_core::losses::ccc;
use affect_core::metrics::{va_score, MetricsReport};
use affect_core::model::{fusion_width, stat_pool, temporal_features, ModelDims, ModelVariant};
use affect_core::nn::{BiLstm, ParameterSet};
use affect_core::predictions::{fuse_predictions, score_predictions, Track};
use affect_core::sampler::balanced_sample;
use affect_core::synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};
use affect_core::train::{evaluate, predict, train, Checkpoint, Dataset, TrainConfig};
use affect_core::verify::{gradient_suite, GradSuiteConfig};
use affect_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

const FIVE_MINUTES: Duration = Duration::from_secs(300);

fn criterion_1() -> Outcome {
    let a = va_score(0.564, 0.504);
    let b = va_score(0.14, 0.24);
    outcome(a == 0.534 && b == 0.19, format!("va_score(0.564, 0.504) = {a}, va_score(0.14, 0.24) = {b}"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let checks = gradient_suite(&GradSuiteConfig::default()).expect("gradient suite runs");
    let elapsed = t.elapsed();
    let worst = checks
        .iter()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
        .unwrap();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.component.as_str()).collect();
    let variants = checks.iter().filter(|c| c.component.starts_with("variant")).count();
    outcome(
        failed.is_empty() && variants == 6 && elapsed < Duration::from_secs(30),
        format!(
            "{} components x {} instances, worst {} at {:.2e}, failures {:?}, {:.1}s",
            checks.len(),
            checks[0].instances,
            worst.component,
            worst.max_relative_error,
            failed,
            elapsed.as_secs_f64()
        ),
    )
}

/// The concordance formula evaluated term by term with population moments.
fn ccc_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let var_x = x.iter().map(|v| (v - mean_x).powi(2)).sum::<f64>() / n;
    let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mean_x) * (b - mean_y)).sum::<f64>() / n;
    2.0 * cov / (var_x + var_y + (mean_x - mean_y).powi(2))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_affine: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let slope = rng.random_range(-1.5..1.5);
        let y: Vec<f64> = x.iter().map(|v| slope * v + rng.random_range(-1.0..1.0)).collect();
        let c = ccc(&x, &y).unwrap();
        worst_oracle = worst_oracle.max((c - ccc_brute(&x, &y)).abs());
        let a = rng.random_range(0.01..20.0);
        let b = rng.random_range(-20.0..20.0);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        worst_affine = worst_affine.max((c - ccc(&ax, &ay).unwrap()).abs());
    }
    let elapsed = t.elapsed();
    outcome(
        worst_oracle <= 1e-12 && worst_affine <= 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "max |ccc - oracle| {worst_oracle:.1e}, max affine drift {worst_affine:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn column_scan(rows: &[Vec<f64>]) -> Vec<f64> {
    let w = rows[0].len();
    let mut out = vec![0.0; 3 * w];
    for j in 0..w {
        let mut sum = 0.0;
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for r in rows {
            sum += r[j];
            hi = hi.max(r[j]);
            lo = lo.min(r[j]);
        }
        out[j] = sum / rows.len() as f64;
        out[w + j] = hi;
        out[2 * w + j] = lo;
    }
    out
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut params = ParameterSet::new();
    let lstm = BiLstm::init(&mut params, "lstm", NUM_CLASSES, 8, 1, &mut rng).unwrap();
    let (mut exact, mut invariant, mut order_seen) = (0, 0, 0);
    let trials = 1000;
    for _ in 0..trials {
        let s = rng.random_range(2..20);
        let d_f = rng.random_range(1..12);
        let rows: Vec<Vec<f64>> = (0..s)
            .map(|_| {
                let mut p: Vec<f64> = (0..NUM_CLASSES).map(|_| rng.random_range(0.0..1.0)).collect();
                let z: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= z);
                p.extend((0..d_f).map(|_| rng.random_range(-3.0..3.0)));
                p
            })
            .collect();
        let tensors = |rows: &[Vec<f64>]| {
            let p: Vec<&[f64]> = rows.iter().map(|r| &r[..NUM_CLASSES]).collect();
            let f: Vec<&[f64]> = rows.iter().map(|r| &r[NUM_CLASSES..]).collect();
            (Tensor::from_rows(&p).unwrap(), Tensor::from_rows(&f).unwrap())
        };
        let (p, f) = tensors(&rows);
        let pooled = stat_pool(&p, &f).unwrap();
        if pooled == column_scan(&rows) {
            exact += 1;
        }
        let mut shuffled = rows.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let (q, g) = tensors(&shuffled);
        let repooled = stat_pool(&q, &g).unwrap();
        let w = NUM_CLASSES + d_f;
        let same = pooled[..w].iter().zip(&repooled[..w]).all(|(a, b)| (a - b).abs() <= 1e-12)
            && pooled[w..] == repooled[w..];
        if same {
            invariant += 1;
        }
        let a = temporal_features(&lstm, &params, &p).unwrap();
        let b = temporal_features(&lstm, &params, &q).unwrap();
        if shuffled != rows && a != b {
            order_seen += 1;
        }
    }
    outcome(
        exact == trials && invariant == trials && order_seen > 0,
        format!(
            "{exact}/{trials} exact vs column scan, {invariant}/{trials} permutation invariant, temporal features changed on {order_seen}/{trials}"
        ),
    )
}

fn pretrain(data: &SyntheticDataset, epochs: usize) -> PretrainedBackbone {
    pretrain_backbone(
        &data.manifest,
        &data.payloads,
        &PretrainConfig {
            epochs,
            ..PretrainConfig::default()
        },
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let data = generate_synthetic(&SyntheticConfig {
        num_videos: 30,
        frames_per_video: 100,
        class_separation: 10.0,
        noise_sigma: 0.3,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let backbone = pretrain(&data, 10);
    let set = Dataset::payloads(&data.manifest, &data.payloads);
    let mut detail = String::new();
    let mut passed = true;
    for (variant, min_expr, min_va) in [(2u8, Some(0.90), 0.80), (4, None, 0.85), (6, None, 0.85)] {
        let config = TrainConfig {
            model_variant: variant,
            epochs: 150,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let (checkpoint, _) = train(&set, None, &config, Some(&backbone)).unwrap();
        let elapsed = t.elapsed();
        let report = evaluate(&checkpoint, &set).unwrap();
        let expr = report.expression.unwrap().expression_score;
        let va = report.va.unwrap().va_score;
        passed &= min_expr.is_none_or(|m| expr >= m) && va >= min_va && elapsed < FIVE_MINUTES;
        let _ = write!(
            detail,
            "v{variant}: expr {expr:.3} va {va:.3} in {:.0}s; ",
            elapsed.as_secs_f64()
        );
    }
    outcome(passed, detail.trim_end_matches("; ").to_string())
}

fn criterion_6() -> Outcome {
    let noisy = SyntheticConfig {
        noise_sigma: 6.0,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&noisy).unwrap();
    let val = generate_synthetic(&SyntheticConfig {
        seed: 1,
        num_videos: 10,
        ..noisy
    })
    .unwrap();
    let backbone = pretrain(&data, 10);
    let set = Dataset::payloads(&data.manifest, &data.payloads);
    let val_set = Dataset::payloads(&val.manifest, &val.payloads);
    let score = |variant: u8| {
        let config = TrainConfig {
            model_variant: variant,
            block_size: 16,
            epochs: 20,
            ..TrainConfig::default()
        };
        let (checkpoint, _) = train(&set, None, &config, Some(&backbone)).unwrap();
        evaluate(&checkpoint, &val_set).unwrap().expression.unwrap().expression_score
    };
    let frame = score(1);
    let temporal = score(5);
    outcome(
        temporal - frame >= 0.05,
        format!(
            "validation expression score v1 {frame:.3}, v5 {temporal:.3}, margin {:.3}",
            temporal - frame
        ),
    )
}

fn small_data(seed: u64) -> SyntheticDataset {
    generate_synthetic(&SyntheticConfig {
        num_videos: 4,
        frames_per_video: 40,
        descriptor_dim: 12,
        min_segment: 8,
        max_segment: 16,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn small_backbone(data: &SyntheticDataset) -> PretrainedBackbone {
    pretrain_backbone(
        &data.manifest,
        &data.payloads,
        &PretrainConfig {
            backbone: BackboneConfig {
                feature_dim: 6,
                hidden_dims: vec![16, 8],
                frozen_prefix_depth: 1,
            },
            epochs: 5,
            ..PretrainConfig::default()
        },
    )
    .unwrap()
}

fn small_config(variant: u8) -> TrainConfig {
    TrainConfig {
        model_variant: variant,
        block_size: 4,
        epochs: 3,
        batch_size: 16,
        lstm_hidden: 4,
        head_hidden: vec![8, 8],
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

fn criterion_7() -> Outcome {
    let data = small_data(7);
    let backbone = small_backbone(&data);
    let set = Dataset::payloads(&data.manifest, &data.payloads);
    let dir = tempfile::tempdir().unwrap();
    let (mut deterministic, mut round_trip, mut frozen) = (0, 0, 0);
    for variant in ModelVariant::IDS {
        let config = TrainConfig {
            finetune_backbone: true,
            ..small_config(variant)
        };
        let (a, _) = train(&set, None, &config, Some(&backbone)).unwrap();
        let (b, _) = train(&set, None, &config, Some(&backbone)).unwrap();
        if encode_checkpoint(&a) == encode_checkpoint(&b) {
            deterministic += 1;
        }
        let path = dir.path().join(format!("v{variant}.bin"));
        save_checkpoint(&path, &a).unwrap();
        let back = load_checkpoint(&path).unwrap();
        let bits = |c: &Checkpoint| -> Vec<u64> {
            c.params.iter().flat_map(|(_, p)| p.value.data().iter().map(|v| v.to_bits())).collect()
        };
        if back == a && bits(&back) == bits(&a) {
            round_trip += 1;
        }
        let mut prefix_kept = true;
        let mut tuned = false;
        for (_, p) in backbone.params.iter() {
            let after = a.params.by_name(&p.name).unwrap();
            assert!(p.name.starts_with(BACKBONE_PREFIX));
            if p.trainable {
                tuned |= after.value != p.value;
            } else {
                prefix_kept &= after.value.data().iter().zip(p.value.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            }
        }
        if prefix_kept && tuned {
            frozen += 1;
        }
    }
    outcome(
        deterministic == 6 && round_trip == 6 && frozen == 6,
        format!(
            "over variants 1-6: identical checkpoints {deterministic}/6, bit-exact file round trip {round_trip}/6, frozen prefix kept while the rest tuned {frozen}/6"
        ),
    )
}

fn report_gap(a: &MetricsReport, b: &MetricsReport) -> Option<f64> {
    let mut gap: f64 = 0.0;
    match (&a.expression, &b.expression) {
        (Some(x), Some(y)) => {
            if x.confusion != y.confusion || x.frames != y.frames {
                return None;
            }
            gap = gap
                .max((x.accuracy - y.accuracy).abs())
                .max((x.macro_f1 - y.macro_f1).abs())
                .max((x.expression_score - y.expression_score).abs());
        }
        (None, None) => {}
        _ => return None,
    }
    match (&a.va, &b.va) {
        (Some(x), Some(y)) => {
            if x.frames != y.frames {
                return None;
            }
            gap = gap
                .max((x.ccc_arousal - y.ccc_arousal).abs())
                .max((x.ccc_valence - y.ccc_valence).abs())
                .max((x.va_score - y.va_score).abs());
        }
        (None, None) => {}
        _ => return None,
    }
    Some(gap)
}

fn criterion_8() -> Outcome {
    let data = small_data(8);
    let other = small_data(18);
    let backbone = small_backbone(&data);
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = |name: &str, d: &SyntheticDataset| {
        let p = dir.path().join(name);
        affect::manifest::write_manifest(&p, &d.manifest).unwrap();
        p
    };
    let manifests = [
        (manifest_path("train.jsonl", &data), &data),
        (manifest_path("other.jsonl", &other), &other),
    ];
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for variant in ModelVariant::IDS {
        let (checkpoint, _) = train(
            &Dataset::payloads(&data.manifest, &data.payloads),
            None,
            &small_config(variant),
            Some(&backbone),
        )
        .unwrap();
        for (path, d) in &manifests {
            let set = Dataset::payloads(&d.manifest, &d.payloads);
            let expected = evaluate(&checkpoint, &set).unwrap();
            let csv = dir.path().join("pred.csv");
            write_predictions(&csv, &predict(&checkpoint, &set).unwrap()).unwrap();
            let table = load_predictions(&csv).unwrap();
            let truth: DatasetManifest = load_manifest(path, AnnotationFilter::None).unwrap();
            let scored = MetricsReport {
                expression: score_predictions(&table, &truth, Track::Expression).unwrap().expression,
                va: if table.with_va() {
                    score_predictions(&table, &truth, Track::Va).unwrap().va
                } else {
                    None
                },
            };
            pairs += 1;
            match report_gap(&expected, &scored) {
                Some(g) => worst = worst.max(g),
                None => mismatched += 1,
            }
            for k in 2..=4 {
                let fused = fuse_predictions(&vec![table.clone(); k]).unwrap();
                for ((ka, a), (kb, b)) in table.iter().zip(fused.iter()) {
                    assert_eq!(ka, kb);
                    let mut g = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    if let (Some(x), Some(y)) = (a.va, b.va) {
                        g = g.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
                    }
                    if g > 1e-12 {
                        mismatched += 1;
                    }
                }
            }
        }
    }
    outcome(
        mismatched == 0 && worst <= 1e-9,
        format!("{pairs} checkpoint/manifest pairs, max score-vs-evaluate gap {worst:.1e}, fusion of 2-4 identical tables exact to 1e-12, {mismatched} mismatches"),
    )
}

fn criterion_9() -> Outcome {
    let mut frames = Vec::new();
    let mut k = 0u32;
    for (class, count) in [(0usize, 1000), (1, 10), (2, 10), (3, 10), (4, 10), (5, 10), (6, 10)] {
        for _ in 0..count {
            frames.push(FrameRecord {
                video_id: "v".into(),
                frame_index: k,
                payload_ref: format!("p{k}"),
                expression: Some(ExpressionLabel::from_index(class).unwrap()),
                va: None,
            });
            k += 1;
        }
    }
    let manifest = DatasetManifest::new(1, vec![VideoSequence::new("v".into(), frames).unwrap()]).unwrap();
    let draws = balanced_sample(&manifest, 10_000, 9).unwrap();
    let mut counts = [0f64; NUM_CLASSES];
    for (video, frame) in &draws {
        let r = manifest.locate(video, *frame).unwrap();
        counts[manifest.frame(r).expression.unwrap().index()] += 1.0;
    }
    let expected = draws.len() as f64 / NUM_CLASSES as f64;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((NUM_CLASSES - 1) as f64).unwrap().inverse_cdf(0.999);
    outcome(
        chi2 < critical,
        format!("chi-square {chi2:.2} vs critical {critical:.2} (df 6, alpha 0.001), counts {counts:?}"),
    )
}

fn criterion_10() -> Outcome {
    let data = small_data(10);
    let val = small_data(11);
    let backbone = small_backbone(&data);
    let table = ablate(
        &Dataset::payloads(&data.manifest, &data.payloads),
        &Dataset::payloads(&val.manifest, &val.payloads),
        &TrainConfig {
            epochs: 1,
            ..small_config(1)
        },
        Some(&backbone),
    )
    .unwrap();
    let dims = ModelDims {
        feature_dim: 6,
        lstm_hidden: 4,
        lstm_depth: 1,
        head_hidden: vec![8, 8],
    };
    let rendered = table.render();
    let lines: Vec<&str> = rendered.lines().skip(1).collect();
    let mut wired = 0;
    for (i, row) in table.rows.iter().enumerate() {
        let id = i as u8 + 1;
        let v = row.variant;
        let blocks = id >= 3;
        let lstm = id >= 5;
        let multitask = id % 2 == 0;
        let width = 7 + 6 + if blocks { 3 * (7 + 6) } else { 0 } + if lstm { 2 * 4 } else { 0 };
        let blank_va = lines[i].split('\t').skip(5).all(str::is_empty);
        if v.id() == id
            && v.uses_blocks() == blocks
            && v.uses_lstm() == lstm
            && v.multitask() == multitask
            && fusion_width(v, &dims) == width
            && row.report.expression.is_some()
            && row.report.va.is_some() == multitask
            && blank_va == !multitask
        {
            wired += 1;
        }
    }
    outcome(
        table.rows.len() == 6 && lines.len() == 6 && wired == 6,
        format!("{} rows, {wired}/6 with the expected inputs, heads and blank VA cells", table.rows.len()),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric arithmetic", criterion_1),
        ("gradient suite", criterion_2),
        ("concordance oracle", criterion_3),
        ("pooling oracle", criterion_4),
        ("learnability", criterion_5),
        ("temporal advantage", criterion_6),
        ("determinism and serialization", criterion_7),
        ("pipeline equality", criterion_8),
        ("sampler statistics", criterion_9),
        ("ablation harness", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (o, elapsed) = timed(run);
        println!(
            "criterion {:>2} {name}: {} ({}) [{:.1}s]",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
