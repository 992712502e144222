//! Command-line surface.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use affect_core::ablation::ablate;
use affect_core::data::{AnnotationFilter, DatasetManifest};
use affect_core::features::{pretrain_backbone, PrecomputedFeatures, PretrainedBackbone};
use affect_core::payload::PayloadTable;
use affect_core::predictions::{fuse_predictions, score_predictions, Track};
use affect_core::synthetic::generate_synthetic;
use affect_core::train::{train, Checkpoint, Dataset, FeatureInput, TrainConfig, TrainedModel};
use affect_core::verify::{gradient_suite, GradSuiteConfig, GRADCHECK_TOLERANCE};
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_backbone, load_checkpoint, save_backbone, save_checkpoint};
use crate::config::{load_with, pretrain_config, synthetic_config, train_config};
use crate::error::{Error, Result};
use crate::manifest::{load_dataset, load_manifest, write_dataset};
use crate::precomputed::load_precomputed;
use crate::predictions::{load_predictions, write_predictions};
use crate::report::{render_epoch, render_report};

#[derive(Debug, Parser)]
#[command(name = "affect", version, about = "Temporal expression and valence-arousal models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Pretrained backbone applied to the manifest payloads.
    #[arg(long, conflicts_with = "features")]
    pub backbone: Option<PathBuf>,
    /// Precomputed features for the training manifest.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Precomputed features for the validation manifest.
    #[arg(long, requires = "features")]
    pub val_features: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (manifest.jsonl plus payloads) into a directory.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the frame backbone on a manifest's expression labels.
    Pretrain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model variant and write its checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        val_manifest: Option<PathBuf>,
        #[command(flatten)]
        inputs: FeatureArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on the annotated frames of a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-frame predictions for every manifest frame.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average two or more prediction files.
    Fuse {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction file against a manifest.
    Score {
        predictions: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "expression")]
        track: Track,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every layer, loss and model variant.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate all six variants under one configuration.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        val_manifest: PathBuf,
        #[command(flatten)]
        inputs: FeatureArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A manifest with whichever frame source was supplied.
struct Inputs {
    manifest: DatasetManifest,
    payloads: Option<PayloadTable>,
    features: Option<PrecomputedFeatures>,
}

impl Inputs {
    fn with_payloads(path: &Path) -> Result<Self> {
        let loaded = load_dataset(path)?;
        Ok(Self {
            manifest: loaded.manifest,
            payloads: Some(loaded.payloads),
            features: None,
        })
    }

    fn with_features(path: &Path, features: &Path) -> Result<Self> {
        Ok(Self {
            manifest: load_manifest(path, AnnotationFilter::None)?,
            payloads: None,
            features: Some(load_precomputed(features)?),
        })
    }

    fn for_input(path: &Path, input: &FeatureInput, features: Option<&Path>) -> Result<Self> {
        match (input, features) {
            (FeatureInput::Backbone { .. }, None) => Self::with_payloads(path),
            (FeatureInput::Precomputed { .. }, Some(f)) => Self::with_features(path, f),
            (FeatureInput::Backbone { .. }, Some(_)) => Err(Error::Usage(
                "this checkpoint reads payloads through its backbone; drop --features".into(),
            )),
            (FeatureInput::Precomputed { .. }, None) => {
                Err(Error::Usage("this checkpoint needs --features".into()))
            }
        }
    }

    fn dataset(&self) -> Dataset<'_> {
        match (&self.payloads, &self.features) {
            (Some(p), _) => Dataset::payloads(&self.manifest, p),
            (None, Some(f)) => Dataset::precomputed(&self.manifest, f),
            (None, None) => unreachable!("inputs always carry a frame source"),
        }
    }
}

/// Training and validation inputs plus the backbone, per the feature flags.
fn training_inputs(
    manifest: &Path,
    val_manifest: Option<&Path>,
    args: &FeatureArgs,
) -> Result<(Inputs, Option<Inputs>, Option<PretrainedBackbone>)> {
    match (&args.backbone, &args.features) {
        (Some(b), None) => {
            let val = val_manifest.map(Inputs::with_payloads).transpose()?;
            Ok((Inputs::with_payloads(manifest)?, val, Some(load_backbone(b)?)))
        }
        (None, Some(f)) => {
            let val = match (val_manifest, &args.val_features) {
                (Some(m), Some(vf)) => Some(Inputs::with_features(m, vf)?),
                (Some(_), None) => {
                    return Err(Error::Usage("--val-manifest with --features needs --val-features".into()))
                }
                (None, _) => None,
            };
            Ok((Inputs::with_features(manifest, f)?, val, None))
        }
        _ => Err(Error::Usage("pass exactly one of --backbone or --features".into())),
    }
}

fn load_train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = load_with(path, train_config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenData { config, seed, out: dir } => {
            let mut cfg = load_with(config.as_deref(), synthetic_config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = generate_synthetic(&cfg)?;
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = write_dataset(&dir, &data)?;
            emit(
                out,
                &format!(
                    "wrote {} frames in {} videos to {}\n",
                    data.manifest.num_frames(),
                    data.manifest.videos().len(),
                    path.display()
                ),
            )
        }
        Command::Pretrain { config, seed, manifest, out: path } => {
            let mut cfg = load_with(config.as_deref(), pretrain_config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = load_dataset(&manifest)?;
            let backbone = pretrain_backbone(&data.manifest, &data.payloads, &cfg)?;
            let mut text = String::new();
            for (e, loss) in backbone.epoch_losses.iter().enumerate() {
                let _ = writeln!(text, "epoch {e:>4}  ce {loss:.6}");
            }
            save_backbone(&path, &backbone)?;
            let _ = writeln!(text, "wrote {}", path.display());
            emit(out, &text)
        }
        Command::Train { config, seed, manifest, val_manifest, inputs, out: path } => {
            let config = load_train_config(config.as_deref(), seed)?;
            let (data, val, backbone) = training_inputs(&manifest, val_manifest.as_deref(), &inputs)?;
            let val_set = val.as_ref().map(Inputs::dataset);
            let (checkpoint, history) = train(&data.dataset(), val_set.as_ref(), &config, backbone.as_ref())?;
            let mut text: String = history.epochs.iter().map(|r| render_epoch(r) + "\n").collect();
            save_checkpoint(&path, &checkpoint)?;
            let _ = writeln!(text, "wrote {}", path.display());
            emit(out, &text)
        }
        Command::Eval { checkpoint, manifest, features, out: path } => {
            let checkpoint: Checkpoint = load_checkpoint(&checkpoint)?;
            let inputs = Inputs::for_input(&manifest, &checkpoint.input, features.as_deref())?;
            let report = TrainedModel::from_checkpoint(&checkpoint)?.evaluate(&inputs.dataset())?;
            let text = render_report(&report);
            if let Some(p) = path {
                write_text(&p, &text)?;
            }
            emit(out, &text)
        }
        Command::Predict { checkpoint, manifest, features, out: path } => {
            let checkpoint = load_checkpoint(&checkpoint)?;
            let inputs = Inputs::for_input(&manifest, &checkpoint.input, features.as_deref())?;
            let table = TrainedModel::from_checkpoint(&checkpoint)?.predict(&inputs.dataset())?;
            write_predictions(&path, &table)?;
            emit(out, &format!("wrote {} rows to {}\n", table.len(), path.display()))
        }
        Command::Fuse { inputs, out: path } => {
            let tables = inputs.iter().map(|p| load_predictions(p)).collect::<Result<Vec<_>>>()?;
            let fused = fuse_predictions(&tables)?;
            write_predictions(&path, &fused)?;
            emit(
                out,
                &format!("fused {} tables, {} rows, into {}\n", tables.len(), fused.len(), path.display()),
            )
        }
        Command::Score { predictions, manifest, track, out: path } => {
            let table = load_predictions(&predictions)?;
            let manifest = load_manifest(&manifest, AnnotationFilter::None)?;
            let text = render_report(&score_predictions(&table, &manifest, track)?);
            if let Some(p) = path {
                write_text(&p, &text)?;
            }
            emit(out, &text)
        }
        Command::Gradcheck { seed, instances, out: path } => {
            let checks = gradient_suite(&GradSuiteConfig {
                seed,
                instances,
                ..GradSuiteConfig::default()
            })?;
            let mut text = format!("{:<28} {:>9} {:>14} {:>8}  status\n", "component", "instances", "max_rel_error", "skipped");
            for c in &checks {
                let _ = writeln!(
                    text,
                    "{:<28} {:>9} {:>14.3e} {:>8}  {}",
                    c.component,
                    c.instances,
                    c.max_relative_error,
                    c.skipped,
                    if c.passed() { "ok" } else { "FAIL" }
                );
            }
            if let Some(p) = path {
                write_text(&p, &text)?;
            }
            emit(out, &text)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.component.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::GradCheck(format!(
                    "{} above {GRADCHECK_TOLERANCE:e}",
                    failed.join(", ")
                )))
            }
        }
        Command::Ablate { config, seed, manifest, val_manifest, inputs, out: path } => {
            let config = load_train_config(config.as_deref(), seed)?;
            let (data, val, backbone) = training_inputs(&manifest, Some(&val_manifest), &inputs)?;
            let val = val.expect("validation inputs were requested");
            let table = ablate(&data.dataset(), &val.dataset(), &config, backbone.as_ref())?;
            let text = table.render();
            if let Some(p) = path {
                write_text(&p, &text)?;
            }
            emit(out, &text)
        }
    }
}
