//! Six-variant ablation sweep under one shared configuration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::features::PretrainedBackbone;
use crate::metrics::MetricsReport;
use crate::model::ModelVariant;
use crate::train::{train, Dataset, TrainConfig, TrainedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: ModelVariant,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

pub const ABLATION_COLUMNS: [&str; 8] = [
    "model",
    "name",
    "accuracy",
    "f1",
    "expression_score",
    "ccc_arousal",
    "ccc_valence",
    "va_score",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl AblationTable {
    /// Tab-separated rows under an [`ABLATION_COLUMNS`] header; absent scores are blank.
    pub fn render(&self) -> String {
        let mut out = ABLATION_COLUMNS.join("\t");
        out.push('\n');
        for row in &self.rows {
            let e = row.report.expression;
            let va = row.report.va;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                row.variant.id(),
                row.variant.name(),
                cell(e.map(|e| e.accuracy)),
                cell(e.map(|e| e.macro_f1)),
                cell(e.map(|e| e.expression_score)),
                cell(va.map(|v| v.ccc_arousal)),
                cell(va.map(|v| v.ccc_valence)),
                cell(va.map(|v| v.va_score)),
            );
        }
        out
    }
}

/// Trains variants 1–6 with `base` (only `model_variant` changes) and
/// evaluates each on `val`.
pub fn ablate(
    data: &Dataset,
    val: &Dataset,
    base: &TrainConfig,
    backbone: Option<&PretrainedBackbone>,
) -> Result<AblationTable> {
    for (name, d) in [("training", data), ("validation", val)] {
        if !d.manifest.has_expression() || !d.manifest.has_va() {
            return Err(Error::Config(format!(
                "the ablation needs expression and valence-arousal annotations in the {name} manifest"
            )));
        }
    }
    let rows = ModelVariant::IDS
        .iter()
        .map(|&id| {
            let config = TrainConfig {
                model_variant: id,
                ..base.clone()
            };
            let (checkpoint, _) = train(data, None, &config, backbone)?;
            Ok(AblationRow {
                variant: config.variant()?,
                report: TrainedModel::from_checkpoint(&checkpoint)?.evaluate(val)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{pretrain_backbone, BackboneConfig, PretrainConfig};
    use crate::synthetic::{generate_synthetic, SyntheticConfig};
    use alloc::vec;

    #[test]
    fn six_rows_with_variant_wiring() {
        let cfg = SyntheticConfig {
            num_videos: 3,
            frames_per_video: 30,
            descriptor_dim: 16,
            min_segment: 8,
            max_segment: 12,
            ..SyntheticConfig::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        let v = generate_synthetic(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        let bb = pretrain_backbone(
            &d.manifest,
            &d.payloads,
            &PretrainConfig {
                backbone: BackboneConfig {
                    feature_dim: 4,
                    hidden_dims: vec![8],
                    frozen_prefix_depth: 1,
                },
                epochs: 1,
                ..PretrainConfig::default()
            },
        )
        .unwrap();
        let base = TrainConfig {
            epochs: 1,
            batch_size: 8,
            block_size: 3,
            lstm_hidden: 3,
            head_hidden: vec![4],
            ..TrainConfig::default()
        };
        let train_set = Dataset::payloads(&d.manifest, &d.payloads);
        let val_set = Dataset::payloads(&v.manifest, &v.payloads);
        let t = ablate(&train_set, &val_set, &base, Some(&bb)).unwrap();
        assert_eq!(t.rows.len(), 6);
        for (i, row) in t.rows.iter().enumerate() {
            assert_eq!(row.variant.id() as usize, i + 1);
            assert!(row.report.expression.is_some());
            assert_eq!(row.report.va.is_some(), row.variant.multitask());
        }
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[1].ends_with("\t\t\t"));
        assert!(!lines[2].ends_with('\t'));
        assert_eq!(t, ablate(&train_set, &val_set, &base, Some(&bb)).unwrap());
    }
}
