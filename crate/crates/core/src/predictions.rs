//! Per-frame prediction tables, average fusion and scoring against a manifest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{DatasetManifest, FrameKey, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::math::argmax;
use crate::metrics::{ExpressionMetrics, MetricsReport, VaMetrics};

pub const PROB_SUM_TOLERANCE: f64 = 1e-6;
const MAX_LISTED_KEYS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub probs: [f64; NUM_CLASSES],
    /// `(arousal, valence)`.
    pub va: Option<(f64, f64)>,
}

impl PredictionRow {
    pub fn label(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Rows keyed by `(video, frame)`; either every row carries arousal/valence or none does.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    with_va: bool,
    rows: BTreeMap<FrameKey, PredictionRow>,
}

impl PredictionTable {
    pub fn new(with_va: bool) -> Self {
        Self {
            with_va,
            rows: BTreeMap::new(),
        }
    }

    pub fn with_va(&self) -> bool {
        self.with_va
    }

    pub fn insert(&mut self, video: String, frame: u32, row: PredictionRow) -> Result<()> {
        let sum: f64 = row.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE || row.probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Validation(format!(
                "probabilities for ({video}, {frame}) sum to {sum}"
            )));
        }
        if row.va.is_some() != self.with_va {
            return Err(Error::Contract(format!(
                "row ({video}, {frame}) {} arousal/valence but the table {}",
                if row.va.is_some() { "has" } else { "lacks" },
                if self.with_va { "requires them" } else { "has none" }
            )));
        }
        if let Some((a, v)) = row.va {
            if !(-1.0..=1.0).contains(&a) || !(-1.0..=1.0).contains(&v) {
                return Err(Error::Range(format!(
                    "arousal/valence ({a}, {v}) at ({video}, {frame}) outside [-1, 1]"
                )));
            }
        }
        let key = (video, frame);
        if self.rows.contains_key(&key) {
            return Err(Error::Validation(format!("duplicate prediction for ({}, {})", key.0, key.1)));
        }
        self.rows.insert(key, row);
        Ok(())
    }

    pub fn get(&self, video: &str, frame: u32) -> Option<&PredictionRow> {
        // BTreeMap<(String, u32), _> cannot be probed with a borrowed tuple.
        self.rows.get(&(String::from(video), frame))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in `(video, frame)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&FrameKey, &PredictionRow)> {
        self.rows.iter()
    }
}

/// Mean of the probability rows (renormalised) and of arousal/valence.
pub fn fuse_predictions(tables: &[PredictionTable]) -> Result<PredictionTable> {
    let [first, rest @ ..] = tables else {
        return Err(Error::InvalidInput("fusion needs at least two tables".into()));
    };
    if rest.is_empty() {
        return Err(Error::InvalidInput("fusion needs at least two tables".into()));
    }
    if rest.iter().any(|t| t.with_va != first.with_va) {
        return Err(Error::Contract(
            "arousal/valence columns present in some tables and absent in others".into(),
        ));
    }
    for (i, t) in rest.iter().enumerate() {
        if let Some((v, f)) = first.rows.keys().find(|k| !t.rows.contains_key(*k)) {
            return Err(Error::Coverage(format!("table {} is missing ({v}, {f})", i + 2)));
        }
        if let Some((v, f)) = t.rows.keys().find(|k| !first.rows.contains_key(*k)) {
            return Err(Error::Coverage(format!("table 1 is missing ({v}, {f})")));
        }
    }
    let n = tables.len() as f64;
    let mut out = PredictionTable::new(first.with_va);
    for key in first.rows.keys() {
        let mut probs = [0.0; NUM_CLASSES];
        let mut va = (0.0, 0.0);
        for t in tables {
            let row = &t.rows[key];
            for (p, q) in probs.iter_mut().zip(row.probs) {
                *p += q;
            }
            if let Some((a, v)) = row.va {
                va.0 += a;
                va.1 += v;
            }
        }
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        let row = PredictionRow {
            probs,
            va: first.with_va.then_some((va.0 / n, va.1 / n)),
        };
        out.rows.insert(key.clone(), row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Track {
    Expression,
    Va,
}

impl Track {
    pub fn name(self) -> &'static str {
        match self {
            Track::Expression => "expression",
            Track::Va => "va",
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expression" => Ok(Track::Expression),
            "va" => Ok(Track::Va),
            other => Err(Error::InvalidInput(format!("unknown track `{other}`"))),
        }
    }
}

fn coverage_error(missing: &[FrameKey], total: usize) -> Error {
    let listed: Vec<String> = missing
        .iter()
        .take(MAX_LISTED_KEYS)
        .map(|(v, f)| format!("({v}, {f})"))
        .collect();
    Error::Coverage(format!(
        "predictions missing for {total} annotated frame(s): {}{}",
        listed.join(", "),
        if total > MAX_LISTED_KEYS { ", ..." } else { "" }
    ))
}

/// Scores `table` against the annotations of `manifest` for one track.
pub fn score_predictions(table: &PredictionTable, manifest: &DatasetManifest, track: Track) -> Result<MetricsReport> {
    let mut missing = Vec::new();
    let mut missing_count = 0usize;
    let mut note_missing = |key: FrameKey| {
        missing_count += 1;
        if missing.len() < MAX_LISTED_KEYS {
            missing.push(key);
        }
    };
    match track {
        Track::Expression => {
            let mut predicted = Vec::new();
            let mut truth = Vec::new();
            for video in manifest.videos() {
                for frame in video.frames() {
                    let Some(label) = frame.expression else { continue };
                    match table.get(&frame.video_id, frame.frame_index) {
                        Some(row) => {
                            predicted.push(row.label());
                            truth.push(label.index());
                        }
                        None => note_missing(frame.key()),
                    }
                }
            }
            if missing_count > 0 {
                return Err(coverage_error(&missing, missing_count));
            }
            if truth.is_empty() {
                return Err(Error::EmptyDataset("manifest has no expression annotations".into()));
            }
            Ok(MetricsReport {
                expression: Some(ExpressionMetrics::from_labels(&predicted, &truth)?),
                va: None,
            })
        }
        Track::Va => {
            if !table.with_va() {
                return Err(Error::Contract("predictions carry no arousal/valence columns".into()));
            }
            let (mut pa, mut ta, mut pv, mut tv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for video in manifest.videos() {
                for frame in video.frames() {
                    let Some(va) = frame.va else { continue };
                    match table.get(&frame.video_id, frame.frame_index).and_then(|r| r.va) {
                        Some((a, v)) => {
                            pa.push(a);
                            ta.push(va.arousal());
                            pv.push(v);
                            tv.push(va.valence());
                        }
                        None => note_missing(frame.key()),
                    }
                }
            }
            if missing_count > 0 {
                return Err(coverage_error(&missing, missing_count));
            }
            if ta.is_empty() {
                return Err(Error::EmptyDataset("manifest has no valence-arousal annotations".into()));
            }
            Ok(MetricsReport {
                expression: None,
                va: Some(VaMetrics::from_values(&pa, &ta, &pv, &tv)?),
            })
        }
    }
}
