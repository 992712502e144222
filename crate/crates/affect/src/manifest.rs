//! JSON Lines manifests and little-endian payload files.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use affect_core::data::{AnnotationFilter, DatasetManifest, ExpressionLabel, FrameRecord, VaAnnotation, VideoSequence};
use affect_core::payload::PayloadTable;
use affect_core::synthetic::SyntheticDataset;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    descriptor_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    video: String,
    frame: u32,
    payload: String,
    #[serde(default)]
    expr: Option<i64>,
    #[serde(default)]
    valence: Option<f64>,
    #[serde(default)]
    arousal: Option<f64>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn validation_err(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Core(affect_core::Error::Validation(format!(
        "{}:{line}: {message}",
        path.display()
    )))
}

/// Parses manifest text; `path` only labels error messages.
pub fn parse_manifest(text: &str, path: &Path, filter: AnnotationFilter) -> Result<DatasetManifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err(path, 1, "missing descriptor_dim header"))?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| parse_err(path, n, format!("bad header: {e}")))?;

    let mut order: Vec<String> = Vec::new();
    let mut frames: HashMap<String, Vec<FrameRecord>> = HashMap::new();
    for (n, line) in lines {
        let f: FrameLine = serde_json::from_str(line).map_err(|e| parse_err(path, n, e.to_string()))?;
        let expression = match f.expr {
            None => None,
            Some(i) if (0..=6).contains(&i) => Some(ExpressionLabel::from_index(i as usize)?),
            Some(i) => return Err(validation_err(path, n, format!("expression {i} outside 0..=6"))),
        };
        let va = match (f.valence, f.arousal) {
            (None, None) => None,
            (Some(v), Some(a)) => Some(VaAnnotation::new(v, a).map_err(|e| validation_err(path, n, e))?),
            _ => return Err(validation_err(path, n, "valence and arousal must be given together")),
        };
        let record = FrameRecord {
            video_id: f.video.clone(),
            frame_index: f.frame,
            payload_ref: f.payload,
            expression,
            va,
        };
        frames
            .entry(f.video)
            .or_insert_with_key(|k| {
                order.push(k.clone());
                Vec::new()
            })
            .push(record);
    }
    let videos = order
        .into_iter()
        .map(|id| {
            let fr = frames.remove(&id).unwrap_or_default();
            VideoSequence::new(id, fr)
        })
        .collect::<affect_core::Result<Vec<_>>>()?;
    Ok(DatasetManifest::new(header.descriptor_dim, videos)?.filter(filter)?)
}

pub fn load_manifest(path: &Path, filter: AnnotationFilter) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path, filter)
}

pub fn render_manifest(manifest: &DatasetManifest) -> String {
    let mut out = serde_json::to_string(&Header {
        descriptor_dim: manifest.descriptor_dim(),
    })
    .expect("header serializes");
    out.push('\n');
    for f in manifest.videos().iter().flat_map(|v| v.frames()) {
        let line = FrameLine {
            video: f.video_id.clone(),
            frame: f.frame_index,
            payload: f.payload_ref.clone(),
            expr: f.expression.map(|e| e.index() as i64),
            valence: f.va.map(|va| va.valence()),
            arousal: f.va.map(|va| va.arousal()),
        };
        out.push_str(&serde_json::to_string(&line).expect("frame line serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    fs::write(path, render_manifest(manifest)).map_err(|e| Error::io(path, e))
}

pub fn encode_payload(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * values.len());
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_payload(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    let (len, body) = bytes
        .split_first_chunk::<4>()
        .ok_or_else(|| Error::integrity(path, "missing length prefix"))?;
    let n = u32::from_le_bytes(*len) as usize;
    if body.len() != 4 * n {
        return Err(Error::integrity(
            path,
            format!("declares {n} values but holds {} bytes", body.len()),
        ));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn read_payload(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_payload(&bytes, path)
}

pub fn write_payload(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, encode_payload(values)).map_err(|e| Error::io(path, e))
}

/// Reads every payload the manifest references, resolving paths against `root`.
pub fn load_payloads(manifest: &DatasetManifest, root: &Path) -> Result<PayloadTable> {
    let mut table = PayloadTable::new(manifest.descriptor_dim());
    for f in manifest.videos().iter().flat_map(|v| v.frames()) {
        if table.get(&f.payload_ref).is_ok() {
            continue;
        }
        let path = root.join(&f.payload_ref);
        let values = read_payload(&path)?;
        table.insert(f.payload_ref.clone(), values)?;
    }
    Ok(table)
}

/// A manifest with its payloads.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub payloads: PayloadTable,
}

/// Loads a manifest (all frames) and its payloads from the manifest's directory.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset> {
    let manifest = load_manifest(path, AnnotationFilter::None)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let payloads = load_payloads(&manifest, &root)?;
    Ok(LoadedDataset { manifest, payloads })
}

/// Writes `manifest.jsonl` and the payload files under `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, data: &SyntheticDataset) -> Result<PathBuf> {
    for (payload_ref, values) in data.payloads.iter() {
        let path = dir.join(payload_ref);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&encode_payload(values)).map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    write_manifest(&path, &data.manifest)?;
    Ok(path)
}
