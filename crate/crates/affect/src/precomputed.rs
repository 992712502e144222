//! Binary store of externally computed frame features and probabilities.

use std::fs;
use std::path::Path;

use affect_core::data::NUM_CLASSES;
use affect_core::features::PrecomputedFeatures;

use crate::binary::{put_f32s, put_string, put_u32, Reader};
use crate::error::{Error, Result};

pub fn encode_precomputed(features: &PrecomputedFeatures) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, features.feature_dim() as u32);
    put_u32(&mut out, features.len() as u32);
    for ((video, frame), row) in features.iter() {
        put_string(&mut out, video);
        put_u32(&mut out, *frame);
        put_f32s(&mut out, &row.features);
        put_f32s(&mut out, &row.probs);
    }
    out
}

pub fn decode_precomputed(bytes: &[u8], path: &Path) -> Result<PrecomputedFeatures> {
    let mut r = Reader::new(bytes, path);
    let dim = r.u32("feature dimension")? as usize;
    let count = r.u32("frame count")? as usize;
    let mut table = PrecomputedFeatures::new(dim);
    for i in 0..count {
        let what = format!("entry {i}");
        let video = r.string(&what)?;
        let frame = r.u32(&what)?;
        let features = r.f32s(dim, &what)?;
        let probs = r.f32s(NUM_CLASSES, &what)?;
        table.insert(video, frame, features, probs)?;
    }
    r.finish()?;
    if table.len() != count {
        return Err(Error::integrity(path, format!("{count} entries declared, {} distinct", table.len())));
    }
    Ok(table)
}

pub fn load_precomputed(path: &Path) -> Result<PrecomputedFeatures> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_precomputed(&bytes, path)
}

pub fn write_precomputed(path: &Path, features: &PrecomputedFeatures) -> Result<()> {
    fs::write(path, encode_precomputed(features)).map_err(|e| Error::io(path, e))
}
