//! Checkpoint and backbone containers: a tagged text header followed by the
//! parameter set in full precision.

use std::fs;
use std::path::Path;

use affect_core::features::PretrainedBackbone;
use affect_core::nn::ParameterSet;
use affect_core::tensor::Tensor;
use affect_core::train::{Checkpoint, FeatureInput, TrainedModel};

use crate::binary::{put_string, put_u32, Reader};
use crate::config::{backbone_config, render_backbone_config, render_train_config, train_config, KeyValues};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AFCK";
pub const BACKBONE_MAGIC: &[u8; 4] = b"AFBB";
const PARAMS_MAGIC: &[u8; 4] = b"AFPS";
pub const FORMAT_VERSION: u32 = 1;

fn encode(magic: &[u8; 4], header: &str, params: &ParameterSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    put_u32(&mut out, FORMAT_VERSION);
    put_string(&mut out, header);
    out.extend_from_slice(PARAMS_MAGIC);
    put_u32(&mut out, params.len() as u32);
    for (_, p) in params.iter() {
        put_string(&mut out, &p.name);
        out.push(p.trainable as u8);
        out.push(p.value.rank() as u8);
        for d in p.value.shape() {
            put_u32(&mut out, *d as u32);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode(magic: &[u8; 4], bytes: &[u8], path: &Path) -> Result<(String, ParameterSet)> {
    let mut r = Reader::new(bytes, path);
    if r.take(4, "magic")? != magic {
        return Err(Error::integrity(
            path,
            format!("expected a `{}` file", String::from_utf8_lossy(magic)),
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::integrity(path, format!("unsupported format version {version}")));
    }
    let header = r.string("header")?;
    if r.take(4, "parameter marker")? != PARAMS_MAGIC {
        return Err(Error::integrity(path, "parameter section marker missing"));
    }
    let count = r.u32("parameter count")?;
    let mut params = ParameterSet::new();
    for i in 0..count {
        let what = format!("parameter {i}");
        let name = r.string(&what)?;
        let trainable = match r.u8(&what)? {
            0 => false,
            1 => true,
            b => return Err(Error::integrity(path, format!("`{name}` has trainable flag {b}"))),
        };
        let rank = r.u8(&what)? as usize;
        let shape = (0..rank)
            .map(|_| r.u32(&what).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape.iter().product();
        let values = r.f64s(n, &name)?;
        let tensor = Tensor::new(shape, values).map_err(|e| Error::integrity(path, e.to_string()))?;
        params
            .insert(&name, tensor, trainable)
            .map_err(|e| Error::integrity(path, e.to_string()))?;
    }
    r.finish()?;
    Ok((header, params))
}

fn render_input(input: &FeatureInput) -> String {
    match input {
        FeatureInput::Backbone { descriptor_dim, config } => format!(
            "input = backbone\ndescriptor_dim = {descriptor_dim}\n{}",
            render_backbone_config(config)
        ),
        FeatureInput::Precomputed { feature_dim } => {
            format!("input = precomputed\nfeature_dim = {feature_dim}\n")
        }
    }
}

fn parse_input(kv: &mut KeyValues) -> Result<FeatureInput> {
    let kind: String = kv.take("input")?.ok_or_else(|| Error::Usage("header lacks `input`".into()))?;
    match kind.as_str() {
        "backbone" => Ok(FeatureInput::Backbone {
            descriptor_dim: kv
                .take("descriptor_dim")?
                .ok_or_else(|| Error::Usage("header lacks `descriptor_dim`".into()))?,
            config: backbone_config(kv)?,
        }),
        "precomputed" => Ok(FeatureInput::Precomputed {
            feature_dim: kv
                .take("feature_dim")?
                .ok_or_else(|| Error::Usage("header lacks `feature_dim`".into()))?,
        }),
        other => Err(Error::Usage(format!("unknown input kind `{other}`"))),
    }
}

fn header_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Integrity { .. } => e,
        other => Error::integrity(path, format!("bad header: {other}")),
    }
}

pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Vec<u8> {
    let header = format!(
        "{}{}",
        render_train_config(&checkpoint.config),
        render_input(&checkpoint.input)
    );
    encode(CHECKPOINT_MAGIC, &header, &checkpoint.params)
}

/// Decodes and checks that the parameters fit the recorded configuration.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let (header, params) = decode(CHECKPOINT_MAGIC, bytes, path)?;
    let (config, input) = (|| {
        let mut kv = KeyValues::parse(&header, path)?;
        let config = train_config(&mut kv)?;
        let input = parse_input(&mut kv)?;
        kv.finish()?;
        Ok((config, input))
    })()
    .map_err(|e| header_error(path, e))?;
    let checkpoint = Checkpoint { config, input, params };
    TrainedModel::from_checkpoint(&checkpoint).map_err(|e| Error::integrity(path, e.to_string()))?;
    Ok(checkpoint)
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(checkpoint)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

pub fn encode_backbone(backbone: &PretrainedBackbone) -> Vec<u8> {
    let losses: Vec<String> = backbone.epoch_losses.iter().map(f64::to_string).collect();
    let header = format!(
        "descriptor_dim = {}\n{}epoch_losses = {}\n",
        backbone.backbone.input_dim(),
        render_backbone_config(backbone.backbone.config()),
        losses.join(", ")
    );
    encode(BACKBONE_MAGIC, &header, &backbone.params)
}

pub fn decode_backbone(bytes: &[u8], path: &Path) -> Result<PretrainedBackbone> {
    let (header, params) = decode(BACKBONE_MAGIC, bytes, path)?;
    let (descriptor_dim, config, losses) = (|| {
        let mut kv = KeyValues::parse(&header, path)?;
        let dim: usize = kv
            .take("descriptor_dim")?
            .ok_or_else(|| Error::Usage("header lacks `descriptor_dim`".into()))?;
        let config = backbone_config(&mut kv)?;
        let losses: Vec<f64> = kv.take_list("epoch_losses")?.unwrap_or_default();
        kv.finish()?;
        Ok((dim, config, losses))
    })()
    .map_err(|e| header_error(path, e))?;
    let mut out = PretrainedBackbone::from_params(descriptor_dim, &config, params)
        .map_err(|e| Error::integrity(path, e.to_string()))?;
    out.epoch_losses = losses;
    Ok(out)
}

pub fn save_backbone(path: &Path, backbone: &PretrainedBackbone) -> Result<()> {
    fs::write(path, encode_backbone(backbone)).map_err(|e| Error::io(path, e))
}

pub fn load_backbone(path: &Path) -> Result<PretrainedBackbone> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_backbone(&bytes, path)
}
