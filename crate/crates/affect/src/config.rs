//! Line-based `key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use affect_core::features::{BackboneConfig, PretrainConfig};
use affect_core::losses::LossWeights;
use affect_core::synthetic::SyntheticConfig;
use affect_core::train::TrainConfig;

use crate::error::{Error, Result};

/// Parsed `key = value` lines. `#` starts a comment.
#[derive(Debug, Clone)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn empty() -> Self {
        Self {
            path: PathBuf::from("<defaults>"),
            entries: BTreeMap::new(),
        }
    }

    fn take_with<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => parse(&value).map(Some).map_err(|message| Error::Config {
                path: self.path.clone(),
                line,
                message: format!("`{key}`: {message}"),
            }),
        }
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.take_with(key, |v| v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}")))
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.take_with(key, parse_list)
    }

    pub fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn set_list<T: FromStr>(&mut self, key: &str, slot: &mut Vec<T>) -> Result<()>
    where
        T::Err: Display,
    {
        if let Some(v) = self.take_list(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Config {
                path: self.path,
                line,
                message: format!("unknown key `{key}`"),
            }),
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("cannot parse `{s}`: {e}")))
        .collect()
}

fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

pub fn train_config(kv: &mut KeyValues) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    c.optimizer = kv.take("optimizer")?.unwrap_or(c.optimizer);
    kv.set("learning_rate", &mut c.learning_rate)?;
    kv.set("batch_size", &mut c.batch_size)?;
    kv.set("epochs", &mut c.epochs)?;
    kv.set("seed", &mut c.seed)?;
    kv.set("model_variant", &mut c.model_variant)?;
    kv.set("block_size", &mut c.block_size)?;
    if let Some(w) = kv.take_list::<f64>("weights")? {
        let [class, arousal, valence, mse] = w[..] else {
            return Err(Error::Usage(format!("weights needs 4 values, got {}", w.len())));
        };
        c.weights = LossWeights { class, arousal, valence, mse };
    }
    kv.set("augment_sigma", &mut c.augment_sigma)?;
    kv.set("flip_probability", &mut c.flip_probability)?;
    kv.set("lstm_hidden", &mut c.lstm_hidden)?;
    kv.set("lstm_depth", &mut c.lstm_depth)?;
    kv.set_list("head_hidden", &mut c.head_hidden)?;
    kv.set("finetune_backbone", &mut c.finetune_backbone)?;
    Ok(c)
}

pub fn render_train_config(c: &TrainConfig) -> String {
    let w = &c.weights;
    format!(
        "optimizer = {}\nlearning_rate = {}\nbatch_size = {}\nepochs = {}\nseed = {}\nmodel_variant = {}\n\
         block_size = {}\nweights = {}, {}, {}, {}\naugment_sigma = {}\nflip_probability = {}\n\
         lstm_hidden = {}\nlstm_depth = {}\nhead_hidden = {}\nfinetune_backbone = {}\n",
        c.optimizer.name(),
        c.learning_rate,
        c.batch_size,
        c.epochs,
        c.seed,
        c.model_variant,
        c.block_size,
        w.class,
        w.arousal,
        w.valence,
        w.mse,
        c.augment_sigma,
        c.flip_probability,
        c.lstm_hidden,
        c.lstm_depth,
        join(&c.head_hidden),
        c.finetune_backbone,
    )
}

pub fn backbone_config(kv: &mut KeyValues) -> Result<BackboneConfig> {
    let mut c = BackboneConfig::default();
    kv.set("feature_dim", &mut c.feature_dim)?;
    kv.set_list("hidden_dims", &mut c.hidden_dims)?;
    kv.set("frozen_prefix_depth", &mut c.frozen_prefix_depth)?;
    Ok(c)
}

pub fn render_backbone_config(c: &BackboneConfig) -> String {
    format!(
        "feature_dim = {}\nhidden_dims = {}\nfrozen_prefix_depth = {}\n",
        c.feature_dim,
        join(&c.hidden_dims),
        c.frozen_prefix_depth
    )
}

pub fn pretrain_config(kv: &mut KeyValues) -> Result<PretrainConfig> {
    let mut c = PretrainConfig {
        backbone: backbone_config(kv)?,
        ..PretrainConfig::default()
    };
    c.optimizer = kv.take("optimizer")?.unwrap_or(c.optimizer);
    kv.set("learning_rate", &mut c.learning_rate)?;
    kv.set("batch_size", &mut c.batch_size)?;
    kv.set("epochs", &mut c.epochs)?;
    kv.set("seed", &mut c.seed)?;
    Ok(c)
}

pub fn synthetic_config(kv: &mut KeyValues) -> Result<SyntheticConfig> {
    let mut c = SyntheticConfig::default();
    kv.set("num_videos", &mut c.num_videos)?;
    kv.set("frames_per_video", &mut c.frames_per_video)?;
    kv.set("descriptor_dim", &mut c.descriptor_dim)?;
    kv.set("class_separation", &mut c.class_separation)?;
    kv.set("noise_sigma", &mut c.noise_sigma)?;
    kv.set("seed", &mut c.seed)?;
    kv.set("min_segment", &mut c.min_segment)?;
    kv.set("max_segment", &mut c.max_segment)?;
    kv.set("va_noise_sigma", &mut c.va_noise_sigma)?;
    kv.set("va_smoothing", &mut c.va_smoothing)?;
    Ok(c)
}

/// Loads `path` (or defaults) and applies `parse`, rejecting unknown keys.
pub fn load_with<T>(path: Option<&Path>, parse: impl FnOnce(&mut KeyValues) -> Result<T>) -> Result<T> {
    let mut kv = match path {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::empty(),
    };
    let out = parse(&mut kv)?;
    kv.finish()?;
    Ok(out)
}
