//! Deterministic synthetic video corpus.
//!
//! Each video follows a hidden piecewise-constant class trajectory. A frame's
//! descriptor is its class prototype plus isotropic Gaussian noise; its
//! valence-arousal label is the class's fixed prototype pair plus AR(1)-smoothed
//! noise. Prototypes occupy only the first `ceil(D/2)` coordinates so the
//! remaining "mirror" half carries pure noise and negating it preserves the label.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{
    DatasetManifest, ExpressionLabel, FrameRecord, VaAnnotation, VideoSequence, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::math;
use crate::payload::PayloadTable;

/// `(valence, arousal)` per class in label order.
pub const VA_PROTOTYPES: [(f64, f64); NUM_CLASSES] = [
    (0.0, 0.0),   // Neutral
    (-0.7, 0.6),  // Angry
    (-0.6, 0.35), // Disgust
    (-0.4, 0.7),  // Fear
    (0.8, 0.5),   // Happy
    (-0.6, -0.3), // Sad
    (0.2, 0.8),   // Surprise
];

const PROTOTYPE_SEED: u64 = 0x5EED_F00D;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_videos: usize,
    pub frames_per_video: usize,
    pub descriptor_dim: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Inclusive bounds on the length of a constant-class segment.
    pub min_segment: usize,
    pub max_segment: usize,
    /// Stationary standard deviation of the valence-arousal noise.
    pub va_noise_sigma: f64,
    /// AR(1) coefficient of the valence-arousal noise.
    pub va_smoothing: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_videos: 30,
            frames_per_video: 100,
            descriptor_dim: 16,
            class_separation: 10.0,
            noise_sigma: 0.3,
            seed: 0,
            min_segment: 32,
            max_segment: 64,
            va_noise_sigma: 0.05,
            va_smoothing: 0.9,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_videos", self.num_videos),
            ("frames_per_video", self.frames_per_video),
            ("descriptor_dim", self.descriptor_dim),
            ("min_segment", self.min_segment),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_segment < self.min_segment {
            return Err(Error::Config("max_segment must be at least min_segment".into()));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config(format!(
                "class_separation must be positive, got {}",
                self.class_separation
            )));
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("va_noise_sigma", self.va_noise_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.va_smoothing) {
            return Err(Error::Config(format!(
                "va_smoothing must lie in [0, 1), got {}",
                self.va_smoothing
            )));
        }
        Ok(())
    }
}

/// Coordinates negated by the flip augmentation.
pub fn mirror_range(descriptor_dim: usize) -> Range<usize> {
    descriptor_dim.div_ceil(2)..descriptor_dim
}

/// Unit-norm class prototypes scaled by `separation`, supported on the
/// non-mirror coordinates. Axis-aligned when there is room for seven axes.
pub fn class_prototypes(descriptor_dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let anchor = mirror_range(descriptor_dim).start;
    let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED);
    (0..NUM_CLASSES)
        .map(|c| {
            let mut v = vec![0.0; descriptor_dim];
            if anchor >= NUM_CLASSES {
                v[c] = separation;
            } else {
                let mut norm = 0.0;
                for x in v[..anchor].iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                    norm += *x * *x;
                }
                let scale = separation / math::sqrt(norm).max(1e-12);
                for x in v[..anchor].iter_mut() {
                    *x *= scale;
                }
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub payloads: PayloadTable,
}

pub fn payload_ref(video_id: &str, frame: u32) -> String {
    format!("payloads/{video_id}_{frame:06}.bin")
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let dim = config.descriptor_dim;
    let prototypes = class_prototypes(dim, config.class_separation);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut payloads = PayloadTable::new(dim);
    let mut videos = Vec::with_capacity(config.num_videos);
    let innovation = math::sqrt(1.0 - config.va_smoothing * config.va_smoothing);

    for v in 0..config.num_videos {
        let video_id = format!("vid{v:03}");
        let mut frames = Vec::with_capacity(config.frames_per_video);
        let mut class = rng.random_range(0..NUM_CLASSES);
        let mut remaining = rng.random_range(config.min_segment..=config.max_segment);
        let (z_v, z_a): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let mut noise_v = config.va_noise_sigma * z_v;
        let mut noise_a = config.va_noise_sigma * z_a;
        for k in 0..config.frames_per_video {
            if remaining == 0 {
                let next = rng.random_range(0..NUM_CLASSES - 1);
                class = if next >= class { next + 1 } else { next };
                remaining = rng.random_range(config.min_segment..=config.max_segment);
            }
            remaining -= 1;
            if k > 0 {
                let ev: f64 = StandardNormal.sample(&mut rng);
                let ea: f64 = StandardNormal.sample(&mut rng);
                noise_v = config.va_smoothing * noise_v + innovation * config.va_noise_sigma * ev;
                noise_a = config.va_smoothing * noise_a + innovation * config.va_noise_sigma * ea;
            }
            let descriptor: Vec<f64> = prototypes[class]
                .iter()
                .map(|p| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    // Payload files hold f32; keep the in-memory copy identical.
                    (p + config.noise_sigma * n) as f32 as f64
                })
                .collect();
            let (pv, pa) = VA_PROTOTYPES[class];
            let va = VaAnnotation::new(
                (pv + noise_v).clamp(-1.0, 1.0),
                (pa + noise_a).clamp(-1.0, 1.0),
            )?;
            let frame_index = k as u32;
            let payload = payload_ref(&video_id, frame_index);
            payloads.insert(payload.clone(), descriptor)?;
            frames.push(FrameRecord {
                video_id: video_id.clone(),
                frame_index,
                payload_ref: payload,
                expression: Some(ExpressionLabel::from_index(class)?),
                va: Some(va),
            });
        }
        videos.push(VideoSequence::new(video_id, frames)?);
    }
    Ok(SyntheticDataset {
        manifest: DatasetManifest::new(dim, videos)?,
        payloads,
    })
}
