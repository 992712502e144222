//! Class-balanced sampling with replacement.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetManifest, FrameKey, FrameRef, NUM_CLASSES};
use crate::error::{Error, Result};

/// Draws a class uniformly among the non-empty ones, then a frame uniformly
/// within that class.
#[derive(Debug, Clone)]
pub struct BalancedSampler {
    classes: Vec<Vec<FrameRef>>,
}

impl BalancedSampler {
    pub fn new(class_index: &[Vec<FrameRef>; NUM_CLASSES]) -> Result<Self> {
        let classes: Vec<Vec<FrameRef>> =
            class_index.iter().filter(|c| !c.is_empty()).cloned().collect();
        if classes.is_empty() {
            return Err(Error::EmptyDataset("no annotated frames to sample".into()));
        }
        Ok(Self { classes })
    }

    pub fn non_empty_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> FrameRef {
        let class = &self.classes[rng.random_range(0..self.classes.len())];
        class[rng.random_range(0..class.len())]
    }

    pub fn draw_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<FrameRef> {
        (0..batch_size).map(|_| self.draw(rng)).collect()
    }
}

/// `batch_size` class-balanced draws, deterministic in `seed`.
pub fn balanced_sample(manifest: &DatasetManifest, batch_size: usize, seed: u64) -> Result<Vec<FrameKey>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput(format!("batch size must be positive, got {batch_size}")));
    }
    let sampler = BalancedSampler::new(manifest.class_index())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler
        .draw_batch(batch_size, &mut rng)
        .into_iter()
        .map(|r| manifest.frame(r).key())
        .collect())
}
