//! Online payload augmentation: a mirror flip of half the descriptor plus
//! Gaussian jitter.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::synthetic::mirror_range;

#[derive(Debug, Clone, PartialEq)]
pub struct Augmenter {
    flip_probability: f64,
    sigma: f64,
    mirror: Range<usize>,
}

impl Augmenter {
    pub fn new(descriptor_dim: usize, flip_probability: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_probability) {
            return Err(Error::Config(format!(
                "flip_probability must lie in [0, 1], got {flip_probability}"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("augment_sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            flip_probability,
            sigma,
            mirror: mirror_range(descriptor_dim),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.flip_probability == 0.0 && self.sigma == 0.0
    }

    pub fn draw_flip<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.flip_probability > 0.0 && rng.random_bool(self.flip_probability)
    }

    /// Applies a given flip decision, then the noise.
    pub fn apply<R: Rng + ?Sized>(&self, payload: &[f64], flip: bool, rng: &mut R) -> Vec<f64> {
        let mut out = payload.to_vec();
        if flip {
            for x in &mut out[self.mirror.start.min(payload.len())..] {
                *x = -*x;
            }
        }
        if self.sigma > 0.0 {
            let noise = Normal::new(0.0, self.sigma).expect("validated sigma");
            for x in &mut out {
                *x += noise.sample(rng);
            }
        }
        out
    }

    pub fn augment<R: Rng + ?Sized>(&self, payload: &[f64], rng: &mut R) -> Vec<f64> {
        let flip = self.draw_flip(rng);
        self.apply(payload, flip, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_configuration() {
        let a = Augmenter::new(6, 0.0, 0.0).unwrap();
        assert!(a.is_identity());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 3.0, 0.5, 0.25, -7.0];
        assert_eq!(a.augment(&x, &mut rng), x);
    }

    #[test]
    fn flip_is_an_involution() {
        let a = Augmenter::new(5, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let once = a.apply(&x, true, &mut rng);
        assert_eq!(once, vec![1.0, 2.0, 3.0, -4.0, -5.0]);
        assert_eq!(a.apply(&once, true, &mut rng), x);
    }

    #[test]
    fn flip_frequency() {
        let a = Augmenter::new(4, 0.5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let flips = (0..10_000).filter(|_| a.draw_flip(&mut rng)).count();
        let f = flips as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&f), "{f}");
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(Augmenter::new(4, 1.5, 0.0).is_err());
        assert!(Augmenter::new(4, 0.5, -1.0).is_err());
        assert!(Augmenter::new(4, 0.5, f64::NAN).is_err());
    }
}
