#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod math;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub mod data;
pub mod losses;
pub mod metrics;
pub mod payload;
pub mod sampler;
pub mod synthetic;
pub mod features;
pub mod model;
pub mod augment;
pub mod predictions;
pub mod train;
pub mod verify;
pub mod ablation;
