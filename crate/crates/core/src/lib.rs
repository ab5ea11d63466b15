//! Causal time-domain speech enhancement: a Res2Net/squeeze-excitation U-Net
//! generator with a GRU bottleneck, a metric discriminator, the training
//! losses, streaming inference and footprint accounting, all on a small
//! reverse-mode autodiff core.

pub mod accounting;
pub mod autodiff;
pub mod discriminator;
pub mod dsp;
pub mod error;
pub mod generator;
pub mod io;
pub mod kernels;
pub mod optim;
pub mod parallel;
pub mod params;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
