//! Adversarial training: objectives, quality targets, augmentation,
//! learning-rate schedule, synthetic data and the update loop.

pub mod augment;
pub mod data;
pub mod losses;
pub mod oracle;
pub mod schedule;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::dsp::MrstftConfig;
use crate::error::{Error, Result};

pub use data::{make_synthetic_dataset, Example};
pub use losses::{discriminator_loss, generator_loss, mixup, LossWeights, MixupPolicy};
pub use oracle::{ExternalScorer, QualityOracle, SiSnrProxy};
pub use schedule::lr_schedule;
pub use trainer::{evaluate, train, Batch, EvalReport, StepRecord, Trainer};

/// Crop lengths must be a multiple of this many samples.
pub const CROP_ALIGNMENT: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Samples per training crop.
    pub crop_len: usize,
    pub peak_lr: f64,
    pub warmup_frac: f64,
    pub seed: u64,
    pub remix: bool,
    pub bandmask: bool,
    pub revecho: bool,
    /// Checkpoint period in steps; 0 keeps only the final checkpoint.
    pub checkpoint_every: usize,
    pub weights: LossWeights,
    pub mixup: MixupPolicy,
    pub mrstft: MrstftConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 4,
            crop_len: 4096,
            peak_lr: schedule::DEFAULT_PEAK_LR,
            warmup_frac: schedule::DEFAULT_WARMUP,
            seed: 0,
            remix: true,
            bandmask: true,
            revecho: false,
            checkpoint_every: 0,
            weights: LossWeights::default(),
            mixup: MixupPolicy::default(),
            mrstft: MrstftConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.crop_len == 0 || self.crop_len % CROP_ALIGNMENT != 0 {
            return bad(format!("crop_len {} must be a positive multiple of {CROP_ALIGNMENT}", self.crop_len));
        }
        if self.crop_len < self.mrstft.min_len() {
            return bad(format!(
                "crop_len {} is shorter than the largest STFT window {}",
                self.crop_len,
                self.mrstft.min_len()
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.peak_lr >= 0.0 && self.peak_lr.is_finite()) {
            return bad(format!("peak_lr {} must be finite and non-negative", self.peak_lr));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return bad(format!("warmup_frac {} outside [0, 1]", self.warmup_frac));
        }
        self.weights.validate()?;
        self.mixup.validate()?;
        self.mrstft.validate()
    }
}
