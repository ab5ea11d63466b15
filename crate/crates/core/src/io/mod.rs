//! Audio files, configuration text and weight archives.

pub mod archive;
pub mod config;
pub mod wav;

pub use archive::{load_weights, save_weights, ArchiveTensor, LoadedModels, WeightArchive};
pub use config::{DataConfig, RunConfig};
pub use wav::{read_wav, write_wav, AudioClip, SAMPLE_RATE};
