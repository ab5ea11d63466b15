//! Fourier analysis, the multi-resolution STFT loss and waveform metrics.

pub mod fft;
pub mod loss;
pub mod metrics;
pub mod stft;

pub use loss::{mrstft_loss, mrstft_terms, MrstftConfig};
pub use metrics::{si_snr, snr_db};
pub use stft::{stft_magnitude, StftResolution};
