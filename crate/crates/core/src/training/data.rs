//! Synthetic speech-like corpus: tonal clean signals with slow amplitude
//! envelopes mixed with white or pink noise at fixed SNRs.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::metrics::snr_db;
use crate::error::{arg_err, Result};
use crate::io::wav::SAMPLE_RATE;

/// Training SNR grid in dB.
pub const SNR_GRID_DB: [f64; 4] = [0.0, 5.0, 10.0, 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    White,
    Pink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub clean: Vec<f32>,
    pub noisy: Vec<f32>,
    pub snr_db: f64,
    pub noise: NoiseKind,
}

impl Example {
    pub fn noise_component(&self) -> Vec<f32> {
        self.noisy.iter().zip(&self.clean).map(|(n, c)| n - c).collect()
    }
}

/// Sum of 2-4 sinusoids (100 Hz - 4 kHz), each with a slow sinusoidal
/// envelope; peak amplitude stays below 0.9.
pub fn synth_clean<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f32> {
    let n = rng.random_range(2..=4);
    let sr = SAMPLE_RATE as f64;
    let mut out = vec![0.0f64; len];
    for _ in 0..n {
        let f = rng.random_range(100.0..4000.0);
        let phase = rng.random_range(0.0..TAU);
        let amp = rng.random_range(0.2..1.0);
        let env_f = rng.random_range(1.0..6.0);
        let env_phase = rng.random_range(0.0..TAU);
        for (i, o) in out.iter_mut().enumerate() {
            let t = i as f64 / sr;
            let env = 0.5 * (1.0 + (TAU * env_f * t + env_phase).sin());
            *o += amp * env * (TAU * f * t + phase).sin();
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let target = rng.random_range(0.3..0.9);
    let g = if peak > 0.0 { target / peak } else { 0.0 };
    out.into_iter().map(|v| (v * g) as f32).collect()
}

/// Unit-variance-ish noise of the requested colour.
pub fn synth_noise<R: Rng + ?Sized>(rng: &mut R, len: usize, kind: NoiseKind) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    match kind {
        NoiseKind::White => white,
        NoiseKind::Pink => {
            // Paul Kellet's economy pink filter.
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            white
                .into_iter()
                .map(|w| {
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
    }
}

/// Adds `noise` to `clean` scaled to exactly `snr` dB.
pub fn mix_at_snr(clean: &[f32], noise: &[f64], snr: f64) -> Vec<f32> {
    let pc: f64 = clean.iter().map(|&v| (v as f64).powi(2)).sum();
    let pn: f64 = noise.iter().map(|v| v * v).sum();
    let g = if pn > 0.0 { (pc / (pn * 10f64.powf(snr / 10.0))).sqrt() } else { 0.0 };
    clean.iter().zip(noise).map(|(&c, &n)| (c as f64 + g * n) as f32).collect()
}

/// `n` clean/noisy pairs of `len` samples, deterministic in `seed`.
pub fn make_synthetic_dataset(n: usize, len: usize, seed: u64) -> Result<Vec<Example>> {
    if len == 0 {
        return arg_err("synthetic clips need at least one sample");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let clean = synth_clean(&mut rng, len);
            let kind = if rng.random_bool(0.5) { NoiseKind::White } else { NoiseKind::Pink };
            let snr = SNR_GRID_DB[rng.random_range(0..SNR_GRID_DB.len())];
            let noise = synth_noise(&mut rng, len, kind);
            let noisy = mix_at_snr(&clean, &noise, snr);
            Example {
                clean,
                noisy,
                snr_db: snr,
                noise: kind,
            }
        })
        .collect())
}

/// Realized SNR of an example.
pub fn measured_snr(ex: &Example) -> f64 {
    let c: Vec<f64> = ex.clean.iter().map(|&v| v as f64).collect();
    let n: Vec<f64> = ex.noise_component().iter().map(|&v| v as f64).collect();
    snr_db(&c, &n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_matches_request() {
        for ex in make_synthetic_dataset(24, 4000, 7).unwrap() {
            let got = measured_snr(&ex);
            assert!((got - ex.snr_db).abs() < 0.1, "{got} vs {}", ex.snr_db);
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = make_synthetic_dataset(5, 2000, 1).unwrap();
        let b = make_synthetic_dataset(5, 2000, 1).unwrap();
        let c = make_synthetic_dataset(5, 2000, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for ex in &a {
            assert!(ex.clean.iter().all(|v| v.abs() <= 1.0));
            assert!(ex.clean.iter().any(|v| *v != 0.0));
        }
    }

    #[test]
    fn both_noise_colours_occur() {
        let d = make_synthetic_dataset(32, 256, 3).unwrap();
        assert!(d.iter().any(|e| e.noise == NoiseKind::White));
        assert!(d.iter().any(|e| e.noise == NoiseKind::Pink));
    }
}
