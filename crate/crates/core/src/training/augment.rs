//! Training-time augmentations: noise remixing, frequency band masking and
//! synthetic echoes.

use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::stft::{istft, stft, StftResolution};
use crate::error::{arg_err, Result};

/// Shuffles noise components across the batch. `noise[i]` is re-paired with
/// `clean[perm[i]]`; returns the permutation applied.
pub fn augment_remix<R: Rng + ?Sized>(noise: &mut [Vec<f32>], rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..noise.len()).collect();
    perm.shuffle(rng);
    let orig = noise.to_vec();
    for (dst, &src) in noise.iter_mut().zip(&perm) {
        *dst = orig[src].clone();
    }
    perm
}

/// Fraction of the band a mask may cover at most.
pub const BANDMASK_MAX_FRACTION: f64 = 0.2;

/// Analysis resolution used by [`augment_bandmask`].
pub fn bandmask_resolution() -> StftResolution {
    StftResolution::new(512, 128, 512).expect("valid resolution")
}

/// Zeroes STFT bins `[start, start + width)` and resynthesizes.
pub fn bandmask(x: &[f32], start: usize, width: usize, res: &StftResolution) -> Result<Vec<f32>> {
    if start + width > res.bins() {
        return arg_err(format!("bandmask: bins {start}..{} exceed {}", start + width, res.bins()));
    }
    let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut spec = stft(&xs, res)?;
    for frame in &mut spec {
        for b in &mut frame[start..start + width] {
            *b = Complex::new(0.0, 0.0);
        }
    }
    Ok(istft(&spec, res, x.len())?.into_iter().map(|v| v as f32).collect())
}

/// Masks a random contiguous band covering at most 20% of the bins.
pub fn augment_bandmask<R: Rng + ?Sized>(noisy: &[f32], rng: &mut R) -> Result<Vec<f32>> {
    let res = bandmask_resolution();
    let bins = res.bins();
    let max_w = (bins as f64 * BANDMASK_MAX_FRACTION).floor() as usize;
    let width = rng.random_range(0..=max_w);
    let start = rng.random_range(0..=bins - width);
    bandmask(noisy, start, width, &res)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoParams {
    /// Gain of the first echo.
    pub gain: f64,
    /// Gain ratio between consecutive echoes.
    pub decay: f64,
    /// Delay of the first echo and spacing between echoes, in samples.
    pub delay: usize,
    pub count: usize,
}

/// `y[n] = x[n] + sum_k gain * decay^(k-1) * x[n - k*delay]`.
pub fn add_echoes(x: &[f32], p: &EchoParams) -> Vec<f32> {
    let mut y = x.to_vec();
    if p.delay == 0 {
        return y;
    }
    let mut g = p.gain;
    for k in 1..=p.count {
        let d = k * p.delay;
        if d >= x.len() {
            break;
        }
        for n in d..x.len() {
            y[n] += (g * x[n - d] as f64) as f32;
        }
        g *= p.decay;
    }
    y
}

/// Random echo settings: gain up to 0.3, decay 0.3..0.7, first delay
/// 10..50 ms at 16 kHz, up to 4 echoes.
pub fn sample_echo<R: Rng + ?Sized>(rng: &mut R) -> EchoParams {
    EchoParams {
        gain: rng.random_range(0.0..0.3),
        decay: rng.random_range(0.3..0.7),
        delay: rng.random_range(160..800),
        count: rng.random_range(1..=4),
    }
}

/// Applies the same echo pattern to the clean and noise components.
pub fn augment_revecho<R: Rng + ?Sized>(clean: &[f32], noise: &[f32], rng: &mut R) -> (Vec<f32>, Vec<f32>) {
    let p = sample_echo(rng);
    (add_echoes(clean, &p), add_echoes(noise, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signal(n: usize) -> Vec<f32> {
        (0..n).map(|i| ((i as f32 * 0.07).sin() + (i as f32 * 1.3).cos()) * 0.3).collect()
    }

    #[test]
    fn remix_single_item_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut n = vec![vec![1.0, 2.0]];
        augment_remix(&mut n, &mut rng);
        assert_eq!(n, vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn remix_preserves_multiset_and_seed() {
        let base: Vec<Vec<f32>> = (0..6).map(|i| vec![i as f32; 3]).collect();
        let mut a = base.clone();
        let mut b = base.clone();
        let pa = augment_remix(&mut a, &mut ChaCha8Rng::seed_from_u64(5));
        augment_remix(&mut b, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let mut sorted = pa.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        for (i, &p) in pa.iter().enumerate() {
            assert_eq!(a[i], base[p]);
        }
    }

    #[test]
    fn zero_width_mask_is_identity() {
        let x = signal(2048);
        let y = bandmask(&x, 40, 0, &bandmask_resolution()).unwrap();
        let d = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn masked_band_loses_its_energy() {
        let res = bandmask_resolution();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f32> = (0..4096).map(|_| rng.random_range(-0.5..0.5)).collect();
        let y = bandmask(&x, 60, 40, &res).unwrap();
        let ys: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let spec = stft(&ys, &res).unwrap();
        let band = |lo: usize, hi: usize| -> f64 {
            spec[2..spec.len() - 2].iter().map(|f| f[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>()).sum::<f64>()
                / (hi - lo) as f64
        };
        let masked = band(62, 98);
        let kept = band(150, 250);
        assert!(masked < kept * 1e-3, "{masked} vs {kept}");
    }

    #[test]
    fn bandmask_is_seed_reproducible_and_bounded() {
        let x = signal(4096);
        let a = augment_bandmask(&x, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = augment_bandmask(&x, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(bandmask(&x, 250, 10, &bandmask_resolution()).is_err());
    }

    #[test]
    fn zero_gain_echo_is_identity() {
        let x = signal(1000);
        let p = EchoParams { gain: 0.0, decay: 0.5, delay: 100, count: 3 };
        assert_eq!(add_echoes(&x, &p), x);
    }

    #[test]
    fn first_echo_lands_at_delay() {
        let mut x = vec![0.0f32; 50];
        x[0] = 1.0;
        let p = EchoParams { gain: 0.5, decay: 0.5, delay: 7, count: 3 };
        let y = add_echoes(&x, &p);
        let nz: Vec<(usize, f32)> = y.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(nz, vec![(0, 1.0), (7, 0.5), (14, 0.25), (21, 0.125)]);
    }

    #[test]
    fn energy_grows_with_gain() {
        let x: Vec<f32> = vec![0.5; 400];
        let energy = |g: f64| {
            add_echoes(&x, &EchoParams { gain: g, decay: 0.5, delay: 30, count: 3 })
                .iter()
                .map(|v| (*v as f64).powi(2))
                .sum::<f64>()
        };
        let e: Vec<f64> = [0.0, 0.1, 0.2, 0.4].iter().map(|&g| energy(g)).collect();
        assert!(e.windows(2).all(|p| p[1] > p[0]), "{e:?}");
    }

    #[test]
    fn revecho_treats_both_components_alike() {
        let c = signal(3000);
        let n: Vec<f32> = c.iter().map(|v| v * 2.0).collect();
        let (ce, ne) = augment_revecho(&c, &n, &mut ChaCha8Rng::seed_from_u64(9));
        for (a, b) in ce.iter().zip(&ne) {
            assert!((a * 2.0 - b).abs() < 1e-5);
        }
    }
}
