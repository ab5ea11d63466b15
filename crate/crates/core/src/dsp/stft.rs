//! Short-time Fourier analysis with Hann windows and reflect center padding.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{arg_err, shape_err, Result};
use crate::parallel::map_range;
use crate::tensor::{Scalar, Tensor};

/// One analysis resolution. The window occupies the first `win_length`
/// samples of each `fft_size` frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftResolution {
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
    window: Vec<f64>,
}

impl StftResolution {
    pub fn new(fft_size: usize, hop: usize, win_length: usize) -> Result<Self> {
        if !fft_size.is_power_of_two() {
            return arg_err(format!("fft size {fft_size} is not a power of two"));
        }
        if hop == 0 || hop > win_length || win_length > fft_size {
            return arg_err(format!(
                "need 0 < hop ({hop}) <= win_length ({win_length}) <= fft_size ({fft_size})"
            ));
        }
        Ok(Self {
            fft_size,
            hop,
            win_length,
            window: hann(win_length),
        })
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn pad(&self) -> usize {
        self.win_length / 2
    }

    pub fn frames(&self, len: usize) -> usize {
        1 + (len + 2 * self.pad() - self.win_length) / self.hop
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len < self.win_length {
            return shape_err(format!(
                "signal of {len} samples is shorter than one window ({})",
                self.win_length
            ));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn reflect_index(p: usize, pad: usize, len: usize) -> usize {
    if p < pad {
        pad - p
    } else if p - pad < len {
        p - pad
    } else {
        2 * (len - 1) - (p - pad)
    }
}

/// Complex spectrum of every frame: `[frames][bins]`.
pub fn stft<S: Scalar>(x: &[S], res: &StftResolution) -> Result<Vec<Vec<Complex<S>>>> {
    res.check_len(x.len())?;
    let n = res.fft_size;
    let fft = FftPlanner::<S>::new().plan_fft_forward(n);
    let win: Vec<S> = res.window.iter().map(|&w| S::of(w)).collect();
    let frames = res.frames(x.len());
    let pad = res.pad();
    Ok(map_range(frames, |f| {
        let mut buf = vec![Complex::<S>::default(); n];
        for (i, &w) in win.iter().enumerate() {
            buf[i].re = x[reflect_index(f * res.hop + i, pad, x.len())] * w;
        }
        fft.process(&mut buf);
        buf.truncate(res.bins());
        buf
    }))
}

/// Inverse of [`stft`] by windowed overlap-add, normalized by the summed
/// squared window. Returns `len` samples.
pub fn istft<S: Scalar>(spec: &[Vec<Complex<S>>], res: &StftResolution, len: usize) -> Result<Vec<S>> {
    if spec.len() != res.frames(len) {
        return shape_err(format!(
            "istft: {} frames, expected {} for {len} samples",
            spec.len(),
            res.frames(len)
        ));
    }
    let n = res.fft_size;
    let ifft = FftPlanner::<S>::new().plan_fft_inverse(n);
    let pad = res.pad();
    let total = len + 2 * pad;
    let mut acc = vec![0.0f64; total];
    let mut norm = vec![0.0f64; total];
    let mut buf = vec![Complex::<S>::default(); n];
    for (f, frame) in spec.iter().enumerate() {
        if frame.len() != res.bins() {
            return shape_err("istft: wrong bin count");
        }
        buf.fill(Complex::default());
        buf[..res.bins()].copy_from_slice(frame);
        for k in 1..n - res.bins() + 1 {
            buf[n - k] = frame[k].conj();
        }
        ifft.process(&mut buf);
        for (i, &w) in res.window.iter().enumerate() {
            let p = f * res.hop + i;
            if p < total {
                acc[p] += buf[i].re.f64() / n as f64 * w;
                norm[p] += w * w;
            }
        }
    }
    Ok((0..len)
        .map(|i| {
            let p = i + pad;
            if norm[p] > 1e-10 {
                S::of(acc[p] / norm[p])
            } else {
                S::zero()
            }
        })
        .collect())
}

/// Magnitude spectrogram `|STFT(x)|` as a differentiable op: `[T] -> [frames, bins]`.
pub fn stft_magnitude<'g, S: Scalar>(x: Var<'g, S>, res: &StftResolution) -> Result<Var<'g, S>> {
    let shape = x.shape();
    if shape.len() != 1 {
        return shape_err(format!("stft_magnitude: expected [T], got {shape:?}"));
    }
    let len = shape[0];
    let spec = stft(x.value().data(), res)?;
    let (frames, bins) = (spec.len(), res.bins());
    let mut mag = Vec::with_capacity(frames * bins);
    for frame in &spec {
        mag.extend(frame.iter().map(|c| c.norm()));
    }
    let value = Tensor::new(&[frames, bins], mag)?;
    let res = res.clone();
    x.graph().record("stft_magnitude", value, &[x], move |ctx| {
        let n = res.fft_size;
        let pad = res.pad();
        let ifft = FftPlanner::<S>::new().plan_fft_inverse(n);
        let mag = ctx.output.data();
        let g = ctx.grad.data();
        let per_frame = map_range(frames, |f| {
            let mut buf = vec![Complex::<S>::default(); n];
            for k in 0..bins {
                let m = mag[f * bins + k];
                if m > S::zero() {
                    buf[k] = spec[f][k] * (g[f * bins + k] / m);
                }
            }
            ifft.process(&mut buf);
            res.window
                .iter()
                .enumerate()
                .map(|(i, &w)| buf[i].re * S::of(w))
                .collect::<Vec<S>>()
        });
        let mut gx = vec![S::zero(); len];
        for (f, frame_grad) in per_frame.iter().enumerate() {
            for (i, &v) in frame_grad.iter().enumerate() {
                let j = reflect_index(f * res.hop + i, pad, len);
                gx[j] = gx[j] + v;
            }
        }
        vec![Some(Tensor::new(&[len], gx).expect("stft grad"))]
    })
}
