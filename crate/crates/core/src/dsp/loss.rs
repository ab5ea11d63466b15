//! Multi-resolution STFT loss.
//!
//! For every resolution the loss adds the spectral convergence
//! `||S(x) - S(x_hat)||_F / ||S(x)||_F` and the log-magnitude distance
//! `(1/T) * || log S(x) - log S(x_hat) ||_1`, where `T` is the waveform length
//! and magnitudes are clamped at `log_floor` before the log.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, Var};
use crate::dsp::stft::{stft_magnitude, StftResolution};
use crate::error::{arg_err, shape_err, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrstftConfig {
    pub resolutions: Vec<StftResolution>,
    pub log_floor: f64,
}

impl Default for MrstftConfig {
    fn default() -> Self {
        Self::new(
            [(512, 128, 512), (1024, 256, 1024), (2048, 512, 2048)],
            1e-7,
        )
        .expect("default resolutions are valid")
    }
}

impl MrstftConfig {
    /// `(fft_size, hop, win_length)` per resolution.
    pub fn new(resolutions: impl IntoIterator<Item = (usize, usize, usize)>, log_floor: f64) -> Result<Self> {
        let resolutions = resolutions
            .into_iter()
            .map(|(n, h, w)| StftResolution::new(n, h, w))
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self { resolutions, log_floor };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return arg_err("mrstft: at least one resolution is required");
        }
        if !(self.log_floor > 0.0) {
            return arg_err("mrstft: log_floor must be positive");
        }
        Ok(())
    }

    /// Shortest signal every resolution can analyse.
    pub fn min_len(&self) -> usize {
        self.resolutions.iter().map(|r| r.win_length).max().unwrap_or(1)
    }
}

/// The two terms of one resolution.
pub struct MrstftTerms<'g, S> {
    pub spectral_convergence: Var<'g, S>,
    pub log_magnitude: Var<'g, S>,
}

/// Per-resolution terms for a clean reference `x` (constant) and an
/// estimate `x_hat`, both `[T]`.
pub fn mrstft_terms<'g, S: Scalar>(
    x: &Tensor<S>,
    x_hat: Var<'g, S>,
    cfg: &MrstftConfig,
) -> Result<Vec<MrstftTerms<'g, S>>> {
    cfg.validate()?;
    let len = x.len();
    if x.shape() != [len] || x_hat.shape() != [len] {
        return shape_err(format!(
            "mrstft: reference {:?} and estimate {:?} must be equal-length [T]",
            x.shape(),
            x_hat.shape()
        ));
    }
    let g = x_hat.graph();
    let xv = g.constant(x.clone());
    let mut out = Vec::with_capacity(cfg.resolutions.len());
    for res in &cfg.resolutions {
        let s_ref = stft_magnitude(xv, res)?;
        let s_est = stft_magnitude(x_hat, res)?;
        let ref_norm = ops::l2_norm(s_ref)?;
        if ref_norm.item() == S::zero() {
            return arg_err("mrstft: reference signal is silent");
        }
        let sc = ops::div_scalar(ops::l2_norm(ops::sub(s_ref, s_est)?)?, ref_norm)?;
        let log_ref = ops::ln(ops::clamp_min(s_ref, cfg.log_floor)?)?;
        let log_est = ops::ln(ops::clamp_min(s_est, cfg.log_floor)?)?;
        let mag = ops::scale(ops::sum(ops::abs(ops::sub(log_ref, log_est)?)?)?, 1.0 / len as f64)?;
        out.push(MrstftTerms {
            spectral_convergence: sc,
            log_magnitude: mag,
        });
    }
    Ok(out)
}

pub fn mrstft_loss<'g, S: Scalar>(x: &Tensor<S>, x_hat: Var<'g, S>, cfg: &MrstftConfig) -> Result<Var<'g, S>> {
    let terms = mrstft_terms(x, x_hat, cfg)?;
    let mut total: Option<Var<'g, S>> = None;
    for t in terms {
        let both = ops::add(t.spectral_convergence, t.log_magnitude)?;
        total = Some(match total {
            Some(acc) => ops::add(acc, both)?,
            None => both,
        });
    }
    Ok(total.expect("at least one resolution"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;

    fn small_cfg() -> MrstftConfig {
        MrstftConfig::new([(32, 8, 32), (64, 16, 64), (16, 4, 16)], 1e-7).unwrap()
    }

    fn signal(n: usize) -> Tensor<f64> {
        Tensor::from_fn(&[n], |i| (i as f64 * 0.3).sin() + 0.2 * (i as f64 * 1.7).cos())
    }

    #[test]
    fn identical_signals_give_zero() {
        let g = Graph::<f64>::new();
        let x = signal(160);
        let loss = mrstft_loss(&x, g.constant(x.clone()), &small_cfg()).unwrap();
        assert_eq!(loss.item(), 0.0);
    }

    #[test]
    fn silent_estimate_gives_unit_convergence_per_resolution() {
        let g = Graph::<f64>::new();
        let x = signal(160);
        let cfg = small_cfg();
        let terms = mrstft_terms(&x, g.constant(Tensor::zeros(&[160])), &cfg).unwrap();
        let sc: f64 = terms.iter().map(|t| t.spectral_convergence.item()).sum();
        assert_eq!(sc, cfg.resolutions.len() as f64);
    }

    #[test]
    fn silent_reference_is_an_error() {
        let g = Graph::<f64>::new();
        let x = Tensor::zeros(&[160]);
        assert!(mrstft_loss(&x, g.constant(signal(160)), &small_cfg()).is_err());
    }

    #[test]
    fn resolution_order_does_not_matter() {
        let g = Graph::<f64>::new();
        let x = signal(200);
        let est = g.constant(Tensor::from_fn(&[200], |i| (i as f64 * 0.31).sin()));
        let cfg = small_cfg();
        let mut rev = cfg.clone();
        rev.resolutions.reverse();
        let a = mrstft_loss(&x, est, &cfg).unwrap().item();
        let b = mrstft_loss(&x, est, &rev).unwrap().item();
        assert!((a - b).abs() < 1e-12);
    }
}
