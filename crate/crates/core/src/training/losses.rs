//! Generator and discriminator objectives, and mixup.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, Var};
use crate::dsp::{mrstft_loss, MrstftConfig};
use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Waveform L1.
    pub alpha1: f64,
    /// Multi-resolution STFT.
    pub alpha2: f64,
    /// Adversarial (metric discriminator) term.
    pub alpha3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let a = [self.alpha1, self.alpha2, self.alpha3];
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        if a.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Beta distribution for the mixup coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupPolicy {
    pub beta_a: f64,
    pub beta_b: f64,
}

impl Default for MixupPolicy {
    fn default() -> Self {
        Self { beta_a: 1.0, beta_b: 1.0 }
    }
}

impl MixupPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_a > 0.0 && self.beta_b > 0.0 && self.beta_a.is_finite() && self.beta_b.is_finite()) {
            return Err(Error::Config("mixup Beta parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let d = Beta::new(self.beta_a, self.beta_b).map_err(|e| Error::Config(format!("mixup: {e}")))?;
        Ok(d.sample(rng).clamp(0.0, 1.0))
    }
}

/// `lambda * x + (1 - lambda) * x_hat`.
pub fn mixup<S: Scalar>(x: &Tensor<S>, x_hat: &Tensor<S>, lambda: f64) -> Result<Tensor<S>> {
    if !(0.0..=1.0).contains(&lambda) {
        return arg_err(format!("mixup: lambda {lambda} outside [0, 1]"));
    }
    if x.shape() != x_hat.shape() {
        return shape_err(format!("mixup: {:?} vs {:?}", x.shape(), x_hat.shape()));
    }
    if lambda == 1.0 {
        return Ok(x.clone());
    }
    if lambda == 0.0 {
        return Ok(x_hat.clone());
    }
    let l = S::of(lambda);
    Ok(x.zip_map(x_hat, |a, b| l * a + (S::one() - l) * b))
}

/// Generator objective and its weighted parts.
pub struct GeneratorLoss<'g, S> {
    pub total: Var<'g, S>,
    pub l1: f64,
    pub mrstft: f64,
    pub adversarial: f64,
}

/// `a1 * L1 + a2 * MRSTFT + a3 * mean((D - 1)^2)` for `x, x_hat: [B, 1, T]`
/// and discriminator scores `[B]`. Terms with a zero weight are skipped.
pub fn generator_loss<'g, S: Scalar>(
    x: &Tensor<S>,
    x_hat: Var<'g, S>,
    disc_score: Var<'g, S>,
    w: &LossWeights,
    cfg: &MrstftConfig,
) -> Result<GeneratorLoss<'g, S>> {
    w.validate()?;
    let shape = x_hat.shape();
    if x.shape() != shape.as_slice() || shape.len() != 3 || shape[1] != 1 {
        return shape_err(format!("generator_loss: reference {:?} vs estimate {shape:?}", x.shape()));
    }
    let nb = shape[0];
    if disc_score.shape() != [nb] {
        return shape_err(format!("generator_loss: scores {:?} for batch {nb}", disc_score.shape()));
    }
    let g = x_hat.graph();
    let mut parts: Vec<Var<'g, S>> = Vec::new();
    let (mut l1v, mut mrv, mut adv) = (0.0, 0.0, 0.0);
    if w.alpha1 > 0.0 {
        let l1 = ops::l1_mean(ops::sub(g.constant(x.clone()), x_hat)?)?;
        l1v = l1.item().f64();
        parts.push(ops::scale(l1, w.alpha1)?);
    }
    if w.alpha2 > 0.0 {
        let t = shape[2];
        let mut acc: Option<Var<'g, S>> = None;
        for b in 0..nb {
            let xr = Tensor::new(&[t], x.data()[b * t..(b + 1) * t].to_vec())?;
            let est = ops::reshape(ops::select_batch(x_hat, b)?, &[t])?;
            let l = mrstft_loss(&xr, est, cfg)?;
            acc = Some(match acc {
                Some(a) => ops::add(a, l)?,
                None => l,
            });
        }
        let m = ops::scale(acc.expect("non-empty batch"), 1.0 / nb as f64)?;
        mrv = m.item().f64();
        parts.push(ops::scale(m, w.alpha2)?);
    }
    if w.alpha3 > 0.0 {
        let a = ops::mean(ops::square(ops::add_scalar(disc_score, -1.0)?)?)?;
        adv = a.item().f64();
        parts.push(ops::scale(a, w.alpha3)?);
    }
    let mut total = parts[0];
    for p in &parts[1..] {
        total = ops::add(total, *p)?;
    }
    Ok(GeneratorLoss {
        total,
        l1: l1v,
        mrstft: mrv,
        adversarial: adv,
    })
}

/// Discriminator objective and its three parts.
pub struct DiscriminatorLoss<'g, S> {
    pub total: Var<'g, S>,
    pub clean: f64,
    pub enhanced: f64,
    pub mixed: f64,
}

fn mse_to<'g, S: Scalar>(score: Var<'g, S>, target: &[f64]) -> Result<Var<'g, S>> {
    if score.shape() != [target.len()] {
        return shape_err(format!("discriminator_loss: scores {:?} for {} targets", score.shape(), target.len()));
    }
    let t = Tensor::new(&[target.len()], target.iter().map(|&v| S::of(v)).collect())?;
    ops::mean(ops::square(ops::sub(score, score.graph().constant(t))?)?)
}

/// `mean((D(x,x) - 1)^2) + mean((D(x,x_hat) - Q_hat)^2) + mean((D(x,x_mix) - Q_mix)^2)`
/// from precomputed scores `[B]` and oracle targets.
pub fn discriminator_loss<'g, S: Scalar>(
    d_clean: Var<'g, S>,
    d_enhanced: Var<'g, S>,
    d_mixed: Var<'g, S>,
    q_enhanced: &[f64],
    q_mixed: &[f64],
) -> Result<DiscriminatorLoss<'g, S>> {
    let nb = q_enhanced.len();
    let a = mse_to(d_clean, &vec![1.0; nb])?;
    let b = mse_to(d_enhanced, q_enhanced)?;
    let c = mse_to(d_mixed, q_mixed)?;
    let (clean, enhanced, mixed) = (a.item().f64(), b.item().f64(), c.item().f64());
    Ok(DiscriminatorLoss {
        total: ops::add(ops::add(a, b)?, c)?,
        clean,
        enhanced,
        mixed,
    })
}
