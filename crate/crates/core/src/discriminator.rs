//! Metric discriminator: predicts a normalized quality score for a
//! (reference, candidate) waveform pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, Graph, Var};
use crate::error::{shape_err, Error, Result};
use crate::params::{uniform_init, Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Output channels of the four conv blocks.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    /// Time bins after adaptive max pooling.
    pub pooled_len: usize,
    /// Width of the hidden linear layer.
    pub linear_hidden: usize,
    /// Upper bound of the learnable sigmoid.
    pub sigma_max: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            channels: vec![16, 32, 64, 128],
            kernel: 15,
            stride: 2,
            pooled_len: 16,
            linear_hidden: 64,
            sigma_max: 1.2,
        }
    }
}

impl DiscriminatorConfig {
    pub fn tiny() -> Self {
        Self {
            channels: vec![8, 8, 16, 16],
            pooled_len: 8,
            linear_hidden: 16,
            ..Self::default()
        }
    }

    pub fn flat_features(&self) -> usize {
        self.channels.last().copied().unwrap_or(0) * self.pooled_len
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.channels.len() != 4 {
            return bad(format!("discriminator needs exactly 4 conv blocks, got {}", self.channels.len()));
        }
        if self.channels.iter().any(|&c| c == 0) || self.kernel == 0 || self.stride == 0 {
            return bad("discriminator channels, kernel and stride must be >= 1".into());
        }
        if self.pooled_len == 0 || self.linear_hidden == 0 {
            return bad("pooled_len and linear_hidden must be >= 1".into());
        }
        if !(self.sigma_max > 0.0) {
            return bad("sigma_max must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BlockIds {
    pub conv_w: ParamId,
    pub conv_b: ParamId,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
    pub slope: ParamId,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorLayout {
    pub blocks: Vec<BlockIds>,
    pub fc1_w: ParamId,
    pub fc1_b: ParamId,
    pub fc_slope: ParamId,
    pub fc2_w: ParamId,
    pub fc2_b: ParamId,
    pub beta: ParamId,
}

#[derive(Debug, Clone)]
pub struct Discriminator<S> {
    cfg: DiscriminatorConfig,
    pub store: ParamStore<S>,
    layout: DiscriminatorLayout,
}

impl<S: Scalar> Discriminator<S> {
    pub fn new(cfg: DiscriminatorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let k = cfg.kernel;
        let mut cin = 2;
        let mut blocks = Vec::with_capacity(4);
        for (i, &c) in cfg.channels.iter().enumerate() {
            let p = format!("disc.block.{}", i + 1);
            blocks.push(BlockIds {
                conv_w: store.add(format!("{p}.conv.weight"), uniform_init(&mut rng, &[c, cin, k], cin * k)),
                conv_b: store.add(format!("{p}.conv.bias"), uniform_init(&mut rng, &[c], cin * k)),
                norm_gamma: store.add(format!("{p}.norm.weight"), Tensor::ones(&[c])),
                norm_beta: store.add(format!("{p}.norm.bias"), Tensor::zeros(&[c])),
                slope: store.add(format!("{p}.prelu.weight"), Tensor::full(&[c], S::of(0.25))),
            });
            cin = c;
        }
        let f = cfg.flat_features();
        let h = cfg.linear_hidden;
        let layout = DiscriminatorLayout {
            blocks,
            fc1_w: store.add("disc.fc1.weight", uniform_init(&mut rng, &[h, f], f)),
            fc1_b: store.add("disc.fc1.bias", uniform_init(&mut rng, &[h], f)),
            fc_slope: store.add("disc.fc1.prelu.weight", Tensor::full(&[1], S::of(0.25))),
            fc2_w: store.add("disc.fc2.weight", uniform_init(&mut rng, &[1, h], h)),
            fc2_b: store.add("disc.fc2.bias", uniform_init(&mut rng, &[1], h)),
            beta: store.add("disc.sigmoid.beta", Tensor::scalar(S::one())),
        };
        Ok(Self { cfg, store, layout })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &DiscriminatorLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.store.num_trainable()
    }

    /// Scores `[B]` in `(0, sigma_max)` for `x, u: [B, 1, T]`.
    pub fn forward<'g>(&self, bound: &Bound<'g, S>, x: Var<'g, S>, u: Var<'g, S>) -> Result<Var<'g, S>> {
        let (xs, us) = (x.shape(), u.shape());
        if xs != us || xs.len() != 3 || xs[1] != 1 {
            return shape_err(format!("discriminator inputs must be equal [B, 1, T], got {xs:?} and {us:?}"));
        }
        let nb = xs[0];
        let mut h = ops::concat_channels(&[x, u])?;
        for b in &self.layout.blocks {
            h = ops::conv1d_causal(h, bound.var(b.conv_w), Some(bound.var(b.conv_b)), self.cfg.stride, 1)?;
            h = ops::instance_norm(h, bound.var(b.norm_gamma), bound.var(b.norm_beta))?;
            h = ops::prelu(h, bound.var(b.slope))?;
        }
        let h = ops::adaptive_max_pool_time(h, self.cfg.pooled_len)?;
        let h = ops::reshape(h, &[nb, self.cfg.flat_features()])?;
        let l = &self.layout;
        let h = ops::linear(h, bound.var(l.fc1_w), bound.var(l.fc1_b))?;
        let h = ops::prelu(h, bound.var(l.fc_slope))?;
        let v = ops::linear(h, bound.var(l.fc2_w), bound.var(l.fc2_b))?;
        let v = ops::mul_scalar_var(v, bound.var(l.beta))?;
        let s = ops::scale(ops::sigmoid(v)?, self.cfg.sigma_max)?;
        ops::reshape(s, &[nb])
    }

    /// Scores for constant inputs without recording gradients.
    pub fn score(&self, x: &Tensor<S>, u: &Tensor<S>) -> Result<Tensor<S>> {
        let g = Graph::inference();
        let bound = self.store.bind(&g, false);
        Ok(self.forward(&bound, g.constant(x.clone()), g.constant(u.clone()))?.to_tensor())
    }

    pub fn cast<T: Scalar>(&self) -> Discriminator<T> {
        Discriminator {
            cfg: self.cfg.clone(),
            store: self.store.cast(),
            layout: self.layout.clone(),
        }
    }
}
