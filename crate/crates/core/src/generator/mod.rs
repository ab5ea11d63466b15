//! U-Net generator: causal encoder layers (strided conv, Res2Net block,
//! squeeze-excitation, pointwise conv + GLU), a two-layer GRU bottleneck and
//! a mirrored decoder with additive skip connections.

mod blocks;
mod config;
mod stream;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ops, Graph, Var};
use crate::error::{shape_err, Result};
use crate::params::{uniform_init, Bound, ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

pub use blocks::{res2_forward, se_forward, Res2KernelIds};
pub use config::GeneratorConfig;
pub use stream::StreamState;

/// Normalization statistics source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are reported for update.
    Train,
    /// Stored running statistics.
    Infer,
}

/// How squeeze-excitation pools over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SebMode {
    /// Mean over the whole utterance.
    Exact,
    /// Causal running mean up to each frame; the streaming-compatible form.
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOptions {
    pub norm: NormMode,
    pub seb: SebMode,
}

impl ForwardOptions {
    pub fn train() -> Self {
        Self {
            norm: NormMode::Train,
            seb: SebMode::Running,
        }
    }

    pub fn infer() -> Self {
        Self {
            norm: NormMode::Infer,
            seb: SebMode::Running,
        }
    }
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self::infer()
    }
}

#[derive(Debug, Clone)]
pub struct SeIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Debug, Clone)]
pub struct EncoderIds {
    pub conv_w: ParamId,
    pub conv_b: ParamId,
    pub res2: Vec<Res2KernelIds>,
    pub se: SeIds,
    pub pw_w: ParamId,
    pub pw_b: ParamId,
}

#[derive(Debug, Clone)]
pub struct GruIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
}

#[derive(Debug, Clone)]
pub struct DecoderIds {
    pub pw_w: ParamId,
    pub pw_b: ParamId,
    pub tconv_w: ParamId,
    pub tconv_b: ParamId,
}

/// Parameter ids of every block, in encoder order.
#[derive(Debug, Clone)]
pub struct GeneratorLayout {
    pub encoders: Vec<EncoderIds>,
    pub gru: Vec<GruIds>,
    /// `decoders[i]` mirrors `encoders[i]`; applied last-to-first.
    pub decoders: Vec<DecoderIds>,
}

/// Batch statistics collected in [`NormMode::Train`].
pub struct BnStats<S> {
    pub mean_id: ParamId,
    pub var_id: ParamId,
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

pub struct GeneratorOutput<'g, S> {
    pub output: Var<'g, S>,
    pub bn_stats: Vec<BnStats<S>>,
}

pub const BN_MOMENTUM: f64 = 0.1;

/// Target weight standard deviation for the convolution rescaling below.
pub const CONV_RESCALE_REFERENCE: f64 = 0.1;

/// Divides a convolution's weight and bias by `sqrt(std(w) / 0.1)`, pulling
/// the initial weight scale toward 0.1 so the deep skip path starts with a
/// usable gain.
fn rescale_conv<S: Scalar>(store: &mut ParamStore<S>, w: ParamId, b: ParamId) {
    let data = store.get(w).data();
    let n = data.len() as f64;
    let mean = data.iter().map(|v| v.f64()).sum::<f64>() / n;
    let var = data.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return;
    }
    let inv = S::of(1.0 / (std / CONV_RESCALE_REFERENCE).sqrt());
    for id in [w, b] {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = *v * inv);
    }
}

#[derive(Debug, Clone)]
pub struct Generator<S> {
    cfg: GeneratorConfig,
    pub store: ParamStore<S>,
    layout: GeneratorLayout,
}

impl<S: Scalar> Generator<S> {
    pub fn new(cfg: GeneratorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut encoders = Vec::with_capacity(cfg.layers);
        let mut decoders = Vec::with_capacity(cfg.layers);
        let k = cfg.kernel;
        let mut cin = 1;
        for i in 1..=cfg.layers {
            let c = cfg.channels(i);
            let p = format!("encoder.{i}");
            let conv_w = store.add(format!("{p}.conv.weight"), uniform_init(&mut rng, &[c, cin, k], cin * k));
            let conv_b = store.add(format!("{p}.conv.bias"), uniform_init(&mut rng, &[c], cin * k));
            let g = cfg.res2_group(i);
            let rk = cfg.res2_kernel;
            let res2 = (2..=cfg.res2_scale)
                .map(|j| {
                    let q = format!("{p}.res2.{j}");
                    Res2KernelIds {
                        w: store.add(format!("{q}.conv.weight"), uniform_init(&mut rng, &[g, g, rk], g * rk)),
                        b: store.add(format!("{q}.conv.bias"), uniform_init(&mut rng, &[g], g * rk)),
                        gamma: store.add(format!("{q}.bn.weight"), Tensor::ones(&[g])),
                        beta: store.add(format!("{q}.bn.bias"), Tensor::zeros(&[g])),
                        running_mean: store.add_buffer(format!("{q}.bn.running_mean"), Tensor::zeros(&[g])),
                        running_var: store.add_buffer(format!("{q}.bn.running_var"), Tensor::ones(&[g])),
                    }
                })
                .collect();
            let r = cfg.seb_hidden(i);
            let se = SeIds {
                w1: store.add(format!("{p}.se.fc1.weight"), uniform_init(&mut rng, &[r, c], c)),
                b1: store.add(format!("{p}.se.fc1.bias"), uniform_init(&mut rng, &[r], c)),
                w2: store.add(format!("{p}.se.fc2.weight"), uniform_init(&mut rng, &[c, r], r)),
                b2: store.add(format!("{p}.se.fc2.bias"), uniform_init(&mut rng, &[c], r)),
            };
            let pw_w = store.add(format!("{p}.pointwise.weight"), uniform_init(&mut rng, &[2 * c, c, 1], c));
            let pw_b = store.add(format!("{p}.pointwise.bias"), uniform_init(&mut rng, &[2 * c], c));
            encoders.push(EncoderIds { conv_w, conv_b, res2, se, pw_w, pw_b });
            cin = c;
        }
        let h = cfg.gru_hidden();
        let gru = (1..=2)
            .map(|l| {
                let p = format!("bottleneck.gru.{l}");
                GruIds {
                    w_ih: store.add(format!("{p}.weight_ih"), uniform_init(&mut rng, &[3 * h, h], h)),
                    w_hh: store.add(format!("{p}.weight_hh"), uniform_init(&mut rng, &[3 * h, h], h)),
                    b_ih: store.add(format!("{p}.bias_ih"), uniform_init(&mut rng, &[3 * h], h)),
                    b_hh: store.add(format!("{p}.bias_hh"), uniform_init(&mut rng, &[3 * h], h)),
                }
            })
            .collect();
        for i in 1..=cfg.layers {
            let c = cfg.channels(i);
            let cout = if i == 1 { 1 } else { cfg.channels(i - 1) };
            let p = format!("decoder.{i}");
            decoders.push(DecoderIds {
                pw_w: store.add(format!("{p}.pointwise.weight"), uniform_init(&mut rng, &[2 * c, c, 1], c)),
                pw_b: store.add(format!("{p}.pointwise.bias"), uniform_init(&mut rng, &[2 * c], c)),
                tconv_w: store.add(format!("{p}.tconv.weight"), uniform_init(&mut rng, &[c, cout, k], cout * k)),
                tconv_b: store.add(format!("{p}.tconv.bias"), uniform_init(&mut rng, &[cout], cout * k)),
            });
        }
        let mut conv_pairs: Vec<(ParamId, ParamId)> = Vec::new();
        for e in &encoders {
            conv_pairs.push((e.conv_w, e.conv_b));
            conv_pairs.extend(e.res2.iter().map(|r| (r.w, r.b)));
            conv_pairs.push((e.pw_w, e.pw_b));
        }
        for d in &decoders {
            conv_pairs.push((d.pw_w, d.pw_b));
            conv_pairs.push((d.tconv_w, d.tconv_b));
        }
        for (w, b) in conv_pairs {
            rescale_conv(&mut store, w, b);
        }
        Ok(Self {
            cfg,
            store,
            layout: GeneratorLayout { encoders, gru, decoders },
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &GeneratorLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.store.num_trainable()
    }

    /// Sets every trainable parameter to zero.
    pub fn zero_weights(&mut self) {
        let ids: Vec<ParamId> = (0..self.store.len())
            .map(ParamId)
            .filter(|&id| self.store.entries()[id.0].trainable)
            .collect();
        for id in ids {
            self.store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = S::zero());
        }
    }

    /// Folds batch statistics into the running statistics.
    pub fn apply_bn_stats(&mut self, stats: &[BnStats<S>]) {
        let m = S::of(BN_MOMENTUM);
        for s in stats {
            for (id, batch) in [(s.mean_id, &s.mean), (s.var_id, &s.var)] {
                for (r, &b) in self.store.get_mut(id).data_mut().iter_mut().zip(batch) {
                    *r = (S::one() - m) * *r + m * b;
                }
            }
        }
    }

    /// Offline forward on `y: [B, 1, T]`; returns `[B, 1, T]`.
    pub fn forward<'g>(&self, bound: &Bound<'g, S>, y: Var<'g, S>, opts: ForwardOptions) -> Result<GeneratorOutput<'g, S>> {
        let shape = y.shape();
        if shape.len() != 3 || shape[1] != 1 {
            return shape_err(format!("generator expects mono [B, 1, T], got {shape:?}"));
        }
        let (nb, t) = (shape[0], shape[2]);
        let mut bn_stats = Vec::new();

        let mut x = y;
        let mut scales = None;
        if self.cfg.normalize_input {
            let stds: Vec<S> = {
                let v = y.value();
                (0..nb)
                    .map(|b| {
                        let row = &v.data()[b * t..(b + 1) * t];
                        let n = S::of(t as f64);
                        let m = row.iter().copied().sum::<S>() / n;
                        let var = row.iter().map(|&v| (v - m) * (v - m)).sum::<S>() / n;
                        var.sqrt() + S::of(1e-8)
                    })
                    .collect()
            };
            let inv: Vec<S> = stds.iter().map(|&s| S::one() / s).collect();
            x = ops::scale_batch(x, &inv)?;
            scales = Some(stds);
        }

        let align = self.cfg.alignment();
        let pad = (align - t % align) % align;
        x = ops::pad_left_time(x, pad)?;

        let mut skips = Vec::with_capacity(self.cfg.layers);
        for (i, ids) in self.layout.encoders.iter().enumerate() {
            x = blocks::encoder_layer(&self.cfg, i + 1, ids, bound, x, opts, &self.store, &mut bn_stats)?;
            skips.push(x);
        }

        let mut z = ops::transpose12(x)?;
        let h = self.cfg.gru_hidden();
        for g in &self.layout.gru {
            let h0 = Tensor::zeros(&[nb, h]);
            z = ops::gru(z, bound.var(g.w_ih), bound.var(g.w_hh), bound.var(g.b_ih), bound.var(g.b_hh), &h0)?.0;
        }
        x = ops::transpose12(z)?;

        for (i, ids) in self.layout.decoders.iter().enumerate().rev() {
            x = ops::add(x, skips[i])?;
            x = blocks::decoder_layer(&self.cfg, ids, bound, x, i == 0)?;
        }

        x = ops::slice_time(x, pad, t)?;
        if let Some(stds) = scales {
            x = ops::scale_batch(x, &stds)?;
        }
        Ok(GeneratorOutput { output: x, bn_stats })
    }

    /// Convenience inference on a batch of equal-length waveforms.
    pub fn enhance(&self, batch: &Tensor<S>, opts: ForwardOptions) -> Result<Tensor<S>> {
        let graph = Graph::inference();
        let bound = self.store.bind(&graph, false);
        let y = graph.constant(batch.clone());
        Ok(self.forward(&bound, y, opts)?.output.to_tensor())
    }

    pub fn enhance_waveform(&self, samples: &[S]) -> Result<Vec<S>> {
        let t = Tensor::new(&[1, 1, samples.len()], samples.to_vec())?;
        Ok(self.enhance(&t, ForwardOptions::infer())?.into_data())
    }

    pub fn cast<T: Scalar>(&self) -> Generator<T> {
        Generator {
            cfg: self.cfg.clone(),
            store: self.store.cast(),
            layout: self.layout.clone(),
        }
    }
}
