//! Alternating discriminator / generator updates.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph};
use crate::discriminator::Discriminator;
use crate::dsp::metrics::si_snr;
use crate::dsp::MrstftConfig;
use crate::error::{arg_err, Error, Result};
use crate::generator::{ForwardOptions, Generator};
use crate::optim::AdamState;
use crate::params::Bound;
use crate::tensor::{Scalar, Tensor};

use super::augment::{augment_bandmask, augment_remix, augment_revecho};
use super::data::Example;
use super::losses::{discriminator_loss, generator_loss, mixup, LossWeights};
use super::oracle::QualityOracle;
use super::schedule::lr_schedule;
use super::TrainConfig;

/// Losses and learning rate of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub lambda: f64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub l1: f64,
    pub mrstft: f64,
    pub adversarial: f64,
}

/// One training batch, `[B, 1, crop]` each.
pub struct Batch<S> {
    pub clean: Tensor<S>,
    pub noisy: Tensor<S>,
}

fn to_tensor<S: Scalar>(rows: &[Vec<f32>]) -> Result<Tensor<S>> {
    let t = rows[0].len();
    let data = rows.iter().flat_map(|r| r.iter().map(|&v| S::of(v as f64))).collect();
    Tensor::new(&[rows.len(), 1, t], data)
}

fn rows_f64<S: Scalar>(t: &Tensor<S>) -> Vec<Vec<f64>> {
    let len = t.dim(2);
    t.data().chunks(len).map(|r| r.iter().map(|v| v.f64()).collect()).collect()
}

fn collect<S: Scalar>(grads: &mut Gradients<S>, bound: &Bound<'_, S>) -> Vec<Option<Tensor<S>>> {
    bound.vars().iter().map(|&v| grads.take(v)).collect()
}

/// Optimizer state, schedule position and data RNG of a training run.
pub struct Trainer<S> {
    cfg: TrainConfig,
    g_opt: AdamState<S>,
    d_opt: AdamState<S>,
    rng: ChaCha8Rng,
    step: usize,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(cfg: TrainConfig, gen: &Generator<S>, disc: &Discriminator<S>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            g_opt: AdamState::new(&gen.store),
            d_opt: AdamState::new(&disc.store),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            step: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Learning rate of iteration `step` (1-based).
    pub fn lr_at(&self, step: usize) -> f64 {
        lr_schedule(step, self.cfg.iterations + 1, self.cfg.peak_lr, self.cfg.warmup_frac)
    }

    /// Draws random crops and applies the enabled augmentations.
    pub fn sample_batch(&mut self, data: &[Example]) -> Result<Batch<S>> {
        if data.is_empty() {
            return arg_err("training set is empty");
        }
        let crop = self.cfg.crop_len;
        let nb = self.cfg.batch_size;
        let picks: Vec<usize> = if nb <= data.len() {
            sample(&mut self.rng, data.len(), nb).into_vec()
        } else {
            (0..nb).map(|_| self.rng.random_range(0..data.len())).collect()
        };
        let mut clean = Vec::with_capacity(nb);
        let mut noise = Vec::with_capacity(nb);
        for &i in &picks {
            let ex = &data[i];
            if ex.clean.len() < crop {
                return arg_err(format!("example {i} has {} samples, crop needs {crop}", ex.clean.len()));
            }
            let off = self.rng.random_range(0..=ex.clean.len() - crop);
            clean.push(ex.clean[off..off + crop].to_vec());
            noise.push(ex.noise_component()[off..off + crop].to_vec());
        }
        if self.cfg.remix {
            augment_remix(&mut noise, &mut self.rng);
        }
        if self.cfg.revecho {
            for (c, n) in clean.iter_mut().zip(noise.iter_mut()) {
                let (ce, ne) = augment_revecho(c, n, &mut self.rng);
                *c = ce;
                *n = ne;
            }
        }
        let mut noisy: Vec<Vec<f32>> = clean
            .iter()
            .zip(&noise)
            .map(|(c, n)| c.iter().zip(n).map(|(a, b)| a + b).collect())
            .collect();
        if self.cfg.bandmask {
            for n in noisy.iter_mut() {
                *n = augment_bandmask(n, &mut self.rng)?;
            }
        }
        Ok(Batch {
            clean: to_tensor(&clean)?,
            noisy: to_tensor(&noisy)?,
        })
    }

    /// One discriminator update followed by one generator update.
    pub fn step(
        &mut self,
        gen: &mut Generator<S>,
        disc: &mut Discriminator<S>,
        data: &[Example],
        oracle: &dyn QualityOracle,
    ) -> Result<StepRecord> {
        let batch = self.sample_batch(data)?;
        self.step += 1;
        let lr = self.lr_at(self.step);
        let x = batch.clean;

        let graph = Graph::new();
        let gbound = gen.store.bind(&graph, true);
        let fwd = gen.forward(&gbound, graph.constant(batch.noisy), ForwardOptions::train())?;
        let x_hat = fwd.output;
        let x_hat_val = x_hat.to_tensor();

        let lambda = self.cfg.mixup.sample(&mut self.rng)?;
        let x_mix = mixup(&x, &x_hat_val, lambda)?;
        let refs = rows_f64(&x);
        let score_all = |est: &Tensor<S>| -> Result<Vec<f64>> {
            refs.iter().zip(rows_f64(est)).map(|(r, e)| oracle.score(r, &e)).collect()
        };
        let q_enh = score_all(&x_hat_val)?;
        let q_mix = score_all(&x_mix)?;

        let d_loss = {
            let dg = Graph::new();
            let db = disc.store.bind(&dg, true);
            let xc = dg.constant(x.clone());
            let d_clean = disc.forward(&db, xc, xc)?;
            let d_enh = disc.forward(&db, xc, dg.constant(x_hat_val))?;
            let d_mix = disc.forward(&db, xc, dg.constant(x_mix))?;
            let loss = discriminator_loss(d_clean, d_enh, d_mix, &q_enh, &q_mix)?;
            let mut grads = dg.backward(loss.total)?;
            self.d_opt.step(&mut disc.store, &collect(&mut grads, &db), lr)?;
            loss.total.item().f64()
        };

        let w = self.cfg.weights;
        let score = if w.alpha3 > 0.0 {
            let frozen = disc.store.bind(&graph, false);
            disc.forward(&frozen, graph.constant(x.clone()), x_hat)?
        } else {
            graph.constant(Tensor::ones(&[x.dim(0)]))
        };
        let gl = generator_loss(&x, x_hat, score, &w, &self.cfg.mrstft)?;
        let g_loss = gl.total.item().f64();
        let mut grads = graph.backward(gl.total)?;
        let gvec = collect(&mut grads, &gbound);
        self.g_opt.step(&mut gen.store, &gvec, lr)?;
        gen.apply_bn_stats(&fwd.bn_stats);

        if !(d_loss.is_finite() && g_loss.is_finite()) {
            return Err(Error::NonFinite(format!("training diverged at step {}", self.step)));
        }
        Ok(StepRecord {
            step: self.step,
            lr,
            lambda,
            d_loss,
            g_loss,
            l1: gl.l1,
            mrstft: gl.mrstft,
            adversarial: gl.adversarial,
        })
    }
}

/// Runs `cfg.iterations` steps. `on_checkpoint` is called every
/// `cfg.checkpoint_every` steps (when non-zero) and after the last step.
pub fn train<S: Scalar>(
    gen: &mut Generator<S>,
    disc: &mut Discriminator<S>,
    data: &[Example],
    cfg: &TrainConfig,
    oracle: &dyn QualityOracle,
    on_checkpoint: &mut dyn FnMut(usize, &Generator<S>, &Discriminator<S>) -> Result<()>,
) -> Result<Vec<StepRecord>> {
    if data.is_empty() {
        return arg_err("training set is empty");
    }
    let mut trainer = Trainer::new(cfg.clone(), gen, disc)?;
    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let rec = trainer.step(gen, disc, data, oracle)?;
        log::debug!("step {} lr {:.3e} d {:.4} g {:.4}", rec.step, rec.lr, rec.d_loss, rec.g_loss);
        let s = rec.step;
        history.push(rec);
        if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0) || s == cfg.iterations {
            on_checkpoint(s, gen, disc)?;
        }
    }
    Ok(history)
}

/// Held-out quality of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean of L1 + multi-resolution STFT loss.
    pub loss: f64,
    pub si_snr_noisy: f64,
    pub si_snr_enhanced: f64,
}

impl EvalReport {
    pub fn improvement(&self) -> f64 {
        self.si_snr_enhanced - self.si_snr_noisy
    }
}

/// Inference-mode evaluation on whole clips.
pub fn evaluate<S: Scalar>(gen: &Generator<S>, data: &[Example], mrstft: &MrstftConfig) -> Result<EvalReport> {
    if data.is_empty() {
        return arg_err("evaluation set is empty");
    }
    let w = LossWeights {
        alpha1: 1.0,
        alpha2: 1.0,
        alpha3: 0.0,
    };
    let (mut loss, mut noisy, mut enh) = (0.0, 0.0, 0.0);
    for ex in data {
        let x: Tensor<S> = to_tensor(std::slice::from_ref(&ex.clean))?;
        let y: Tensor<S> = to_tensor(std::slice::from_ref(&ex.noisy))?;
        let graph = Graph::inference();
        let bound = gen.store.bind(&graph, false);
        let out = gen.forward(&bound, graph.constant(y), ForwardOptions::infer())?.output;
        let gl = generator_loss(&x, out, graph.constant(Tensor::ones(&[1])), &w, mrstft)?;
        loss += gl.total.item().f64();
        let c: Vec<f64> = ex.clean.iter().map(|&v| v as f64).collect();
        let n: Vec<f64> = ex.noisy.iter().map(|&v| v as f64).collect();
        let e: Vec<f64> = out.value().data().iter().map(|v| v.f64()).collect();
        noisy += si_snr(&c, &n)?;
        enh += si_snr(&c, &e)?;
    }
    let k = data.len() as f64;
    Ok(EvalReport {
        loss: loss / k,
        si_snr_noisy: noisy / k,
        si_snr_enhanced: enh / k,
    })
}
