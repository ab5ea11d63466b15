//! Gradient cases for every differentiable primitive and both networks.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsrgan_core::autodiff::{ops, Var};
use wsrgan_core::discriminator::{Discriminator, DiscriminatorConfig};
use wsrgan_core::dsp::{mrstft_loss, stft_magnitude, MrstftConfig, StftResolution};
use wsrgan_core::generator::{ForwardOptions, Generator, GeneratorConfig, NormMode, SebMode};
use wsrgan_core::kernels::ConvGeometry;
use wsrgan_core::training::{discriminator_loss, generator_loss, LossWeights};
use wsrgan_core::Tensor;

use super::gradcheck::{check_fn, check_store, Report};

/// Random points per input.
pub const POINTS: usize = 10;

fn rnd(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

type Case = (&'static str, Report);

macro_rules! case {
    ($out:ident, $name:expr, $inputs:expr, $f:expr) => {
        $out.push(($name, check_fn(&$inputs, POINTS, $out.len() as u64 + 1, $f)));
    };
}

pub fn primitive_reports() -> Vec<Case> {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    let mut out: Vec<Case> = Vec::new();
    let a = rnd(&mut r, &[2, 3, 5], -1.0, 1.0);
    let b = rnd(&mut r, &[2, 3, 5], -1.0, 1.0);
    let pos = rnd(&mut r, &[2, 3, 5], 0.5, 2.0);
    let sc = rnd(&mut r, &[1], 0.5, 1.5);

    case!(out, "add", [a.clone(), b.clone()], |v: &[Var<f64>]| ops::add(v[0], v[1]));
    case!(out, "sub", [a.clone(), b.clone()], |v: &[Var<f64>]| ops::sub(v[0], v[1]));
    case!(out, "mul", [a.clone(), b.clone()], |v: &[Var<f64>]| ops::mul(v[0], v[1]));
    let one = rnd(&mut r, &[1], -1.0, 1.0);
    case!(out, "div_scalar", [one, sc.clone()], |v: &[Var<f64>]| ops::div_scalar(v[0], v[1]));
    case!(out, "scale", [a.clone()], |v: &[Var<f64>]| ops::scale(v[0], -1.7));
    case!(out, "add_scalar", [a.clone()], |v: &[Var<f64>]| ops::add_scalar(v[0], 0.3));
    case!(out, "relu", [a.clone()], |v: &[Var<f64>]| ops::relu(v[0]));
    case!(out, "sigmoid", [a.clone()], |v: &[Var<f64>]| ops::sigmoid(v[0]));
    case!(out, "tanh", [a.clone()], |v: &[Var<f64>]| ops::tanh(v[0]));
    case!(out, "abs", [a.clone()], |v: &[Var<f64>]| ops::abs(v[0]));
    case!(out, "ln", [pos.clone()], |v: &[Var<f64>]| ops::ln(v[0]));
    case!(out, "sqrt", [pos.clone()], |v: &[Var<f64>]| ops::sqrt(v[0]));
    case!(out, "square", [a.clone()], |v: &[Var<f64>]| ops::square(v[0]));
    case!(out, "clamp_min", [a.clone()], |v: &[Var<f64>]| ops::clamp_min(v[0], 0.1));
    let slopes = rnd(&mut r, &[3], 0.05, 0.5);
    case!(out, "prelu per-channel", [a.clone(), slopes], |v: &[Var<f64>]| ops::prelu(v[0], v[1]));
    case!(out, "prelu shared", [a.clone(), sc.clone()], |v: &[Var<f64>]| ops::prelu(v[0], v[1]));
    let even = rnd(&mut r, &[2, 4, 5], -1.0, 1.0);
    case!(out, "glu", [even.clone()], |v: &[Var<f64>]| ops::glu(v[0]));
    case!(out, "sum", [a.clone()], |v: &[Var<f64>]| ops::sum(v[0]));
    case!(out, "mean", [a.clone()], |v: &[Var<f64>]| ops::mean(v[0]));
    case!(out, "l1_mean", [a.clone()], |v: &[Var<f64>]| ops::l1_mean(v[0]));
    case!(out, "l2_norm", [a.clone()], |v: &[Var<f64>]| ops::l2_norm(v[0]));
    case!(out, "reshape", [a.clone()], |v: &[Var<f64>]| ops::reshape(v[0], &[6, 5]));
    case!(out, "transpose12", [a.clone()], |v: &[Var<f64>]| ops::transpose12(v[0]));
    case!(out, "slice_channels", [a.clone()], |v: &[Var<f64>]| ops::slice_channels(v[0], 1, 2));
    case!(out, "concat_channels", [a.clone(), even.clone()], |v: &[Var<f64>]| ops::concat_channels(&[v[0], v[1]]));
    case!(out, "pad_left_time", [a.clone()], |v: &[Var<f64>]| ops::pad_left_time(v[0], 3));
    case!(out, "slice_time", [a.clone()], |v: &[Var<f64>]| ops::slice_time(v[0], 1, 3));
    case!(out, "select_batch", [a.clone()], |v: &[Var<f64>]| ops::select_batch(v[0], 1));
    case!(out, "scale_batch", [a.clone()], |v: &[Var<f64>]| ops::scale_batch(v[0], &[0.5, -2.0]));
    case!(out, "mul_scalar_var", [a.clone(), sc.clone()], |v: &[Var<f64>]| ops::mul_scalar_var(v[0], v[1]));
    let gate = rnd(&mut r, &[2, 3], -1.0, 1.0);
    case!(out, "mul_channels", [a.clone(), gate], |v: &[Var<f64>]| ops::mul_channels(v[0], v[1]));
    case!(out, "global_avg_pool_time", [a.clone()], |v: &[Var<f64>]| ops::global_avg_pool_time(v[0]));
    case!(out, "cummean_time", [a.clone()], |v: &[Var<f64>]| ops::cummean_time(v[0]));
    let long = rnd(&mut r, &[2, 3, 11], -1.0, 1.0);
    case!(out, "adaptive_max_pool_time", [long.clone()], |v: &[Var<f64>]| ops::adaptive_max_pool_time(v[0], 4));
    let (lx, lw, lb) = (rnd(&mut r, &[4, 6], -1.0, 1.0), rnd(&mut r, &[3, 6], -1.0, 1.0), rnd(&mut r, &[3], -1.0, 1.0));
    case!(out, "linear", [lx, lw, lb], |v: &[Var<f64>]| ops::linear(v[0], v[1], v[2]));

    let cw = rnd(&mut r, &[4, 3, 3], -1.0, 1.0);
    let cb = rnd(&mut r, &[4], -1.0, 1.0);
    let geo = ConvGeometry { stride: 2, dilation: 2, pad_left: 1 };
    case!(out, "conv1d", [long.clone(), cw.clone(), cb.clone()], move |v: &[Var<f64>]| ops::conv1d(
        v[0],
        v[1],
        Some(v[2]),
        geo
    ));
    case!(out, "conv1d_causal strided", [long.clone(), cw.clone(), cb.clone()], |v: &[Var<f64>]| {
        ops::conv1d_causal(v[0], v[1], Some(v[2]), 2, 1)
    });
    case!(out, "conv1d_causal dilated", [long.clone(), cw.clone()], |v: &[Var<f64>]| {
        ops::conv1d_causal(v[0], v[1], None, 1, 2)
    });
    let tw = rnd(&mut r, &[3, 2, 4], -1.0, 1.0);
    let tb = rnd(&mut r, &[2], -1.0, 1.0);
    case!(out, "conv_transpose1d_causal", [a.clone(), tw, tb], |v: &[Var<f64>]| {
        ops::conv_transpose1d_causal(v[0], v[1], Some(v[2]), 2)
    });
    let gamma = rnd(&mut r, &[3], 0.5, 1.5);
    let beta = rnd(&mut r, &[3], -0.5, 0.5);
    case!(out, "batch_norm_train", [a.clone(), gamma.clone(), beta.clone()], |v: &[Var<f64>]| {
        ops::batch_norm_train(v[0], v[1], v[2]).map(|t| t.0)
    });
    case!(out, "batch_norm_infer", [a.clone(), gamma.clone(), beta.clone()], |v: &[Var<f64>]| {
        ops::batch_norm_infer(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[1.5, 0.7, 1.1])
    });
    case!(out, "instance_norm", [a.clone(), gamma.clone(), beta.clone()], |v: &[Var<f64>]| {
        ops::instance_norm(v[0], v[1], v[2])
    });
    let (h, c) = (3, 2);
    let gx = rnd(&mut r, &[2, 5, c], -1.0, 1.0);
    let wih = rnd(&mut r, &[3 * h, c], -0.8, 0.8);
    let whh = rnd(&mut r, &[3 * h, h], -0.8, 0.8);
    let bih = rnd(&mut r, &[3 * h], -0.5, 0.5);
    let bhh = rnd(&mut r, &[3 * h], -0.5, 0.5);
    let h0 = rnd(&mut r, &[2, h], -0.5, 0.5);
    case!(out, "gru", [gx, wih, whh, bih, bhh], move |v: &[Var<f64>]| {
        ops::gru(v[0], v[1], v[2], v[3], v[4], &h0).map(|t| t.0)
    });

    let sig = rnd(&mut r, &[64], -1.0, 1.0);
    let res = StftResolution::new(16, 4, 12).unwrap();
    case!(out, "stft_magnitude", [sig.clone()], move |v: &[Var<f64>]| stft_magnitude(v[0], &res));
    let reference = rnd(&mut r, &[64], -1.0, 1.0);
    let mr = MrstftConfig::new([(16, 4, 16), (32, 8, 24)], 1e-7).unwrap();
    case!(out, "mrstft_loss", [sig], move |v: &[Var<f64>]| mrstft_loss(&reference, v[0], &mr));
    out
}

pub fn tiny_generator_config() -> GeneratorConfig {
    GeneratorConfig {
        layers: 2,
        hidden: 4,
        max_channels: 8,
        seb_ratio: 2,
        ..GeneratorConfig::tiny()
    }
}

/// Full generator, batch statistics, both squeeze-excitation forms.
pub fn generator_reports() -> Vec<Case> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let gen = Generator::<f64>::new(tiny_generator_config(), 5).unwrap();
    let y = rnd(&mut rng, &[2, 1, 21], -1.0, 1.0);
    for (name, seb) in [("generator (running SE)", SebMode::Running), ("generator (exact SE)", SebMode::Exact)] {
        let y = y.clone();
        let gen = &gen;
        let opts = ForwardOptions { norm: NormMode::Train, seb };
        let rep = check_store(&gen.store, POINTS, 3, move |b, g| {
            Ok(gen.forward(b, g.constant(y.clone()), opts)?.output)
        });
        out.push((name, rep));
    }
    // The normalization scale is a data statistic held constant, so the input
    // check runs without it.
    let gen = Generator::<f64>::new(
        GeneratorConfig { normalize_input: false, ..tiny_generator_config() },
        5,
    )
    .unwrap();
    let gen = &gen;
    out.push((
        "generator input",
        check_fn(&[y], POINTS, 4, move |v: &[Var<f64>]| {
            let b = gen.store.bind(v[0].graph(), false);
            Ok(gen.forward(&b, v[0], ForwardOptions::train())?.output)
        }),
    ));
    out
}

pub fn discriminator_reports() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let cfg = DiscriminatorConfig {
        channels: vec![3, 4, 4, 5],
        kernel: 5,
        pooled_len: 3,
        linear_hidden: 6,
        ..DiscriminatorConfig::default()
    };
    let d = Discriminator::<f64>::new(cfg, 9).unwrap();
    let x = rnd(&mut rng, &[2, 1, 40], -1.0, 1.0);
    let u = rnd(&mut rng, &[2, 1, 40], -1.0, 1.0);
    let d = &d;
    let (xw, uw) = (x.clone(), u.clone());
    let weights = check_store(&d.store, POINTS, 5, move |b, g| {
        d.forward(b, g.constant(xw.clone()), g.constant(uw.clone()))
    });
    let inputs = check_fn(&[x, u], POINTS, 6, move |v: &[Var<f64>]| {
        let b = d.store.bind(v[0].graph(), false);
        d.forward(&b, v[0], v[1])
    });
    vec![("discriminator weights", weights), ("discriminator inputs", inputs)]
}

/// Generator objective w.r.t. the estimate with a frozen discriminator, and
/// discriminator objective w.r.t. its weights.
pub fn loss_reports() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    let cfg = DiscriminatorConfig {
        channels: vec![2, 2, 3, 3],
        kernel: 3,
        pooled_len: 2,
        linear_hidden: 4,
        ..DiscriminatorConfig::default()
    };
    let d = Discriminator::<f64>::new(cfg, 10).unwrap();
    let x = rnd(&mut rng, &[2, 1, 64], -1.0, 1.0);
    let xh = rnd(&mut rng, &[2, 1, 64], -1.0, 1.0);
    let mr = MrstftConfig::new([(16, 4, 16), (32, 8, 32)], 1e-7).unwrap();
    let w = LossWeights { alpha1: 1.0, alpha2: 1.0, alpha3: 0.5 };
    let d = &d;
    let (xr, mr2) = (x.clone(), mr.clone());
    let g_rep = check_fn(&[xh.clone()], POINTS, 7, move |v: &[Var<f64>]| {
        let g = v[0].graph();
        let b = d.store.bind(g, false);
        let s = d.forward(&b, g.constant(xr.clone()), v[0])?;
        Ok(generator_loss(&xr, v[0], s, &w, &mr2)?.total)
    });
    let mix = x.zip_map(&xh, |a, b| 0.3 * a + 0.7 * b);
    let d_rep = check_store(&d.store, POINTS, 8, move |b, g| {
        let xc = g.constant(x.clone());
        let s1 = d.forward(b, xc, xc)?;
        let s2 = d.forward(b, xc, g.constant(xh.clone()))?;
        let s3 = d.forward(b, xc, g.constant(mix.clone()))?;
        Ok(discriminator_loss(s1, s2, s3, &[0.2, 0.6], &[0.5, 0.9])?.total)
    });
    vec![("generator_loss", g_rep), ("discriminator_loss", d_rep)]
}
