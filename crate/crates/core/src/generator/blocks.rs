use crate::autodiff::{ops, Var};
use crate::error::{shape_err, Result};
use crate::kernels::ConvGeometry;
use crate::params::{Bound, ParamId, ParamStore};
use crate::tensor::Scalar;

use super::{BnStats, DecoderIds, EncoderIds, ForwardOptions, GeneratorConfig, NormMode, SeIds, SebMode};

/// One Res2Net group map `K_i`: dilated causal conv, ReLU, batch norm.
#[derive(Debug, Clone)]
pub struct Res2KernelIds {
    pub w: ParamId,
    pub b: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

fn res2_kernel<'g, S: Scalar>(
    ids: &Res2KernelIds,
    bound: &Bound<'g, S>,
    x: Var<'g, S>,
    dilation: usize,
    norm: NormMode,
    store: &ParamStore<S>,
    stats: &mut Vec<BnStats<S>>,
) -> Result<Var<'g, S>> {
    let h = ops::conv1d_causal(x, bound.var(ids.w), Some(bound.var(ids.b)), 1, dilation)?;
    let h = ops::relu(h)?;
    match norm {
        NormMode::Train => {
            let (y, mean, var) = ops::batch_norm_train(h, bound.var(ids.gamma), bound.var(ids.beta))?;
            stats.push(BnStats {
                mean_id: ids.running_mean,
                var_id: ids.running_var,
                mean,
                var,
            });
            Ok(y)
        }
        NormMode::Infer => ops::batch_norm_infer(
            h,
            bound.var(ids.gamma),
            bound.var(ids.beta),
            store.get(ids.running_mean).data(),
            store.get(ids.running_var).data(),
        ),
    }
}

/// Hierarchical residual block: split `y` into `s` channel groups,
/// `h_1 = y_1`, `h_2 = K_2(y_2)`, `h_i = K_i(y_i + h_{i-1})`, concatenate.
#[allow(clippy::too_many_arguments)]
pub fn res2_forward<'g, S: Scalar>(
    kernels: &[Res2KernelIds],
    bound: &Bound<'g, S>,
    y: Var<'g, S>,
    scale: usize,
    dilation: usize,
    norm: NormMode,
    store: &ParamStore<S>,
    stats: &mut Vec<BnStats<S>>,
) -> Result<Var<'g, S>> {
    let c = y.shape()[1];
    if scale == 0 || c % scale != 0 {
        return shape_err(format!("res2: {c} channels not divisible by scale {scale}"));
    }
    if kernels.len() + 1 != scale {
        return shape_err(format!("res2: {} kernels for scale {scale}", kernels.len()));
    }
    let g = c / scale;
    let mut outs = Vec::with_capacity(scale);
    outs.push(ops::slice_channels(y, 0, g)?);
    let mut prev: Option<Var<'g, S>> = None;
    for (j, ids) in kernels.iter().enumerate() {
        let yi = ops::slice_channels(y, (j + 1) * g, g)?;
        let inp = match prev {
            Some(p) => ops::add(yi, p)?,
            None => yi,
        };
        let h = res2_kernel(ids, bound, inp, dilation, norm, store, stats)?;
        outs.push(h);
        prev = Some(h);
    }
    ops::concat_channels(&outs)
}

/// Squeeze-excitation gating: `h * sigmoid(W2 relu(W1 pool(h)))`.
pub fn se_forward<'g, S: Scalar>(ids: &SeIds, bound: &Bound<'g, S>, h: Var<'g, S>, mode: SebMode) -> Result<Var<'g, S>> {
    let (w1, b1, w2, b2) = (bound.var(ids.w1), bound.var(ids.b1), bound.var(ids.w2), bound.var(ids.b2));
    match mode {
        SebMode::Exact => {
            let s = ops::global_avg_pool_time(h)?;
            let e = ops::sigmoid(ops::linear(ops::relu(ops::linear(s, w1, b1)?)?, w2, b2)?)?;
            ops::mul_channels(h, e)
        }
        SebMode::Running => {
            let s = ops::cummean_time(h)?;
            let e = se_pointwise(s, w1, b1, w2, b2)?;
            ops::mul(h, e)
        }
    }
}

/// Excitation applied frame by frame to a `[B, C, T]` descriptor.
pub(crate) fn se_pointwise<'g, S: Scalar>(
    s: Var<'g, S>,
    w1: Var<'g, S>,
    b1: Var<'g, S>,
    w2: Var<'g, S>,
    b2: Var<'g, S>,
) -> Result<Var<'g, S>> {
    let as_conv = |w: Var<'g, S>| {
        let sh = w.shape();
        ops::reshape(w, &[sh[0], sh[1], 1])
    };
    let geo = ConvGeometry::valid(1, 1);
    let a = ops::relu(ops::conv1d(s, as_conv(w1)?, Some(b1), geo)?)?;
    ops::sigmoid(ops::conv1d(a, as_conv(w2)?, Some(b2), geo)?)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn encoder_layer<'g, S: Scalar>(
    cfg: &GeneratorConfig,
    index: usize,
    ids: &EncoderIds,
    bound: &Bound<'g, S>,
    x: Var<'g, S>,
    opts: ForwardOptions,
    store: &ParamStore<S>,
    stats: &mut Vec<BnStats<S>>,
) -> Result<Var<'g, S>> {
    let cin = if index == 1 { 1 } else { cfg.channels(index - 1) };
    if x.shape()[1] != cin {
        return shape_err(format!(
            "encoder layer {index}: expected {cin} input channels, got {:?}",
            x.shape()
        ));
    }
    let h = ops::conv1d_causal(x, bound.var(ids.conv_w), Some(bound.var(ids.conv_b)), cfg.stride, 1)?;
    let h = ops::relu(h)?;
    let h = res2_forward(&ids.res2, bound, h, cfg.res2_scale, cfg.res2_dilation, opts.norm, store, stats)?;
    let h = se_forward(&ids.se, bound, h, opts.seb)?;
    let h = ops::conv1d_causal(h, bound.var(ids.pw_w), Some(bound.var(ids.pw_b)), 1, 1)?;
    ops::glu(h)
}

pub(crate) fn decoder_layer<'g, S: Scalar>(
    cfg: &GeneratorConfig,
    ids: &DecoderIds,
    bound: &Bound<'g, S>,
    x: Var<'g, S>,
    last: bool,
) -> Result<Var<'g, S>> {
    let h = ops::conv1d_causal(x, bound.var(ids.pw_w), Some(bound.var(ids.pw_b)), 1, 1)?;
    let h = ops::glu(h)?;
    let h = ops::conv_transpose1d_causal(h, bound.var(ids.tconv_w), Some(bound.var(ids.tconv_b)), cfg.stride)?;
    if last {
        Ok(h)
    } else {
        ops::relu(h)
    }
}
