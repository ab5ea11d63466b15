//! Chunked causal inference. Each chunk must be a multiple of
//! `stride^layers` samples; the state carries every layer's left context, the
//! running squeeze-excitation sums, the GRU hidden states and the transposed
//! convolution overlap tails. Input normalization is not applied here since it
//! needs the whole utterance.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ops, Graph, Var};
use crate::error::{arg_err, shape_err, Error, Result};
use crate::kernels::{conv, ConvGeometry};
use crate::params::{Bound, ParamStore};
use crate::tensor::{Scalar, Tensor};

use super::blocks::se_pointwise;
use super::{EncoderIds, Generator};

/// Left context of one convolution: `channels * len` samples, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct History<S> {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> History<S> {
    fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![S::zero(); channels * len],
        }
    }

    /// Prepends the history to `x: [1, C, n]` and keeps the newest `len`
    /// samples as the next history.
    fn extend<'g>(&mut self, x: Var<'g, S>) -> Result<Var<'g, S>> {
        if self.len == 0 {
            return Ok(x);
        }
        let joined = {
            let xv = x.value();
            let n = xv.dim(2);
            let total = self.len + n;
            let mut out = Vec::with_capacity(self.channels * total);
            for c in 0..self.channels {
                out.extend_from_slice(&self.data[c * self.len..(c + 1) * self.len]);
                out.extend_from_slice(&xv.data()[c * n..(c + 1) * n]);
            }
            for c in 0..self.channels {
                let row = &out[c * total..(c + 1) * total];
                self.data[c * self.len..(c + 1) * self.len].copy_from_slice(&row[total - self.len..]);
            }
            Tensor::new(&[1, self.channels, total], out)?
        };
        Ok(x.graph().constant(joined))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EncoderState<S> {
    pub conv: History<S>,
    pub res2: Vec<History<S>>,
    pub se_sum: Vec<S>,
    pub se_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StreamState<S> {
    pub encoders: Vec<EncoderState<S>>,
    pub gru: Vec<Vec<S>>,
    /// Overlap tails of the transposed convolutions, `[Cout, K - stride]`.
    pub tails: Vec<History<S>>,
    pub samples_seen: u64,
}

impl<S: Scalar> StreamState<S> {
    pub fn new(gen: &Generator<S>) -> Self {
        let cfg = gen.config();
        let encoders = (1..=cfg.layers)
            .map(|i| {
                let cin = if i == 1 { 1 } else { cfg.channels(i - 1) };
                let g = cfg.res2_group(i);
                EncoderState {
                    conv: History::zeros(cin, cfg.kernel - 1),
                    res2: (1..cfg.res2_scale)
                        .map(|_| History::zeros(g, (cfg.res2_kernel - 1) * cfg.res2_dilation))
                        .collect(),
                    se_sum: vec![S::zero(); cfg.channels(i)],
                    se_count: 0,
                }
            })
            .collect();
        let tails = (1..=cfg.layers)
            .map(|i| {
                let cout = if i == 1 { 1 } else { cfg.channels(i - 1) };
                History::zeros(cout, cfg.kernel - cfg.stride)
            })
            .collect();
        Self {
            encoders,
            gru: vec![vec![S::zero(); cfg.gru_hidden()]; 2],
            tails,
            samples_seen: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidArgument(format!("state encode: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("state decode: {e}")))
    }
}

impl<S: Scalar> Generator<S> {
    /// Processes one chunk `[1, 1, n]` and advances `state`.
    pub fn stream(&self, chunk: &Tensor<S>, state: &mut StreamState<S>) -> Result<Tensor<S>> {
        let cfg = self.config();
        let align = cfg.alignment();
        if chunk.ndim() != 3 || chunk.dim(0) != 1 || chunk.dim(1) != 1 {
            return shape_err(format!("stream chunk must be [1, 1, n], got {:?}", chunk.shape()));
        }
        let n = chunk.dim(2);
        if n % align != 0 {
            return arg_err(format!("chunk of {n} samples is not a multiple of {align}"));
        }
        if state.encoders.len() != cfg.layers {
            return arg_err("stream state does not belong to this model");
        }
        let graph = Graph::inference();
        let bound = self.store.bind(&graph, false);
        let mut x = graph.constant(chunk.clone());
        let mut skips = Vec::with_capacity(cfg.layers);
        for (i, ids) in self.layout().encoders.iter().enumerate() {
            x = self.stream_encoder(ids, &bound, x, &mut state.encoders[i])?;
            skips.push(x);
        }

        let mut z = ops::transpose12(x)?;
        let h = cfg.gru_hidden();
        for (g, hs) in self.layout().gru.iter().zip(state.gru.iter_mut()) {
            let h0 = Tensor::new(&[1, h], hs.clone())?;
            let (out, last) = ops::gru(z, bound.var(g.w_ih), bound.var(g.w_hh), bound.var(g.b_ih), bound.var(g.b_hh), &h0)?;
            *hs = last.into_data();
            z = out;
        }
        x = ops::transpose12(z)?;

        for (i, ids) in self.layout().decoders.iter().enumerate().rev() {
            x = ops::add(x, skips[i])?;
            let h = ops::conv1d_causal(x, bound.var(ids.pw_w), Some(bound.var(ids.pw_b)), 1, 1)?;
            let h = ops::glu(h)?;
            let y = transpose_with_tail(&h.value(), bound.var(ids.tconv_w), bound.var(ids.tconv_b), cfg.stride, &mut state.tails[i])?;
            x = graph.constant(y);
            if i != 0 {
                x = ops::relu(x)?;
            }
        }
        state.samples_seen += n as u64;
        Ok(x.to_tensor())
    }

    fn stream_encoder<'g>(
        &self,
        ids: &EncoderIds,
        bound: &Bound<'g, S>,
        x: Var<'g, S>,
        st: &mut EncoderState<S>,
    ) -> Result<Var<'g, S>> {
        let cfg = self.config();
        let store: &ParamStore<S> = &self.store;
        let xin = st.conv.extend(x)?;
        let h = ops::conv1d(xin, bound.var(ids.conv_w), Some(bound.var(ids.conv_b)), ConvGeometry::valid(cfg.stride, 1))?;
        let y = ops::relu(h)?;

        let c = y.shape()[1];
        let g = c / cfg.res2_scale;
        let mut outs = vec![ops::slice_channels(y, 0, g)?];
        let mut prev: Option<Var<'g, S>> = None;
        for (j, (kid, hist)) in ids.res2.iter().zip(st.res2.iter_mut()).enumerate() {
            let yi = ops::slice_channels(y, (j + 1) * g, g)?;
            let inp = match prev {
                Some(p) => ops::add(yi, p)?,
                None => yi,
            };
            let inp = hist.extend(inp)?;
            let h = ops::conv1d(inp, bound.var(kid.w), Some(bound.var(kid.b)), ConvGeometry::valid(1, cfg.res2_dilation))?;
            let h = ops::relu(h)?;
            let h = ops::batch_norm_infer(
                h,
                bound.var(kid.gamma),
                bound.var(kid.beta),
                store.get(kid.running_mean).data(),
                store.get(kid.running_var).data(),
            )?;
            outs.push(h);
            prev = Some(h);
        }
        let h = ops::concat_channels(&outs)?;

        let desc = {
            let hv = h.value();
            let t = hv.dim(2);
            let mut out = vec![S::zero(); c * t];
            for ch in 0..c {
                let mut acc = st.se_sum[ch];
                for j in 0..t {
                    acc = acc + hv.data()[ch * t + j];
                    out[ch * t + j] = acc / S::of((st.se_count + j as u64 + 1) as f64);
                }
                st.se_sum[ch] = acc;
            }
            st.se_count += t as u64;
            Tensor::new(&[1, c, t], out)?
        };
        let se = &ids.se;
        let e = se_pointwise(h.graph().constant(desc), bound.var(se.w1), bound.var(se.b1), bound.var(se.w2), bound.var(se.b2))?;
        let h = ops::mul(h, e)?;
        let h = ops::conv1d_causal(h, bound.var(ids.pw_w), Some(bound.var(ids.pw_b)), 1, 1)?;
        ops::glu(h)
    }
}

/// Transposed convolution of one chunk: the untrimmed output plus the carried
/// overlap, emitting `n * stride` samples and keeping the rest as the tail.
fn transpose_with_tail<S: Scalar>(
    x: &Tensor<S>,
    w: Var<'_, S>,
    b: Var<'_, S>,
    stride: usize,
    tail: &mut History<S>,
) -> Result<Tensor<S>> {
    let full = conv::conv_transpose1d_full(x, &w.value(), stride)?;
    let cout = full.dim(1);
    let t_full = full.dim(2);
    let t_out = x.dim(2) * stride;
    let bias = b.value();
    let mut fd = full.into_data();
    let mut out = Vec::with_capacity(cout * t_out);
    for c in 0..cout {
        let row = &mut fd[c * t_full..(c + 1) * t_full];
        for (j, v) in tail.data[c * tail.len..(c + 1) * tail.len].iter().enumerate() {
            row[j] = row[j] + *v;
        }
        out.extend(row[..t_out].iter().map(|&v| v + bias.data()[c]));
        tail.data[c * tail.len..(c + 1) * tail.len].copy_from_slice(&row[t_out..]);
    }
    Tensor::new(&[1, cout, t_out], out)
}
