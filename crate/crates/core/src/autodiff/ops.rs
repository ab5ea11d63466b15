//! Differentiable operations. Every op checks shapes, computes its value with
//! plain loops or a shared kernel, and records a backward rule.

use crate::autodiff::graph::{BackwardCtx, Var};
use crate::error::{arg_err, shape_err, Result};
use crate::kernels::conv::{self, ConvGeometry};
use crate::kernels::gru::{self, GruWeights};
use crate::kernels::norm;
use crate::tensor::{Scalar, Tensor};

fn same_shape<S: Scalar>(a: Var<'_, S>, b: Var<'_, S>, op: &str) -> Result<()> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return shape_err(format!("{op}: {sa:?} vs {sb:?}"));
    }
    Ok(())
}

fn rank3<S: Scalar>(x: Var<'_, S>, op: &str) -> Result<(usize, usize, usize)> {
    let s = x.shape();
    if s.len() != 3 {
        return shape_err(format!("{op}: expected [B, C, T], got {s:?}"));
    }
    Ok((s[0], s[1], s[2]))
}

fn unary<'g, S: Scalar>(
    x: Var<'g, S>,
    name: &str,
    f: impl Fn(S) -> S,
    df: impl Fn(S, S) -> S + 'static,
) -> Result<Var<'g, S>> {
    let value = x.value().map(f);
    x.graph().record(name, value, &[x], move |ctx| {
        let x = ctx.inputs[0];
        let y = ctx.output;
        let g = Tensor::from_fn(x.shape(), |i| ctx.grad.data()[i] * df(x.data()[i], y.data()[i]));
        vec![Some(g)]
    })
}

pub fn add<'g, S: Scalar>(a: Var<'g, S>, b: Var<'g, S>) -> Result<Var<'g, S>> {
    same_shape(a, b, "add")?;
    let v = a.value().zip_map(&b.value(), |x, y| x + y);
    a.graph().record("add", v, &[a, b], |ctx| {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.clone())]
    })
}

pub fn sub<'g, S: Scalar>(a: Var<'g, S>, b: Var<'g, S>) -> Result<Var<'g, S>> {
    same_shape(a, b, "sub")?;
    let v = a.value().zip_map(&b.value(), |x, y| x - y);
    a.graph().record("sub", v, &[a, b], |ctx| {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.map(|g| -g))]
    })
}

pub fn mul<'g, S: Scalar>(a: Var<'g, S>, b: Var<'g, S>) -> Result<Var<'g, S>> {
    same_shape(a, b, "mul")?;
    let v = a.value().zip_map(&b.value(), |x, y| x * y);
    a.graph().record("mul", v, &[a, b], |ctx| {
        let (a, b) = (ctx.inputs[0], ctx.inputs[1]);
        vec![
            ctx.needs[0].then(|| ctx.grad.zip_map(b, |g, y| g * y)),
            ctx.needs[1].then(|| ctx.grad.zip_map(a, |g, x| g * x)),
        ]
    })
}

/// Quotient of two single-element tensors.
pub fn div_scalar<'g, S: Scalar>(a: Var<'g, S>, b: Var<'g, S>) -> Result<Var<'g, S>> {
    if a.value().len() != 1 || b.value().len() != 1 {
        return shape_err("div_scalar: operands must be single elements");
    }
    let (x, y) = (a.item(), b.item());
    if y == S::zero() {
        return arg_err("div_scalar: division by zero");
    }
    a.graph().record("div", Tensor::scalar(x / y), &[a, b], |ctx| {
        let (x, y) = (ctx.inputs[0].data()[0], ctx.inputs[1].data()[0]);
        let g = ctx.grad.data()[0];
        vec![
            Some(Tensor::scalar(g / y)),
            Some(Tensor::scalar(-g * x / (y * y))),
        ]
    })
}

pub fn scale<'g, S: Scalar>(x: Var<'g, S>, c: f64) -> Result<Var<'g, S>> {
    let c = S::of(c);
    unary(x, "scale", |v| v * c, move |_, _| c)
}

pub fn add_scalar<'g, S: Scalar>(x: Var<'g, S>, c: f64) -> Result<Var<'g, S>> {
    let c = S::of(c);
    unary(x, "add_scalar", |v| v + c, |_, _| S::one())
}

pub fn relu<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(
        x,
        "relu",
        |v| v.max(S::zero()),
        |x, _| if x > S::zero() { S::one() } else { S::zero() },
    )
}

pub fn sigmoid<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(x, "sigmoid", sigmoid_fn, |_, y| y * (S::one() - y))
}

pub fn tanh<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(x, "tanh", |v| v.tanh(), |_, y| S::one() - y * y)
}

pub fn abs<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(
        x,
        "abs",
        |v| v.abs(),
        |x, _| {
            if x > S::zero() {
                S::one()
            } else if x < S::zero() {
                -S::one()
            } else {
                S::zero()
            }
        },
    )
}

pub fn ln<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(x, "ln", |v| v.ln(), |x, _| S::one() / x)
}

pub fn sqrt<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(
        x,
        "sqrt",
        |v| v.sqrt(),
        |_, y| if y > S::zero() { S::of(0.5) / y } else { S::zero() },
    )
}

pub fn square<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    unary(x, "square", |v| v * v, |x, _| S::of(2.0) * x)
}

/// `max(x, floor)`; gradient is zero where the floor is active.
pub fn clamp_min<'g, S: Scalar>(x: Var<'g, S>, floor: f64) -> Result<Var<'g, S>> {
    let f = S::of(floor);
    unary(
        x,
        "clamp_min",
        move |v| v.max(f),
        move |x, _| if x > f { S::one() } else { S::zero() },
    )
}

#[inline]
pub(crate) fn sigmoid_fn<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

/// Per-channel PReLU over axis 1; a single-element slope is shared.
pub fn prelu<'g, S: Scalar>(x: Var<'g, S>, slope: Var<'g, S>) -> Result<Var<'g, S>> {
    let shape = x.shape();
    if shape.len() < 2 {
        return shape_err(format!("prelu: input needs a channel axis, got {shape:?}"));
    }
    let c = shape[1];
    let inner: usize = shape[2..].iter().product();
    let ns = slope.value().len();
    if ns != 1 && ns != c {
        return shape_err(format!("prelu: {ns} slopes for {c} channels"));
    }
    let ch = move |i: usize| if ns == 1 { 0 } else { (i / inner) % c };
    let v = {
        let xv = x.value();
        let a = slope.value();
        Tensor::from_fn(&shape, |i| {
            let xi = xv.data()[i];
            if xi >= S::zero() {
                xi
            } else {
                a.data()[ch(i)] * xi
            }
        })
    };
    x.graph().record("prelu", v, &[x, slope], move |ctx| {
        let (xv, a) = (ctx.inputs[0], ctx.inputs[1]);
        let g = ctx.grad.data();
        let mut ga = vec![S::zero(); a.len()];
        let gx = Tensor::from_fn(xv.shape(), |i| {
            let xi = xv.data()[i];
            if xi >= S::zero() {
                g[i]
            } else {
                ga[ch(i)] = ga[ch(i)] + g[i] * xi;
                a.data()[ch(i)] * g[i]
            }
        });
        vec![Some(gx), Some(Tensor::new(a.shape(), ga).expect("slope shape"))]
    })
}

/// Gated linear unit over the channel axis: `x[:, :C] * sigmoid(x[:, C:])`.
pub fn glu<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    let (nb, c2, t) = rank3(x, "glu")?;
    if c2 % 2 != 0 {
        return shape_err(format!("glu: odd channel count {c2}"));
    }
    let c = c2 / 2;
    let v = {
        let xv = x.value();
        let d = xv.data();
        let mut out = Vec::with_capacity(nb * c * t);
        for b in 0..nb {
            let base = b * c2 * t;
            for i in 0..c * t {
                out.push(d[base + i] * sigmoid_fn(d[base + c * t + i]));
            }
        }
        Tensor::new(&[nb, c, t], out)?
    };
    x.graph().record("glu", v, &[x], move |ctx| {
        let d = ctx.inputs[0].data();
        let g = ctx.grad.data();
        let mut gx = vec![S::zero(); d.len()];
        for b in 0..nb {
            let base = b * c2 * t;
            for i in 0..c * t {
                let a = d[base + i];
                let s = sigmoid_fn(d[base + c * t + i]);
                let gi = g[b * c * t + i];
                gx[base + i] = gi * s;
                gx[base + c * t + i] = gi * a * s * (S::one() - s);
            }
        }
        vec![Some(Tensor::new(&[nb, c2, t], gx).expect("glu grad"))]
    })
}

pub fn sum<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    let v = Tensor::scalar(x.value().sum());
    x.graph().record("sum", v, &[x], |ctx| {
        let g = ctx.grad.data()[0];
        vec![Some(Tensor::full(ctx.inputs[0].shape(), g))]
    })
}

pub fn mean<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    let n = x.value().len() as f64;
    scale(sum(x)?, 1.0 / n)
}

/// Mean absolute value.
pub fn l1_mean<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    mean(abs(x)?)
}

/// Frobenius / Euclidean norm over all elements.
pub fn l2_norm<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    sqrt(sum(square(x)?)?)
}

pub fn reshape<'g, S: Scalar>(x: Var<'g, S>, shape: &[usize]) -> Result<Var<'g, S>> {
    let v = x.to_tensor().reshape(shape)?;
    x.graph().record("reshape", v, &[x], |ctx| {
        let g = ctx.grad.clone().reshape(ctx.inputs[0].shape()).expect("reshape grad");
        vec![Some(g)]
    })
}

fn swap12<S: Scalar>(t: &Tensor<S>) -> Tensor<S> {
    let (b, m, n) = (t.dim(0), t.dim(1), t.dim(2));
    let d = t.data();
    let mut out = vec![S::zero(); d.len()];
    for bi in 0..b {
        for i in 0..m {
            for j in 0..n {
                out[(bi * n + j) * m + i] = d[(bi * m + i) * n + j];
            }
        }
    }
    Tensor::new(&[b, n, m], out).expect("transpose")
}

/// `[B, M, N] -> [B, N, M]`
pub fn transpose12<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    rank3(x, "transpose12")?;
    let v = swap12(&x.value());
    x.graph()
        .record("transpose12", v, &[x], |ctx| vec![Some(swap12(ctx.grad))])
}

/// Channels `start..start+len` of a `[B, C, T]` tensor.
pub fn slice_channels<'g, S: Scalar>(x: Var<'g, S>, start: usize, len: usize) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "slice_channels")?;
    if len == 0 || start + len > c {
        return shape_err(format!("slice_channels: {start}+{len} out of {c}"));
    }
    let v = {
        let xv = x.value();
        let mut out = Vec::with_capacity(nb * len * t);
        for b in 0..nb {
            out.extend_from_slice(&xv.data()[(b * c + start) * t..(b * c + start + len) * t]);
        }
        Tensor::new(&[nb, len, t], out)?
    };
    x.graph().record("slice_channels", v, &[x], move |ctx| {
        let mut gx = vec![S::zero(); nb * c * t];
        for b in 0..nb {
            gx[(b * c + start) * t..(b * c + start + len) * t]
                .copy_from_slice(&ctx.grad.data()[b * len * t..(b + 1) * len * t]);
        }
        vec![Some(Tensor::new(&[nb, c, t], gx).expect("slice grad"))]
    })
}

pub fn concat_channels<'g, S: Scalar>(parts: &[Var<'g, S>]) -> Result<Var<'g, S>> {
    let Some(first) = parts.first() else {
        return shape_err("concat_channels: nothing to concatenate");
    };
    let (nb, _, t) = rank3(*first, "concat_channels")?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (pb, pc, pt) = rank3(*p, "concat_channels")?;
        if pb != nb || pt != t {
            return shape_err("concat_channels: batch/time mismatch");
        }
        widths.push(pc);
    }
    let c: usize = widths.iter().sum();
    let mut out = vec![S::zero(); nb * c * t];
    let mut off = 0;
    for (p, &w) in parts.iter().zip(&widths) {
        let pv = p.value();
        for b in 0..nb {
            out[(b * c + off) * t..(b * c + off + w) * t]
                .copy_from_slice(&pv.data()[b * w * t..(b + 1) * w * t]);
        }
        off += w;
    }
    let v = Tensor::new(&[nb, c, t], out)?;
    first.graph().record("concat_channels", v, parts, move |ctx| {
        let mut off = 0;
        widths
            .iter()
            .map(|&w| {
                let mut g = Vec::with_capacity(nb * w * t);
                for b in 0..nb {
                    g.extend_from_slice(&ctx.grad.data()[(b * c + off) * t..(b * c + off + w) * t]);
                }
                off += w;
                Some(Tensor::new(&[nb, w, t], g).expect("concat grad"))
            })
            .collect()
    })
}

/// Prepends `n` zeros along time.
pub fn pad_left_time<'g, S: Scalar>(x: Var<'g, S>, n: usize) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "pad_left_time")?;
    if n == 0 {
        return Ok(x);
    }
    let tp = t + n;
    let v = {
        let xv = x.value();
        let mut out = vec![S::zero(); nb * c * tp];
        for row in 0..nb * c {
            out[row * tp + n..(row + 1) * tp].copy_from_slice(&xv.data()[row * t..(row + 1) * t]);
        }
        Tensor::new(&[nb, c, tp], out)?
    };
    x.graph().record("pad_left_time", v, &[x], move |ctx| {
        let mut g = Vec::with_capacity(nb * c * t);
        for row in 0..nb * c {
            g.extend_from_slice(&ctx.grad.data()[row * tp + n..(row + 1) * tp]);
        }
        vec![Some(Tensor::new(&[nb, c, t], g).expect("pad grad"))]
    })
}

/// Samples `start..start+len` along time.
pub fn slice_time<'g, S: Scalar>(x: Var<'g, S>, start: usize, len: usize) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "slice_time")?;
    if len == 0 || start + len > t {
        return shape_err(format!("slice_time: {start}+{len} out of {t}"));
    }
    if start == 0 && len == t {
        return Ok(x);
    }
    let v = {
        let xv = x.value();
        let mut out = Vec::with_capacity(nb * c * len);
        for row in 0..nb * c {
            out.extend_from_slice(&xv.data()[row * t + start..row * t + start + len]);
        }
        Tensor::new(&[nb, c, len], out)?
    };
    x.graph().record("slice_time", v, &[x], move |ctx| {
        let mut g = vec![S::zero(); nb * c * t];
        for row in 0..nb * c {
            g[row * t + start..row * t + start + len]
                .copy_from_slice(&ctx.grad.data()[row * len..(row + 1) * len]);
        }
        vec![Some(Tensor::new(&[nb, c, t], g).expect("slice grad"))]
    })
}

/// Item `index` of the leading (batch) axis, with that axis removed.
pub fn select_batch<'g, S: Scalar>(x: Var<'g, S>, index: usize) -> Result<Var<'g, S>> {
    let shape = x.shape();
    if shape.len() < 2 || index >= shape[0] {
        return shape_err(format!("select_batch: index {index} for {shape:?}"));
    }
    let inner: usize = shape[1..].iter().product();
    let v = Tensor::new(
        &shape[1..],
        x.value().data()[index * inner..(index + 1) * inner].to_vec(),
    )?;
    x.graph().record("select_batch", v, &[x], move |ctx| {
        let mut g = Tensor::zeros(ctx.inputs[0].shape());
        g.data_mut()[index * inner..(index + 1) * inner].copy_from_slice(ctx.grad.data());
        vec![Some(g)]
    })
}

/// Multiplies every leading-axis item by a constant factor.
pub fn scale_batch<'g, S: Scalar>(x: Var<'g, S>, factors: &[S]) -> Result<Var<'g, S>> {
    let shape = x.shape();
    if shape[0] != factors.len() {
        return shape_err(format!("scale_batch: {} factors for {shape:?}", factors.len()));
    }
    let inner: usize = shape[1..].iter().product();
    let f = factors.to_vec();
    let v = {
        let xv = x.value();
        Tensor::from_fn(&shape, |i| xv.data()[i] * f[i / inner])
    };
    x.graph().record("scale_batch", v, &[x], move |ctx| {
        vec![Some(Tensor::from_fn(ctx.grad.shape(), |i| ctx.grad.data()[i] * f[i / inner]))]
    })
}

/// Multiplies every element by a learnable single-element factor.
pub fn mul_scalar_var<'g, S: Scalar>(x: Var<'g, S>, s: Var<'g, S>) -> Result<Var<'g, S>> {
    if s.value().len() != 1 {
        return shape_err("mul_scalar_var: factor must be a single element");
    }
    let k = s.item();
    let v = x.value().map(|v| v * k);
    x.graph().record("mul_scalar_var", v, &[x, s], |ctx| {
        let k = ctx.inputs[1].data()[0];
        vec![
            Some(ctx.grad.map(|g| g * k)),
            Some(Tensor::scalar(ctx.grad.dot(ctx.inputs[0]))),
        ]
    })
}

/// `h[B, C, T] * e[B, C]` broadcast over time.
pub fn mul_channels<'g, S: Scalar>(h: Var<'g, S>, e: Var<'g, S>) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(h, "mul_channels")?;
    if e.shape() != [nb, c] {
        return shape_err(format!("mul_channels: gate {:?} for [{nb}, {c}, {t}]", e.shape()));
    }
    let v = {
        let (hv, ev) = (h.value(), e.value());
        Tensor::from_fn(&[nb, c, t], |i| hv.data()[i] * ev.data()[i / t])
    };
    h.graph().record("mul_channels", v, &[h, e], move |ctx| {
        let (hv, ev, g) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.grad.data());
        let gh = Tensor::from_fn(&[nb, c, t], |i| g[i] * ev[i / t]);
        let ge = Tensor::from_fn(&[nb, c], |r| {
            (0..t).map(|j| g[r * t + j] * hv[r * t + j]).sum()
        });
        vec![Some(gh), Some(ge)]
    })
}

/// Time mean: `[B, C, T] -> [B, C]`.
pub fn global_avg_pool_time<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "global_avg_pool_time")?;
    let n = S::of(t as f64);
    let v = {
        let xv = x.value();
        Tensor::from_fn(&[nb, c], |r| xv.data()[r * t..(r + 1) * t].iter().copied().sum::<S>() / n)
    };
    x.graph().record("global_avg_pool_time", v, &[x], move |ctx| {
        vec![Some(Tensor::from_fn(&[nb, c, t], |i| ctx.grad.data()[i / t] / n))]
    })
}

/// Running time mean: `out[.., t] = mean(x[.., 0..=t])`.
pub fn cummean_time<'g, S: Scalar>(x: Var<'g, S>) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "cummean_time")?;
    let v = {
        let xv = x.value();
        let mut out = vec![S::zero(); nb * c * t];
        for r in 0..nb * c {
            let mut acc = S::zero();
            for j in 0..t {
                acc = acc + xv.data()[r * t + j];
                out[r * t + j] = acc / S::of((j + 1) as f64);
            }
        }
        Tensor::new(&[nb, c, t], out)?
    };
    x.graph().record("cummean_time", v, &[x], move |ctx| {
        let g = ctx.grad.data();
        let mut gx = vec![S::zero(); nb * c * t];
        for r in 0..nb * c {
            let mut acc = S::zero();
            for j in (0..t).rev() {
                acc = acc + g[r * t + j] / S::of((j + 1) as f64);
                gx[r * t + j] = acc;
            }
        }
        vec![Some(Tensor::new(&[nb, c, t], gx).expect("cummean grad"))]
    })
}

/// Adaptive max pooling over time into `out_len` bins. Bin `i` covers
/// `floor(i*T/out_len) .. ceil((i+1)*T/out_len)`; ties go to the lowest index.
pub fn adaptive_max_pool_time<'g, S: Scalar>(x: Var<'g, S>, out_len: usize) -> Result<Var<'g, S>> {
    let (nb, c, t) = rank3(x, "adaptive_max_pool_time")?;
    if out_len == 0 {
        return arg_err("adaptive_max_pool_time: out_len must be >= 1");
    }
    let mut arg = vec![0usize; nb * c * out_len];
    let v = {
        let xv = x.value();
        let d = xv.data();
        let mut out = vec![S::zero(); nb * c * out_len];
        for r in 0..nb * c {
            for i in 0..out_len {
                let lo = i * t / out_len;
                let hi = ((i + 1) * t).div_ceil(out_len);
                let mut best = lo;
                for j in lo + 1..hi {
                    if d[r * t + j] > d[r * t + best] {
                        best = j;
                    }
                }
                arg[r * out_len + i] = r * t + best;
                out[r * out_len + i] = d[r * t + best];
            }
        }
        Tensor::new(&[nb, c, out_len], out)?
    };
    x.graph().record("adaptive_max_pool_time", v, &[x], move |ctx| {
        let mut gx = vec![S::zero(); nb * c * t];
        for (o, &src) in arg.iter().enumerate() {
            gx[src] = gx[src] + ctx.grad.data()[o];
        }
        vec![Some(Tensor::new(&[nb, c, t], gx).expect("pool grad"))]
    })
}

/// `x[N, in] W[out, in]^T + b[out]`.
pub fn linear<'g, S: Scalar>(x: Var<'g, S>, w: Var<'g, S>, b: Var<'g, S>) -> Result<Var<'g, S>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || b.shape() != [ws[0]] {
        return shape_err(format!(
            "linear: x {xs:?}, w {ws:?}, b {:?}",
            b.shape()
        ));
    }
    let (n, fin, fout) = (xs[0], xs[1], ws[0]);
    let v = {
        let (xv, wv, bv) = (x.value(), w.value(), b.value());
        Tensor::from_fn(&[n, fout], |i| {
            let (r, o) = (i / fout, i % fout);
            let xr = &xv.data()[r * fin..(r + 1) * fin];
            let wr = &wv.data()[o * fin..(o + 1) * fin];
            bv.data()[o] + xr.iter().zip(wr).map(|(&a, &c)| a * c).sum::<S>()
        })
    };
    x.graph().record("linear", v, &[x, w, b], move |ctx| {
        let (xv, wv, g) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.grad.data());
        let gx = Tensor::from_fn(&[n, fin], |i| {
            let (r, k) = (i / fin, i % fin);
            (0..fout).map(|o| g[r * fout + o] * wv[o * fin + k]).sum()
        });
        let gw = Tensor::from_fn(&[fout, fin], |i| {
            let (o, k) = (i / fin, i % fin);
            (0..n).map(|r| g[r * fout + o] * xv[r * fin + k]).sum()
        });
        let gb = Tensor::from_fn(&[fout], |o| (0..n).map(|r| g[r * fout + o]).sum());
        vec![Some(gx), Some(gw), Some(gb)]
    })
}

/// 1-D convolution with explicit geometry; see [`ConvGeometry`].
pub fn conv1d<'g, S: Scalar>(
    x: Var<'g, S>,
    w: Var<'g, S>,
    b: Option<Var<'g, S>>,
    geo: ConvGeometry,
) -> Result<Var<'g, S>> {
    let v = {
        let bv = b.map(|b| b.value());
        conv::conv1d(&x.value(), &w.value(), bv.as_deref(), geo)?
    };
    let mut parents = vec![x, w];
    parents.extend(b);
    let has_bias = b.is_some();
    x.graph().record("conv1d", v, &parents, move |ctx| {
        let (gx, gw, gb) = conv::conv1d_backward(ctx.inputs[0], ctx.inputs[1], ctx.grad, geo);
        let mut out = vec![ctx.needs[0].then_some(gx), Some(gw)];
        if has_bias {
            out.push(Some(gb));
        }
        out
    })
}

/// Causal convolution: left zero-padding of `(K-1)*dilation`, output length
/// `ceil(T/stride)`.
pub fn conv1d_causal<'g, S: Scalar>(
    x: Var<'g, S>,
    w: Var<'g, S>,
    b: Option<Var<'g, S>>,
    stride: usize,
    dilation: usize,
) -> Result<Var<'g, S>> {
    let k = w.value().dim(2);
    if k == 0 || stride == 0 || dilation == 0 {
        return arg_err("conv1d_causal: kernel, stride and dilation must be >= 1");
    }
    conv1d(x, w, b, ConvGeometry::causal(k, stride, dilation))
}

/// Causal transposed convolution: the full `T*stride + K - stride` output with
/// the trailing `K - stride` samples trimmed.
pub fn conv_transpose1d_causal<'g, S: Scalar>(
    x: Var<'g, S>,
    w: Var<'g, S>,
    b: Option<Var<'g, S>>,
    stride: usize,
) -> Result<Var<'g, S>> {
    let (full, cout, t_out) = {
        let full = conv::conv_transpose1d_full(&x.value(), &w.value(), stride)?;
        let cout = full.dim(1);
        (full, cout, x.value().dim(2) * stride)
    };
    if let Some(b) = b {
        if b.shape() != [cout] {
            return shape_err(format!("conv_transpose1d: bias {:?} for {cout} channels", b.shape()));
        }
    }
    let nb = full.dim(0);
    let t_full = full.dim(2);
    let v = {
        let bv = b.map(|b| b.value());
        let fd = full.data();
        Tensor::from_fn(&[nb, cout, t_out], |i| {
            let (row, t) = (i / t_out, i % t_out);
            let bias = bv.as_ref().map_or(S::zero(), |b| b.data()[row % cout]);
            fd[row * t_full + t] + bias
        })
    };
    let mut parents = vec![x, w];
    parents.extend(b);
    let has_bias = b.is_some();
    x.graph().record("conv_transpose1d", v, &parents, move |ctx| {
        let g = ctx.grad.data();
        let mut gfull = vec![S::zero(); nb * cout * t_full];
        for row in 0..nb * cout {
            gfull[row * t_full..row * t_full + t_out].copy_from_slice(&g[row * t_out..(row + 1) * t_out]);
        }
        let gfull = Tensor::new(&[nb, cout, t_full], gfull).expect("grad shape");
        let (gx, gw) = conv::conv_transpose1d_full_backward(ctx.inputs[0], ctx.inputs[1], &gfull, stride);
        let mut out = vec![ctx.needs[0].then_some(gx), Some(gw)];
        if has_bias {
            let gb = Tensor::from_fn(&[cout], |co| {
                (0..nb)
                    .map(|bi| g[(bi * cout + co) * t_out..(bi * cout + co + 1) * t_out].iter().copied().sum::<S>())
                    .sum()
            });
            out.push(Some(gb));
        }
        out
    })
}

fn norm_params<S: Scalar>(x: Var<'_, S>, gamma: Var<'_, S>, beta: Var<'_, S>, op: &str) -> Result<usize> {
    let (_, c, _) = rank3(x, op)?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return shape_err(format!("{op}: affine params must be [{c}]"));
    }
    Ok(c)
}

/// Batch normalization with batch statistics. Also returns the batch mean
/// and unbiased variance for running-statistics updates.
pub fn batch_norm_train<'g, S: Scalar>(
    x: Var<'g, S>,
    gamma: Var<'g, S>,
    beta: Var<'g, S>,
) -> Result<(Var<'g, S>, Vec<S>, Vec<S>)> {
    norm_params(x, gamma, beta, "batch_norm")?;
    let shape = x.shape();
    let out = norm::batch_norm_train(&x.value(), gamma.value().data(), beta.value().data());
    let n = (shape[0] * shape[2]) as f64;
    let unbiased: Vec<S> = out
        .var
        .iter()
        .map(|&v| if n > 1.0 { v * S::of(n / (n - 1.0)) } else { v })
        .collect();
    let (xhat, inv_std, mean) = (out.xhat, out.inv_std, out.mean);
    let y = x.graph().record("batch_norm", out.y, &[x, gamma, beta], move |ctx| {
        let (dx, dg, db) = norm::norm_backward(&shape, ctx.grad.data(), &xhat, &inv_std, ctx.inputs[1].data(), false);
        vec![
            Some(Tensor::new(&shape, dx).expect("bn grad")),
            Some(Tensor::new(&[shape[1]], dg).expect("bn grad")),
            Some(Tensor::new(&[shape[1]], db).expect("bn grad")),
        ]
    })?;
    Ok((y, mean, unbiased))
}

/// Batch normalization with stored statistics.
pub fn batch_norm_infer<'g, S: Scalar>(
    x: Var<'g, S>,
    gamma: Var<'g, S>,
    beta: Var<'g, S>,
    running_mean: &[S],
    running_var: &[S],
) -> Result<Var<'g, S>> {
    let c = norm_params(x, gamma, beta, "batch_norm")?;
    if running_mean.len() != c || running_var.len() != c {
        return shape_err("batch_norm: running statistics do not match channels");
    }
    let t = x.shape()[2];
    let eps = S::of(norm::NORM_EPS);
    let inv: Vec<S> = running_var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
    let rm = running_mean.to_vec();
    let v = {
        let (xv, g, b) = (x.value(), gamma.value(), beta.value());
        Tensor::from_fn(xv.shape(), |i| {
            let ch = (i / t) % c;
            g.data()[ch] * (xv.data()[i] - rm[ch]) * inv[ch] + b.data()[ch]
        })
    };
    x.graph().record("batch_norm", v, &[x, gamma, beta], move |ctx| {
        let (xv, g, gr) = (ctx.inputs[0], ctx.inputs[1].data(), ctx.grad.data());
        let gx = Tensor::from_fn(xv.shape(), |i| gr[i] * g[(i / t) % c] * inv[(i / t) % c]);
        let mut dg = vec![S::zero(); c];
        let mut db = vec![S::zero(); c];
        for (i, &gi) in gr.iter().enumerate() {
            let ch = (i / t) % c;
            dg[ch] = dg[ch] + gi * (xv.data()[i] - rm[ch]) * inv[ch];
            db[ch] = db[ch] + gi;
        }
        vec![
            Some(gx),
            Some(Tensor::new(&[c], dg).expect("bn grad")),
            Some(Tensor::new(&[c], db).expect("bn grad")),
        ]
    })
}

/// Instance normalization with per-channel affine parameters.
pub fn instance_norm<'g, S: Scalar>(x: Var<'g, S>, gamma: Var<'g, S>, beta: Var<'g, S>) -> Result<Var<'g, S>> {
    norm_params(x, gamma, beta, "instance_norm")?;
    let shape = x.shape();
    let out = norm::instance_norm(&x.value(), gamma.value().data(), beta.value().data());
    let (xhat, inv_std) = (out.xhat, out.inv_std);
    x.graph().record("instance_norm", out.y, &[x, gamma, beta], move |ctx| {
        let (dx, dg, db) = norm::norm_backward(&shape, ctx.grad.data(), &xhat, &inv_std, ctx.inputs[1].data(), true);
        vec![
            Some(Tensor::new(&shape, dx).expect("in grad")),
            Some(Tensor::new(&[shape[1]], dg).expect("in grad")),
            Some(Tensor::new(&[shape[1]], db).expect("in grad")),
        ]
    })
}

/// GRU layer over `x: [B, T, C]` starting from the constant state `h0`.
/// Returns the output sequence and the final hidden state.
pub fn gru<'g, S: Scalar>(
    x: Var<'g, S>,
    w_ih: Var<'g, S>,
    w_hh: Var<'g, S>,
    b_ih: Var<'g, S>,
    b_hh: Var<'g, S>,
    h0: &Tensor<S>,
) -> Result<(Var<'g, S>, Tensor<S>)> {
    let (out, last, cache) = {
        let (wi, wh, bi, bh) = (w_ih.value(), w_hh.value(), b_ih.value(), b_hh.value());
        let wts = GruWeights { w_ih: &wi, w_hh: &wh, b_ih: &bi, b_hh: &bh };
        gru::gru_forward(&x.value(), &wts, h0)?
    };
    let h0 = h0.clone();
    let y = x.graph().record("gru", out, &[x, w_ih, w_hh, b_ih, b_hh], move |ctx: &BackwardCtx<S>| {
        let wts = GruWeights {
            w_ih: ctx.inputs[1],
            w_hh: ctx.inputs[2],
            b_ih: ctx.inputs[3],
            b_hh: ctx.inputs[4],
        };
        let g = gru::gru_backward(ctx.inputs[0], &wts, &h0, ctx.output, &cache, ctx.grad);
        vec![Some(g.x), Some(g.w_ih), Some(g.w_hh), Some(g.b_ih), Some(g.b_hh)]
    })?;
    Ok((y, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn glu_with_zero_gate_halves_value() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 4, 2], &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]));
        let y = glu(x).unwrap();
        assert_eq!(y.shape(), vec![1, 2, 2]);
        assert_eq!(y.value().data(), &[0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn glu_saturated_gate_passes_value() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 2, 1], &[3.0, 60.0]));
        let y = glu(x).unwrap();
        assert!((y.item() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn glu_rejects_odd_channels() {
        let g = Graph::<f64>::new();
        assert!(glu(g.constant(Tensor::zeros(&[1, 3, 2]))).is_err());
    }

    #[test]
    fn prelu_negative_slope() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 1, 1], &[-1.0]));
        let a = g.constant(t(&[1], &[0.25]));
        assert_eq!(prelu(x, a).unwrap().item(), -0.25);
    }

    #[test]
    fn pooling_on_constants() {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(&[2, 3, 5], 1.5));
        let p = global_avg_pool_time(x).unwrap();
        assert!(p.value().data().iter().all(|&v| v == 1.5));
        let y = g.constant(t(&[1, 2, 4], &[1.0, 5.0, 2.0, 5.0, -1.0, -3.0, -0.5, -2.0]));
        let m = adaptive_max_pool_time(y, 1).unwrap();
        assert_eq!(m.value().data(), &[5.0, -0.5]);
    }

    #[test]
    fn max_pool_ties_route_to_lowest_index() {
        let g = Graph::<f64>::new();
        let x = g.param(t(&[1, 1, 4], &[2.0, 7.0, 7.0, 1.0]));
        let m = adaptive_max_pool_time(x, 1).unwrap();
        let grads = g.backward(sum(m).unwrap()).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn batch_norm_infer_identity_and_shift() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 2, 2], &[1.0, -2.0, 0.5, 3.0]));
        let gamma = g.constant(Tensor::ones(&[2]));
        let beta = g.constant(Tensor::zeros(&[2]));
        let y = batch_norm_infer(x, gamma, beta, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        // identity up to the eps floor: x / sqrt(1 + 1e-5)
        for (a, b) in y.value().data().iter().zip(x.value().data()) {
            assert!((a - b).abs() <= 1e-5 * b.abs());
        }
        let beta = g.constant(Tensor::full(&[2], 0.75));
        let y2 = batch_norm_infer(x, gamma, beta, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        for (a, b) in y2.value().data().iter().zip(y.value().data()) {
            assert!((a - b - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn cummean_is_prefix_mean() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 1, 4], &[2.0, 4.0, 6.0, 0.0]));
        assert_eq!(cummean_time(x).unwrap().value().data(), &[2.0, 3.0, 4.0, 3.0]);
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1], &[-1.0]));
        assert!(ln(x).is_err());
    }

    #[test]
    fn conv_channel_mismatch_is_an_error() {
        let g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros(&[1, 2, 4]));
        let w = g.constant(Tensor::zeros(&[1, 3, 2]));
        assert!(conv1d_causal(x, w, None, 1, 1).is_err());
    }
}
