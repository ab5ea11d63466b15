//! 1-D convolution kernels on `[batch, channels, time]` buffers.
//!
//! `conv1d` evaluates `out[t] = b + sum_k w[k] * xpad[t*stride + k*dilation]`
//! where `xpad` is the input with `pad_left` virtual zeros in front. With
//! `pad_left = (K-1)*dilation` this is the causal convolution; with
//! `pad_left = 0` over `[history | chunk]` it is the streaming form.

use crate::error::{shape_err, Result};
use crate::parallel::for_each_chunk;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub dilation: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn causal(kernel: usize, stride: usize, dilation: usize) -> Self {
        Self {
            stride,
            dilation,
            pad_left: (kernel - 1) * dilation,
        }
    }

    pub fn valid(stride: usize, dilation: usize) -> Self {
        Self {
            stride,
            dilation,
            pad_left: 0,
        }
    }

    pub fn out_len(&self, t_in: usize, kernel: usize) -> usize {
        let span = (kernel - 1) * self.dilation + 1;
        let padded = self.pad_left + t_in;
        if padded < span {
            0
        } else {
            (padded - span) / self.stride + 1
        }
    }

    /// Range of output frames `t` for which `t*stride + offset` lands in `0..t_in`.
    #[inline]
    fn frame_range(&self, offset: isize, t_in: usize, t_out: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let lo = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
        let hi_excl = t_in as isize - offset;
        let hi = if hi_excl <= 0 { 0 } else { (hi_excl + s - 1) / s };
        let lo = lo.max(0) as usize;
        let hi = (hi as usize).min(t_out);
        (lo, hi.max(lo))
    }
}

fn conv_dims<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
) -> Result<(usize, usize, usize, usize, usize)> {
    x.expect_rank(3, "conv1d input")?;
    w.expect_rank(3, "conv1d weight")?;
    let (b, cin, t) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, wcin, k) = (w.dim(0), w.dim(1), w.dim(2));
    if wcin != cin {
        return shape_err(format!(
            "conv1d: input has {cin} channels, weight expects {wcin}"
        ));
    }
    Ok((b, cin, t, cout, k))
}

pub fn conv1d<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    geo: ConvGeometry,
) -> Result<Tensor<S>> {
    let (nb, cin, t_in, cout, k) = conv_dims(x, w)?;
    if geo.stride == 0 || geo.dilation == 0 {
        return shape_err("conv1d: stride and dilation must be >= 1");
    }
    if let Some(b) = bias {
        b.expect_shape(&[cout], "conv1d bias")?;
    }
    let t_out = geo.out_len(t_in, k);
    if t_out == 0 {
        return shape_err(format!("conv1d: input length {t_in} too short"));
    }
    let mut out = vec![S::zero(); nb * cout * t_out];
    let xd = x.data();
    let wd = w.data();
    let bd = bias.map(|b| b.data());
    for_each_chunk(&mut out, t_out, |row, o| {
        let (bi, co) = (row / cout, row % cout);
        if let Some(bd) = bd {
            o.fill(bd[co]);
        }
        for ci in 0..cin {
            let xr = &xd[(bi * cin + ci) * t_in..(bi * cin + ci + 1) * t_in];
            for kk in 0..k {
                let wv = wd[(co * cin + ci) * k + kk];
                let offset = (kk * geo.dilation) as isize - geo.pad_left as isize;
                let (lo, hi) = geo.frame_range(offset, t_in, t_out);
                if lo >= hi {
                    continue;
                }
                if geo.stride == 1 {
                    let start = (lo as isize + offset) as usize;
                    let xs = &xr[start..start + (hi - lo)];
                    for (ov, &xv) in o[lo..hi].iter_mut().zip(xs) {
                        *ov = *ov + wv * xv;
                    }
                } else {
                    for t in lo..hi {
                        let j = (t * geo.stride) as isize + offset;
                        o[t] = o[t] + wv * xr[j as usize];
                    }
                }
            }
        }
    });
    Tensor::new(&[nb, cout, t_out], out)
}

/// Gradients of `conv1d` with respect to input, weight and bias.
pub fn conv1d_backward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    grad: &Tensor<S>,
    geo: ConvGeometry,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (nb, cin, t_in) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, k) = (w.dim(0), w.dim(2));
    let t_out = grad.dim(2);
    let xd = x.data();
    let wd = w.data();
    let gd = grad.data();

    let mut gx = vec![S::zero(); nb * cin * t_in];
    for_each_chunk(&mut gx, t_in, |row, gxr| {
        let (bi, ci) = (row / cin, row % cin);
        for co in 0..cout {
            let gr = &gd[(bi * cout + co) * t_out..(bi * cout + co + 1) * t_out];
            for kk in 0..k {
                let wv = wd[(co * cin + ci) * k + kk];
                let offset = (kk * geo.dilation) as isize - geo.pad_left as isize;
                let (lo, hi) = geo.frame_range(offset, t_in, t_out);
                for t in lo..hi {
                    let j = ((t * geo.stride) as isize + offset) as usize;
                    gxr[j] = gxr[j] + wv * gr[t];
                }
            }
        }
    });

    let mut gw = vec![S::zero(); cout * cin * k];
    for_each_chunk(&mut gw, cin * k, |co, gwr| {
        for bi in 0..nb {
            let gr = &gd[(bi * cout + co) * t_out..(bi * cout + co + 1) * t_out];
            for ci in 0..cin {
                let xr = &xd[(bi * cin + ci) * t_in..(bi * cin + ci + 1) * t_in];
                for kk in 0..k {
                    let offset = (kk * geo.dilation) as isize - geo.pad_left as isize;
                    let (lo, hi) = geo.frame_range(offset, t_in, t_out);
                    let mut acc = S::zero();
                    for t in lo..hi {
                        let j = ((t * geo.stride) as isize + offset) as usize;
                        acc = acc + gr[t] * xr[j];
                    }
                    gwr[ci * k + kk] = gwr[ci * k + kk] + acc;
                }
            }
        }
    });

    let mut gb = vec![S::zero(); cout];
    for bi in 0..nb {
        for (co, g) in gb.iter_mut().enumerate() {
            let gr = &gd[(bi * cout + co) * t_out..(bi * cout + co + 1) * t_out];
            *g = *g + gr.iter().copied().sum::<S>();
        }
    }

    (
        Tensor::new(&[nb, cin, t_in], gx).expect("grad shape"),
        Tensor::new(&[cout, cin, k], gw).expect("grad shape"),
        Tensor::new(&[cout], gb).expect("grad shape"),
    )
}

/// Untrimmed transposed convolution without bias:
/// `y[t*stride + k] += x[t] * w[k]`, length `T*stride + K - stride`.
pub fn conv_transpose1d_full<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    stride: usize,
) -> Result<Tensor<S>> {
    x.expect_rank(3, "conv_transpose1d input")?;
    w.expect_rank(3, "conv_transpose1d weight")?;
    let (nb, cin, t_in) = (x.dim(0), x.dim(1), x.dim(2));
    let (wcin, cout, k) = (w.dim(0), w.dim(1), w.dim(2));
    if wcin != cin {
        return shape_err(format!(
            "conv_transpose1d: input has {cin} channels, weight expects {wcin}"
        ));
    }
    if stride == 0 || k < stride {
        return shape_err(format!(
            "conv_transpose1d: kernel {k} must be >= stride {stride} >= 1"
        ));
    }
    let t_full = t_in * stride + k - stride;
    let mut out = vec![S::zero(); nb * cout * t_full];
    let xd = x.data();
    let wd = w.data();
    for_each_chunk(&mut out, t_full, |row, o| {
        let (bi, co) = (row / cout, row % cout);
        for ci in 0..cin {
            let xr = &xd[(bi * cin + ci) * t_in..(bi * cin + ci + 1) * t_in];
            for kk in 0..k {
                let wv = wd[(ci * cout + co) * k + kk];
                for (t, &xv) in xr.iter().enumerate() {
                    let j = t * stride + kk;
                    o[j] = o[j] + wv * xv;
                }
            }
        }
    });
    Tensor::new(&[nb, cout, t_full], out)
}

/// Gradients of `conv_transpose1d_full` given the gradient of the full output.
pub fn conv_transpose1d_full_backward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    grad_full: &Tensor<S>,
    stride: usize,
) -> (Tensor<S>, Tensor<S>) {
    let (nb, cin, t_in) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, k) = (w.dim(1), w.dim(2));
    let t_full = grad_full.dim(2);
    let xd = x.data();
    let wd = w.data();
    let gd = grad_full.data();

    let mut gx = vec![S::zero(); nb * cin * t_in];
    for_each_chunk(&mut gx, t_in, |row, gxr| {
        let (bi, ci) = (row / cin, row % cin);
        for co in 0..cout {
            let gr = &gd[(bi * cout + co) * t_full..(bi * cout + co + 1) * t_full];
            for kk in 0..k {
                let wv = wd[(ci * cout + co) * k + kk];
                for (t, g) in gxr.iter_mut().enumerate() {
                    *g = *g + wv * gr[t * stride + kk];
                }
            }
        }
    });

    let mut gw = vec![S::zero(); cin * cout * k];
    for_each_chunk(&mut gw, cout * k, |ci, gwr| {
        for bi in 0..nb {
            let xr = &xd[(bi * cin + ci) * t_in..(bi * cin + ci + 1) * t_in];
            for co in 0..cout {
                let gr = &gd[(bi * cout + co) * t_full..(bi * cout + co + 1) * t_full];
                for kk in 0..k {
                    let mut acc = S::zero();
                    for (t, &xv) in xr.iter().enumerate() {
                        acc = acc + xv * gr[t * stride + kk];
                    }
                    gwr[co * k + kk] = gwr[co * k + kk] + acc;
                }
            }
        }
    });

    (
        Tensor::new(&[nb, cin, t_in], gx).expect("grad shape"),
        Tensor::new(&[cin, cout, k], gw).expect("grad shape"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_convolution() {
        let x = Tensor::<f64>::from_f64(&[1, 1, 3], &[1.0, 2.0, 3.0]).unwrap();
        let w = Tensor::from_f64(&[1, 1, 2], &[1.0, 1.0]).unwrap();
        let y = conv1d(&x, &w, None, ConvGeometry::causal(2, 1, 1)).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn strided_output_length_is_ceil() {
        let geo = ConvGeometry::causal(4, 2, 1);
        assert_eq!(geo.out_len(6, 4), 3);
        assert_eq!(geo.out_len(7, 4), 4);
        assert_eq!(geo.out_len(1, 4), 1);
        let geo = ConvGeometry::causal(3, 1, 2);
        assert_eq!(geo.out_len(5, 3), 5);
    }

    #[test]
    fn streaming_geometry_matches_causal() {
        // [history | chunk] with valid padding reproduces the causal output tail.
        let x = Tensor::<f64>::from_fn(&[1, 2, 16], |i| ((i * 7) % 5) as f64 - 2.0);
        let w = Tensor::from_fn(&[3, 2, 4], |i| (i as f64 * 0.37).sin());
        let full = conv1d(&x, &w, None, ConvGeometry::causal(4, 2, 1)).unwrap();
        // second half, with 3 samples of history
        let mut part = Vec::new();
        for c in 0..2 {
            part.extend_from_slice(&x.data()[c * 16 + 5..c * 16 + 16]);
        }
        let part = Tensor::new(&[1, 2, 11], part).unwrap();
        let tail = conv1d(&part, &w, None, ConvGeometry::valid(2, 1)).unwrap();
        assert_eq!(tail.dim(2), 4);
        for co in 0..3 {
            for t in 0..4 {
                assert_eq!(tail.get(&[0, co, t]), full.get(&[0, co, t + 4]));
            }
        }
    }

    #[test]
    fn transpose_rejects_short_kernel() {
        let x = Tensor::<f32>::zeros(&[1, 1, 3]);
        let w = Tensor::<f32>::zeros(&[1, 1, 1]);
        assert!(conv_transpose1d_full(&x, &w, 2).is_err());
    }
}
