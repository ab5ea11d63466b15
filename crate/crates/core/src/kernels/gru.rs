//! Uni-directional GRU layer, gate order (reset, update, new):
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```

use crate::error::{shape_err, Result};
use crate::parallel::map_range;
use crate::tensor::{Scalar, Tensor};

pub struct GruWeights<'a, S> {
    pub w_ih: &'a Tensor<S>,
    pub w_hh: &'a Tensor<S>,
    pub b_ih: &'a Tensor<S>,
    pub b_hh: &'a Tensor<S>,
}

/// Activations saved for the backward pass, one row per (batch, step).
pub struct GruCache<S> {
    pub r: Vec<S>,
    pub z: Vec<S>,
    pub n: Vec<S>,
    pub hn: Vec<S>,
}

pub struct GruGrads<S> {
    pub x: Tensor<S>,
    pub w_ih: Tensor<S>,
    pub w_hh: Tensor<S>,
    pub b_ih: Tensor<S>,
    pub b_hh: Tensor<S>,
}

impl<'a, S: Scalar> GruWeights<'a, S> {
    pub fn hidden(&self) -> usize {
        self.w_hh.dim(1)
    }

    fn check(&self, input: usize) -> Result<usize> {
        let h = self.w_hh.dim(1);
        self.w_ih.expect_shape(&[3 * h, input], "gru w_ih")?;
        self.w_hh.expect_shape(&[3 * h, h], "gru w_hh")?;
        self.b_ih.expect_shape(&[3 * h], "gru b_ih")?;
        self.b_hh.expect_shape(&[3 * h], "gru b_hh")?;
        Ok(h)
    }
}

#[inline]
fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

/// `out[j] = b[j] + sum_i m[j, i] * v[i]`
#[inline]
fn affine<S: Scalar>(m: &[S], b: &[S], v: &[S], out: &mut [S]) {
    let cols = v.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &m[j * cols..(j + 1) * cols];
        let mut acc = b[j];
        for (&a, &x) in row.iter().zip(v) {
            acc = acc + a * x;
        }
        *o = acc;
    }
}

/// Runs the layer over `x: [B, T, C]` from `h0: [B, H]`.
/// Returns the full output `[B, T, H]`, the final state `[B, H]` and the cache.
pub fn gru_forward<S: Scalar>(
    x: &Tensor<S>,
    wts: &GruWeights<S>,
    h0: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, GruCache<S>)> {
    x.expect_rank(3, "gru input")?;
    let (nb, nt, c) = (x.dim(0), x.dim(1), x.dim(2));
    let h = wts.check(c)?;
    if h0.shape() != [nb, h] {
        return shape_err(format!(
            "gru: hidden state {:?} does not match [batch={nb}, hidden={h}]",
            h0.shape()
        ));
    }
    let xd = x.data();
    let per_batch = map_range(nb, |b| {
        let mut out = vec![S::zero(); nt * h];
        let mut r = vec![S::zero(); nt * h];
        let mut z = vec![S::zero(); nt * h];
        let mut n = vec![S::zero(); nt * h];
        let mut hn = vec![S::zero(); nt * h];
        let mut xp = vec![S::zero(); 3 * h];
        let mut hp = vec![S::zero(); 3 * h];
        let mut state = h0.data()[b * h..(b + 1) * h].to_vec();
        for t in 0..nt {
            let xt = &xd[(b * nt + t) * c..(b * nt + t + 1) * c];
            affine(wts.w_ih.data(), wts.b_ih.data(), xt, &mut xp);
            affine(wts.w_hh.data(), wts.b_hh.data(), &state, &mut hp);
            let row = t * h;
            for j in 0..h {
                let rj = sigmoid(xp[j] + hp[j]);
                let zj = sigmoid(xp[h + j] + hp[h + j]);
                let nj = (xp[2 * h + j] + rj * hp[2 * h + j]).tanh();
                let hj = (S::one() - zj) * nj + zj * state[j];
                r[row + j] = rj;
                z[row + j] = zj;
                n[row + j] = nj;
                hn[row + j] = hp[2 * h + j];
                out[row + j] = hj;
            }
            state.copy_from_slice(&out[row..row + h]);
        }
        (out, state, r, z, n, hn)
    });
    let mut out = Vec::with_capacity(nb * nt * h);
    let mut last = Vec::with_capacity(nb * h);
    let mut cache = GruCache {
        r: Vec::with_capacity(nb * nt * h),
        z: Vec::with_capacity(nb * nt * h),
        n: Vec::with_capacity(nb * nt * h),
        hn: Vec::with_capacity(nb * nt * h),
    };
    for (o, s, r, z, n, hn) in per_batch {
        out.extend(o);
        last.extend(s);
        cache.r.extend(r);
        cache.z.extend(z);
        cache.n.extend(n);
        cache.hn.extend(hn);
    }
    Ok((
        Tensor::new(&[nb, nt, h], out)?,
        Tensor::new(&[nb, h], last)?,
        cache,
    ))
}

/// Backpropagation through time for `gru_forward`.
pub fn gru_backward<S: Scalar>(
    x: &Tensor<S>,
    wts: &GruWeights<S>,
    h0: &Tensor<S>,
    out: &Tensor<S>,
    cache: &GruCache<S>,
    grad: &Tensor<S>,
) -> GruGrads<S> {
    let (nb, nt, c) = (x.dim(0), x.dim(1), x.dim(2));
    let h = wts.hidden();
    let xd = x.data();
    let od = out.data();
    let gd = grad.data();
    let w_ih = wts.w_ih.data();
    let w_hh = wts.w_hh.data();

    let per_batch = map_range(nb, |b| {
        let mut gx = vec![S::zero(); nt * c];
        let mut gw_ih = vec![S::zero(); 3 * h * c];
        let mut gw_hh = vec![S::zero(); 3 * h * h];
        let mut gb_ih = vec![S::zero(); 3 * h];
        let mut gb_hh = vec![S::zero(); 3 * h];
        let mut dh_next = vec![S::zero(); h];
        let mut dxp = vec![S::zero(); 3 * h];
        let mut dhp = vec![S::zero(); 3 * h];
        for t in (0..nt).rev() {
            let row = (b * nt + t) * h;
            let h_prev: &[S] = if t == 0 {
                &h0.data()[b * h..(b + 1) * h]
            } else {
                &od[row - h..row]
            };
            for j in 0..h {
                let dh = gd[row + j] + dh_next[j];
                let (r, z, n, hn) = (
                    cache.r[row + j],
                    cache.z[row + j],
                    cache.n[row + j],
                    cache.hn[row + j],
                );
                let dn = dh * (S::one() - z);
                let dz = dh * (h_prev[j] - n);
                let da_n = dn * (S::one() - n * n);
                let dr = da_n * hn;
                let da_r = dr * r * (S::one() - r);
                let da_z = dz * z * (S::one() - z);
                dxp[j] = da_r;
                dxp[h + j] = da_z;
                dxp[2 * h + j] = da_n;
                dhp[j] = da_r;
                dhp[h + j] = da_z;
                dhp[2 * h + j] = da_n * r;
                dh_next[j] = dh * z;
            }
            // dh_prev += W_hh^T dhp ; weight grads
            for (g, &d) in dhp.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                gb_hh[g] = gb_hh[g] + d;
                let wr = &w_hh[g * h..(g + 1) * h];
                let gwr = &mut gw_hh[g * h..(g + 1) * h];
                for i in 0..h {
                    gwr[i] = gwr[i] + d * h_prev[i];
                    dh_next[i] = dh_next[i] + d * wr[i];
                }
            }
            let xt = &xd[(b * nt + t) * c..(b * nt + t + 1) * c];
            let gxt = &mut gx[t * c..(t + 1) * c];
            for (g, &d) in dxp.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                gb_ih[g] = gb_ih[g] + d;
                let wr = &w_ih[g * c..(g + 1) * c];
                let gwr = &mut gw_ih[g * c..(g + 1) * c];
                for i in 0..c {
                    gwr[i] = gwr[i] + d * xt[i];
                    gxt[i] = gxt[i] + d * wr[i];
                }
            }
        }
        (gx, gw_ih, gw_hh, gb_ih, gb_hh)
    });

    let mut gx = Vec::with_capacity(nb * nt * c);
    let mut gw_ih = vec![S::zero(); 3 * h * c];
    let mut gw_hh = vec![S::zero(); 3 * h * h];
    let mut gb_ih = vec![S::zero(); 3 * h];
    let mut gb_hh = vec![S::zero(); 3 * h];
    let acc = |dst: &mut [S], src: &[S]| {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = *d + s;
        }
    };
    for (x_, wi, wh, bi, bh) in per_batch {
        gx.extend(x_);
        acc(&mut gw_ih, &wi);
        acc(&mut gw_hh, &wh);
        acc(&mut gb_ih, &bi);
        acc(&mut gb_hh, &bh);
    }
    GruGrads {
        x: Tensor::new(&[nb, nt, c], gx).expect("grad shape"),
        w_ih: Tensor::new(&[3 * h, c], gw_ih).expect("grad shape"),
        w_hh: Tensor::new(&[3 * h, h], gw_hh).expect("grad shape"),
        b_ih: Tensor::new(&[3 * h], gb_ih).expect("grad shape"),
        b_hh: Tensor::new(&[3 * h], gb_hh).expect("grad shape"),
    }
}
