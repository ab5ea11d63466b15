//! Batch and instance normalization over `[B, C, T]`.

use crate::tensor::{Scalar, Tensor};

pub const NORM_EPS: f64 = 1e-5;

/// Output of a normalization forward pass with what backward needs.
pub struct NormOut<S> {
    pub y: Tensor<S>,
    pub xhat: Vec<S>,
    /// One entry per normalization group.
    pub inv_std: Vec<S>,
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

/// Normalizes every channel with statistics over batch and time.
pub fn batch_norm_train<S: Scalar>(x: &Tensor<S>, gamma: &[S], beta: &[S]) -> NormOut<S> {
    let (nb, c, t) = (x.dim(0), x.dim(1), x.dim(2));
    let n = S::of((nb * t) as f64);
    let eps = S::of(NORM_EPS);
    let xd = x.data();
    let mut mean = vec![S::zero(); c];
    let mut var = vec![S::zero(); c];
    for ch in 0..c {
        let mut s = S::zero();
        for b in 0..nb {
            s = s + xd[(b * c + ch) * t..(b * c + ch + 1) * t].iter().copied().sum::<S>();
        }
        let m = s / n;
        let mut v = S::zero();
        for b in 0..nb {
            for &xv in &xd[(b * c + ch) * t..(b * c + ch + 1) * t] {
                v = v + (xv - m) * (xv - m);
            }
        }
        mean[ch] = m;
        var[ch] = v / n;
    }
    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![S::zero(); xd.len()];
    let mut y = vec![S::zero(); xd.len()];
    for b in 0..nb {
        for ch in 0..c {
            for i in (b * c + ch) * t..(b * c + ch + 1) * t {
                xhat[i] = (xd[i] - mean[ch]) * inv_std[ch];
                y[i] = gamma[ch] * xhat[i] + beta[ch];
            }
        }
    }
    NormOut {
        y: Tensor::new(x.shape(), y).expect("same shape"),
        xhat,
        inv_std,
        mean,
        var,
    }
}

/// Normalizes every (batch, channel) row with its own time statistics.
pub fn instance_norm<S: Scalar>(x: &Tensor<S>, gamma: &[S], beta: &[S]) -> NormOut<S> {
    let (nb, c, t) = (x.dim(0), x.dim(1), x.dim(2));
    let n = S::of(t as f64);
    let eps = S::of(NORM_EPS);
    let xd = x.data();
    let mut xhat = vec![S::zero(); xd.len()];
    let mut y = vec![S::zero(); xd.len()];
    let mut mean = Vec::with_capacity(nb * c);
    let mut var = Vec::with_capacity(nb * c);
    let mut inv_std = Vec::with_capacity(nb * c);
    for row in 0..nb * c {
        let ch = row % c;
        let r = &xd[row * t..(row + 1) * t];
        let m = r.iter().copied().sum::<S>() / n;
        let v = r.iter().map(|&v| (v - m) * (v - m)).sum::<S>() / n;
        let is = S::one() / (v + eps).sqrt();
        for (i, &xv) in r.iter().enumerate() {
            let h = (xv - m) * is;
            xhat[row * t + i] = h;
            y[row * t + i] = gamma[ch] * h + beta[ch];
        }
        mean.push(m);
        var.push(v);
        inv_std.push(is);
    }
    NormOut {
        y: Tensor::new(x.shape(), y).expect("same shape"),
        xhat,
        inv_std,
        mean,
        var,
    }
}

/// Shared backward for normalizations whose statistics come from the input.
/// Groups are channels (batch norm) or (batch, channel) rows (instance norm).
pub fn norm_backward<S: Scalar>(
    shape: &[usize],
    grad: &[S],
    xhat: &[S],
    inv_std: &[S],
    gamma: &[S],
    per_instance: bool,
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let (nb, c, t) = (shape[0], shape[1], shape[2]);
    let groups = if per_instance { nb * c } else { c };
    let group_size = if per_instance { t } else { nb * t };
    let n = S::of(group_size as f64);
    let group = |b: usize, ch: usize| if per_instance { b * c + ch } else { ch };

    let mut sum_g = vec![S::zero(); groups];
    let mut sum_gx = vec![S::zero(); groups];
    let mut dgamma = vec![S::zero(); c];
    let mut dbeta = vec![S::zero(); c];
    for b in 0..nb {
        for ch in 0..c {
            let gi = group(b, ch);
            for i in (b * c + ch) * t..(b * c + ch + 1) * t {
                let dxh = grad[i] * gamma[ch];
                sum_g[gi] = sum_g[gi] + dxh;
                sum_gx[gi] = sum_gx[gi] + dxh * xhat[i];
                dgamma[ch] = dgamma[ch] + grad[i] * xhat[i];
                dbeta[ch] = dbeta[ch] + grad[i];
            }
        }
    }
    let mut dx = vec![S::zero(); grad.len()];
    for b in 0..nb {
        for ch in 0..c {
            let gi = group(b, ch);
            for i in (b * c + ch) * t..(b * c + ch + 1) * t {
                let dxh = grad[i] * gamma[ch];
                dx[i] = inv_std[gi] / n * (n * dxh - sum_g[gi] - xhat[i] * sum_gx[gi]);
            }
        }
    }
    (dx, dgamma, dbeta)
}
