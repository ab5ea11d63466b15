//! Res2Net test fixtures and a direct loop evaluation of the block.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wsrgan_core::generator::Res2KernelIds;
use wsrgan_core::params::ParamStore;
use wsrgan_core::Tensor;

pub fn noise(rng: &mut ChaCha8Rng, shape: &[usize], amp: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-amp..amp))
}

pub fn res2_store(rng: &mut ChaCha8Rng, g: usize, s: usize, k: usize) -> (ParamStore<f64>, Vec<Res2KernelIds>) {
    let mut store = ParamStore::new();
    let ids = (1..s)
        .map(|j| Res2KernelIds {
            w: store.add(format!("k{j}.w"), noise(rng, &[g, g, k], 0.6)),
            b: store.add(format!("k{j}.b"), noise(rng, &[g], 0.3)),
            gamma: store.add(format!("k{j}.g"), noise(rng, &[g], 1.0).map(|v| v + 1.5)),
            beta: store.add(format!("k{j}.beta"), noise(rng, &[g], 0.5)),
            running_mean: store.add_buffer(format!("k{j}.rm"), noise(rng, &[g], 0.5)),
            running_var: store.add_buffer(format!("k{j}.rv"), noise(rng, &[g], 0.5).map(|v| v + 1.0)),
        })
        .collect();
    (store, ids)
}

/// Direct loop evaluation of the hierarchical residual split.
pub fn res2_oracle(y: &Tensor<f64>, store: &ParamStore<f64>, ids: &[Res2KernelIds], s: usize, dil: usize) -> Tensor<f64> {
    let (nb, c, t) = (y.dim(0), y.dim(1), y.dim(2));
    let g = c / s;
    let mut out = Tensor::zeros(&[nb, c, t]);
    for b in 0..nb {
        let mut prev = vec![vec![0.0; t]; g];
        for i in 0..s {
            for ch in 0..g {
                for j in 0..t {
                    let v = y.get(&[b, i * g + ch, j]);
                    if i == 0 {
                        out.set(&[b, ch, j], v);
                    }
                }
            }
            if i == 0 {
                continue;
            }
            let kid = &ids[i - 1];
            let w = store.get(kid.w);
            let k = w.dim(2);
            let inp: Vec<Vec<f64>> = (0..g)
                .map(|ch| (0..t).map(|j| y.get(&[b, i * g + ch, j]) + if i >= 2 { prev[ch][j] } else { 0.0 }).collect())
                .collect();
            let mut h = vec![vec![0.0; t]; g];
            for co in 0..g {
                for j in 0..t {
                    let mut acc = store.get(kid.b).data()[co];
                    for ci in 0..g {
                        for kk in 0..k {
                            let back = (k - 1 - kk) * dil;
                            if j >= back {
                                acc += w.get(&[co, ci, kk]) * inp[ci][j - back];
                            }
                        }
                    }
                    let r = acc.max(0.0);
                    let rm = store.get(kid.running_mean).data()[co];
                    let rv = store.get(kid.running_var).data()[co];
                    h[co][j] = store.get(kid.gamma).data()[co] * (r - rm) / (rv + 1e-5).sqrt()
                        + store.get(kid.beta).data()[co];
                    out.set(&[b, i * g + co, j], h[co][j]);
                }
            }
            prev = h;
        }
    }
    out
}
