//! Central finite-difference gradient oracle, shared by the core gradient
//! tests and the acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsrgan_core::autodiff::{ops, Graph, Var};
use wsrgan_core::params::{Bound, ParamId, ParamStore};
use wsrgan_core::{Result, Tensor};

/// Maximum accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const FLOOR: f64 = 1e-6;

pub fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Default)]
pub struct Report {
    pub points: usize,
    pub worst: f64,
    pub worst_at: String,
}

impl Report {
    fn record(&mut self, err: f64, at: String) {
        self.points += 1;
        if err > self.worst || self.points == 1 {
            self.worst = err;
            self.worst_at = at;
        }
    }

    pub fn passed(&self) -> bool {
        self.points > 0 && self.worst < TOLERANCE
    }
}

/// Fixed random projection so any output shape reduces to a scalar.
fn projection(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn project<'g>(out: Var<'g, f64>, seed: u64) -> Result<Var<'g, f64>> {
    let r = out.graph().constant(projection(&out.shape(), seed));
    ops::sum(ops::mul(out, r)?)
}

/// Checks `f` with respect to every input at `points` random coordinates
/// each (or all coordinates if fewer).
pub fn check_fn<F>(inputs: &[Tensor<f64>], points: usize, seed: u64, f: F) -> Report
where
    F: for<'g> Fn(&[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    let analytic: Vec<Tensor<f64>> = {
        let g = Graph::new();
        let vars: Vec<Var<'_, f64>> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let loss = project(f(&vars).expect("forward"), seed).expect("projection");
        let mut grads = g.backward(loss).expect("backward");
        vars.iter()
            .zip(inputs)
            .map(|(v, t)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect()
    };
    let eval = |ins: &[Tensor<f64>]| -> f64 {
        let g = Graph::inference();
        let vars: Vec<Var<'_, f64>> = ins.iter().map(|t| g.constant(t.clone())).collect();
        project(f(&vars).expect("forward"), seed).expect("projection").item()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::default();
    for (i, t) in inputs.iter().enumerate() {
        for j in pick(&mut rng, t.len(), points) {
            let mut ins = inputs.to_vec();
            let x = t.data()[j];
            let h = step(x);
            ins[i].data_mut()[j] = x + h;
            let up = eval(&ins);
            ins[i].data_mut()[j] = x - h;
            let down = eval(&ins);
            let num = (up - down) / (2.0 * h);
            report.record(rel_err(analytic[i].data()[j], num), format!("input {i}[{j}]"));
        }
    }
    report
}

fn pick(rng: &mut ChaCha8Rng, len: usize, points: usize) -> Vec<usize> {
    if len <= points {
        (0..len).collect()
    } else {
        (0..points).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Checks a model held in a [`ParamStore`]: `points` random coordinates
/// drawn over all trainable tensors plus one coordinate in every trainable
/// tensor. `f` must read weights only through the bound variables.
pub fn check_store<F>(store: &ParamStore<f64>, points: usize, seed: u64, f: F) -> Report
where
    F: for<'g> Fn(&Bound<'g, f64>, &'g Graph<f64>) -> Result<Var<'g, f64>>,
{
    let trainable: Vec<usize> = (0..store.len()).filter(|&i| store.entries()[i].trainable).collect();
    let analytic: Vec<Option<Tensor<f64>>> = {
        let g = Graph::new();
        let b = store.bind(&g, true);
        let loss = project(f(&b, &g).expect("forward"), seed).expect("projection");
        let mut grads = g.backward(loss).expect("backward");
        b.vars().iter().map(|&v| grads.take(v)).collect()
    };
    let eval = |s: &ParamStore<f64>| -> f64 {
        let g = Graph::inference();
        let b = s.bind(&g, false);
        project(f(&b, &g).expect("forward"), seed).expect("projection").item()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<(usize, usize)> = trainable
        .iter()
        .map(|&i| (i, rng.random_range(0..store.entries()[i].tensor.len())))
        .collect();
    for _ in 0..points {
        let i = trainable[rng.random_range(0..trainable.len())];
        coords.push((i, rng.random_range(0..store.entries()[i].tensor.len())));
    }
    let mut report = Report::default();
    let mut s = store.clone();
    for (i, j) in coords {
        let id = ParamId(i);
        let x = store.get(id).data()[j];
        let h = step(x);
        s.get_mut(id).data_mut()[j] = x + h;
        let up = eval(&s);
        s.get_mut(id).data_mut()[j] = x - h;
        let down = eval(&s);
        s.get_mut(id).data_mut()[j] = x;
        let num = (up - down) / (2.0 * h);
        let ana = analytic[i].as_ref().map_or(0.0, |t| t.data()[j]);
        report.record(rel_err(ana, num), format!("{}[{j}]", store.name(id)));
    }
    report
}
