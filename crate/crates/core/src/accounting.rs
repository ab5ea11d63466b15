//! Closed-form parameter and multiply-accumulate counts, and a wall-clock
//! real-time-factor benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discriminator::DiscriminatorConfig;
use crate::error::Result;
use crate::generator::{ForwardOptions, Generator, GeneratorConfig};
use crate::parallel;
use crate::tensor::{Scalar, Tensor};

/// Reference sample rate for MAC counts.
pub const REFERENCE_RATE: usize = 16_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRow {
    pub name: String,
    pub params: u64,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub model: String,
    pub rows: Vec<LayerRow>,
    pub total_params: u64,
    pub total_macs: u64,
    /// Input length the MACs refer to, before any alignment padding.
    pub input_samples: usize,
    pub sample_rate: usize,
}

impl FootprintReport {
    fn new(model: &str, rows: Vec<LayerRow>, input_samples: usize, sample_rate: usize) -> Self {
        Self {
            model: model.into(),
            total_params: rows.iter().map(|r| r.params).sum(),
            total_macs: rows.iter().map(|r| r.macs).sum(),
            rows,
            input_samples,
            sample_rate,
        }
    }

    /// Concatenates two reports under a new name.
    pub fn combine(&self, other: &Self, model: &str) -> Self {
        let rows = self.rows.iter().chain(&other.rows).cloned().collect();
        Self::new(model, rows, self.input_samples, self.sample_rate)
    }

    /// MACs per second of audio.
    pub fn macs_per_second(&self) -> f64 {
        self.total_macs as f64 * self.sample_rate as f64 / self.input_samples as f64
    }

    /// One tab-separated row per layer, then a totals footer.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# model\t{}", self.model);
        let _ = writeln!(out, "# input_samples\t{}\tsample_rate\t{}", self.input_samples, self.sample_rate);
        let _ = writeln!(out, "layer\tparams\tmacs");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}", r.name, r.params, r.macs);
        }
        let _ = writeln!(out, "total\t{}\t{}", self.total_params, self.total_macs);
        out
    }
}

/// Models whose footprint can be derived from the configuration alone.
pub trait Footprint {
    fn footprint(&self, input_seconds: f64, sample_rate: usize) -> Result<FootprintReport>;
}

fn row(name: String, params: usize, macs: usize) -> LayerRow {
    LayerRow {
        name,
        params: params as u64,
        macs: macs as u64,
    }
}

fn samples_for(seconds: f64, rate: usize) -> usize {
    (seconds * rate as f64).round().max(1.0) as usize
}

impl Footprint for GeneratorConfig {
    /// Squeeze-excitation is counted in its running (per-frame) form.
    fn footprint(&self, input_seconds: f64, sample_rate: usize) -> Result<FootprintReport> {
        self.validate()?;
        let n = samples_for(input_seconds, sample_rate);
        let align = self.alignment();
        let t0 = n.div_ceil(align) * align;
        let (k, s) = (self.kernel, self.stride);
        let mut rows = Vec::new();
        let frames = |i: usize| t0 / s.pow(i as u32);
        for i in 1..=self.layers {
            let cin = if i == 1 { 1 } else { self.channels(i - 1) };
            let c = self.channels(i);
            let t = frames(i);
            let p = format!("encoder.{i}");
            rows.push(row(format!("{p}.conv"), c * cin * k + c, c * cin * k * t));
            let g = self.res2_group(i);
            for j in 2..=self.res2_scale {
                let rk = self.res2_kernel;
                rows.push(row(format!("{p}.res2.{j}.conv"), g * g * rk + g, g * g * rk * t));
                rows.push(row(format!("{p}.res2.{j}.bn"), 2 * g, 0));
            }
            let r = self.seb_hidden(i);
            rows.push(row(format!("{p}.se.fc1"), r * c + r, r * c * t));
            rows.push(row(format!("{p}.se.fc2"), c * r + c, c * r * t));
            rows.push(row(format!("{p}.pointwise"), 2 * c * c + 2 * c, 2 * c * c * t));
        }
        let h = self.gru_hidden();
        let tl = frames(self.layers);
        for l in 1..=2 {
            rows.push(row(
                format!("bottleneck.gru.{l}"),
                3 * (h * h + h * h + 2 * h),
                3 * h * (h + h) * tl,
            ));
        }
        for i in (1..=self.layers).rev() {
            let c = self.channels(i);
            let cout = if i == 1 { 1 } else { self.channels(i - 1) };
            let t = frames(i);
            let p = format!("decoder.{i}");
            rows.push(row(format!("{p}.pointwise"), 2 * c * c + 2 * c, 2 * c * c * t));
            rows.push(row(format!("{p}.tconv"), c * cout * k + cout, c * cout * k * t));
        }
        Ok(FootprintReport::new("generator", rows, n, sample_rate))
    }
}

impl Footprint for DiscriminatorConfig {
    fn footprint(&self, input_seconds: f64, sample_rate: usize) -> Result<FootprintReport> {
        self.validate()?;
        let n = samples_for(input_seconds, sample_rate);
        let k = self.kernel;
        let mut rows = Vec::new();
        let mut cin = 2;
        let mut t = n;
        for (i, &c) in self.channels.iter().enumerate() {
            t = t.div_ceil(self.stride);
            let p = format!("disc.block.{}", i + 1);
            rows.push(row(format!("{p}.conv"), c * cin * k + c, c * cin * k * t));
            rows.push(row(format!("{p}.norm"), 2 * c, 0));
            rows.push(row(format!("{p}.prelu"), c, 0));
            cin = c;
        }
        let f = self.flat_features();
        let h = self.linear_hidden;
        rows.push(row("disc.fc1".into(), h * f + h, h * f));
        rows.push(row("disc.fc1.prelu".into(), 1, 0));
        rows.push(row("disc.fc2".into(), h + 1, h));
        rows.push(row("disc.sigmoid.beta".into(), 1, 0));
        Ok(FootprintReport::new("discriminator", rows, n, sample_rate))
    }
}

/// Parameter counts (MACs for one second at 16 kHz ride along).
pub fn count_params<C: Footprint>(cfg: &C) -> Result<FootprintReport> {
    cfg.footprint(1.0, REFERENCE_RATE)
}

pub fn count_macs<C: Footprint>(cfg: &C, input_seconds: f64, sample_rate: usize) -> Result<FootprintReport> {
    cfg.footprint(input_seconds, sample_rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtfResult {
    pub runs: usize,
    pub seconds: f64,
    /// Wall time of each timed run, in seconds.
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// Mean time over audio duration.
    pub rtf: f64,
    pub threads: usize,
    pub backend: String,
}

impl RtfResult {
    pub fn to_text(&self) -> String {
        let runs: Vec<String> = self.per_run.iter().map(|t| format!("{t:.6}")).collect();
        format!(
            "protocol\t{} timed runs after 1 discarded warmup, {:.3} s random input, {} thread ({})\nper_run_s\t{}\nmean_s\t{:.6}\nrtf\t{:.6}\n",
            self.runs,
            self.seconds,
            self.threads,
            self.backend,
            runs.join("\t"),
            self.mean,
            self.rtf
        )
    }
}

/// Times single-threaded offline inference on `seconds` of uniform noise.
pub fn rtf_bench<S: Scalar>(gen: &Generator<S>, runs: usize, seconds: f64, seed: u64) -> Result<RtfResult> {
    let n = samples_for(seconds, REFERENCE_RATE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = Tensor::from_fn(&[1, 1, n], |_| S::of(rng.random_range(-0.5..0.5)));
    let audio = n as f64 / REFERENCE_RATE as f64;
    parallel::single_threaded(|| {
        gen.enhance(&input, ForwardOptions::infer())?;
        let mut per_run = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            gen.enhance(&input, ForwardOptions::infer())?;
            per_run.push(t.elapsed().as_secs_f64());
        }
        let mean = per_run.iter().sum::<f64>() / runs.max(1) as f64;
        Ok(RtfResult {
            runs,
            seconds: audio,
            mean,
            rtf: mean / audio,
            per_run,
            threads: 1,
            backend: parallel::backend().into(),
        })
    })
}
