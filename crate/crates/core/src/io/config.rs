//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. An optional `preset` key
//! (`lite`, `heavy`, `tiny`) selects the generator and discriminator base
//! before the remaining keys are applied, in any order.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discriminator::DiscriminatorConfig;
use crate::dsp::MrstftConfig;
use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::training::TrainConfig;

/// Synthetic corpus used by the `train` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub pairs: usize,
    pub clip_len: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            pairs: 64,
            clip_len: 8192,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    /// External quality scorer command line; the SI-SNR proxy when unset.
    pub oracle_command: Option<String>,
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn parse_val<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => cfg_err(format!("{key}: expected a boolean, got {v:?}")),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| parse_val(key, p.trim())).collect()
}

/// `fft:hop:win` triples separated by commas.
fn parse_resolutions(key: &str, v: &str) -> Result<Vec<(usize, usize, usize)>> {
    v.split(',')
        .map(|t| {
            let p: Vec<usize> = t.trim().split(':').map(|x| parse_val(key, x.trim())).collect::<Result<_>>()?;
            match p[..] {
                [n, h, w] => Ok((n, h, w)),
                _ => cfg_err(format!("{key}: expected fft:hop:win, got {t:?}")),
            }
        })
        .collect()
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (generator, discriminator) = match name {
            "lite" => (GeneratorConfig::lite(), DiscriminatorConfig::default()),
            "heavy" => (GeneratorConfig::heavy(), DiscriminatorConfig::default()),
            "tiny" => (GeneratorConfig::tiny(), DiscriminatorConfig::tiny()),
            other => return cfg_err(format!("unknown preset {other:?} (lite, heavy, tiny)")),
        };
        Ok(Self {
            generator,
            discriminator,
            ..Self::default()
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return cfg_err(format!("line {}: expected key = value, got {raw:?}", n + 1));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = match pairs.iter().find(|(k, _)| k == "preset") {
            Some((_, v)) => Self::preset(v)?,
            None => Self::default(),
        };
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.train.validate()?;
        if self.data.pairs == 0 || self.data.clip_len < self.train.crop_len {
            return cfg_err(format!(
                "data: need at least one pair and clip_len >= crop_len ({} < {})",
                self.data.clip_len, self.train.crop_len
            ));
        }
        Ok(())
    }

    /// Applies one key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let g = &mut self.generator;
        let d = &mut self.discriminator;
        let t = &mut self.train;
        match key {
            "generator.layers" => g.layers = parse_val(key, v)?,
            "generator.hidden" => g.hidden = parse_val(key, v)?,
            "generator.max_channels" => g.max_channels = parse_val(key, v)?,
            "generator.kernel" => g.kernel = parse_val(key, v)?,
            "generator.stride" => g.stride = parse_val(key, v)?,
            "generator.res2_scale" => g.res2_scale = parse_val(key, v)?,
            "generator.res2_kernel" => g.res2_kernel = parse_val(key, v)?,
            "generator.res2_dilation" => g.res2_dilation = parse_val(key, v)?,
            "generator.seb_ratio" => g.seb_ratio = parse_val(key, v)?,
            "generator.normalize_input" => g.normalize_input = parse_bool(key, v)?,
            "discriminator.channels" => d.channels = parse_list(key, v)?,
            "discriminator.kernel" => d.kernel = parse_val(key, v)?,
            "discriminator.stride" => d.stride = parse_val(key, v)?,
            "discriminator.pooled_len" => d.pooled_len = parse_val(key, v)?,
            "discriminator.linear_hidden" => d.linear_hidden = parse_val(key, v)?,
            "discriminator.sigma_max" => d.sigma_max = parse_val(key, v)?,
            "train.iterations" => t.iterations = parse_val(key, v)?,
            "train.batch_size" => t.batch_size = parse_val(key, v)?,
            "train.crop_len" => t.crop_len = parse_val(key, v)?,
            "train.peak_lr" => t.peak_lr = parse_val(key, v)?,
            "train.warmup_frac" => t.warmup_frac = parse_val(key, v)?,
            "train.seed" => t.seed = parse_val(key, v)?,
            "train.remix" => t.remix = parse_bool(key, v)?,
            "train.bandmask" => t.bandmask = parse_bool(key, v)?,
            "train.revecho" => t.revecho = parse_bool(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse_val(key, v)?,
            "loss.alpha1" => t.weights.alpha1 = parse_val(key, v)?,
            "loss.alpha2" => t.weights.alpha2 = parse_val(key, v)?,
            "loss.alpha3" => t.weights.alpha3 = parse_val(key, v)?,
            "loss.mrstft" => t.mrstft = MrstftConfig::new(parse_resolutions(key, v)?, t.mrstft.log_floor)?,
            "loss.log_floor" => t.mrstft.log_floor = parse_val(key, v)?,
            "mixup.beta_a" => t.mixup.beta_a = parse_val(key, v)?,
            "mixup.beta_b" => t.mixup.beta_b = parse_val(key, v)?,
            "data.pairs" => self.data.pairs = parse_val(key, v)?,
            "data.clip_len" => self.data.clip_len = parse_val(key, v)?,
            "data.seed" => self.data.seed = parse_val(key, v)?,
            "oracle.command" => self.oracle_command = (!v.is_empty()).then(|| v.to_string()),
            other => return cfg_err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Every key with its current value; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let (g, d, t) = (&self.generator, &self.discriminator, &self.train);
        let chans: Vec<String> = d.channels.iter().map(|c| c.to_string()).collect();
        let res: Vec<String> = t
            .mrstft
            .resolutions
            .iter()
            .map(|r| format!("{}:{}:{}", r.fft_size, r.hop, r.win_length))
            .collect();
        let rows: Vec<(&str, String)> = vec![
            ("generator.layers", g.layers.to_string()),
            ("generator.hidden", g.hidden.to_string()),
            ("generator.max_channels", g.max_channels.to_string()),
            ("generator.kernel", g.kernel.to_string()),
            ("generator.stride", g.stride.to_string()),
            ("generator.res2_scale", g.res2_scale.to_string()),
            ("generator.res2_kernel", g.res2_kernel.to_string()),
            ("generator.res2_dilation", g.res2_dilation.to_string()),
            ("generator.seb_ratio", g.seb_ratio.to_string()),
            ("generator.normalize_input", g.normalize_input.to_string()),
            ("discriminator.channels", chans.join(",")),
            ("discriminator.kernel", d.kernel.to_string()),
            ("discriminator.stride", d.stride.to_string()),
            ("discriminator.pooled_len", d.pooled_len.to_string()),
            ("discriminator.linear_hidden", d.linear_hidden.to_string()),
            ("discriminator.sigma_max", d.sigma_max.to_string()),
            ("train.iterations", t.iterations.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.crop_len", t.crop_len.to_string()),
            ("train.peak_lr", t.peak_lr.to_string()),
            ("train.warmup_frac", t.warmup_frac.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.remix", t.remix.to_string()),
            ("train.bandmask", t.bandmask.to_string()),
            ("train.revecho", t.revecho.to_string()),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
            ("loss.alpha1", t.weights.alpha1.to_string()),
            ("loss.alpha2", t.weights.alpha2.to_string()),
            ("loss.alpha3", t.weights.alpha3.to_string()),
            ("loss.mrstft", res.join(",")),
            ("loss.log_floor", t.mrstft.log_floor.to_string()),
            ("mixup.beta_a", t.mixup.beta_a.to_string()),
            ("mixup.beta_b", t.mixup.beta_b.to_string()),
            ("data.pairs", self.data.pairs.to_string()),
            ("data.clip_len", self.data.clip_len.to_string()),
            ("data.seed", self.data.seed.to_string()),
            ("oracle.command", self.oracle_command.clone().unwrap_or_default()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::preset("tiny").unwrap();
        cfg.train.peak_lr = 1.25e-3;
        cfg.train.mrstft = MrstftConfig::new([(256, 64, 256), (512, 128, 400)], 1e-6).unwrap();
        cfg.oracle_command = Some("pesq-cli --wb".into());
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let cfg = RunConfig::parse("generator.max_channels = 32\n# comment\npreset = tiny\n").unwrap();
        assert_eq!(cfg.generator.layers, 4);
        assert_eq!(cfg.generator.max_channels, 32);
    }

    #[test]
    fn errors_are_reported() {
        assert!(RunConfig::parse("nope = 1").is_err());
        assert!(RunConfig::parse("generator.layers = x").is_err());
        assert!(RunConfig::parse("generator.layers").is_err());
        assert!(RunConfig::parse("preset = medium").is_err());
        assert!(RunConfig::parse("train.crop_len = 1000").is_err());
        assert!(RunConfig::parse("train.remix = maybe").is_err());
    }
}
