use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Encoder (and decoder) depth.
    pub layers: usize,
    /// Channels of the first encoder layer.
    pub hidden: usize,
    /// Channel cap.
    pub max_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Number of Res2Net channel groups.
    pub res2_scale: usize,
    pub res2_kernel: usize,
    pub res2_dilation: usize,
    /// Squeeze-excitation bottleneck ratio.
    pub seb_ratio: usize,
    /// Divide the input by its standard deviation and rescale the output.
    pub normalize_input: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::lite()
    }
}

impl GeneratorConfig {
    pub fn lite() -> Self {
        Self {
            layers: 8,
            hidden: 64,
            max_channels: 128,
            kernel: 4,
            stride: 2,
            res2_scale: 4,
            res2_kernel: 3,
            res2_dilation: 2,
            seb_ratio: 8,
            normalize_input: true,
        }
    }

    pub fn heavy() -> Self {
        Self {
            max_channels: 768,
            ..Self::lite()
        }
    }

    /// Desk-scale model used in tests and the quick training runs.
    pub fn tiny() -> Self {
        Self {
            layers: 4,
            hidden: 8,
            max_channels: 16,
            ..Self::lite()
        }
    }

    /// Output channels of encoder layer `i` (1-based): `min(2^(i-1) * H, C_m)`.
    pub fn channels(&self, i: usize) -> usize {
        debug_assert!(i >= 1);
        let grown = (self.hidden as u128) << (i - 1).min(100);
        grown.min(self.max_channels as u128) as usize
    }

    /// GRU width; equals the last encoder layer's channels.
    pub fn gru_hidden(&self) -> usize {
        self.channels(self.layers)
    }

    /// Input lengths are padded to a multiple of this (`stride^layers`).
    pub fn alignment(&self) -> usize {
        self.stride.pow(self.layers as u32)
    }

    pub fn res2_group(&self, i: usize) -> usize {
        self.channels(i) / self.res2_scale
    }

    pub fn seb_hidden(&self, i: usize) -> usize {
        self.channels(i) / self.seb_ratio
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.layers == 0 || self.hidden == 0 || self.max_channels == 0 {
            return bad("layers, hidden and max_channels must be >= 1".into());
        }
        if self.layers > 16 {
            return bad(format!("{} layers is more than supported (16)", self.layers));
        }
        if self.stride == 0 || self.kernel < self.stride {
            return bad(format!(
                "kernel {} must be >= stride {} >= 1",
                self.kernel, self.stride
            ));
        }
        if self.res2_scale < 2 || self.res2_kernel == 0 || self.res2_dilation == 0 {
            return bad("res2_scale must be >= 2; res2 kernel and dilation >= 1".into());
        }
        if self.seb_ratio == 0 {
            return bad("seb_ratio must be >= 1".into());
        }
        for i in 1..=self.layers {
            let c = self.channels(i);
            if c % self.res2_scale != 0 {
                return bad(format!(
                    "layer {i}: {c} channels not divisible by res2_scale {}",
                    self.res2_scale
                ));
            }
            if c % self.seb_ratio != 0 {
                return bad(format!(
                    "layer {i}: seb_ratio {} does not divide {c} channels",
                    self.seb_ratio
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lite_schedule() {
        let c = GeneratorConfig::lite();
        let sched: Vec<usize> = (1..=8).map(|i| c.channels(i)).collect();
        assert_eq!(sched, [64, 128, 128, 128, 128, 128, 128, 128]);
        assert_eq!(c.alignment(), 256);
        assert_eq!(c.gru_hidden(), 128);
        c.validate().unwrap();
    }

    #[test]
    fn heavy_schedule() {
        let c = GeneratorConfig::heavy();
        let sched: Vec<usize> = (1..=8).map(|i| c.channels(i)).collect();
        assert_eq!(sched, [64, 128, 256, 512, 768, 768, 768, 768]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_indivisible_groups() {
        let c = GeneratorConfig {
            hidden: 6,
            max_channels: 12,
            ..GeneratorConfig::tiny()
        };
        assert!(c.validate().is_err());
    }
}
