//! Quality targets for the metric discriminator.

use std::path::PathBuf;
use std::process::Command;

use crate::dsp::metrics::{si_snr, SI_SNR_CAP_DB};
use crate::error::{Error, Result};
use crate::io::wav::{write_wav, AudioClip};

/// Normalized quality of `estimate` against `reference`, in [0, 1].
pub trait QualityOracle: Send + Sync {
    fn score(&self, reference: &[f64], estimate: &[f64]) -> Result<f64>;

    fn name(&self) -> String;
}

/// Stand-in for a perceptual metric: a logistic squash of SI-SNR centred at
/// 10 dB with a 4 dB scale, rescaled so the SI-SNR caps map to exactly 0
/// and 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct SiSnrProxy;

impl SiSnrProxy {
    fn logistic(db: f64) -> f64 {
        1.0 / (1.0 + (-(db - 10.0) / 4.0).exp())
    }

    pub fn from_si_snr(db: f64) -> f64 {
        let lo = Self::logistic(-SI_SNR_CAP_DB);
        let hi = Self::logistic(SI_SNR_CAP_DB);
        let db = db.clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB);
        ((Self::logistic(db) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

impl QualityOracle for SiSnrProxy {
    fn score(&self, reference: &[f64], estimate: &[f64]) -> Result<f64> {
        Ok(Self::from_si_snr(si_snr(reference, estimate)?))
    }

    fn name(&self) -> String {
        "si-snr proxy".into()
    }
}

/// Runs `program args.. <reference.wav> <estimate.wav>` and reads one raw
/// PESQ value (-0.5..4.5) from standard output.
#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalScorer {
    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty quality scorer command".into()))?;
        Ok(Self {
            program: program.into(),
            args: parts.map(String::from).collect(),
        })
    }

    pub fn normalize(raw: f64) -> f64 {
        ((raw + 0.5) / 5.0).clamp(0.0, 1.0)
    }
}

impl QualityOracle for ExternalScorer {
    fn score(&self, reference: &[f64], estimate: &[f64]) -> Result<f64> {
        let dir = tempfile::tempdir()?;
        let rp = dir.path().join("reference.wav");
        let ep = dir.path().join("estimate.wav");
        let clip = |v: &[f64]| AudioClip::new(v.iter().map(|&s| s as f32).collect());
        write_wav(&rp, &clip(reference))?;
        write_wav(&ep, &clip(estimate))?;
        let out = Command::new(&self.program).args(&self.args).arg(&rp).arg(&ep).output()?;
        if !out.status.success() {
            return Err(Error::Oracle(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let raw: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Oracle(format!("scorer printed {:?}, expected one number", text.trim())))?;
        if !raw.is_finite() {
            return Err(Error::Oracle(format!("scorer printed non-finite value {raw}")));
        }
        Ok(Self::normalize(raw))
    }

    fn name(&self) -> String {
        format!("external: {}", self.program.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proxy_is_one_on_identity() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(SiSnrProxy.score(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn proxy_is_monotone_and_bounded() {
        let mut prev = -1.0;
        for db in (-50..=50).map(|v| v as f64) {
            let q = SiSnrProxy::from_si_snr(db);
            assert!((0.0..=1.0).contains(&q));
            assert!(q >= prev);
            prev = q;
        }
        assert_eq!(SiSnrProxy::from_si_snr(-40.0), 0.0);
        assert!((SiSnrProxy::from_si_snr(10.0) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn pesq_normalization() {
        assert_eq!(ExternalScorer::normalize(-0.5), 0.0);
        assert_eq!(ExternalScorer::normalize(4.5), 1.0);
        assert_eq!(ExternalScorer::normalize(2.0), 0.5);
        assert_eq!(ExternalScorer::normalize(9.0), 1.0);
    }

    #[cfg(unix)]
    #[test]
    fn external_command_is_parsed() {
        let s = ExternalScorer::from_command_line("sh -c 'echo 2.0'").unwrap();
        assert_eq!(s.program, PathBuf::from("sh"));
        let s = ExternalScorer {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 2.0".into()],
        };
        assert_eq!(s.score(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.5);
        let bad = ExternalScorer {
            program: "sh".into(),
            args: vec!["-c".into(), "echo nope".into()],
        };
        assert!(bad.score(&[0.1], &[0.1]).is_err());
    }
}
