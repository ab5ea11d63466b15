//! Minimal RIFF/WAVE codec: PCM16 and float32 in, PCM16 out.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate every model path runs at.
pub const SAMPLE_RATE: u32 = 16_000;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono waveform with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>) -> Self {
        Self {
            samples,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn wav_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Wav(msg.into()))
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn pcm16_to_f32(v: i16) -> f32 {
    v as f32 / 32768.0
}

pub fn f32_to_pcm16(v: f32) -> i16 {
    let s = if v.is_nan() { 0.0 } else { (v as f64 * 32768.0).round() };
    s.clamp(-32768.0, 32767.0) as i16
}

struct Format {
    codec: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return wav_err(format!("truncated 'fmt ' chunk: {} bytes", body.len()));
    }
    let mut codec = u16_at(body, 0);
    if codec == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return wav_err("truncated 'fmt ' chunk: extensible format without subformat");
        }
        codec = u16_at(body, 24);
    }
    Ok(Format {
        codec,
        channels: u16_at(body, 2),
        rate: u32_at(body, 4),
        bits: u16_at(body, 14),
    })
}

/// Decodes a WAV byte stream, downmixing multi-channel audio by averaging.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return wav_err("truncated RIFF header: missing 'RIFF'/'WAVE' preamble");
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return wav_err("not a RIFF/WAVE file");
    }
    let mut fmt: Option<Format> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        if id == b"data" {
            let f = match &fmt {
                Some(f) => f,
                None => return wav_err("missing 'fmt ' chunk before 'data'"),
            };
            if start + size > bytes.len() {
                return wav_err(format!(
                    "truncated 'data' chunk: header declares {size} bytes, {} present",
                    bytes.len() - start
                ));
            }
            return decode_samples(f, &bytes[start..start + size]);
        }
        if start + size > bytes.len() {
            return wav_err(format!("truncated '{name}' chunk"));
        }
        if id == b"fmt " {
            fmt = Some(parse_fmt(&bytes[start..start + size])?);
        }
        pos = start + size + (size & 1);
    }
    if fmt.is_none() {
        wav_err("missing 'fmt ' chunk")
    } else {
        wav_err("missing 'data' chunk")
    }
}

fn decode_samples(f: &Format, data: &[u8]) -> Result<AudioClip> {
    if f.rate != SAMPLE_RATE {
        return wav_err(format!(
            "sample rate {} Hz is not supported: expected {SAMPLE_RATE} Hz and resampling is not performed",
            f.rate
        ));
    }
    if f.channels == 0 {
        return wav_err("'fmt ' chunk declares zero channels");
    }
    let width = match (f.codec, f.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (c, b) => return wav_err(format!("unsupported codec {c} with {b} bits (PCM16 or float32 only)")),
    };
    let ch = f.channels as usize;
    let frame = width * ch;
    let frames = data.len() / frame;
    let mut samples = Vec::with_capacity(frames);
    for i in 0..frames {
        let mut acc = 0.0f32;
        for c in 0..ch {
            let o = i * frame + c * width;
            acc += if width == 2 {
                pcm16_to_f32(i16::from_le_bytes([data[o], data[o + 1]]))
            } else {
                f32::from_le_bytes([data[o], data[o + 1], data[o + 2], data[o + 3]])
            };
        }
        samples.push(acc / ch as f32);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return wav_err("non-finite sample in float data");
    }
    Ok(AudioClip {
        samples,
        sample_rate: f.rate,
    })
}

/// Encodes a mono PCM16 WAV; samples are clamped to the 16-bit range.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&f32_to_pcm16(s).to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Wav(m) => Error::Wav(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    fs::write(path, encode_wav(clip))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(codec: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        b.extend_from_slice(b"WAVE");
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(b"abc\0");
        b.extend_from_slice(b"fmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&codec.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        b.extend_from_slice(&(rate * (bits as u32 / 8) * channels as u32).to_le_bytes());
        b.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(data);
        b
    }

    #[test]
    fn pcm16_extremes() {
        assert_eq!(pcm16_to_f32(-32768), -1.0);
        assert_eq!(f32_to_pcm16(-1.0), -32768);
        assert_eq!(f32_to_pcm16(1.0), 32767);
        assert_eq!(f32_to_pcm16(3.0), 32767);
    }

    #[test]
    fn every_pcm16_value_round_trips() {
        for v in i16::MIN..=i16::MAX {
            assert_eq!(f32_to_pcm16(pcm16_to_f32(v)), v);
        }
    }

    #[test]
    fn stereo_is_averaged_and_odd_chunks_skipped() {
        let data: Vec<u8> = [16384i16, 0, -32768, -32768].iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode_wav(&header(FORMAT_PCM, 2, 16000, 16, &data)).unwrap();
        assert_eq!(clip.samples, vec![0.25, -1.0]);
    }

    #[test]
    fn float32_is_read() {
        let data: Vec<u8> = [0.5f32, -0.25].iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode_wav(&header(FORMAT_FLOAT, 1, 16000, 32, &data)).unwrap();
        assert_eq!(clip.samples, vec![0.5, -0.25]);
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let err = decode_wav(&header(FORMAT_PCM, 1, 44100, 16, &[0, 0])).unwrap_err();
        assert!(err.to_string().contains("44100"));
    }

    #[test]
    fn unsupported_codec_is_rejected() {
        assert!(decode_wav(&header(FORMAT_PCM, 1, 16000, 24, &[0, 0, 0])).is_err());
    }

    #[test]
    fn truncation_names_the_chunk() {
        let full = encode_wav(&AudioClip::new(vec![0.1; 10]));
        let e = decode_wav(&full[..30]).unwrap_err().to_string();
        assert!(e.contains("'fmt '"), "{e}");
        let e = decode_wav(&full[..36]).unwrap_err().to_string();
        assert!(e.contains("'data'"), "{e}");
        let e = decode_wav(&full[..50]).unwrap_err().to_string();
        assert!(e.contains("truncated 'data'"), "{e}");
        assert!(decode_wav(&full[..8]).is_err());
    }
}
