//! Three-stage PCM16 pipeline: stdin reader, model, stdout writer, joined by
//! bounded channels so frames stay in order.

use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::thread;

use wsrgan_core::generator::StreamState;
use wsrgan_core::io::load_weights;
use wsrgan_core::io::wav::{f32_to_pcm16, pcm16_to_f32, SAMPLE_RATE};
use wsrgan_core::{Error, Result, Tensor};

const QUEUE_DEPTH: usize = 4;

/// Samples per chunk: `chunk_ms` rounded up to a multiple of `align`.
pub fn chunk_samples(chunk_ms: u64, align: usize) -> usize {
    let n = (chunk_ms as usize * SAMPLE_RATE as usize).div_ceil(1000).max(1);
    n.div_ceil(align) * align
}

/// Fills `buf` unless the stream ends first; returns the bytes read.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub fn run(weights: &Path, chunk_ms: u64) -> Result<()> {
    let gen = load_weights(weights)?.into_models()?.generator;
    let n = chunk_samples(chunk_ms, gen.config().alignment());
    let (in_tx, in_rx) = sync_channel::<(Vec<f32>, usize)>(QUEUE_DEPTH);
    let (out_tx, out_rx) = sync_channel::<Vec<f32>>(QUEUE_DEPTH);

    let reader = thread::spawn(move || -> Result<()> {
        let mut stdin = io::stdin().lock();
        let mut buf = vec![0u8; n * 2];
        loop {
            let got = read_full(&mut stdin, &mut buf)?;
            let valid = got / 2;
            if valid == 0 {
                return Ok(());
            }
            let mut frame: Vec<f32> = buf[..valid * 2]
                .chunks_exact(2)
                .map(|b| pcm16_to_f32(i16::from_le_bytes([b[0], b[1]])))
                .collect();
            frame.resize(n, 0.0);
            if in_tx.send((frame, valid)).is_err() || valid < n {
                return Ok(());
            }
        }
    });

    let writer = thread::spawn(move || -> Result<()> {
        let mut stdout = io::stdout().lock();
        for frame in out_rx {
            let bytes: Vec<u8> = frame.iter().flat_map(|&v| f32_to_pcm16(v).to_le_bytes()).collect();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
        Ok(())
    });

    let mut state = StreamState::new(&gen);
    let mut result = Ok(());
    for (frame, valid) in in_rx {
        let chunk = Tensor::new(&[1, 1, n], frame)?;
        match gen.stream(&chunk, &mut state) {
            Ok(out) => {
                let mut out = out.into_data();
                out.truncate(valid);
                if out_tx.send(out).is_err() {
                    break;
                }
            }
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    drop(out_tx);
    let join = |h: thread::JoinHandle<Result<()>>| {
        h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("stream worker panicked".into())))
    };
    let r = join(reader);
    let w = join(writer);
    result.and(r).and(w)
}
