//! Minimal RIFF/WAVE reader and writer.
//!
//! Supports the two encodings in scope — PCM 16-bit integer and IEEE
//! 32-bit float, little-endian, 1 or 2 channels — and skips any other
//! chunks (LIST, fact, ...) it encounters.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Interleaved samples as read from disk, scaled to [-1, 1] for PCM16.
#[derive(Debug, Clone)]
pub struct WavData<T> {
    pub samples: Vec<T>,
    pub channels: u16,
    pub sample_rate_hz: u32,
}

impl<T> WavData<T> {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }
}

fn wav_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Wav(format!("{}: {}", path.display(), msg.into()))
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav<T: Scalar>(path: &Path) -> Result<WavData<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = read_u32(&bytes, at + 4) as usize;
        let body_start = at + 8;
        if body_start + size > bytes.len() {
            return Err(wav_err(path, format!("chunk {} overruns file", String::from_utf8_lossy(id))));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(path, "fmt chunk too short"));
                }
                fmt = Some((
                    read_u16(&bytes, body_start),
                    read_u16(&bytes, body_start + 2),
                    read_u32(&bytes, body_start + 4),
                    read_u16(&bytes, body_start + 14),
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_start + size]),
            _ => {}
        }
        at = body_start + size + (size & 1); // chunks are word-aligned
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    if !(1..=2).contains(&channels) {
        return Err(wav_err(path, format!("unsupported channel count {channels}")));
    }
    if rate == 0 {
        return Err(wav_err(path, "zero sample rate"));
    }

    let samples: Vec<T> = match (format, bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| cast::<T>(i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0))
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| cast::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
        _ => {
            return Err(wav_err(
                path,
                format!("unsupported encoding: format {format}, {bits} bits"),
            ))
        }
    };
    if samples.is_empty() {
        return Err(wav_err(path, "empty data chunk"));
    }
    if samples.len() % channels as usize != 0 {
        return Err(wav_err(path, "data chunk not a whole number of frames"));
    }
    Ok(WavData { samples, channels, sample_rate_hz: rate })
}

fn write_riff(path: &Path, format: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Result<()> {
    let block_align = channels * bits / 8;
    let byte_rate = rate * block_align as u32;
    let mut out = fs::File::create(path)?;
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + data.len() as u32).to_le_bytes())?;
    out.write_all(b"WAVE")?;
    out.write_all(b"fmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&format.to_le_bytes())?;
    out.write_all(&channels.to_le_bytes())?;
    out.write_all(&rate.to_le_bytes())?;
    out.write_all(&byte_rate.to_le_bytes())?;
    out.write_all(&block_align.to_le_bytes())?;
    out.write_all(&bits.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&(data.len() as u32).to_le_bytes())?;
    out.write_all(data)?;
    Ok(())
}

/// Writes interleaved samples as PCM16, clamping to [-1, 1].
pub fn write_wav_pcm16<T: Scalar>(
    path: &Path,
    interleaved: &[T],
    channels: u16,
    rate: u32,
) -> Result<()> {
    let mut data = Vec::with_capacity(interleaved.len() * 2);
    for &s in interleaved {
        let q = (s.to_f64().unwrap() * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        data.extend_from_slice(&q.to_le_bytes());
    }
    write_riff(path, 1, channels, rate, 16, &data)
}

/// Writes interleaved samples as IEEE float32.
pub fn write_wav_float32<T: Scalar>(
    path: &Path,
    interleaved: &[T],
    channels: u16,
    rate: u32,
) -> Result<()> {
    let mut data = Vec::with_capacity(interleaved.len() * 4);
    for &s in interleaved {
        data.extend_from_slice(&(s.to_f64().unwrap() as f32).to_le_bytes());
    }
    write_riff(path, 3, channels, rate, 32, &data)
}
