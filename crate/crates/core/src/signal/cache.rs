//! Clip cache: concatenated binary records of preprocessed 1-second clips.
//!
//! Record layout, all little-endian:
//! magic `"RLNS"`, version `u16`, class_id `u16`, fold `u16`, L `u32`,
//! then `L` f32 samples. Sample rate is not stored; cached clips are
//! 16 kHz by construction.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::signal::labels;
use crate::signal::preprocess::{LabeledClip, TARGET_RATE_HZ};
use crate::signal::waveform::Waveform;

pub const MAGIC: &[u8; 4] = b"RLNS";
pub const VERSION: u16 = 1;

/// A clip as reconstructed from the cache. Source file and patch index are
/// not round-tripped; the class name is rebuilt from the id.
#[derive(Debug, Clone)]
pub struct CachedClip<T> {
    pub waveform: Waveform<T>,
    pub class_id: u16,
    pub class_name: String,
    pub fold: u16,
}

pub fn write_record<T: Scalar, W: Write>(
    out: &mut W,
    clip: &LabeledClip<T>,
) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&clip.class_id.to_le_bytes())?;
    out.write_all(&clip.fold.to_le_bytes())?;
    out.write_all(&(clip.waveform.len() as u32).to_le_bytes())?;
    for &s in clip.waveform.samples() {
        out.write_all(&(s.to_f64().unwrap() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0usize;
    while filled < buf.len() {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::Cache(format!(
                "truncated record: wanted {} bytes, found {filled}",
                buf.len()
            )));
        }
        filled += n;
    }
    Ok(true)
}

/// Reads one record, or `None` at a clean end of stream.
pub fn read_record<T: Scalar, R: Read>(reader: &mut R) -> Result<Option<CachedClip<T>>> {
    let mut header = [0u8; 14];
    if !read_exact_or_eof(reader, &mut header)? {
        return Ok(None);
    }
    if &header[0..4] != MAGIC {
        return Err(Error::Cache("bad magic; not a clip cache".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let class_id = u16::from_le_bytes([header[6], header[7]]);
    let fold = u16::from_le_bytes([header[8], header[9]]);
    let len = u32::from_le_bytes([header[10], header[11], header[12], header[13]]) as usize;
    if len == 0 {
        return Err(Error::Cache("record with zero samples".into()));
    }
    let class_name = labels::class_name(class_id)
        .map_err(|_| Error::Cache(format!("class id {class_id} out of range")))?
        .to_string();
    let mut bytes = vec![0u8; len * 4];
    if !read_exact_or_eof(reader, &mut bytes)? {
        return Err(Error::Cache("record header without sample data".into()));
    }
    let samples: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| cast::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Ok(Some(CachedClip {
        waveform: Waveform::new(samples, TARGET_RATE_HZ)?,
        class_id,
        class_name,
        fold,
    }))
}

pub fn write_clip_cache<T: Scalar>(path: &Path, clips: &[LabeledClip<T>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for clip in clips {
        write_record(&mut out, clip)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_clip_cache<T: Scalar>(path: &Path) -> Result<Vec<CachedClip<T>>> {
    let mut reader = std::io::BufReader::new(fs::File::open(path)?);
    let mut clips = Vec::new();
    while let Some(clip) = read_record(&mut reader)? {
        clips.push(clip);
    }
    if clips.is_empty() {
        return Err(Error::Cache(format!("{}: cache holds no records", path.display())));
    }
    Ok(clips)
}
