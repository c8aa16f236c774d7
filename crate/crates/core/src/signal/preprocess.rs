//! Dataset preprocessing: WAV files to 1-second labeled clips.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::signal::metadata::ClipMeta;
use crate::signal::resample::{mixdown_mono, resample_linear};
use crate::signal::wav::read_wav;
use crate::signal::waveform::Waveform;

pub const TARGET_RATE_HZ: u32 = 16000;
pub const PATCH_LEN: usize = 16000;
pub const PATCH_HOP: usize = 8000;

/// One preprocessed 1-second patch with its provenance.
#[derive(Debug, Clone)]
pub struct LabeledClip<T> {
    pub waveform: Waveform<T>,
    pub class_id: u16,
    pub class_name: String,
    pub fold: u16,
    pub source_file: String,
    pub patch_index: u32,
}

/// Outcome of a batch run: clips plus bookkeeping for files that could not
/// be read and patches dropped for zero energy.
#[derive(Debug, Default)]
pub struct PreprocessReport<T> {
    pub clips: Vec<LabeledClip<T>>,
    pub skipped_files: Vec<(String, String)>,
    pub dropped_patches: usize,
}

/// Start offsets of the 16000-sample patches covering `len` samples, with a
/// flag marking a final zero-padded patch. Full patches step by the 8000
/// hop; a padded tail patch is added only when the full ones do not already
/// reach the end of the signal.
pub fn patch_offsets(len: usize) -> Vec<(usize, bool)> {
    if len < PATCH_LEN {
        return vec![(0, true)];
    }
    let full = (len - PATCH_LEN) / PATCH_HOP + 1;
    let mut offsets: Vec<(usize, bool)> = (0..full).map(|k| (k * PATCH_HOP, false)).collect();
    let covered = (full - 1) * PATCH_HOP + PATCH_LEN;
    if covered < len {
        offsets.push((full * PATCH_HOP, true));
    }
    offsets
}

/// Splits a 16 kHz mono signal into RMS-normalized patches. Zero-energy
/// patches are dropped and counted.
pub fn patch_waveform<T: Scalar>(x: &Waveform<T>) -> (Vec<(u32, Waveform<T>)>, usize) {
    debug_assert_eq!(x.sample_rate_hz(), TARGET_RATE_HZ);
    let mut patches = Vec::new();
    let mut dropped = 0usize;
    for (idx, (start, _padded)) in patch_offsets(x.len()).into_iter().enumerate() {
        let mut samples = vec![T::zero(); PATCH_LEN];
        let take = PATCH_LEN.min(x.len() - start);
        samples[..take].copy_from_slice(&x.samples()[start..start + take]);
        let mut patch = Waveform::new(samples, TARGET_RATE_HZ).unwrap();
        if patch.rms_normalize().is_none() {
            dropped += 1;
            continue;
        }
        patches.push((idx as u32, patch));
    }
    (patches, dropped)
}

/// Reads one WAV file and produces its labeled patches.
pub fn preprocess_file<T: Scalar>(
    path: &Path,
    meta: &ClipMeta,
) -> Result<(Vec<LabeledClip<T>>, usize)> {
    let wav = read_wav::<T>(path)?;
    let mono = mixdown_mono(&wav.samples, wav.channels as usize)?;
    let raw = Waveform::new(mono, wav.sample_rate_hz)?;
    let at_16k = resample_linear(&raw, TARGET_RATE_HZ)?;
    let (patches, dropped) = patch_waveform(&at_16k);
    let clips = patches
        .into_iter()
        .map(|(patch_index, waveform)| LabeledClip {
            waveform,
            class_id: meta.class_id,
            class_name: meta.class.clone(),
            fold: meta.fold,
            source_file: meta.slice_file_name.clone(),
            patch_index,
        })
        .collect();
    Ok((clips, dropped))
}

/// Locates a metadata row's audio file under the dataset root, trying the
/// UrbanSound8K `fold<N>/` layout first and a flat layout second.
pub fn locate_audio(root: &Path, meta: &ClipMeta) -> Option<PathBuf> {
    let foldered = root.join(format!("fold{}", meta.fold)).join(&meta.slice_file_name);
    if foldered.is_file() {
        return Some(foldered);
    }
    let flat = root.join(&meta.slice_file_name);
    flat.is_file().then_some(flat)
}

/// Processes every metadata row, skipping unreadable or missing files.
pub fn preprocess_dataset<T: Scalar>(root: &Path, rows: &[ClipMeta]) -> PreprocessReport<T> {
    let mut report = PreprocessReport {
        clips: Vec::new(),
        skipped_files: Vec::new(),
        dropped_patches: 0,
    };
    for meta in rows {
        let Some(path) = locate_audio(root, meta) else {
            report
                .skipped_files
                .push((meta.slice_file_name.clone(), "file not found".into()));
            continue;
        };
        match preprocess_file::<T>(&path, meta) {
            Ok((clips, dropped)) => {
                report.clips.extend(clips);
                report.dropped_patches += dropped;
            }
            Err(e) => report.skipped_files.push((meta.slice_file_name.clone(), e.to_string())),
        }
    }
    report
}
