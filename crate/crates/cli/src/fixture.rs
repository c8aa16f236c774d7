//! Synthetic two-class dataset plus a handcrafted band-detector model.
//!
//! The tone class stacks three sinusoids inside a known frequency band
//! over a faint noise floor; the noise class is plain white noise. The
//! model is a windowed-sinc bandpass/bandstop filter pair followed by
//! rectified global pooling and a fixed linear readout, so the true
//! decision evidence — band energy versus out-of-band energy — is known
//! exactly and end-to-end explanations can be checked against it.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use relevance_lens::model::{save_model, Conv1d, Dense, InputKind, Layer, ModelGraph, Padding};
use relevance_lens::model::Tensor;
use relevance_lens::signal::write_wav_float32;

use crate::errors::{CliError, CliResult};

/// Tone clips are labeled Siren, noise clips Drilling, so the fixture
/// stays inside the UrbanSound8K label universe (and the default
/// pitch-shift target, Siren, is the tonal class).
pub const TONE_CLASS: u16 = 8;
pub const NOISE_CLASS: u16 = 4;
pub const TONE_FREQS_HZ: [f64; 3] = [1600.0, 2000.0, 2400.0];
pub const BAND_LO_HZ: f64 = 1500.0;
pub const BAND_HI_HZ: f64 = 2500.0;

const RATE: u32 = 16000;
const KERNEL_LEN: usize = 129;
const CONV_STRIDE: usize = 4;

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub files_per_class: usize,
    pub file_secs: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    /// Two 3.5 s files per class: six one-second patches each, twelve
    /// clips per class after preprocessing.
    fn default() -> Self {
        Self { files_per_class: 2, file_secs: 3.5, seed: 7 }
    }
}

pub struct FixturePaths {
    pub audio_dir: PathBuf,
    pub metadata_csv: PathBuf,
}

/// Writes the WAV corpus and an UrbanSound8K-style metadata CSV under
/// `dir`, deterministically from `spec.seed`.
pub fn write_fixture_dataset(dir: &Path, spec: &FixtureSpec) -> CliResult<FixturePaths> {
    if spec.files_per_class == 0 || spec.file_secs <= 1.0 {
        return Err(CliError::config("fixture needs files_per_class >= 1 and file_secs > 1"));
    }
    let audio_dir = dir.join("audio");
    let fold_dir = audio_dir.join("fold1");
    fs::create_dir_all(&fold_dir)?;
    let len = (spec.file_secs * RATE as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut meta = String::from("slice_file_name,fsID,start,end,salience,fold,classID,class\n");

    for i in 0..spec.files_per_class {
        let mut samples = vec![0.0f64; len];
        for &freq in &TONE_FREQS_HZ {
            let phase: f64 = rng.gen::<f64>() * TAU;
            for (n, s) in samples.iter_mut().enumerate() {
                *s += 0.2 * (TAU * freq * n as f64 / RATE as f64 + phase).sin();
            }
        }
        // Noise floor 30 dB below the tone stack keeps post-filter
        // predictions deterministic without perturbing the band content.
        let rms = (samples.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        let sigma = rms * 10f64.powf(-30.0 / 20.0);
        for s in samples.iter_mut() {
            *s += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let name = format!("{}-{TONE_CLASS}-0-{i}.wav", 100000 + i);
        write_wav_float32(&fold_dir.join(&name), &samples, 1, RATE)?;
        meta.push_str(&format!(
            "{name},{},0.0,{:.1},1,1,{TONE_CLASS},siren\n",
            100000 + i,
            spec.file_secs
        ));
    }

    for i in 0..spec.files_per_class {
        let samples: Vec<f64> =
            (0..len).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let name = format!("{}-{NOISE_CLASS}-0-{i}.wav", 200000 + i);
        write_wav_float32(&fold_dir.join(&name), &samples, 1, RATE)?;
        meta.push_str(&format!(
            "{name},{},0.0,{:.1},1,1,{NOISE_CLASS},drilling\n",
            200000 + i,
            spec.file_secs
        ));
    }

    let metadata_csv = dir.join("metadata.csv");
    fs::write(&metadata_csv, meta)?;
    Ok(FixturePaths { audio_dir, metadata_csv })
}

/// Hamming-windowed ideal bandpass FIR for [BAND_LO_HZ, BAND_HI_HZ].
fn bandpass_kernel() -> Vec<f64> {
    let mid = (KERNEL_LEN - 1) as f64 / 2.0;
    let (w_lo, w_hi) = (TAU * BAND_LO_HZ / RATE as f64, TAU * BAND_HI_HZ / RATE as f64);
    (0..KERNEL_LEN)
        .map(|n| {
            let t = n as f64 - mid;
            let ideal = if t == 0.0 {
                (w_hi - w_lo) / PI
            } else {
                ((w_hi * t).sin() - (w_lo * t).sin()) / (PI * t)
            };
            let window = 0.54 - 0.46 * (TAU * n as f64 / (KERNEL_LEN - 1) as f64).cos();
            ideal * window
        })
        .collect()
}

/// Band detector over one-second waveforms: a bandpass/bandstop conv pair,
/// relu, global average pooling, and a frozen 2->10 readout that scores
/// the tone class by in-band minus out-of-band energy (and the noise
/// class by the reverse). All biases are zero.
pub fn band_detector_model() -> ModelGraph<f64> {
    let bp = bandpass_kernel();
    let mut weights = bp.clone();
    // Bandstop channel: delta minus bandpass.
    let mut bs = bp.iter().map(|v| -v).collect::<Vec<_>>();
    bs[(KERNEL_LEN - 1) / 2] += 1.0;
    weights.extend_from_slice(&bs);

    let mut readout = vec![0.0f64; 2 * 10];
    readout[TONE_CLASS as usize] = 1.0;
    readout[NOISE_CLASS as usize] = -1.0;
    readout[10 + TONE_CLASS as usize] = -1.0;
    readout[10 + NOISE_CLASS as usize] = 1.0;

    ModelGraph {
        name: "band-detector".into(),
        input: InputKind::Waveform { len: 16000 },
        class_count: 10,
        layers: vec![
            Layer::Conv1d(Conv1d {
                weights: Tensor::new(vec![2, 1, KERNEL_LEN], weights).unwrap(),
                bias: vec![0.0; 2],
                stride: CONV_STRIDE,
                padding: Padding::Valid,
            }),
            Layer::Relu,
            Layer::GlobalAvgPool,
            Layer::Dense(Dense {
                weights: Tensor::new(vec![2, 10], readout).unwrap(),
                bias: vec![0.0; 10],
            }),
        ],
    }
}

/// Saves the band detector under `dir` and returns the manifest path.
pub fn write_fixture_model(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join("band_detector.json");
    let blob = dir.join("band_detector.bin");
    save_model(&band_detector_model(), &manifest, &blob)?;
    Ok(manifest)
}
