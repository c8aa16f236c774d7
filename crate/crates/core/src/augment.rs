//! Waveform augmentations: gain, additive white noise at a fixed power
//! ratio, onset delay, zero-phase FFT filters, and phase-vocoder pitch
//! shift. All operations preserve clip length exactly.
//!
//! Note on "SNR": the `snr` parameter is the noise-to-signal power ratio,
//! so 1e-4 means noise carries 0.01% of the signal's power. Reading the
//! range 1e-4..1e-1 as a literal signal-to-noise ratio would bury the
//! signal 10-10,000x under the noise.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::signal::fourier;
use crate::signal::resample::resample_to_len;
use crate::signal::stdft::hann_window;
use crate::signal::waveform::Waveform;

/// Training-mode parameter ranges (inclusive).
pub const TRAIN_GAIN_DB: (f64, f64) = (-12.0, -1.0);
pub const TRAIN_SNR: (f64, f64) = (1e-4, 1e-1);
pub const TRAIN_DELAY_MS: (f64, f64) = (1.0, 300.0);
pub const TRAIN_LOWPASS_HZ: (f64, f64) = (1400.0, 4000.0);
pub const TRAIN_HIGHPASS_HZ: (f64, f64) = (500.0, 1200.0);

/// One augmentation step; a JSON list of these describes a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentSpec {
    Gain { db: f64 },
    Noise { snr: f64, seed: u64 },
    Delay { ms: f64 },
    Lowpass { cutoff_hz: f64 },
    Highpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
    PitchShift { semitones: f64 },
}

impl AugmentSpec {
    pub fn apply<T: Scalar>(&self, x: &Waveform<T>) -> Result<Waveform<T>> {
        match *self {
            AugmentSpec::Gain { db } => Ok(apply_gain(x, db)),
            AugmentSpec::Noise { snr, seed } => add_noise(x, snr, seed),
            AugmentSpec::Delay { ms } => apply_delay(x, ms),
            AugmentSpec::Lowpass { cutoff_hz } => filter(x, FilterKind::Lowpass { cutoff_hz }),
            AugmentSpec::Highpass { cutoff_hz } => filter(x, FilterKind::Highpass { cutoff_hz }),
            AugmentSpec::Bandpass { low_hz, high_hz } => {
                filter(x, FilterKind::Bandpass { low_hz, high_hz })
            }
            AugmentSpec::PitchShift { semitones } => pitch_shift(x, semitones),
        }
    }

    /// Whether the parameters fall inside the training-time sampling ranges.
    pub fn in_training_range(&self) -> bool {
        fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
            v >= lo && v <= hi
        }
        match *self {
            AugmentSpec::Gain { db } => within(db, TRAIN_GAIN_DB),
            AugmentSpec::Noise { snr, .. } => within(snr, TRAIN_SNR),
            AugmentSpec::Delay { ms } => within(ms, TRAIN_DELAY_MS),
            AugmentSpec::Lowpass { cutoff_hz } => within(cutoff_hz, TRAIN_LOWPASS_HZ),
            AugmentSpec::Highpass { cutoff_hz } => within(cutoff_hz, TRAIN_HIGHPASS_HZ),
            AugmentSpec::Bandpass { low_hz, high_hz } => {
                within(high_hz, TRAIN_LOWPASS_HZ) && within(low_hz, TRAIN_HIGHPASS_HZ)
            }
            AugmentSpec::PitchShift { semitones } => semitones.abs() <= 12.0,
        }
    }
}

pub fn apply_pipeline<T: Scalar>(specs: &[AugmentSpec], x: &Waveform<T>) -> Result<Waveform<T>> {
    let mut out = x.clone();
    for spec in specs {
        out = spec.apply(&out)?;
    }
    Ok(out)
}

/// Scales samples by `10^(db/20)`.
pub fn apply_gain<T: Scalar>(x: &Waveform<T>, db: f64) -> Waveform<T> {
    let factor = cast::<T>(10f64.powf(db / 20.0));
    Waveform::new(
        x.samples().iter().map(|&v| v * factor).collect(),
        x.sample_rate_hz(),
    )
    .unwrap()
}

/// Adds white Gaussian noise whose power is `snr` times the signal power.
pub fn add_noise<T: Scalar>(x: &Waveform<T>, snr: f64, seed: u64) -> Result<Waveform<T>> {
    if snr <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise power ratio must be positive, got {snr}"
        )));
    }
    let signal_power = x
        .samples()
        .iter()
        .map(|&v| {
            let f = v.to_f64().unwrap();
            f * f
        })
        .sum::<f64>()
        / x.len() as f64;
    if signal_power == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot scale noise against a zero-power signal".into(),
        ));
    }
    let sigma = (snr * signal_power).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = x
        .samples()
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + cast::<T>(n * sigma)
        })
        .collect();
    Waveform::new(samples, x.sample_rate_hz())
}

/// Shifts the signal right by `round(ms * f_S / 1000)` samples, zero-filling
/// the head and truncating the tail.
pub fn apply_delay<T: Scalar>(x: &Waveform<T>, ms: f64) -> Result<Waveform<T>> {
    let shift = (ms * x.sample_rate_hz() as f64 / 1000.0).round() as i64;
    if shift <= 0 || shift as usize >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "delay of {ms} ms is {shift} samples; need 0 < shift < {}",
            x.len()
        )));
    }
    let shift = shift as usize;
    let mut samples = vec![T::zero(); x.len()];
    samples[shift..].copy_from_slice(&x.samples()[..x.len() - shift]);
    Waveform::new(samples, x.sample_rate_hz())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Lowpass { cutoff_hz: f64 },
    Highpass { cutoff_hz: f64 },
    Bandpass { low_hz: f64, high_hz: f64 },
}

/// Lowpass gain at frequency `f`: 1 below the transition band, a raised
/// cosine across `cutoff +- 5%`, 0 above.
fn lowpass_gain(f: f64, cutoff_hz: f64) -> f64 {
    let lo = 0.95 * cutoff_hz;
    let hi = 1.05 * cutoff_hz;
    if f <= lo {
        1.0
    } else if f >= hi {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (f - lo) / (hi - lo)).cos())
    }
}

fn mask_gain(kind: &FilterKind, f: f64) -> f64 {
    match *kind {
        FilterKind::Lowpass { cutoff_hz } => lowpass_gain(f, cutoff_hz),
        FilterKind::Highpass { cutoff_hz } => 1.0 - lowpass_gain(f, cutoff_hz),
        FilterKind::Bandpass { low_hz, high_hz } => {
            (1.0 - lowpass_gain(f, low_hz)) * lowpass_gain(f, high_hz)
        }
    }
}

/// Zero-phase frequency-domain filter. The complementary construction makes
/// `lowpass + highpass` at one cutoff the exact identity on spectra.
pub fn filter<T: Scalar>(x: &Waveform<T>, kind: FilterKind) -> Result<Waveform<T>> {
    let nyquist = x.sample_rate_hz() as f64 / 2.0;
    let check = |f: f64, what: &str| -> Result<()> {
        if f <= 0.0 || f >= nyquist {
            return Err(Error::InvalidArgument(format!(
                "{what} cutoff {f} Hz outside (0, {nyquist})"
            )));
        }
        Ok(())
    };
    match kind {
        FilterKind::Lowpass { cutoff_hz } => check(cutoff_hz, "lowpass")?,
        FilterKind::Highpass { cutoff_hz } => check(cutoff_hz, "highpass")?,
        FilterKind::Bandpass { low_hz, high_hz } => {
            check(low_hz, "bandpass low")?;
            check(high_hz, "bandpass high")?;
            if low_hz >= high_hz {
                return Err(Error::InvalidArgument(format!(
                    "bandpass needs low < high, got [{low_hz}, {high_hz}]"
                )));
            }
        }
    }

    let len = x.len();
    let mut spectrum: Vec<Complex<T>> = x
        .samples()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fourier::fft_in_place(&mut spectrum, false);
    let df = x.sample_rate_hz() as f64 / len as f64;
    for (k, bin) in spectrum.iter_mut().enumerate() {
        // Mirror bins carry negative frequencies; gain is symmetric.
        let f = if k <= len / 2 { k as f64 * df } else { (len - k) as f64 * df };
        let g = cast::<T>(mask_gain(&kind, f));
        *bin = *bin * g;
    }
    fourier::fft_in_place(&mut spectrum, true);
    let scale = T::one() / cast::<T>(len as f64);
    Waveform::new(
        spectrum.iter().map(|c| c.re * scale).collect(),
        x.sample_rate_hz(),
    )
}

const VOCODER_N: usize = 1024;
const VOCODER_HOP: usize = 256;

/// Phase-vocoder pitch shift: time-stretch by `2^(semitones/12)` with a
/// Hann-windowed STDFT at 75% overlap, then resample back to the original
/// length so duration is preserved and frequencies scale.
pub fn pitch_shift<T: Scalar>(x: &Waveform<T>, semitones: f64) -> Result<Waveform<T>> {
    if semitones.abs() > 12.0 {
        return Err(Error::InvalidArgument(format!(
            "pitch shift of {semitones} semitones outside [-12, 12]"
        )));
    }
    if semitones == 0.0 {
        return Ok(x.clone());
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("clip too short to pitch-shift".into()));
    }

    let n = VOCODER_N;
    let ha = VOCODER_HOP;
    let hs = ((ha as f64) * 2f64.powf(semitones / 12.0)).round() as usize;
    let ratio = hs as f64 / ha as f64;
    let window: Vec<T> = hann_window(n);
    let len = x.len();

    // Zero-pad one window on each side so every real sample gets full
    // overlap-add coverage.
    let mut padded = vec![T::zero(); len + 2 * n];
    padded[n..n + len].copy_from_slice(x.samples());
    let frame_count = (padded.len() - n) / ha + 1;

    let two_pi = 2.0 * std::f64::consts::PI;
    let wrap = |v: f64| v - two_pi * (v / two_pi).round();

    let mut prev_phase = vec![0.0f64; n];
    let mut synth_phase = vec![0.0f64; n];
    let out_len = (frame_count - 1) * hs + n;
    let mut out = vec![T::zero(); out_len];
    let mut weight = vec![T::zero(); out_len];
    let mut frame = vec![Complex::new(T::zero(), T::zero()); n];

    for m in 0..frame_count {
        let start = m * ha;
        for i in 0..n {
            frame[i] = Complex::new(padded[start + i] * window[i], T::zero());
        }
        fourier::fft_in_place(&mut frame, false);

        for (k, bin) in frame.iter_mut().enumerate() {
            let mag = bin.norm().to_f64().unwrap();
            let phase = bin.im.to_f64().unwrap().atan2(bin.re.to_f64().unwrap());
            let psi = if m == 0 {
                phase
            } else {
                let omega = two_pi * k as f64 / n as f64;
                let deviation = wrap(phase - prev_phase[k] - omega * ha as f64);
                synth_phase[k] + (omega + deviation / ha as f64) * hs as f64
            };
            prev_phase[k] = phase;
            synth_phase[k] = psi;
            *bin = Complex::new(cast::<T>(mag * psi.cos()), cast::<T>(mag * psi.sin()));
        }

        fourier::fft_in_place(&mut frame, true);
        let inv_n = T::one() / cast::<T>(n as f64);
        let base = m * hs;
        for i in 0..n {
            out[base + i] += frame[i].re * inv_n * window[i];
            weight[base + i] += window[i] * window[i];
        }
    }

    let tiny = cast::<T>(1e-9);
    for (o, &w) in out.iter_mut().zip(&weight) {
        if w > tiny {
            *o = *o / w;
        }
    }

    // The padded head maps to n * ratio in stretched time; cut the segment
    // covering the original clip and squeeze it back to `len` samples.
    let seg_start = ((n as f64) * ratio).round() as usize;
    let seg_len = ((len as f64) * ratio).round() as usize;
    let seg_end = (seg_start + seg_len).min(out.len());
    let samples = resample_to_len(&out[seg_start..seg_end], len);
    Waveform::new(samples, x.sample_rate_hz())
}
