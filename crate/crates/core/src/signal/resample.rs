//! Linear-interpolation resampling and channel mixdown.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::signal::waveform::Waveform;

/// Resamples by linear interpolation. Output sample `i` reads the source at
/// position `i * from_rate / to_rate`; the output length is
/// `ceil(len * to_rate / from_rate)` so the full duration is covered.
pub fn resample_linear<T: Scalar>(x: &Waveform<T>, to_rate_hz: u32) -> Result<Waveform<T>> {
    if to_rate_hz == 0 {
        return Err(Error::InvalidArgument("target sample rate must be positive".into()));
    }
    let from = x.sample_rate_hz();
    if from == to_rate_hz {
        return Ok(x.clone());
    }
    let src = x.samples();
    let out_len =
        ((src.len() as u64 * to_rate_hz as u64).div_ceil(from as u64)).max(1) as usize;
    let step = from as f64 / to_rate_hz as f64;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let base = pos.floor() as usize;
            let frac = pos - base as f64;
            if base + 1 >= src.len() {
                src[src.len() - 1]
            } else {
                src[base] * cast::<T>(1.0 - frac) + src[base + 1] * cast::<T>(frac)
            }
        })
        .collect();
    Waveform::new(samples, to_rate_hz)
}

/// Resamples a bare sample buffer by an arbitrary positive ratio
/// `out_rate / in_rate`, used by the phase vocoder where rates are virtual.
pub fn resample_ratio<T: Scalar>(src: &[T], ratio: f64) -> Vec<T> {
    assert!(ratio > 0.0 && src.len() > 1);
    let out_len = ((src.len() as f64 * ratio).round() as usize).max(1);
    (0..out_len)
        .map(|i| {
            let pos = i as f64 / ratio;
            let base = pos.floor() as usize;
            let frac = pos - base as f64;
            if base + 1 >= src.len() {
                src[src.len() - 1]
            } else {
                src[base] * cast::<T>(1.0 - frac) + src[base + 1] * cast::<T>(frac)
            }
        })
        .collect()
}

/// Resamples a bare buffer to exactly `out_len` samples. Integer positions
/// are reproduced exactly, so `out_len == src.len()` is the identity.
pub fn resample_to_len<T: Scalar>(src: &[T], out_len: usize) -> Vec<T> {
    assert!(!src.is_empty() && out_len > 0);
    let step = src.len() as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let base = pos.floor() as usize;
            let frac = pos - base as f64;
            if base + 1 >= src.len() {
                src[src.len() - 1]
            } else if frac == 0.0 {
                src[base]
            } else {
                src[base] * cast::<T>(1.0 - frac) + src[base + 1] * cast::<T>(frac)
            }
        })
        .collect()
}

/// Averages interleaved channels into one. `channels` must divide the
/// buffer length.
pub fn mixdown_mono<T: Scalar>(interleaved: &[T], channels: usize) -> Result<Vec<T>> {
    if channels == 0 || interleaved.len() % channels != 0 {
        return Err(Error::shape(
            "mixdown frame count",
            format!("multiple of {channels}"),
            interleaved.len().to_string(),
        ));
    }
    let scale = T::one() / T::from_usize(channels).unwrap();
    Ok(interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().copied().sum::<T>() * scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util;

    #[test]
    fn identity_when_rates_match() {
        let x = Waveform::<f64>::sine(440.0, 0.5, 0.0, 800, 16000);
        let y = resample_linear(&x, 16000).unwrap();
        assert_eq!(x.samples(), y.samples());
    }

    #[test]
    fn upsampling_tracks_analytic_sinusoid() {
        // 2x upsample of a low-frequency tone. Linear interpolation's
        // midpoint error is bounded by 1 - cos(pi f / f_in) ~ 3.1e-3 here.
        let x = Waveform::<f64>::sine(200.0, 1.0, 0.4, 8000, 8000);
        let y = resample_linear(&x, 16000).unwrap();
        assert_eq!(y.sample_rate_hz(), 16000);
        assert_eq!(y.len(), 16000);
        let w = 2.0 * std::f64::consts::PI * 200.0 / 16000.0;
        let err: Vec<f64> = y
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &v)| v - (w * i as f64 + 0.4).sin())
            .collect();
        assert!(util::rms(&err) < 3.2e-3);
    }

    #[test]
    fn one_second_at_8k_becomes_16000_samples_with_unit_rms() {
        let mut x = Waveform::<f64>::sine(300.0, 0.7, 0.0, 8000, 8000);
        x.rms_normalize().unwrap();
        let mut y = resample_linear(&x, 16000).unwrap();
        assert_eq!(y.len(), 16000);
        y.rms_normalize().unwrap();
        assert!((y.rms() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn downsampling_halves_length() {
        let x = Waveform::new(vec![1.0f64; 44100], 44100).unwrap();
        let y = resample_linear(&x, 16000).unwrap();
        assert_eq!(y.len(), 16000);
        assert!(y.samples().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn mixdown_averages_and_opposite_channels_cancel() {
        let stereo = [0.5f64, 0.1, -0.5, -0.1, 1.0, 0.0];
        let mono = mixdown_mono(&stereo, 2).unwrap();
        assert_eq!(mono, vec![0.3, -0.3, 0.5]);

        let anti = [0.7f64, -0.7, -0.2, 0.2];
        let silent = mixdown_mono(&anti, 2).unwrap();
        assert!(silent.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn mixdown_rejects_ragged_buffers() {
        assert!(mixdown_mono(&[1.0f64, 2.0, 3.0], 2).is_err());
        assert!(mixdown_mono(&[1.0f64], 0).is_err());
    }

    #[test]
    fn exact_length_resampler_is_identity_at_unit_ratio() {
        let src: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        assert_eq!(resample_to_len(&src, 50), src);
        assert_eq!(resample_to_len(&src, 25).len(), 25);
        assert_eq!(resample_to_len(&src, 80).len(), 80);
    }

    #[test]
    fn ratio_resampler_scales_length() {
        let src: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let up = resample_ratio(&src, 1.5);
        assert_eq!(up.len(), 150);
        // Interior samples of a linear ramp are reproduced exactly.
        for (i, &v) in up.iter().enumerate().take(140) {
            assert!((v - i as f64 / 1.5).abs() < 1e-9);
        }
    }
}
