//! Time-domain signal container.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::util;

/// A single-channel signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate_hz: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("waveform must contain at least one sample".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> T {
        util::rms(&self.samples)
    }

    /// Scales the signal so its RMS is exactly 1. Returns `None` (leaving
    /// the signal untouched) when the RMS is zero.
    pub fn rms_normalize(&mut self) -> Option<T> {
        let r = self.rms();
        if r == T::zero() {
            return None;
        }
        for s in &mut self.samples {
            *s /= r;
        }
        Some(r)
    }

    /// Synthesizes `amplitude * sin(2 pi f t + phase)` spanning `len` samples.
    pub fn sine(freq_hz: f64, amplitude: f64, phase: f64, len: usize, sample_rate_hz: u32) -> Self {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz as f64;
        let samples = (0..len)
            .map(|i| cast::<T>(amplitude * (w * i as f64 + phase).sin()))
            .collect();
        Self { samples, sample_rate_hz }
    }
}
