//! Mel filterbank and (log)mel spectrograms.
//!
//! Mel scale: `mel(f) = 2595 log10(1 + f/700)` (HTK). Filters are
//! triangles with edges equally spaced on the mel scale and area-normalized
//! (height `2/width_hz`), so peak heights fall and supports widen as the
//! center frequency rises.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{cast, Scalar};
use crate::signal::stdft::Spectrogram;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filterbank mapping `K+1` FFT bins onto `P` mel bands.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    weights: Grid<T>,
    centers_hz: Vec<f64>,
    edges_hz: Vec<f64>,
    bin_hz: f64,
}

impl<T: Scalar> MelFilterbank<T> {
    pub fn new(
        num_fft_bins: usize,
        num_filters: usize,
        sample_rate_hz: u32,
        f_min_hz: f64,
        f_max_hz: f64,
    ) -> Result<Self> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if num_filters == 0 {
            return Err(Error::InvalidArgument("need at least one mel filter".into()));
        }
        if num_filters > num_fft_bins {
            return Err(Error::InvalidArgument(format!(
                "{num_filters} filters exceed {num_fft_bins} FFT bins"
            )));
        }
        if !(f_min_hz >= 0.0 && f_min_hz < f_max_hz && f_max_hz <= nyquist) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= f_min < f_max <= nyquist, got [{f_min_hz}, {f_max_hz}] at f_S {sample_rate_hz}"
            )));
        }

        let mel_lo = hz_to_mel(f_min_hz);
        let mel_hi = hz_to_mel(f_max_hz);
        let edges_hz: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_filters + 1) as f64))
            .collect();
        let centers_hz = edges_hz[1..=num_filters].to_vec();

        // FFT bin k sits at k * f_S / N with N = 2 (num_fft_bins - 1).
        let bin_hz = sample_rate_hz as f64 / (2 * (num_fft_bins - 1)) as f64;
        let mut weights = Grid::filled(num_fft_bins, num_filters, T::zero());
        for p in 0..num_filters {
            let (left, center, right) = (edges_hz[p], edges_hz[p + 1], edges_hz[p + 2]);
            let height = 2.0 / (right - left);
            for k in 0..num_fft_bins {
                let f = k as f64 * bin_hz;
                let ramp = ((f - left) / (center - left)).min((right - f) / (right - center));
                if ramp > 0.0 {
                    weights[(k, p)] = cast::<T>(ramp * height);
                }
            }
        }
        Ok(Self { weights, centers_hz, edges_hz, bin_hz })
    }

    /// Weight matrix `T`, FFT bins x filters.
    pub fn weights(&self) -> &Grid<T> {
        &self.weights
    }

    pub fn num_filters(&self) -> usize {
        self.weights.cols()
    }

    pub fn num_fft_bins(&self) -> usize {
        self.weights.rows()
    }

    /// Per-filter center frequencies `lin_m` in Hz.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// The `P + 2` triangle edge frequencies in Hz.
    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    /// Spacing between adjacent FFT rows in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelScale {
    Mel,
    LogMel,
}

/// Mel-domain grid, frames x filters, tagged with its scale.
#[derive(Debug, Clone)]
pub struct MelSpectrogram<T> {
    values: Grid<T>,
    scale: MelScale,
    centers_hz: Vec<f64>,
}

impl<T: Scalar> MelSpectrogram<T> {
    pub fn values(&self) -> &Grid<T> {
        &self.values
    }

    pub fn scale(&self) -> MelScale {
        self.scale
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn num_filters(&self) -> usize {
        self.values.cols()
    }
}

/// `Y_mel = T^T Y_magn`, applied per frame.
pub fn mel_spectrogram<T: Scalar>(
    spec: &Spectrogram<T>,
    fb: &MelFilterbank<T>,
) -> Result<MelSpectrogram<T>> {
    if spec.bin_count() != fb.num_fft_bins() {
        return Err(Error::shape(
            "mel_spectrogram bins",
            fb.num_fft_bins().to_string(),
            spec.bin_count().to_string(),
        ));
    }
    let mags = spec.magnitudes();
    let mut values = Grid::filled(spec.frames(), fb.num_filters(), T::zero());
    for m in 0..spec.frames() {
        for k in 0..spec.bin_count() {
            let mag = mags[(m, k)];
            if mag == T::zero() {
                continue;
            }
            for p in 0..fb.num_filters() {
                values[(m, p)] += fb.weights()[(k, p)] * mag;
            }
        }
    }
    Ok(MelSpectrogram { values, scale: MelScale::Mel, centers_hz: fb.centers_hz().to_vec() })
}

/// `ln(max(Y_mel, floor))` elementwise.
pub fn logmel<T: Scalar>(mel: &MelSpectrogram<T>, floor: T) -> Result<MelSpectrogram<T>> {
    if mel.scale != MelScale::Mel {
        return Err(Error::InvalidArgument("logmel input must be mel-scaled".into()));
    }
    if floor <= T::zero() {
        return Err(Error::InvalidArgument("logmel floor must be positive".into()));
    }
    Ok(MelSpectrogram {
        values: mel.values.map(|&v| v.max(floor).ln()),
        scale: MelScale::LogMel,
        centers_hz: mel.centers_hz.clone(),
    })
}
