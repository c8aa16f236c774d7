//! Short-time DFT: `Y_{k,m} = sum_n x_{n+mH} w_n e^(-2 pi i k n / N)`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{cast, Scalar};
use crate::signal::fourier;
use crate::signal::waveform::Waveform;

/// Framing parameters for the short-time transform.
#[derive(Debug, Clone, PartialEq)]
pub struct StdftConfig<T> {
    window: Vec<T>,
    hop: usize,
}

impl<T: Scalar> StdftConfig<T> {
    pub fn new(window: Vec<T>, hop: usize) -> Result<Self> {
        if window.is_empty() || window.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "window length must be positive and even, got {}",
                window.len()
            )));
        }
        if hop == 0 {
            return Err(Error::InvalidArgument("hop must be at least 1".into()));
        }
        Ok(Self { window, hop })
    }

    /// All-ones window of length `n`.
    pub fn rectangular(n: usize, hop: usize) -> Result<Self> {
        Self::new(vec![T::one(); n], hop)
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// `M = floor((L - N)/H) + 1`.
    pub fn frame_count(&self, signal_len: usize) -> usize {
        if signal_len < self.window.len() {
            0
        } else {
            (signal_len - self.window.len()) / self.hop + 1
        }
    }

    /// Number of retained nonnegative-frequency bins, `K + 1 = N/2 + 1`.
    pub fn bin_count(&self) -> usize {
        self.window.len() / 2 + 1
    }
}

/// Complex time-frequency grid, frames x bins, with its provenance.
#[derive(Debug, Clone)]
pub struct Spectrogram<T> {
    bins: Grid<Complex<T>>,
    sample_rate_hz: u32,
    window_len: usize,
    hop: usize,
}

impl<T: Scalar> Spectrogram<T> {
    /// Rows are frames (`M`), columns are frequency bins (`K+1`).
    pub fn bins(&self) -> &Grid<Complex<T>> {
        &self.bins
    }

    pub fn frames(&self) -> usize {
        self.bins.rows()
    }

    pub fn bin_count(&self) -> usize {
        self.bins.cols()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Elementwise `|Y|`.
    pub fn magnitudes(&self) -> Grid<T> {
        self.bins.map(|c| c.norm())
    }

    /// Elementwise `arg(Y)` in (-pi, pi].
    pub fn phases(&self) -> Grid<T> {
        self.bins.map(|c| c.arg())
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.window_len as f64
    }

    /// Start time of frame `m` in seconds.
    pub fn frame_time_secs(&self, m: usize) -> f64 {
        (m * self.hop) as f64 / self.sample_rate_hz as f64
    }
}

/// Computes the short-time DFT, keeping bins `0..=N/2` per frame.
pub fn stdft<T: Scalar>(x: &Waveform<T>, cfg: &StdftConfig<T>) -> Result<Spectrogram<T>> {
    let n = cfg.window_len();
    if x.len() < n {
        return Err(Error::InvalidArgument(format!(
            "signal length {} shorter than window length {n}",
            x.len()
        )));
    }
    let frames = cfg.frame_count(x.len());
    let k_bins = cfg.bin_count();
    let mut data = Vec::with_capacity(frames * k_bins);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for m in 0..frames {
        let start = m * cfg.hop();
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(x.samples()[start + i] * cfg.window()[i], T::zero());
        }
        fourier::fft_in_place(&mut buf, false);
        data.extend_from_slice(&buf[..k_bins]);
    }
    Ok(Spectrogram {
        bins: Grid::from_vec(frames, k_bins, data)?,
        sample_rate_hz: x.sample_rate_hz(),
        window_len: n,
        hop: cfg.hop(),
    })
}

/// Inverts an `H == N`, rectangular-window STDFT by concatenating per-frame
/// inverse DFTs. Only meaningful for that lossless-partition configuration.
pub fn istdft_rectangular<T: Scalar>(spec: &Spectrogram<T>) -> Vec<T> {
    let n = spec.window_len();
    let mut out = Vec::with_capacity(spec.frames() * n);
    for m in 0..spec.frames() {
        let full = fourier::expand_half_spectrum(spec.bins().row(m), n);
        out.extend(fourier::idft_real(&full));
    }
    out
}

/// Samples the Hann window `w_n = 0.5 (1 - cos(2 pi n / N))` (periodic form).
pub fn hann_window<T: Scalar>(n: usize) -> Vec<T> {
    let half = cast::<T>(0.5);
    let two_pi = cast::<T>(2.0) * T::PI();
    (0..n)
        .map(|i| half * (T::one() - (two_pi * cast::<T>(i as f64) / cast::<T>(n as f64)).cos()))
        .collect()
}
