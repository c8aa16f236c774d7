//! The virtual inspection layer: relocate time-domain relevance into the
//! time-frequency domain and rebin it onto the mel grid.
//!
//! Convention, pinned by the explicit-synthesis-matrix oracle: with
//! `Y = |Y| e^(i phi)` from the forward STDFT,
//!
//! `R_{k,m} = (c_k/N) |Y_{k,m}| sum_n cos(2 pi k n/N + phi_{m,k}) s_{n,m}`
//!
//! where `s_{n,m} = R_{n+mH} / (x_{n+mH} w_n + delta sign(.))` and
//! `c_0 = c_{N/2} = 1`, otherwise 2. Equivalently
//! `R_{k,m} = (c_k/N) Re(conj(Y_{k,m}) S_{k,m})` with `S = DFT(s)`, which
//! is how it is computed here (one extra FFT per frame).

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lrp::{Domain, RelevanceMap};
use crate::scalar::{cast, sign_or_one, Scalar};
use crate::signal::fourier;
use crate::signal::mel::MelFilterbank;
use crate::signal::stdft::{stdft, StdftConfig};
use crate::signal::waveform::Waveform;

pub const DEFAULT_DELTA: f64 = 1e-9;

/// Validated parameters of the virtual DFT layer.
#[derive(Debug, Clone)]
pub struct VirtualInspectionConfig<T> {
    stdft: StdftConfig<T>,
    delta: T,
}

impl<T: Scalar> VirtualInspectionConfig<T> {
    /// Requires a gap-free frame layout (`H == N`), a window with no zero
    /// coefficients (the relevance route divides by `w_n`), and a positive
    /// stabilizer.
    pub fn new(stdft: StdftConfig<T>, delta: T) -> Result<Self> {
        if stdft.hop() != stdft.window_len() {
            return Err(Error::InvalidArgument(format!(
                "virtual inspection layer requires H == N (non-overlapping frames), got H={} N={}",
                stdft.hop(),
                stdft.window_len()
            )));
        }
        if stdft.window().iter().any(|&w| w == T::zero()) {
            return Err(Error::InvalidArgument(
                "window has zero coefficients; w_n^-1 undefined".into(),
            ));
        }
        if delta <= T::zero() {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        Ok(Self { stdft, delta })
    }

    /// Rectangular window with `N = H = 800`: 50 ms frames and 20 Hz bins
    /// at 16 kHz.
    pub fn rect_800() -> Result<Self> {
        Self::new(StdftConfig::rectangular(800, 800)?, cast::<T>(DEFAULT_DELTA))
    }

    pub fn stdft(&self) -> &StdftConfig<T> {
        &self.stdft
    }

    pub fn delta(&self) -> T {
        self.delta
    }
}

/// Relocates time-domain relevance into a `(K+1) x M` time-frequency map.
pub fn dft_lrp<T: Scalar>(
    x: &Waveform<T>,
    r_time: &RelevanceMap<T>,
    cfg: &VirtualInspectionConfig<T>,
) -> Result<RelevanceMap<T>> {
    if r_time.domain != Domain::Time {
        return Err(Error::InvalidArgument(format!(
            "dft_lrp input must be a time-domain map, got {:?}",
            r_time.domain
        )));
    }
    if r_time.values.len() != x.len() {
        return Err(Error::shape(
            "time relevance length",
            x.len().to_string(),
            r_time.values.len().to_string(),
        ));
    }
    let n = cfg.stdft.window_len();
    let spec = stdft(x, &cfg.stdft)?;
    let frames = spec.frames();
    let k_bins = spec.bin_count();
    let rel = r_time.values.data();
    let window = cfg.stdft.window();
    let inv_n = T::one() / cast::<T>(n as f64);
    let two = cast::<T>(2.0);

    let mut out = Grid::filled(k_bins, frames, T::zero());
    let mut s_buf = vec![Complex::new(T::zero(), T::zero()); n];
    for m in 0..frames {
        let start = m * cfg.stdft.hop();
        for i in 0..n {
            let xw = x.samples()[start + i] * window[i];
            let s = rel[start + i] / (xw + cfg.delta * sign_or_one(xw));
            s_buf[i] = Complex::new(s, T::zero());
        }
        fourier::fft_in_place(&mut s_buf, false);
        for k in 0..k_bins {
            let c_k = if k == 0 || k == n / 2 { T::one() } else { two };
            let y = spec.bins()[(m, k)];
            // Re(conj(Y) * S) = ReY*ReS + ImY*ImS
            out[(k, m)] = c_k * inv_n * (y.re * s_buf[k].re + y.im * s_buf[k].im);
        }
    }
    Ok(RelevanceMap {
        domain: Domain::TimeFrequency,
        values: out,
        class_index: r_time.class_index,
        logit: r_time.logit,
    })
}

/// Assigns each FFT row to exactly one mel filter: the filter with maximal
/// weight at that row, falling back to the nearest center frequency for
/// rows no filter covers. Ties break to the lower filter index.
pub fn bin_assignments<T: Scalar>(fb: &MelFilterbank<T>) -> Vec<usize> {
    let k_bins = fb.num_fft_bins();
    let p = fb.num_filters();
    (0..k_bins)
        .map(|k| {
            let mut best = 0usize;
            let mut best_w = T::zero();
            for f in 0..p {
                let w = fb.weights()[(k, f)];
                if w > best_w {
                    best_w = w;
                    best = f;
                }
            }
            if best_w > T::zero() {
                return best;
            }
            // Uncovered row (e.g. DC): nearest filter center wins.
            let mut nearest = 0usize;
            let mut nearest_d = f64::INFINITY;
            for (f, &c) in fb.centers_hz().iter().enumerate() {
                let d = (row_hz(fb, k) - c).abs();
                if d < nearest_d {
                    nearest_d = d;
                    nearest = f;
                }
            }
            nearest
        })
        .collect()
}

fn row_hz<T: Scalar>(fb: &MelFilterbank<T>, k: usize) -> f64 {
    k as f64 * fb.bin_hz()
}

/// Rebins a `(K+1) x M` map onto the `P x M` mel grid, conserving each
/// frame's total relevance exactly.
pub fn relevance_to_mel<T: Scalar>(
    r_tf: &RelevanceMap<T>,
    fb: &MelFilterbank<T>,
) -> Result<RelevanceMap<T>> {
    if r_tf.domain != Domain::TimeFrequency {
        return Err(Error::InvalidArgument(format!(
            "relevance_to_mel input must be time-frequency, got {:?}",
            r_tf.domain
        )));
    }
    if r_tf.values.rows() != fb.num_fft_bins() {
        return Err(Error::shape(
            "relevance_to_mel rows",
            fb.num_fft_bins().to_string(),
            r_tf.values.rows().to_string(),
        ));
    }
    let assignment = bin_assignments(fb);
    let frames = r_tf.values.cols();
    let mut out = Grid::filled(fb.num_filters(), frames, T::zero());
    for k in 0..r_tf.values.rows() {
        let p = assignment[k];
        for m in 0..frames {
            out[(p, m)] += r_tf.values[(k, m)];
        }
    }
    Ok(RelevanceMap {
        domain: Domain::MelTimeFrequency,
        values: out,
        class_index: r_tf.class_index,
        logit: r_tf.logit,
    })
}

/// Sends a waveform through the virtual DFT and straight back. With the
/// rectangular H == N layout this must be the identity on the covered
/// samples; used to check the inspection layer is forward-neutral.
pub fn virtual_identity_roundtrip<T: Scalar>(
    x: &Waveform<T>,
    cfg: &VirtualInspectionConfig<T>,
) -> Result<Waveform<T>> {
    let spec = stdft(x, &cfg.stdft)?;
    let samples = crate::signal::stdft::istdft_rectangular(&spec);
    Waveform::new(samples, x.sample_rate_hz())
}
