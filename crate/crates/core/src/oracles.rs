//! Brute-force reference implementations used to pin down conventions.
//!
//! Everything here is written straight from the defining sums, with no
//! shared code paths with the production implementations, so agreement
//! between the two is meaningful. Compiled for tests and behind the
//! `oracles` feature so integration suites in dependent crates can reuse
//! them.

use num_complex::Complex;

use crate::grid::Grid;
use crate::scalar::{cast, sign_or_one, Scalar};

/// O(N^2) DFT straight from `X_k = sum_n x_n e^(-2 pi i k n / N)`.
pub fn naive_dft<T: Scalar>(x: &[T]) -> Vec<Complex<T>> {
    let n = x.len();
    let two_pi = cast::<T>(2.0) * T::PI();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (i, &v) in x.iter().enumerate() {
                let theta = -two_pi * cast::<T>((k * i) as f64) / cast::<T>(n as f64);
                acc += Complex::new(theta.cos(), theta.sin()) * v;
            }
            acc
        })
        .collect()
}

/// O(N^2) STDFT: frame `m` covers `x[m*hop .. m*hop + frame_len]`, windowed
/// elementwise, then transformed with [`naive_dft`]; only bins `0..=K`
/// (`K = frame_len/2`) are kept. Rows are frames, columns are bins.
pub fn naive_stdft<T: Scalar>(
    x: &[T],
    window: &[T],
    hop: usize,
) -> Grid<Complex<T>> {
    let n = window.len();
    let frames = if x.len() < n { 0 } else { (x.len() - n) / hop + 1 };
    let k_bins = n / 2 + 1;
    let mut data = Vec::with_capacity(frames * k_bins);
    for m in 0..frames {
        let windowed: Vec<T> = (0..n).map(|i| x[m * hop + i] * window[i]).collect();
        let spectrum = naive_dft(&windowed);
        data.extend_from_slice(&spectrum[..k_bins]);
    }
    Grid::from_vec(frames, k_bins, data).unwrap()
}

/// Real synthesis matrix `S` of shape `N x (2K + 2)` with
/// `x = S * [Re Y_0 .. Re Y_K, Im Y_0 .. Im Y_K]^T`:
///
/// `S[n][k]       = (c_k / N) cos(2 pi k n / N)`
/// `S[n][K+1+k]   = -(c_k / N) sin(2 pi k n / N)`
///
/// with `c_0 = c_K = 1` and `c_k = 2` otherwise. This is the dense layer
/// whose LRP-epsilon relevance, summed as `R(Re_k) + R(Im_k)`, defines the
/// DFT-LRP ground truth.
pub fn synthesis_matrix<T: Scalar>(n: usize) -> Grid<T> {
    let k_bins = n / 2 + 1;
    let two_pi = cast::<T>(2.0) * T::PI();
    let mut grid = Grid::filled(n, 2 * k_bins, T::zero());
    for row in 0..n {
        for k in 0..k_bins {
            let c_k = if k == 0 || k == n / 2 { T::one() } else { cast::<T>(2.0) };
            let scale = c_k / cast::<T>(n as f64);
            let theta = two_pi * cast::<T>((k * row) as f64) / cast::<T>(n as f64);
            grid[(row, k)] = scale * theta.cos();
            grid[(row, k_bins + k)] = -(scale * theta.sin());
        }
    }
    grid
}

/// LRP-epsilon through an explicit dense layer `out = W^T in` (weights as
/// `in_dim x out_dim`, no bias): `s_j = R_j / (out_j + eps sign(out_j))`,
/// `R_i = in_i * sum_j W[i][j] s_j`.
pub fn dense_epsilon_lrp<T: Scalar>(
    weights: &Grid<T>,
    input: &[T],
    out_relevance: &[T],
    eps: T,
) -> Vec<T> {
    assert_eq!(weights.rows(), input.len());
    assert_eq!(weights.cols(), out_relevance.len());
    let outputs: Vec<T> = (0..weights.cols())
        .map(|j| (0..weights.rows()).map(|i| weights[(i, j)] * input[i]).sum())
        .collect();
    let factors: Vec<T> = outputs
        .iter()
        .zip(out_relevance)
        .map(|(&o, &r)| r / (o + eps * sign_or_one(o)))
        .collect();
    (0..weights.rows())
        .map(|i| {
            let back: T = (0..weights.cols()).map(|j| weights[(i, j)] * factors[j]).sum();
            input[i] * back
        })
        .collect()
}

/// Ground-truth DFT-LRP for one frame: relevance of the real/imaginary
/// spectrum components through the synthesis layer, folded per bin.
///
/// The synthesis layer's input activations are the spectrum components of
/// the *windowed* frame; each time-domain relevance entry is first divided
/// by its window coefficient so the layer's output matches the windowed
/// samples the spectrum actually synthesizes.
pub fn frame_dft_lrp_reference<T: Scalar>(
    frame: &[T],
    window: &[T],
    time_relevance: &[T],
    delta: T,
) -> Vec<T> {
    let n = frame.len();
    let k_bins = n / 2 + 1;
    let windowed: Vec<T> = frame.iter().zip(window).map(|(&x, &w)| x * w).collect();
    let spectrum = naive_dft(&windowed);
    let mut components = Vec::with_capacity(2 * k_bins);
    components.extend(spectrum[..k_bins].iter().map(|c| c.re));
    components.extend(spectrum[..k_bins].iter().map(|c| c.im));

    // Relevance conservation through the virtual layer is defined on the
    // windowed signal, so rescale the incoming relevance accordingly: the
    // layer output x_w_n carries the same relevance as x_n.
    let synth = synthesis_matrix::<T>(n);
    let rel: Vec<T> = time_relevance.to_vec();
    // s_n = R_n / (x_w_n + delta sign(x_w_n)); note x_w_n is the layer output.
    let factors: Vec<T> = windowed
        .iter()
        .zip(&rel)
        .map(|(&o, &r)| r / (o + delta * sign_or_one(o)))
        .collect();
    let mut out = vec![T::zero(); k_bins];
    for comp in 0..2 * k_bins {
        let mut back = T::zero();
        for (row, &f) in factors.iter().enumerate() {
            back += synth[(row, comp)] * f;
        }
        out[comp % k_bins] += components[comp] * back;
    }
    out
}
