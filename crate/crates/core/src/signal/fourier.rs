//! Discrete Fourier transform wrappers.
//!
//! Convention: the forward transform uses the exponent `e^(-2*pi*i*k*n/N)`
//! and carries no normalization; the inverse divides by `N`, so
//! `idft(dft(x)) == x`. `Parseval`: `sum |x_n|^2 == (1/N) * sum |X_k|^2`.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Scalar;

/// Forward DFT of a real sequence. Returns all `N` complex bins.
pub fn dft<T: Scalar>(x: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft_in_place(&mut buf, false);
    buf
}

/// Inverse DFT. Exact inverse of [`dft`] including the `1/N` factor.
pub fn idft<T: Scalar>(bins: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = bins.to_vec();
    fft_in_place(&mut buf, true);
    let scale = T::one() / T::from_usize(bins.len()).unwrap();
    for v in &mut buf {
        *v = *v * scale;
    }
    buf
}

/// Inverse DFT of a conjugate-symmetric spectrum, returning the real parts.
pub fn idft_real<T: Scalar>(bins: &[Complex<T>]) -> Vec<T> {
    idft(bins).into_iter().map(|c| c.re).collect()
}

/// Expands the nonnegative-frequency half (`K+1 = N/2 + 1` bins) of a real
/// signal's spectrum back to all `N` bins via conjugate symmetry.
pub fn expand_half_spectrum<T: Scalar>(half: &[Complex<T>], n: usize) -> Vec<Complex<T>> {
    debug_assert_eq!(half.len(), n / 2 + 1);
    let mut full = Vec::with_capacity(n);
    full.extend_from_slice(half);
    for k in (1..n - n / 2).rev() {
        full.push(half[k].conj());
    }
    full
}

/// Unnormalized in-place FFT; `inverse` selects the conjugate transform.
pub(crate) fn fft_in_place<T: Scalar>(buf: &mut [Complex<T>], inverse: bool) {
    if buf.len() <= 1 {
        return;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}
