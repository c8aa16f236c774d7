//! Small shared helpers: CRC-32 for blob integrity, pairwise summation for
//! order-stable aggregation.

use crate::scalar::Scalar;

/// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320), the variant used by
/// zip/png. Table-driven, no dependencies.
pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, entry) in t.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            }
            *entry = c;
        }
        t
    });
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

/// Pairwise (cascade) summation. Error grows like O(log n) instead of O(n),
/// and the result does not depend on how callers chunk their work.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const BASE: usize = 32;
    if values.len() <= BASE {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean via pairwise summation; zero for an empty slice.
pub fn pairwise_mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    pairwise_sum(values) / T::from_usize(values.len()).unwrap()
}

/// Root-mean-square of a slice.
pub fn rms<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let sq: Vec<T> = values.iter().map(|&v| v * v).collect();
    pairwise_mean(&sq).sqrt()
}
