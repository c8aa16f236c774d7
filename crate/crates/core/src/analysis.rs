//! Strategy comparison over relevance heatmaps: per-class frequency focus,
//! relevance-centroid curves, class-average heatmaps, and aligned cosine
//! similarity with within/between-class aggregation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lrp::{Domain, RelevanceMap};
use crate::scalar::Scalar;
use crate::util::{pairwise_mean, pairwise_sum};

pub const DEFAULT_BETWEEN_PAIR_CAP: usize = 200_000;

/// Most-relevant-frequency summary. Per-map argmax bin indices are
/// averaged, which is generally fractional; both the fractional mean and
/// the rounded lookup index are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFocus {
    pub mean_index: f64,
    pub index: usize,
    pub hz: f64,
}

/// Most relevant frequency of a class: per map, take the mel row with the
/// largest total relevance across frames; average those indices over the
/// class, round half-to-even, and look the result up in `centers_hz`.
pub fn most_relevant_frequency<T: Scalar>(
    maps: &[RelevanceMap<T>],
    centers_hz: &[f64],
) -> Result<FrequencyFocus> {
    if maps.is_empty() {
        return Err(Error::EmptyGroup("most_relevant_frequency".into()));
    }
    let indices: Vec<f64> = maps
        .iter()
        .map(|map| {
            check_mel_shape(map, centers_hz.len())?;
            let mut best = 0usize;
            let mut best_total = T::neg_infinity();
            for p in 0..map.values.rows() {
                let total = pairwise_sum(map.values.row(p));
                if total > best_total {
                    best_total = total;
                    best = p;
                }
            }
            Ok(best as f64)
        })
        .collect::<Result<_>>()?;
    let mean_index = pairwise_mean(&indices);
    let index = mean_index.round_ties_even() as usize;
    Ok(FrequencyFocus {
        mean_index,
        index,
        hz: centers_hz[index],
    })
}

/// Per-frame frequency-weighted mean of positive relevance. Frames with
/// no positive relevance have no centroid.
pub fn relevance_centroid<T: Scalar>(
    map: &RelevanceMap<T>,
    centers_hz: &[f64],
) -> Result<Vec<Option<f64>>> {
    check_mel_shape(map, centers_hz.len())?;
    let frames = map.values.cols();
    let mut out = Vec::with_capacity(frames);
    for m in 0..frames {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for p in 0..map.values.rows() {
            let r = map.values[(p, m)].to_f64().unwrap_or(0.0);
            if r > 0.0 {
                num += centers_hz[p] * r;
                den += r;
            }
        }
        out.push(if den > 0.0 { Some(num / den) } else { None });
    }
    Ok(out)
}

fn check_mel_shape<T: Scalar>(map: &RelevanceMap<T>, filters: usize) -> Result<()> {
    if map.domain != Domain::MelTimeFrequency {
        return Err(Error::InvalidArgument(format!(
            "expected a mel-domain map, got {:?}",
            map.domain
        )));
    }
    if map.values.rows() != filters {
        return Err(Error::shape(
            "mel map rows",
            filters.to_string(),
            map.values.rows().to_string(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    /// Signed frame offset applied to the second map, in `(-M/2, M/2]`.
    pub shift: isize,
    /// Set when either map has zero norm; `value` is then defined as 0.
    pub degenerate: bool,
}

/// Cosine similarity of two equally shaped maps after circularly shifting
/// the second along time to the offset of greatest cross-correlation.
/// Shifts are searched exhaustively; ties break toward the smallest `|s|`
/// (positive before negative).
pub fn aligned_cosine_similarity<T: Scalar>(
    a: &RelevanceMap<T>,
    b: &RelevanceMap<T>,
) -> Result<Similarity> {
    if a.domain != b.domain {
        return Err(Error::InvalidArgument(format!(
            "domain mismatch: {:?} vs {:?}",
            a.domain, b.domain
        )));
    }
    if a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() {
        return Err(Error::shape(
            "similarity operands",
            format!("{}x{}", a.values.rows(), a.values.cols()),
            format!("{}x{}", b.values.rows(), b.values.cols()),
        ));
    }
    let rows = a.values.rows();
    let frames = a.values.cols();
    let norm_a = l2_norm(a.values.data());
    let norm_b = l2_norm(b.values.data());
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(Similarity {
            value: 0.0,
            shift: 0,
            degenerate: true,
        });
    }

    let mut best_shift = 0isize;
    let mut best_dot = f64::NEG_INFINITY;
    for s in signed_shift_order(frames) {
        let mut terms = Vec::with_capacity(rows * frames);
        for p in 0..rows {
            for m in 0..frames {
                let mb = (m as isize + s).rem_euclid(frames as isize) as usize;
                terms.push(
                    a.values[(p, m)].to_f64().unwrap() * b.values[(p, mb)].to_f64().unwrap(),
                );
            }
        }
        let dot = pairwise_sum(&terms);
        if dot > best_dot {
            best_dot = dot;
            best_shift = s;
        }
    }
    Ok(Similarity {
        value: best_dot / (norm_a * norm_b),
        shift: best_shift,
        degenerate: false,
    })
}

/// 0, 1, -1, 2, -2, ... so that a strictly-greater scan lands on the
/// smallest-magnitude shift among ties.
fn signed_shift_order(frames: usize) -> Vec<isize> {
    let m = frames as isize;
    let mut order = vec![0isize];
    let mut s = 1isize;
    while (order.len() as isize) < m {
        order.push(s);
        if (order.len() as isize) < m && s * 2 != m {
            order.push(-s);
        }
        s += 1;
    }
    order
}

fn l2_norm<T: Scalar>(data: &[T]) -> f64 {
    let squares: Vec<f64> = data
        .iter()
        .map(|v| {
            let x = v.to_f64().unwrap();
            x * x
        })
        .collect();
    pairwise_sum(&squares).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSimilarity {
    pub class_id: u16,
    pub mean_within: f64,
    pub pair_count: u64,
}

/// Within/between-class similarity aggregates. Deviations can be taken
/// over individual pairs or over class means; both are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub per_class: Vec<ClassSimilarity>,
    pub within_mean: f64,
    pub within_std_over_pairs: f64,
    pub within_std_over_classes: f64,
    pub within_pair_count: u64,
    pub between_mean: f64,
    pub between_std_over_pairs: f64,
    pub between_std_over_class_pairs: f64,
    pub between_pair_count: u64,
    pub between_subsampled: bool,
    pub subsample_seed: u64,
    pub degenerate_pair_count: u64,
}

/// All-pairs aligned cosine similarity, within and between classes.
/// Between-class pairs beyond `between_cap` are uniformly subsampled with
/// the given seed so dataset-scale runs stay bounded and deterministic.
pub fn similarity_report<T: Scalar>(
    groups: &BTreeMap<u16, Vec<RelevanceMap<T>>>,
    between_cap: usize,
    seed: u64,
) -> Result<SimilarityReport> {
    if groups.len() < 2 {
        return Err(Error::DegenerateGrouping(format!(
            "need at least 2 classes, got {}",
            groups.len()
        )));
    }
    for (&c, maps) in groups {
        if maps.len() < 2 {
            return Err(Error::DegenerateGrouping(format!(
                "class {c} has {} map(s); need at least 2",
                maps.len()
            )));
        }
    }
    if between_cap == 0 {
        return Err(Error::InvalidArgument("between_cap must be positive".into()));
    }

    let classes: Vec<u16> = groups.keys().copied().collect();
    let mut degenerate = 0u64;

    // Within-class pairs, grouped per class.
    let mut per_class = Vec::with_capacity(classes.len());
    let mut within_all: Vec<f64> = Vec::new();
    for &c in &classes {
        let maps = &groups[&c];
        let pairs: Vec<(usize, usize)> = (0..maps.len())
            .flat_map(|i| (i + 1..maps.len()).map(move |j| (i, j)))
            .collect();
        let sims: Vec<Similarity> = pairs
            .par_iter()
            .map(|&(i, j)| aligned_cosine_similarity(&maps[i], &maps[j]))
            .collect::<Result<_>>()?;
        degenerate += sims.iter().filter(|s| s.degenerate).count() as u64;
        let values: Vec<f64> = sims.iter().map(|s| s.value).collect();
        per_class.push(ClassSimilarity {
            class_id: c,
            mean_within: pairwise_mean(&values),
            pair_count: values.len() as u64,
        });
        within_all.extend_from_slice(&values);
    }

    // Between-class pairs, flat-indexed so a subsample can address them.
    let mut blocks = Vec::new(); // (class_a, class_b, n_a, n_b, first_flat_index)
    let mut total_between = 0usize;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let (a, b) = (classes[i], classes[j]);
            let n = groups[&a].len() * groups[&b].len();
            blocks.push((a, b, groups[&a].len(), groups[&b].len(), total_between));
            total_between += n;
        }
    }
    let subsampled = total_between > between_cap;
    let chosen: Vec<usize> = if subsampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> =
            rand::seq::index::sample(&mut rng, total_between, between_cap).into_vec();
        picks.sort_unstable();
        picks
    } else {
        (0..total_between).collect()
    };

    let located: Vec<(usize, u16, usize, u16, usize)> = chosen
        .iter()
        .map(|&flat| {
            let block_idx = match blocks.binary_search_by(|b| b.4.cmp(&flat)) {
                Ok(k) => k,
                Err(k) => k - 1,
            };
            let (a, b, _na, nb, first) = blocks[block_idx];
            let off = flat - first;
            (block_idx, a, off / nb, b, off % nb)
        })
        .collect();
    let between_sims: Vec<Similarity> = located
        .par_iter()
        .map(|&(_, a, i, b, j)| aligned_cosine_similarity(&groups[&a][i], &groups[&b][j]))
        .collect::<Result<_>>()?;
    degenerate += between_sims.iter().filter(|s| s.degenerate).count() as u64;
    let between_all: Vec<f64> = between_sims.iter().map(|s| s.value).collect();

    // Per class-pair means for the over-class-pairs deviation.
    let mut block_values: Vec<Vec<f64>> = vec![Vec::new(); blocks.len()];
    for (loc, sim) in located.iter().zip(&between_all) {
        block_values[loc.0].push(*sim);
    }
    let block_means: Vec<f64> = block_values
        .iter()
        .filter(|v| !v.is_empty())
        .map(|v| pairwise_mean(v))
        .collect();
    let class_means: Vec<f64> = per_class.iter().map(|c| c.mean_within).collect();

    Ok(SimilarityReport {
        within_mean: pairwise_mean(&within_all),
        within_std_over_pairs: population_std(&within_all),
        within_std_over_classes: population_std(&class_means),
        within_pair_count: within_all.len() as u64,
        between_mean: pairwise_mean(&between_all),
        between_std_over_pairs: population_std(&between_all),
        between_std_over_class_pairs: population_std(&block_means),
        between_pair_count: between_all.len() as u64,
        between_subsampled: subsampled,
        subsample_seed: seed,
        degenerate_pair_count: degenerate,
        per_class,
    })
}

fn population_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = pairwise_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (pairwise_sum(&sq) / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    /// Mean of raw heatmaps.
    Signed,
    /// Mean after clipping negative relevance to zero.
    PositiveOnly,
}

/// Per-class elementwise mean heatmap. Sums pairwise over the class's
/// maps before dividing.
pub fn class_average_heatmaps<T: Scalar>(
    groups: &BTreeMap<u16, Vec<RelevanceMap<T>>>,
    mode: AverageMode,
) -> Result<BTreeMap<u16, Grid<T>>> {
    let mut out = BTreeMap::new();
    for (&c, maps) in groups {
        if maps.is_empty() {
            return Err(Error::EmptyGroup(format!("class {c}")));
        }
        let rows = maps[0].values.rows();
        let cols = maps[0].values.cols();
        for map in maps {
            if map.values.rows() != rows || map.values.cols() != cols {
                return Err(Error::shape(
                    format!("class {c} heatmaps"),
                    format!("{rows}x{cols}"),
                    format!("{}x{}", map.values.rows(), map.values.cols()),
                ));
            }
        }
        let prepared: Vec<Grid<T>> = maps
            .iter()
            .map(|m| match mode {
                AverageMode::Signed => m.values.clone(),
                AverageMode::PositiveOnly => m.values.map(|&v| v.max(T::zero())),
            })
            .collect();
        let sum = pairwise_grid_sum(&prepared);
        let k = crate::scalar::cast::<T>(maps.len() as f64);
        out.insert(c, sum.map(|&v| v / k));
    }
    Ok(out)
}

fn pairwise_grid_sum<T: Scalar>(grids: &[Grid<T>]) -> Grid<T> {
    match grids.len() {
        1 => grids[0].clone(),
        n => {
            let (lo, hi) = grids.split_at(n / 2);
            let a = pairwise_grid_sum(lo);
            let b = pairwise_grid_sum(hi);
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| x + y)
                .collect();
            Grid::from_vec(a.rows(), a.cols(), data).unwrap()
        }
    }
}

/// Per-class summary row for the analysis table.
#[derive(Debug, Clone)]
pub struct ClassRelevanceStats<T> {
    pub class_id: u16,
    pub sample_count: usize,
    pub average_heatmap: Grid<T>,
    pub f_rel: FrequencyFocus,
    /// Relevance Centroid of the class-average heatmap, per frame.
    pub centroid_hz: Vec<Option<f64>>,
}

pub fn class_relevance_stats<T: Scalar>(
    class_id: u16,
    maps: &[RelevanceMap<T>],
    centers_hz: &[f64],
) -> Result<ClassRelevanceStats<T>> {
    if maps.is_empty() {
        return Err(Error::EmptyGroup(format!("class {class_id}")));
    }
    let f_rel = most_relevant_frequency(maps, centers_hz)?;
    let mut groups = BTreeMap::new();
    groups.insert(class_id, maps.to_vec());
    let average_heatmap = class_average_heatmaps(&groups, AverageMode::Signed)?
        .remove(&class_id)
        .unwrap();
    let avg_map = RelevanceMap {
        domain: Domain::MelTimeFrequency,
        values: average_heatmap.clone(),
        class_index: maps[0].class_index,
        logit: T::zero(),
    };
    let centroid_hz = relevance_centroid(&avg_map, centers_hz)?;
    Ok(ClassRelevanceStats {
        class_id,
        sample_count: maps.len(),
        average_heatmap,
        f_rel,
        centroid_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mel_map(rows: usize, cols: usize, data: Vec<f64>) -> RelevanceMap<f64> {
        RelevanceMap {
            domain: Domain::MelTimeFrequency,
            values: Grid::from_vec(rows, cols, data).unwrap(),
            class_index: 0,
            logit: 1.0,
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RelevanceMap<f64> {
        mel_map(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    fn centers(n: usize) -> Vec<f64> {
        (0..n).map(|i| 100.0 * (i + 1) as f64).collect()
    }

    #[test]
    fn f_rel_of_a_single_concentrated_map() {
        let mut data = vec![0.0; 8 * 4];
        for m in 0..4 {
            data[5 * 4 + m] = 1.0;
        }
        let maps = vec![mel_map(8, 4, data)];
        let focus = most_relevant_frequency(&maps, &centers(8)).unwrap();
        assert_eq!(focus.index, 5);
        assert_eq!(focus.hz, 600.0);
        assert_eq!(focus.mean_index, 5.0);
    }

    #[test]
    fn f_rel_averages_argmax_indices() {
        let mut a = vec![0.0; 8 * 4];
        a[4 * 4] = 1.0;
        let mut b = vec![0.0; 8 * 4];
        b[6 * 4] = 1.0;
        let maps = vec![mel_map(8, 4, a), mel_map(8, 4, b)];
        let focus = most_relevant_frequency(&maps, &centers(8)).unwrap();
        assert_eq!(focus.mean_index, 5.0);
        assert_eq!(focus.index, 5);
        assert_eq!(focus.hz, 600.0);
    }

    #[test]
    fn f_rel_rounds_half_to_even() {
        let mut a = vec![0.0; 8 * 1];
        a[4] = 1.0;
        let mut b = vec![0.0; 8 * 1];
        b[5] = 1.0;
        let maps = vec![mel_map(8, 1, a), mel_map(8, 1, b)];
        let focus = most_relevant_frequency(&maps, &centers(8)).unwrap();
        assert_eq!(focus.mean_index, 4.5);
        assert_eq!(focus.index, 4);
    }

    #[test]
    fn f_rel_is_invariant_under_positive_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let maps: Vec<_> = (0..5).map(|_| random_map(&mut rng, 16, 6)).collect();
        let scaled: Vec<_> = maps
            .iter()
            .map(|m| RelevanceMap {
                domain: m.domain,
                values: m.values.map(|&v| v * 3.7),
                class_index: m.class_index,
                logit: m.logit,
            })
            .collect();
        let a = most_relevant_frequency(&maps, &centers(16)).unwrap();
        let b = most_relevant_frequency(&scaled, &centers(16)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f_rel_rejects_empty_class() {
        assert!(most_relevant_frequency::<f64>(&[], &centers(8)).is_err());
    }

    #[test]
    fn centroid_of_uniform_relevance_is_mean_center() {
        let map = mel_map(4, 3, vec![1.0; 12]);
        let f = centers(4);
        let mean: f64 = f.iter().sum::<f64>() / 4.0;
        for c in relevance_centroid(&map, &f).unwrap() {
            assert!((c.unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_of_concentrated_and_empty_frames() {
        let mut data = vec![0.0; 4 * 5];
        data[2 * 5 + 3] = 2.5;
        let map = mel_map(4, 5, data);
        let curve = relevance_centroid(&map, &centers(4)).unwrap();
        assert_eq!(curve[3], Some(300.0));
        for (m, c) in curve.iter().enumerate() {
            if m != 3 {
                assert_eq!(*c, None);
            }
        }
    }

    #[test]
    fn centroid_of_two_equal_masses() {
        let map = mel_map(2, 1, vec![1.0, 1.0]);
        let curve = relevance_centroid(&map, &[200.0, 600.0]).unwrap();
        assert_eq!(curve[0], Some(400.0));
    }

    #[test]
    fn centroid_ignores_negative_relevance_and_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = centers(16);
        for _ in 0..50 {
            let map = random_map(&mut rng, 16, 6);
            for c in relevance_centroid(&map, &f).unwrap().into_iter().flatten() {
                assert!(c >= f[0] && c <= f[15], "{c}");
            }
        }
    }

    #[test]
    fn similarity_of_identical_maps_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_map(&mut rng, 8, 10);
        let s = aligned_cosine_similarity(&a, &a).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert_eq!(s.shift, 0);
        assert!(!s.degenerate);
    }

    #[test]
    fn similarity_recovers_planted_circular_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames = 20;
        let a = random_map(&mut rng, 8, frames);
        for planted in 0..frames {
            let mut shifted = Grid::filled(8, frames, 0.0f64);
            for p in 0..8 {
                for m in 0..frames {
                    // b delayed by `planted`: b[m] = a[m - planted]
                    shifted[(p, m)] =
                        a.values[(p, (m + frames - planted) % frames)];
                }
            }
            let b = mel_map(8, frames, shifted.data().to_vec());
            let s = aligned_cosine_similarity(&a, &b).unwrap();
            assert!((s.value - 1.0).abs() < 1e-9, "planted {planted}: {}", s.value);
            assert_eq!(
                (s.shift - planted as isize).rem_euclid(frames as isize),
                0,
                "planted {planted} recovered {}",
                s.shift
            );
            assert!(s.shift.unsigned_abs() <= frames / 2);
        }
    }

    #[test]
    fn similarity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = random_map(&mut rng, 8, 12);
            let b = random_map(&mut rng, 8, 12);
            let ab = aligned_cosine_similarity(&a, &b).unwrap();
            let ba = aligned_cosine_similarity(&b, &a).unwrap();
            assert!((ab.value - ba.value).abs() < 1e-9);
        }
    }

    #[test]
    fn similarity_scale_invariance_is_exact_for_power_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_map(&mut rng, 8, 12);
        let b = random_map(&mut rng, 8, 12);
        for c in [0.25f64, 4.0] {
            let scaled = RelevanceMap {
                domain: a.domain,
                values: a.values.map(|&v| v * c),
                class_index: a.class_index,
                logit: a.logit,
            };
            let s0 = aligned_cosine_similarity(&a, &b).unwrap();
            let s1 = aligned_cosine_similarity(&scaled, &b).unwrap();
            assert_eq!(s0.value, s1.value);
            assert_eq!(s0.shift, s1.shift);
        }
    }

    #[test]
    fn similarity_of_disjoint_supports_is_zero() {
        let mut a_data = vec![0.0; 4 * 6];
        let mut b_data = vec![0.0; 4 * 6];
        for m in 0..6 {
            a_data[m] = 1.0; // row 0
            b_data[6 + m] = 1.0; // row 1
        }
        let s = aligned_cosine_similarity(&mel_map(4, 6, a_data), &mel_map(4, 6, b_data)).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn zero_norm_similarity_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_map(&mut rng, 4, 6);
        let z = mel_map(4, 6, vec![0.0; 24]);
        let s = aligned_cosine_similarity(&a, &z).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.degenerate);
    }

    #[test]
    fn similarity_rejects_shape_mismatch() {
        let a = mel_map(4, 6, vec![1.0; 24]);
        let b = mel_map(4, 5, vec![1.0; 20]);
        assert!(aligned_cosine_similarity(&a, &b).is_err());
    }

    #[test]
    fn report_on_orthogonal_class_templates() {
        let mut a_data = vec![0.0; 4 * 6];
        let mut b_data = vec![0.0; 4 * 6];
        for m in 0..6 {
            a_data[m] = 1.0;
            b_data[6 + m] = 1.0;
        }
        let mut groups = BTreeMap::new();
        groups.insert(0u16, vec![mel_map(4, 6, a_data.clone()), mel_map(4, 6, a_data)]);
        groups.insert(1u16, vec![mel_map(4, 6, b_data.clone()), mel_map(4, 6, b_data)]);
        let report = similarity_report(&groups, DEFAULT_BETWEEN_PAIR_CAP, 0).unwrap();
        assert!((report.within_mean - 1.0).abs() < 1e-12);
        assert_eq!(report.between_mean, 0.0);
        assert_eq!(report.within_pair_count, 2);
        assert_eq!(report.between_pair_count, 4);
        assert!(!report.between_subsampled);
        for s in [
            report.within_std_over_pairs,
            report.within_std_over_classes,
            report.between_std_over_pairs,
            report.between_std_over_class_pairs,
        ] {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn report_separates_band_templates() {
        // Two classes built around distinct band templates plus noise:
        // within-class similarity must exceed between-class by construction.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows = 16;
        let cols = 10;
        let make_class = |rng: &mut ChaCha8Rng, band: std::ops::Range<usize>| -> Vec<RelevanceMap<f64>> {
            (0..6)
                .map(|_| {
                    let mut data = vec![0.0f64; rows * cols];
                    for p in band.clone() {
                        for m in 0..cols {
                            data[p * cols + m] = 1.0 + rng.gen_range(-0.2..0.2);
                        }
                    }
                    for v in data.iter_mut() {
                        *v += rng.gen_range(-0.05..0.05);
                    }
                    mel_map(rows, cols, data)
                })
                .collect()
        };
        let mut groups = BTreeMap::new();
        groups.insert(3u16, make_class(&mut rng, 2..5));
        groups.insert(8u16, make_class(&mut rng, 10..13));
        let report = similarity_report(&groups, DEFAULT_BETWEEN_PAIR_CAP, 0).unwrap();
        assert!(
            report.within_mean > report.between_mean,
            "{} vs {}",
            report.within_mean,
            report.between_mean
        );
        assert!(report.per_class.iter().all(|c| c.mean_within > report.between_mean));
        for v in report.per_class.iter().map(|c| c.mean_within) {
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn report_subsampling_is_deterministic_and_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut groups = BTreeMap::new();
        for c in 0..3u16 {
            groups.insert(c, (0..4).map(|_| random_map(&mut rng, 6, 8)).collect::<Vec<_>>());
        }
        // 3 class pairs x 16 pairs = 48 total; cap at 10.
        let r1 = similarity_report(&groups, 10, 42).unwrap();
        let r2 = similarity_report(&groups, 10, 42).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.between_subsampled);
        assert_eq!(r1.between_pair_count, 10);
        let r3 = similarity_report(&groups, 10, 43).unwrap();
        assert_ne!(r1.between_mean, r3.between_mean);
    }

    #[test]
    fn report_rejects_degenerate_groupings() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut single_class = BTreeMap::new();
        single_class.insert(0u16, vec![random_map(&mut rng, 4, 4), random_map(&mut rng, 4, 4)]);
        assert!(matches!(
            similarity_report(&single_class, 100, 0),
            Err(Error::DegenerateGrouping(_))
        ));

        let mut thin = BTreeMap::new();
        thin.insert(0u16, vec![random_map(&mut rng, 4, 4), random_map(&mut rng, 4, 4)]);
        thin.insert(1u16, vec![random_map(&mut rng, 4, 4)]);
        assert!(matches!(
            similarity_report(&thin, 100, 0),
            Err(Error::DegenerateGrouping(_))
        ));
    }

    #[test]
    fn averages_of_singleton_and_cancelling_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a = random_map(&mut rng, 6, 4);
        let neg = RelevanceMap {
            domain: a.domain,
            values: a.values.map(|&v| -v),
            class_index: 0,
            logit: 0.0,
        };
        let mut groups = BTreeMap::new();
        groups.insert(0u16, vec![a.clone()]);
        groups.insert(1u16, vec![a.clone(), neg]);
        let avg = class_average_heatmaps(&groups, AverageMode::Signed).unwrap();
        assert_eq!(avg[&0].data(), a.values.data());
        assert!(avg[&1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn average_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let maps: Vec<_> = (0..33).map(|_| random_map(&mut rng, 8, 8)).collect();
        let mut groups = BTreeMap::new();
        groups.insert(0u16, maps.clone());
        groups.insert(1u16, maps[..2].to_vec());
        let avg = class_average_heatmaps(&groups, AverageMode::Signed).unwrap();
        // Brute-force elementwise accumulation.
        for idx in 0..64 {
            let sum: f64 = maps.iter().map(|m| m.values.data()[idx]).sum();
            assert!((avg[&0].data()[idx] - sum / 33.0).abs() < 1e-7);
        }
    }

    #[test]
    fn positive_only_average_clips_before_averaging() {
        let a = mel_map(1, 2, vec![1.0, -1.0]);
        let b = mel_map(1, 2, vec![3.0, -3.0]);
        let mut groups = BTreeMap::new();
        groups.insert(0u16, vec![a, b]);
        let avg = class_average_heatmaps(&groups, AverageMode::PositiveOnly).unwrap();
        assert_eq!(avg[&0].data(), &[2.0, 0.0]);
    }

    #[test]
    fn stats_bundle_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let maps: Vec<_> = (0..4).map(|_| random_map(&mut rng, 16, 6)).collect();
        let f = centers(16);
        let stats = class_relevance_stats(7, &maps, &f).unwrap();
        assert_eq!(stats.class_id, 7);
        assert_eq!(stats.sample_count, 4);
        assert_eq!(stats.average_heatmap.rows(), 16);
        assert_eq!(stats.average_heatmap.cols(), 6);
        assert!(f.contains(&stats.f_rel.hz));
        assert_eq!(stats.centroid_hz.len(), 6);
    }
}
