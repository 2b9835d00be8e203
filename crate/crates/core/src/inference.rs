//! Row-address bit-permutation recovery from per-row error counts.
//!
//! Error counts rise with a row's internal position inside its 512-row
//! window, so sorting observed counts exposes the internal order even though
//! the controller only sees external addresses. The estimator searches for
//! the bit permutation under which the reordered counts are closest to
//! monotone non-decreasing, exhaustively up to a bit-width threshold and
//! with a rank-separation greedy above it, then scores per-bit confidence by
//! how well each external bit predicts the bit of the row's count rank.

use crate::error::ModelError;
use crate::geometry::BitPermutation;
use crate::rng::standard_normal;

/// Widest bit count searched exhaustively; above this the greedy assignment
/// runs alone. 9 bits covers a 512-row window.
pub const EXHAUSTIVE_BITS: usize = 9;

/// Rank-neighborhood half-width used when flagging repair-perturbed rows.
const OUTLIER_WINDOW: usize = 8;

/// Multiple of the neighborhood deviation beyond which a row is excluded
/// from confidence scoring.
const OUTLIER_SIGMA: f64 = 5.0;

/// Recovered external-to-internal row-bit mapping with per-bit confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingEstimate {
    /// Entry `k` is the internal bit position fed by external bit `k`.
    pub permutation: BitPermutation,
    /// Confidence per internal bit, index 0 = least significant.
    pub confidence: Vec<f64>,
    /// Rows that entered confidence scoring after outlier exclusion.
    pub rows_used: usize,
}

fn rank_order(counts: &[u64]) -> Vec<usize> {
    // Stable order by (count, external address) so ties cannot reshuffle
    // between runs.
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&e| (counts[e], e));
    order
}

/// Rank of each external row when rows are sorted by error count.
fn ranks(counts: &[u64]) -> Vec<usize> {
    let order = rank_order(counts);
    let mut rank = vec![0usize; counts.len()];
    for (r, &e) in order.iter().enumerate() {
        rank[e] = r;
    }
    rank
}

/// Sum of adjacent decreases once counts are reordered by internal index.
fn monotonicity_violation(counts: &[u64], perm: &[usize], abort_above: u64) -> u64 {
    let n = counts.len();
    let mut reordered = vec![0u64; n];
    for (e, &c) in counts.iter().enumerate() {
        let mut i = 0usize;
        for (k, &m) in perm.iter().enumerate() {
            i |= ((e >> k) & 1) << m;
        }
        reordered[i] = c;
    }
    let mut v = 0u64;
    for w in reordered.windows(2) {
        v += w[0].saturating_sub(w[1]);
        if v > abort_above {
            return v;
        }
    }
    v
}

fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let n = used.len();
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for m in 0..n {
            if !used[m] {
                used[m] = true;
                prefix.push(m);
                go(prefix, used, out);
                prefix.pop();
                used[m] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn exhaustive_search(counts: &[u64], nbits: usize) -> Vec<usize> {
    let mut best: Option<(u64, Vec<usize>)> = None;
    for perm in lexicographic_permutations(nbits) {
        let bound = best.as_ref().map_or(u64::MAX, |(v, _)| *v);
        let v = monotonicity_violation(counts, &perm, bound);
        match &best {
            // Strict improvement only: the first permutation in
            // lexicographic order wins ties, deterministically.
            Some((bv, _)) if v >= *bv => {}
            _ => best = Some((v, perm)),
        }
    }
    best.expect("at least one permutation exists").1
}

/// MSB-first assignment: each internal bit takes the external bit that best
/// predicts the corresponding bit of the rows' count ranks.
fn greedy_search(counts: &[u64], nbits: usize) -> Vec<usize> {
    let rank = ranks(counts);
    let n = counts.len();
    let mut map = vec![usize::MAX; nbits];
    let mut taken = vec![false; nbits];
    for j in (0..nbits).rev() {
        let mut best_k = usize::MAX;
        let mut best_agree = 0usize;
        for k in 0..nbits {
            if taken[k] {
                continue;
            }
            let agree = (0..n)
                .filter(|&e| (e >> k) & 1 == (rank[e] >> j) & 1)
                .count();
            // A bit that anti-correlates still identifies the position.
            let agree = agree.max(n - agree);
            if best_k == usize::MAX || agree > best_agree {
                best_k = k;
                best_agree = agree;
            }
        }
        taken[best_k] = true;
        map[best_k] = j;
    }
    map
}

/// Rows whose counts sit far outside their rank neighborhood, as external
/// row indices. These look like rows moved by repair remapping, not by the
/// design profile.
fn outlier_rows(counts: &[u64], order: &[usize]) -> Vec<usize> {
    let n = order.len();
    let mut out = Vec::new();
    for (r, &e) in order.iter().enumerate() {
        let lo = r.saturating_sub(OUTLIER_WINDOW);
        let hi = (r + OUTLIER_WINDOW + 1).min(n);
        let neighbors: Vec<f64> = (lo..hi)
            .filter(|&q| q != r)
            .map(|q| counts[order[q]] as f64)
            .collect();
        let mean = neighbors.iter().sum::<f64>() / neighbors.len() as f64;
        let var = neighbors.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
            / neighbors.len() as f64;
        let sd = var.sqrt();
        if sd > 0.0 && (counts[e] as f64 - mean).abs() > OUTLIER_SIGMA * sd {
            out.push(e);
        }
    }
    out
}

/// Recovers the external-to-internal row-bit permutation from error counts
/// indexed by external row.
///
/// `counts.len()` must equal `2^nbits`: one mat-aligned window, or counts
/// folded modulo the window size.
pub fn estimate_row_mapping(counts: &[u64], nbits: usize) -> Result<MappingEstimate, ModelError> {
    if nbits == 0 || counts.len() != 1usize << nbits {
        return Err(ModelError::Shape {
            why: format!("expected 2^{nbits} per-row counts, got {}", counts.len()),
        });
    }
    let map = if nbits <= EXHAUSTIVE_BITS {
        exhaustive_search(counts, nbits)
    } else {
        greedy_search(counts, nbits)
    };
    let permutation = BitPermutation::new(map).expect("searches produce bijections");

    let order = rank_order(counts);
    let rank = ranks(counts);
    let excluded = outlier_rows(counts, &order);
    let inverse = permutation.inverse();
    let n = counts.len();
    let mut confidence = vec![0.0f64; nbits];
    let used = n - excluded.len();
    for j in 0..nbits {
        let k = inverse.as_slice()[j];
        let matches = (0..n)
            .filter(|e| !excluded.contains(e))
            .filter(|&e| (e >> k) & 1 == (rank[e] >> j) & 1)
            .count();
        confidence[j] = if used == 0 { 0.0 } else { matches as f64 / used as f64 };
    }
    Ok(MappingEstimate {
        permutation,
        confidence,
        rows_used: used,
    })
}

/// Per-bit mean and standard deviation of confidence across estimates.
pub fn confidence_profile(
    estimates: &[MappingEstimate],
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let Some(first) = estimates.first() else {
        return Err(ModelError::Shape {
            why: "confidence profile needs at least one estimate".into(),
        });
    };
    let nbits = first.confidence.len();
    if estimates.iter().any(|e| e.confidence.len() != nbits) {
        return Err(ModelError::Shape {
            why: "estimates mix different bit widths".into(),
        });
    }
    let m = estimates.len() as f64;
    let mut mean = vec![0.0f64; nbits];
    for est in estimates {
        for (j, c) in est.confidence.iter().enumerate() {
            mean[j] += c / m;
        }
    }
    let mut std = vec![0.0f64; nbits];
    for est in estimates {
        for (j, c) in est.confidence.iter().enumerate() {
            std[j] += (c - mean[j]).powi(2) / m;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
    }
    Ok((mean, std))
}

/// Sum of counts in the top tenth of rows over the sum in the bottom tenth,
/// the bottom clamped to at least 1 so very skewed profiles report a large
/// finite ratio.
pub fn vulnerability_ratio(counts: &[u64]) -> Result<f64, ModelError> {
    if counts.len() < 10 {
        return Err(ModelError::Shape {
            why: format!("vulnerability ratio needs at least 10 rows, got {}", counts.len()),
        });
    }
    let mut sorted: Vec<u64> = counts.to_vec();
    sorted.sort_unstable();
    let group = (counts.len() / 10).max(1);
    let top: u64 = sorted[counts.len() - group..].iter().sum();
    let bottom: u64 = sorted[..group].iter().sum();
    Ok(top as f64 / bottom.max(1) as f64)
}

/// Synthetic per-row counts for a device whose internal profile is a clean
/// ramp: external row `e` gets count `perm(e)` plus Gaussian noise, clamped
/// at zero. Deterministic per seed.
pub fn synthetic_counts(perm: &BitPermutation, noise_sigma: f64, seed: u64) -> Vec<u64> {
    let n = 1usize << perm.bits();
    (0..n as u64)
        .map(|e| {
            let i = perm.apply(e) as f64;
            let noisy = i + noise_sigma * standard_normal(e.wrapping_add(0x5eed_c0de), seed);
            noisy.round().max(0.0) as u64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_permutation;

    #[test]
    fn identity_counts_recover_identity() {
        let est = estimate_row_mapping(&[0, 1, 2, 3, 4, 5, 6, 7], 3).unwrap();
        assert_eq!(est.permutation, BitPermutation::identity(3));
        assert!(est.confidence.iter().all(|&c| c == 1.0));
        assert_eq!(est.rows_used, 8);
    }

    #[test]
    fn three_bit_swap_fixture_recovers_the_mid_for_msb_trade() {
        // Counts whose internal order is a clean ramp once external bit 1
        // is read as the internal top bit and bit 2 as the middle bit.
        let counts = [0, 10, 40, 50, 20, 30, 60, 70];
        let est = estimate_row_mapping(&counts, 3).unwrap();
        assert_eq!(est.permutation.as_slice(), &[0, 2, 1]);
        assert!(est.confidence.iter().all(|&c| c == 1.0), "{:?}", est.confidence);
    }

    #[test]
    fn seeded_permutations_recover_exactly_without_noise() {
        for nbits in [2usize, 4, 6, 9] {
            for seed in 0..4u64 {
                let map = keyed_permutation(nbits, 0x9e37, seed);
                let perm = BitPermutation::new(map).unwrap();
                let counts = synthetic_counts(&perm, 0.0, 0);
                let est = estimate_row_mapping(&counts, nbits).unwrap();
                assert_eq!(est.permutation, perm, "nbits {nbits} seed {seed}");
                assert!(est.confidence.iter().all(|&c| c == 1.0));
            }
        }
    }

    #[test]
    fn greedy_matches_exhaustive_on_noise_free_inputs() {
        for nbits in [3usize, 5, 7] {
            for seed in 10..14u64 {
                let perm =
                    BitPermutation::new(keyed_permutation(nbits, 0x51ee, seed)).unwrap();
                let counts = synthetic_counts(&perm, 0.0, 0);
                let greedy = greedy_search(&counts, nbits);
                let exhaustive = exhaustive_search(&counts, nbits);
                assert_eq!(greedy, exhaustive, "nbits {nbits} seed {seed}");
            }
        }
    }

    #[test]
    fn relabeling_external_bits_composes_into_the_estimate() {
        let nbits = 5usize;
        let truth = BitPermutation::new(keyed_permutation(nbits, 0xabcd, 3)).unwrap();
        let counts = synthetic_counts(&truth, 0.0, 0);
        let q = BitPermutation::new(keyed_permutation(nbits, 0x0a17, 7)).unwrap();
        // Relabel addresses: new external address is q(old).
        let mut relabeled = vec![0u64; counts.len()];
        for (e, &c) in counts.iter().enumerate() {
            relabeled[q.apply(e as u64) as usize] = c;
        }
        let base = estimate_row_mapping(&counts, nbits).unwrap();
        let moved = estimate_row_mapping(&relabeled, nbits).unwrap();
        assert_eq!(moved.permutation, base.permutation.compose(&q.inverse()));
    }

    #[test]
    fn confidence_declines_toward_low_bits_under_noise() {
        let nbits = 6usize;
        let mut estimates = Vec::new();
        for seed in 0..50u64 {
            let perm = BitPermutation::new(keyed_permutation(nbits, 0x1dea, 1)).unwrap();
            let counts = synthetic_counts(&perm, 4.0, seed);
            estimates.push(estimate_row_mapping(&counts, nbits).unwrap());
        }
        let (mean, _) = confidence_profile(&estimates).unwrap();
        let msb = mean[nbits - 1];
        let lsb = mean[0];
        assert!(
            msb > lsb,
            "MSB confidence {msb} should exceed LSB confidence {lsb} under noise"
        );
    }

    #[test]
    fn single_estimate_profile_has_zero_std() {
        let est = estimate_row_mapping(&[0, 1, 2, 3], 2).unwrap();
        let (mean, std) = confidence_profile(&[est]).unwrap();
        assert_eq!(mean, vec![1.0, 1.0]);
        assert_eq!(std, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_errors_cover_bad_lengths() {
        assert!(estimate_row_mapping(&[1, 2, 3], 2).is_err());
        assert!(estimate_row_mapping(&[], 0).is_err());
        assert!(confidence_profile(&[]).is_err());
        let a = estimate_row_mapping(&[0, 1, 2, 3], 2).unwrap();
        let b = estimate_row_mapping(&[0, 1, 2, 3, 4, 5, 6, 7], 3).unwrap();
        assert!(confidence_profile(&[a, b]).is_err());
    }

    #[test]
    fn outlier_rows_are_dropped_from_confidence() {
        // A clean 5-bit ramp with one wildly misplaced row.
        let nbits = 5usize;
        let mut counts: Vec<u64> = (0..32u64).collect();
        counts[3] = 10_000;
        let est = estimate_row_mapping(&counts, nbits).unwrap();
        assert_eq!(est.rows_used, 31, "the spiked row is excluded");
    }

    #[test]
    fn vulnerability_ratio_matches_the_pinned_examples() {
        let ramp: Vec<u64> = (0..10).collect();
        assert_eq!(vulnerability_ratio(&ramp).unwrap(), 9.0);
        let uniform_counts = vec![5u64; 20];
        assert_eq!(vulnerability_ratio(&uniform_counts).unwrap(), 1.0);
        let zeros = vec![0u64; 10];
        assert_eq!(vulnerability_ratio(&zeros).unwrap(), 0.0);
        assert!(vulnerability_ratio(&[1, 2, 3]).is_err());
    }

    #[test]
    fn synthetic_counts_are_deterministic_and_noise_scales() {
        let perm = BitPermutation::identity(4);
        assert_eq!(synthetic_counts(&perm, 1.5, 9), synthetic_counts(&perm, 1.5, 9));
        assert_ne!(synthetic_counts(&perm, 25.0, 9), synthetic_counts(&perm, 0.0, 9));
    }
}
