//! SECDED(72,64) codec and per-chip burst shuffling.
//!
//! One rank transfer beat carries 64 data bits plus 8 check bits on a ninth
//! chip, forming an extended Hamming codeword: single-bit errors are
//! corrected, double-bit errors are detected but not correctable. Because
//! every chip wires its burst positions the same way, cells feeding one beat
//! sit at the same physical position in all chips and share their
//! design-induced weakness, so a slow position tends to produce several bad
//! bits in the same codeword. A shuffle layout gives each chip a different
//! burst-position wiring, spreading those bits over different codewords where
//! single-error correction can absorb them.

use std::collections::BTreeMap;

use crate::geometry::ColumnLayout;
use crate::harness::{Device, ErrorRecord, ScanOptions, TrpManifestation};
use crate::variation::{fails, EnvConditions, TimingParams};

/// Beats in one burst, and burst positions per chip in a shuffle layout.
pub const BURST_POSITIONS: usize = 8;

/// Data chips contributing to one codeword.
pub const DATA_CHIPS: usize = 8;

/// One 72-bit extended Hamming codeword in the low bits of a `u128`.
///
/// Bit 0 is the overall parity bit; bits 1..=71 are Hamming positions, with
/// check bits at the power-of-two positions and data bits elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword(pub u128);

/// Total bits in a codeword.
pub const CODEWORD_BITS: usize = 72;

const PARITY_POSITIONS: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

fn is_parity_position(pos: u32) -> bool {
    pos.is_power_of_two()
}

/// Outcome of decoding one codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// No error detected.
    Clean,
    /// Exactly one flipped bit at this codeword position was repaired.
    /// Position 0 is the overall parity bit itself.
    Corrected(u8),
    /// Two (or an even number of) flips: reported, data not trustworthy.
    DetectedUncorrectable,
}

impl Codeword {
    pub fn flip(self, position: u8) -> Codeword {
        debug_assert!((position as usize) < CODEWORD_BITS);
        Codeword(self.0 ^ (1u128 << position))
    }

    pub fn bit(self, position: u8) -> bool {
        (self.0 >> position) & 1 == 1
    }
}

/// Encodes 64 data bits into a 72-bit SECDED codeword.
pub fn encode(data: u64) -> Codeword {
    let mut word = 0u128;
    let mut k = 0;
    for pos in 1..CODEWORD_BITS as u32 {
        if !is_parity_position(pos) {
            if (data >> k) & 1 == 1 {
                word |= 1u128 << pos;
            }
            k += 1;
        }
    }
    debug_assert_eq!(k, 64);
    for p in PARITY_POSITIONS {
        let mut acc = 0u32;
        for pos in 1..CODEWORD_BITS as u32 {
            if pos & p != 0 {
                acc ^= ((word >> pos) & 1) as u32;
            }
        }
        word |= (acc as u128) << p;
    }
    // Overall parity makes the whole 72-bit word even.
    let overall = (word.count_ones() & 1) as u128;
    Codeword(word | overall)
}

/// Decodes a codeword, repairing a single flip when possible.
pub fn decode(cw: Codeword) -> (u64, DecodeStatus) {
    let mut syndrome = 0u32;
    for pos in 1..CODEWORD_BITS as u32 {
        if (cw.0 >> pos) & 1 == 1 {
            syndrome ^= pos;
        }
    }
    let overall_odd = cw.0.count_ones() & 1 == 1;
    match (syndrome, overall_odd) {
        (0, false) => (extract(cw.0), DecodeStatus::Clean),
        (s, true) if (s as usize) < CODEWORD_BITS => {
            let fixed = cw.0 ^ (1u128 << s);
            (extract(fixed), DecodeStatus::Corrected(s as u8))
        }
        // Even flip count (syndrome nonzero), or a syndrome pointing outside
        // the word (only reachable with 3+ flips): not correctable.
        _ => (extract(cw.0), DecodeStatus::DetectedUncorrectable),
    }
}

fn extract(word: u128) -> u64 {
    let mut data = 0u64;
    let mut k = 0;
    for pos in 1..CODEWORD_BITS as u32 {
        if !is_parity_position(pos) {
            data |= (((word >> pos) & 1) as u64) << k;
            k += 1;
        }
    }
    data
}

/// Per-chip rewiring of burst positions.
///
/// `maps[chip][position]` is the burst position on the bus that receives the
/// bit chip `chip` reads at internal position `position`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleLayout {
    maps: [[u8; BURST_POSITIONS]; DATA_CHIPS],
}

fn reverse3(b: u8) -> u8 {
    ((b & 1) << 2) | (b & 2) | ((b >> 2) & 1)
}

impl ShuffleLayout {
    /// Every chip wired identically; remapping is a no-op.
    pub fn identity() -> Self {
        let mut maps = [[0u8; BURST_POSITIONS]; DATA_CHIPS];
        for map in &mut maps {
            for (b, slot) in map.iter_mut().enumerate() {
                *slot = b as u8;
            }
        }
        ShuffleLayout { maps }
    }

    /// Default shuffling: chip k bit-reverses the position and rotates by k.
    /// Distinct per-chip wirings ensure bits that share one physical burst
    /// position land in eight different codewords.
    pub fn diva() -> Self {
        let mut maps = [[0u8; BURST_POSITIONS]; DATA_CHIPS];
        for (k, map) in maps.iter_mut().enumerate() {
            for (b, slot) in map.iter_mut().enumerate() {
                *slot = (reverse3(b as u8) + k as u8) % BURST_POSITIONS as u8;
            }
        }
        ShuffleLayout { maps }
    }

    /// Layout from explicit per-chip maps; each must be a bijection.
    pub fn from_maps(maps: [[u8; BURST_POSITIONS]; DATA_CHIPS]) -> Result<Self, crate::ModelError> {
        for (k, map) in maps.iter().enumerate() {
            let mut seen = [false; BURST_POSITIONS];
            for &p in map {
                if (p as usize) >= BURST_POSITIONS || seen[p as usize] {
                    return Err(crate::ModelError::invalid(
                        "shuffle layout",
                        format!("chip {k} map {map:?} is not a permutation"),
                    ));
                }
                seen[p as usize] = true;
            }
        }
        Ok(ShuffleLayout { maps })
    }

    pub fn position(&self, chip: u8, burst_position: u8) -> u8 {
        self.maps[chip as usize][burst_position as usize]
    }

    pub fn inverse(&self) -> Self {
        let mut maps = [[0u8; BURST_POSITIONS]; DATA_CHIPS];
        for (k, map) in self.maps.iter().enumerate() {
            for (b, &p) in map.iter().enumerate() {
                maps[k][p as usize] = b as u8;
            }
        }
        ShuffleLayout { maps }
    }
}

/// Rewrites each record's burst position through its chip's wiring.
pub fn apply_shuffle(layout: &ShuffleLayout, records: &[ErrorRecord]) -> Vec<ErrorRecord> {
    records
        .iter()
        .map(|r| ErrorRecord {
            beat: layout.position(r.bit, r.beat),
            ..*r
        })
        .collect()
}

type CodewordKey = (crate::harness::DataPattern, u32, u64, u32, u8);

fn group_codewords(layout: &ShuffleLayout, records: &[ErrorRecord]) -> BTreeMap<CodewordKey, u64> {
    let mut groups: BTreeMap<CodewordKey, u64> = BTreeMap::new();
    for r in records {
        let beat = layout.position(r.bit, r.beat);
        let key = (r.pattern, r.iteration, r.ext_row, r.ext_col, beat);
        // One codeword carries one tracked bit per chip; a chip's bit may be
        // recorded once per failed parameter, so dedupe through a bit mask.
        *groups.entry(key).or_insert(0) |= 1u64 << r.bit;
    }
    groups
}

/// Fraction of erroneous codewords with at most one bad bit, after routing
/// records through `layout`. Check bits are assumed error-free. `None` when
/// the log is empty.
pub fn correctable_fraction(records: &[ErrorRecord], layout: &ShuffleLayout) -> Option<f64> {
    let groups = group_codewords(layout, records);
    if groups.is_empty() {
        return None;
    }
    let correctable = groups.values().filter(|m| m.count_ones() <= 1).count();
    Some(correctable as f64 / groups.len() as f64)
}

/// Like [`correctable_fraction`], but the ninth chip holding the check bits
/// is subjected to the same failure model as the data chips.
///
/// Only codewords already present in the log are examined; a check-bit
/// failure adds one bad bit to its codeword. Polarity gating is skipped for
/// check bits because their stored values are parity sums, not pattern data.
pub fn correctable_fraction_with_ecc_chip(
    records: &[ErrorRecord],
    layout: &ShuffleLayout,
    device: &Device,
    applied: &TimingParams,
    env: &EnvConditions,
) -> Option<f64> {
    let groups = group_codewords(layout, records);
    if groups.is_empty() {
        return None;
    }
    let mut correctable = 0usize;
    for (&(_, _, ext_row, ext_col, beat), mask) in &groups {
        let mut bad_bits = mask.count_ones();
        let mut coord = device
            .locate(ext_row, ext_col as u64, beat as usize, 0)
            .expect("logged records stay within the device geometry");
        coord.chip = DATA_CHIPS;
        if !fails(&coord, applied, env, &device.variation, device.geometry.mats_per_subarray_row)
            .is_empty()
        {
            bad_bits += 1;
        }
        if bad_bits <= 1 {
            correctable += 1;
        }
    }
    Some(correctable as f64 / groups.len() as f64)
}

/// Scan options for generating logs meant for codeword analysis: every
/// failure manifests regardless of stored polarity, so the fraction reflects
/// cell weakness rather than pattern luck.
pub fn analysis_scan_options() -> ScanOptions {
    ScanOptions {
        trp_manifestation: TrpManifestation::Always,
        ..ScanOptions::default()
    }
}

/// True when the device's column layout gives each burst position a stable
/// mat assignment, the wiring that makes shuffling interesting.
pub fn layout_supports_stable_positions(device: &Device) -> bool {
    device.map.column_layout == ColumnLayout::MatPerBeat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DataPattern;
    use crate::rng::mix64;

    #[test]
    fn zero_data_encodes_to_zero_and_decodes_clean() {
        let cw = encode(0);
        assert_eq!(cw.0, 0);
        assert_eq!(decode(cw), (0, DecodeStatus::Clean));
    }

    #[test]
    fn every_single_flip_is_corrected() {
        for word in [0u64, u64::MAX, 0x0123_4567_89ab_cdef] {
            let cw = encode(word);
            for pos in 0..CODEWORD_BITS as u8 {
                let (data, status) = decode(cw.flip(pos));
                assert_eq!(status, DecodeStatus::Corrected(pos));
                assert_eq!(data, word, "flip at {pos} must restore the data");
            }
        }
    }

    #[test]
    fn parity_bit_flip_reports_position_zero() {
        let cw = encode(42).flip(0);
        let (data, status) = decode(cw);
        assert_eq!(status, DecodeStatus::Corrected(0));
        assert_eq!(data, 42);
    }

    #[test]
    fn double_flips_are_detected_not_miscorrected() {
        let cw = encode(0);
        let (_, status) = decode(cw.flip(3).flip(40));
        assert_eq!(status, DecodeStatus::DetectedUncorrectable);
        for a in 0..CODEWORD_BITS as u8 {
            for b in (a + 1)..CODEWORD_BITS as u8 {
                let (_, status) = decode(cw.flip(a).flip(b));
                assert_eq!(status, DecodeStatus::DetectedUncorrectable, "flips {a},{b}");
            }
        }
    }

    #[test]
    fn random_words_round_trip() {
        for i in 0..200u64 {
            let word = mix64(i) ^ (mix64(i + 1000) << 1);
            assert_eq!(decode(encode(word)), (word, DecodeStatus::Clean));
        }
    }

    fn record(ext_col: u32, beat: u8, bit: u8) -> ErrorRecord {
        ErrorRecord {
            pattern: DataPattern::new([false, true, false, true], false, true),
            iteration: 0,
            ext_row: 17,
            ext_col,
            beat,
            bit,
            param: crate::variation::TimingParam::Trp,
        }
    }

    #[test]
    fn identity_layout_changes_nothing() {
        let recs = vec![record(0, 3, 5), record(1, 0, 0)];
        assert_eq!(apply_shuffle(&ShuffleLayout::identity(), &recs), recs);
    }

    #[test]
    fn rotation_layout_moves_positions_by_chip_index() {
        let mut maps = [[0u8; 8]; 8];
        for (k, map) in maps.iter_mut().enumerate() {
            for (b, slot) in map.iter_mut().enumerate() {
                *slot = ((b + k) % 8) as u8;
            }
        }
        let rot = ShuffleLayout::from_maps(maps).unwrap();
        let moved = apply_shuffle(&rot, &[record(0, 0, 2)]);
        assert_eq!(moved[0].beat, 2, "chip 2 rotates position 0 to 2");
    }

    #[test]
    fn inverse_composition_is_identity() {
        let layout = ShuffleLayout::diva();
        let inv = layout.inverse();
        let recs = vec![record(0, 1, 4), record(9, 7, 7), record(2, 6, 0)];
        let there = apply_shuffle(&layout, &recs);
        assert_eq!(apply_shuffle(&inv, &there), recs);
    }

    #[test]
    fn diva_layout_spreads_a_shared_position_over_all_codewords() {
        // All 8 chips fail the same physical burst position of one transfer.
        let recs: Vec<ErrorRecord> = (0..8).map(|chip| record(5, 4, chip)).collect();
        assert_eq!(correctable_fraction(&recs, &ShuffleLayout::identity()), Some(0.0));
        assert_eq!(correctable_fraction(&recs, &ShuffleLayout::diva()), Some(1.0));
    }

    #[test]
    fn duplicate_parameter_records_count_one_bad_bit() {
        let mut a = record(5, 4, 1);
        a.param = crate::variation::TimingParam::Trcd;
        let b = record(5, 4, 1);
        let frac = correctable_fraction(&[a, b], &ShuffleLayout::identity());
        assert_eq!(frac, Some(1.0), "one chip failing twice is still one bad bit");
    }

    #[test]
    fn empty_log_has_no_fraction() {
        assert_eq!(correctable_fraction(&[], &ShuffleLayout::identity()), None);
    }

    #[test]
    fn two_errors_split_by_a_separating_layout() {
        let recs = vec![record(5, 4, 0), record(5, 4, 1)];
        assert_eq!(correctable_fraction(&recs, &ShuffleLayout::identity()), Some(0.0));
        // Chip 1 moves its position 4 elsewhere; chip 0 keeps it.
        let mut maps = ShuffleLayout::identity().maps;
        maps[1].swap(4, 5);
        let separating = ShuffleLayout::from_maps(maps).unwrap();
        assert_eq!(correctable_fraction(&recs, &separating), Some(1.0));
    }

    #[test]
    fn shuffling_preserves_record_and_bit_counts() {
        let recs: Vec<ErrorRecord> =
            (0..8).flat_map(|c| (0..8).map(move |b| record(c as u32, b, c))).collect();
        let shuffled = apply_shuffle(&ShuffleLayout::diva(), &recs);
        assert_eq!(shuffled.len(), recs.len());
        let bits = |rs: &[ErrorRecord]| {
            let mut n: Vec<u8> = rs.iter().map(|r| r.bit).collect();
            n.sort_unstable();
            n
        };
        assert_eq!(bits(&shuffled), bits(&recs));
    }
}
