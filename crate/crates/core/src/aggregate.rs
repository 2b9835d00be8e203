//! Aggregations over error logs.
//!
//! Slice functions compute exact answers on materialized logs regardless of
//! record order; the streaming sinks give the same answers in constant or
//! bounded memory but rely on records arriving in scan emission order.

use std::collections::BTreeSet;

use crate::geometry::{AddressMap, DeviceGeometry, MAT_ROWS};
use crate::harness::{DataPattern, ErrorRecord, RecordSink};

/// Which address space indexes a per-residue profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidueKey {
    /// Row number as issued on the bus.
    External,
    /// Row number after undoing the address scramble.
    Internal,
}

/// Distinct requests (pattern, iteration, row, column) with at least one
/// error record.
pub fn erroneous_requests(records: &[ErrorRecord]) -> u64 {
    let set: BTreeSet<_> = records
        .iter()
        .map(|r| (r.pattern, r.iteration, r.ext_row, r.ext_col))
        .collect();
    set.len() as u64
}

/// Error records per external row, indexed 0..rows_per_bank.
pub fn counts_by_row(records: &[ErrorRecord], geometry: &DeviceGeometry) -> Vec<u64> {
    let mut counts = vec![0u64; geometry.rows_per_bank() as usize];
    for r in records {
        counts[r.ext_row as usize] += 1;
    }
    counts
}

/// Error records per row residue within a subarray-sized window.
pub fn counts_by_row_residue(
    records: &[ErrorRecord],
    map: &AddressMap,
    geometry: &DeviceGeometry,
    key: ResidueKey,
) -> Vec<u64> {
    let mut counts = vec![0u64; MAT_ROWS];
    for r in records {
        let row = match key {
            ResidueKey::External => r.ext_row,
            ResidueKey::Internal => map.translate_row(r.ext_row, geometry).expect("row in range"),
        };
        counts[(row % MAT_ROWS as u64) as usize] += 1;
    }
    counts
}

/// Per-row counts rearranged into internal order, one trace per
/// subarray-sized window of the external address space.
///
/// Trace `w` redistributes the counts of external rows `[w*512, w*512+512)`
/// to the index `translate(row) % 512`, which puts every window on a common
/// position axis so design structure lines up across subarrays.
pub fn sorted_overlay(
    per_row: &[u64],
    map: &AddressMap,
    geometry: &DeviceGeometry,
) -> Vec<Vec<u64>> {
    assert_eq!(per_row.len() as u64, geometry.rows_per_bank());
    let windows = per_row.len() / MAT_ROWS;
    let mut traces = vec![vec![0u64; MAT_ROWS]; windows];
    for (ext_row, count) in per_row.iter().enumerate() {
        let internal = map
            .translate_row(ext_row as u64, geometry)
            .expect("row in range");
        traces[ext_row / MAT_ROWS][(internal % MAT_ROWS as u64) as usize] += count;
    }
    traces
}

/// Erroneous requests per external column.
pub fn requests_by_column(records: &[ErrorRecord], geometry: &DeviceGeometry) -> Vec<u64> {
    let mut seen: BTreeSet<(DataPattern, u32, u64, u32)> = BTreeSet::new();
    let mut counts = vec![0u64; geometry.external_columns() as usize];
    for r in records {
        if seen.insert((r.pattern, r.iteration, r.ext_row, r.ext_col)) {
            counts[r.ext_col as usize] += 1;
        }
    }
    counts
}

/// Distinct failed bits per burst position (beat * 8 + bit), counting each
/// (request, position) once however many parameters failed it.
pub fn failed_bits_by_burst_position(records: &[ErrorRecord]) -> Vec<u64> {
    let mut seen: BTreeSet<(DataPattern, u32, u64, u32, u8, u8)> = BTreeSet::new();
    let mut counts = vec![0u64; 64];
    for r in records {
        if seen.insert((r.pattern, r.iteration, r.ext_row, r.ext_col, r.beat, r.bit)) {
            counts[r.burst_idx()] += 1;
        }
    }
    counts
}

/// Streaming form of [`counts_by_row_residue`].
pub struct ResidueCounter<'a> {
    map: &'a AddressMap,
    geometry: &'a DeviceGeometry,
    key: ResidueKey,
    pub counts: Vec<u64>,
}

impl<'a> ResidueCounter<'a> {
    pub fn new(map: &'a AddressMap, geometry: &'a DeviceGeometry, key: ResidueKey) -> Self {
        ResidueCounter {
            map,
            geometry,
            key,
            counts: vec![0; MAT_ROWS],
        }
    }
}

impl RecordSink for ResidueCounter<'_> {
    fn record(&mut self, rec: ErrorRecord) {
        let row = match self.key {
            ResidueKey::External => rec.ext_row,
            ResidueKey::Internal => self
                .map
                .translate_row(rec.ext_row, self.geometry)
                .expect("row in range"),
        };
        self.counts[(row % MAT_ROWS as u64) as usize] += 1;
    }
}

/// Streaming form of [`requests_by_column`]; relies on scan emission order.
pub struct ColumnRequestCounter {
    last: Option<(DataPattern, u32, u64, u32)>,
    pub counts: Vec<u64>,
}

impl ColumnRequestCounter {
    pub fn new(geometry: &DeviceGeometry) -> Self {
        ColumnRequestCounter {
            last: None,
            counts: vec![0; geometry.external_columns() as usize],
        }
    }
}

impl RecordSink for ColumnRequestCounter {
    fn record(&mut self, rec: ErrorRecord) {
        let key = (rec.pattern, rec.iteration, rec.ext_row, rec.ext_col);
        if self.last != Some(key) {
            self.last = Some(key);
            self.counts[rec.ext_col as usize] += 1;
        }
    }
}

/// Streaming form of [`failed_bits_by_burst_position`]; relies on scan
/// emission order.
#[derive(Debug, Default)]
pub struct BurstBitCounter {
    last: Option<(DataPattern, u32, u64, u32, u8, u8)>,
    pub counts: Vec<u64>,
}

impl BurstBitCounter {
    pub fn new() -> Self {
        BurstBitCounter {
            last: None,
            counts: vec![0; 64],
        }
    }
}

impl RecordSink for BurstBitCounter {
    fn record(&mut self, rec: ErrorRecord) {
        let key = (
            rec.pattern,
            rec.iteration,
            rec.ext_row,
            rec.ext_col,
            rec.beat,
            rec.bit,
        );
        if self.last != Some(key) {
            self.last = Some(key);
            self.counts[rec.burst_idx()] += 1;
        }
    }
}
