//! Failure-scan harness.
//!
//! A scan writes a data pattern into a region, accesses it with reduced
//! timing parameters, and records every tracked bit whose stored value would
//! read back wrong. The harness turns the cell-level requirement model into
//! those observable error records: a cell's parameter failure produces a
//! record only when the data pattern makes the failure visible (a charged
//! cell for charge-sensitive parameters, a row-to-row polarity change for
//! the precharge parameter).
//!
//! Scans are deterministic: records are emitted in lexicographic
//! `(pattern, iteration, ext_row, ext_col, beat, bit, param)` order and the
//! process-variation draws are pure functions of cell and seed, so thread
//! count never changes output. Most cells sit far from every failure
//! threshold, and the bounded support of the noise term lets the scan prove
//! pass or fail without drawing; draws happen only inside the uncertain
//! band.

use rayon::prelude::*;

use crate::error::ModelError;
use crate::geometry::{locate_cell, locate_in_row, AddressMap, CellCoordinate, DeviceGeometry};
use crate::variation::{
    design_required, design_required_max, env_offset, process_noise, EnvConditions, TimingParam,
    TimingParams, VariationConfig,
};

/// A concrete device instance: geometry, address mapping, and the variation
/// model with its seed.
#[derive(Debug, Clone)]
pub struct Device {
    pub geometry: DeviceGeometry,
    pub map: AddressMap,
    pub variation: VariationConfig,
}

impl Device {
    pub fn new(
        geometry: DeviceGeometry,
        map: AddressMap,
        variation: VariationConfig,
    ) -> Result<Self, ModelError> {
        geometry.validate()?;
        map.validate(&geometry)?;
        variation.validate()?;
        Ok(Device {
            geometry,
            map,
            variation,
        })
    }

    /// Full-size device with the scrambled default address map, seeded.
    pub fn standard(seed: u64) -> Self {
        let geometry = DeviceGeometry::default();
        let map = AddressMap::scrambled_for(&geometry, seed);
        let variation = VariationConfig {
            rng_seed: seed,
            ..Default::default()
        };
        Device {
            geometry,
            map,
            variation,
        }
    }

    pub fn mats_per_row(&self) -> usize {
        self.geometry.mats_per_subarray_row
    }

    /// Physical position of one tracked bit of an external request.
    pub fn locate(
        &self,
        ext_row: u64,
        ext_col: u64,
        beat: usize,
        bit_in_beat: usize,
    ) -> Result<CellCoordinate, ModelError> {
        locate_cell(ext_row, ext_col, beat, bit_in_beat, &self.geometry, &self.map)
    }
}

/// Data background written before a scan: a four-bit unit repeated across
/// the 64 tracked burst positions, optionally inverted, optionally flipped
/// on even-numbered external rows (row stripe).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataPattern {
    unit: [bool; 4],
    pub inverted: bool,
    pub row_stripe: bool,
}

impl DataPattern {
    pub fn new(unit: [bool; 4], inverted: bool, row_stripe: bool) -> Self {
        DataPattern {
            unit,
            inverted,
            row_stripe,
        }
    }

    /// The value a cell at burst position `burst_idx` in `ext_row` holds.
    pub fn stored_bit(&self, ext_row: u64, burst_idx: usize) -> bool {
        self.unit[burst_idx % 4] ^ self.inverted ^ (self.row_stripe && ext_row % 2 == 0)
    }

    /// Canonical name, e.g. `0101`, `0011-inv`, `1001-inv-stripe`.
    pub fn name(&self) -> String {
        let mut s: String = self
            .unit
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        if self.inverted {
            s.push_str("-inv");
        }
        if self.row_stripe {
            s.push_str("-stripe");
        }
        s
    }

    pub fn parse(s: &str) -> Result<DataPattern, ModelError> {
        let mut parts = s.split('-');
        let digits = parts.next().unwrap_or("");
        if digits.len() != 4 || !digits.chars().all(|c| c == '0' || c == '1') {
            return Err(ModelError::invalid(
                "data pattern",
                format!("expected four binary digits, got {s:?}"),
            ));
        }
        let mut unit = [false; 4];
        for (i, c) in digits.chars().enumerate() {
            unit[i] = c == '1';
        }
        let mut inverted = false;
        let mut row_stripe = false;
        for part in parts {
            match part {
                "inv" if !inverted => inverted = true,
                "stripe" if !row_stripe => row_stripe = true,
                _ => {
                    return Err(ModelError::invalid(
                        "data pattern",
                        format!("unrecognized modifier in {s:?}"),
                    ))
                }
            }
        }
        Ok(DataPattern {
            unit,
            inverted,
            row_stripe,
        })
    }

    /// The eight-run production set: four base units, each plus its inverse,
    /// all with the row stripe so precharge failures are visible. Listed in
    /// ascending pattern order, which keeps whole logs sorted.
    pub fn standard_set() -> Vec<DataPattern> {
        let units = [
            [false, false, false, false],
            [false, false, true, true],
            [false, true, false, true],
            [true, false, false, true],
        ];
        let mut out = Vec::with_capacity(8);
        for unit in units {
            for inverted in [false, true] {
                out.push(DataPattern::new(unit, inverted, true));
            }
        }
        out
    }

    /// Two-run set for large sweeps: the alternating unit plus its inverse.
    pub fn reduced_set() -> Vec<DataPattern> {
        vec![
            DataPattern::new([false, true, false, true], false, true),
            DataPattern::new([false, true, false, true], true, true),
        ]
    }
}

/// How precharge failures become visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrpManifestation {
    /// A short precharge corrupts the next activation only when the incoming
    /// row's data differs from what the bitlines held, which in an ascending
    /// sweep means the pattern stripes rows and a previous row exists.
    #[default]
    StripeTransition,
    /// Region tests toggle every cell between accesses, so a precharge
    /// failure is always visible.
    Always,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Repeated passes per pattern; the model is deterministic, so extra
    /// iterations reproduce identical records with a new iteration index.
    pub iterations: u32,
    pub trp_manifestation: TrpManifestation,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            iterations: 1,
            trp_manifestation: TrpManifestation::StripeTransition,
        }
    }
}

/// Which addresses a scan touches.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
}

impl ScanPlan {
    /// All rows, 16 evenly spaced external columns.
    pub fn row_sweep(geometry: &DeviceGeometry) -> ScanPlan {
        ScanPlan {
            rows: (0..geometry.rows_per_bank()).collect(),
            cols: Self::spaced(geometry.external_columns(), 16),
        }
    }

    /// Every `stride`-th row, 16 evenly spaced external columns.
    pub fn strided_row_sweep(geometry: &DeviceGeometry, stride: u64) -> ScanPlan {
        ScanPlan {
            rows: (0..geometry.rows_per_bank()).step_by(stride.max(1) as usize).collect(),
            cols: Self::spaced(geometry.external_columns(), 16),
        }
    }

    /// 16 evenly spaced rows, all external columns.
    pub fn column_sweep(geometry: &DeviceGeometry) -> ScanPlan {
        ScanPlan {
            rows: Self::spaced(geometry.rows_per_bank(), 16),
            cols: (0..geometry.external_columns()).collect(),
        }
    }

    /// Every row and every external column.
    pub fn full(geometry: &DeviceGeometry) -> ScanPlan {
        ScanPlan {
            rows: (0..geometry.rows_per_bank()).collect(),
            cols: (0..geometry.external_columns()).collect(),
        }
    }

    /// Specific rows, all external columns.
    pub fn for_rows(rows: Vec<u64>, geometry: &DeviceGeometry) -> ScanPlan {
        ScanPlan {
            rows,
            cols: (0..geometry.external_columns()).collect(),
        }
    }

    fn spaced(limit: u64, n: u64) -> Vec<u64> {
        let step = (limit / n).max(1);
        (0..limit).step_by(step as usize).take(n as usize).collect()
    }

    pub fn validate(&self, geometry: &DeviceGeometry) -> Result<(), ModelError> {
        if let Some(&r) = self.rows.iter().find(|r| **r >= geometry.rows_per_bank()) {
            return Err(ModelError::OutOfRange {
                what: "plan row",
                got: r,
                limit: geometry.rows_per_bank(),
            });
        }
        if let Some(&c) = self.cols.iter().find(|c| **c >= geometry.external_columns()) {
            return Err(ModelError::OutOfRange {
                what: "plan column",
                got: c,
                limit: geometry.external_columns(),
            });
        }
        Ok(())
    }
}

/// One tracked bit that read back wrong, attributed to the parameter that
/// caused it. Field order matches record emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErrorRecord {
    pub pattern: DataPattern,
    pub iteration: u32,
    pub ext_row: u64,
    pub ext_col: u32,
    pub beat: u8,
    pub bit: u8,
    pub param: TimingParam,
}

impl ErrorRecord {
    /// Position of the bit within the 64-bit tracked burst.
    pub fn burst_idx(&self) -> usize {
        self.beat as usize * 8 + self.bit as usize
    }
}

/// Run-level context shared by every record of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub run_id: String,
    pub applied: TimingParams,
    pub env: EnvConditions,
}

/// A materialized scan result.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorLog {
    pub meta: RunMeta,
    pub records: Vec<ErrorRecord>,
}

/// Consumer of scan output. Aggregating sinks keep large scans in constant
/// memory; `Vec<ErrorRecord>` materializes everything.
pub trait RecordSink {
    fn record(&mut self, rec: ErrorRecord);
}

impl RecordSink for Vec<ErrorRecord> {
    fn record(&mut self, rec: ErrorRecord) {
        self.push(rec);
    }
}

/// Pass/fail knowledge about one (beat, param) before any draw.
#[derive(Clone, Copy, PartialEq)]
enum FailClass {
    CertainPass,
    CertainFail,
    /// Outcome depends on the cell's own noise draw.
    Uncertain,
}

/// Scan a region under one applied-timing setting and stream every
/// manifested error to `sink`.
///
/// Records arrive grouped by (pattern, iteration) in the supplied pattern
/// order and lexicographically sorted within each group, so passing
/// patterns in ascending order yields a fully sorted log.
pub fn scan(
    device: &Device,
    applied: &TimingParams,
    env: &EnvConditions,
    patterns: &[DataPattern],
    options: &ScanOptions,
    plan: &ScanPlan,
    sink: &mut dyn RecordSink,
) -> Result<(), ModelError> {
    env.validate(&device.variation)?;
    plan.validate(&device.geometry)?;
    let shift = env_offset(env, &device.variation);
    // A cell fails parameter p exactly when noise > threshold[p] - design.
    let thresholds = TimingParams {
        trcd_ns: applied.trcd_ns - shift,
        tras_ns: applied.tras_ns - shift,
        trp_ns: applied.trp_ns - shift,
        twr_ns: applied.twr_ns - shift,
    };
    // When even the slowest possible cell passes every parameter with the
    // noise support to spare, no record can exist and the walk is skipped.
    let bound = device.variation.noise_bound_ns();
    let mats = device.geometry.mats_per_subarray_row;
    let whole_scan_clean = TimingParam::ALL.into_iter().all(|param| {
        thresholds.get(param) - design_required_max(param, &device.variation, mats) >= bound
    });
    if whole_scan_clean {
        return Ok(());
    }

    for pattern in patterns {
        for iteration in 0..options.iterations {
            // Rows are independent; batches bound the memory spent on
            // per-row buffers while keeping emission order exact.
            for batch in plan.rows.chunks(256) {
                let row_outputs: Vec<Vec<ErrorRecord>> = batch
                    .par_iter()
                    .map(|&ext_row| {
                        let mut out = Vec::new();
                        scan_row(
                            device,
                            &thresholds,
                            *pattern,
                            iteration,
                            ext_row,
                            &plan.cols,
                            options,
                            &mut out,
                        );
                        out
                    })
                    .collect();
                for rows in row_outputs {
                    for rec in rows {
                        sink.record(rec);
                    }
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn scan_row(
    device: &Device,
    thresholds: &TimingParams,
    pattern: DataPattern,
    iteration: u32,
    ext_row: u64,
    cols: &[u64],
    options: &ScanOptions,
    out: &mut Vec<ErrorRecord>,
) {
    let geom = &device.geometry;
    let cfg = &device.variation;
    let mats = geom.mats_per_subarray_row;
    let bound = cfg.noise_bound_ns();
    let internal_row = device
        .map
        .translate_row(ext_row, geom)
        .expect("plan validated");
    let trp_visible = match options.trp_manifestation {
        TrpManifestation::Always => true,
        TrpManifestation::StripeTransition => pattern.row_stripe && ext_row > 0,
    };

    for &ext_col in cols {
        for beat in 0..geom.burst_length {
            let anchor = locate_in_row(internal_row, ext_col, beat, 0, geom, device.map.column_layout);
            let mut class = [FailClass::CertainPass; 4];
            let mut margin = [0.0f64; 4];
            let mut all_pass = true;
            for (i, param) in TimingParam::ALL.into_iter().enumerate() {
                let m = thresholds.get(param) - design_required(&anchor, param, cfg, mats);
                margin[i] = m;
                class[i] = if m >= bound {
                    FailClass::CertainPass
                } else if m < -bound {
                    FailClass::CertainFail
                } else {
                    FailClass::Uncertain
                };
                if class[i] != FailClass::CertainPass {
                    all_pass = false;
                }
            }
            if all_pass {
                continue;
            }
            for bit in 0..geom.chips_per_dimm {
                let burst_idx = beat * 8 + bit;
                let stored = pattern.stored_bit(ext_row, burst_idx);
                let cell = CellCoordinate {
                    chip: bit,
                    ..anchor
                };
                for (i, param) in TimingParam::ALL.into_iter().enumerate() {
                    let visible = if param == TimingParam::Trp {
                        trp_visible
                    } else {
                        stored
                    };
                    if !visible {
                        continue;
                    }
                    let failed = match class[i] {
                        FailClass::CertainPass => false,
                        FailClass::CertainFail => true,
                        FailClass::Uncertain => process_noise(&cell, param, cfg) > margin[i],
                    };
                    if failed {
                        out.push(ErrorRecord {
                            pattern,
                            iteration,
                            ext_row,
                            ext_col: ext_col as u32,
                            beat: beat as u8,
                            bit: bit as u8,
                            param,
                        });
                    }
                }
            }
        }
    }
}

/// Convenience wrapper that materializes a scan into an [`ErrorLog`].
pub fn collect_log(
    device: &Device,
    applied: &TimingParams,
    env: &EnvConditions,
    patterns: &[DataPattern],
    options: &ScanOptions,
    plan: &ScanPlan,
) -> Result<ErrorLog, ModelError> {
    let mut records = Vec::new();
    scan(device, applied, env, patterns, options, plan, &mut records)?;
    Ok(ErrorLog {
        meta: RunMeta {
            run_id: String::new(),
            applied: *applied,
            env: *env,
        },
        records,
    })
}

/// Distinct requests (pattern, iteration, row, column) with at least one
/// error, streamed; relies on scan emission order.
#[derive(Debug, Default)]
pub struct RequestCounter {
    last: Option<(DataPattern, u32, u64, u32)>,
    pub count: u64,
}

impl RecordSink for RequestCounter {
    fn record(&mut self, rec: ErrorRecord) {
        let key = (rec.pattern, rec.iteration, rec.ext_row, rec.ext_col);
        if self.last != Some(key) {
            self.last = Some(key);
            self.count += 1;
        }
    }
}

/// Error records per external row.
#[derive(Debug)]
pub struct RowCounter {
    pub counts: Vec<u64>,
}

impl RowCounter {
    pub fn new(geometry: &DeviceGeometry) -> Self {
        RowCounter {
            counts: vec![0; geometry.rows_per_bank() as usize],
        }
    }
}

impl RecordSink for RowCounter {
    fn record(&mut self, rec: ErrorRecord) {
        self.counts[rec.ext_row as usize] += 1;
    }
}

/// Erroneous-request count for one applied value of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value_ns: f64,
    pub erroneous_requests: u64,
}

/// Sweep one timing parameter over `values` with the others at `baseline`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    device: &Device,
    param: TimingParam,
    values: &[f64],
    baseline: &TimingParams,
    env: &EnvConditions,
    patterns: &[DataPattern],
    options: &ScanOptions,
    plan: &ScanPlan,
) -> Result<Vec<SweepPoint>, ModelError> {
    let mut out = Vec::with_capacity(values.len());
    for &value_ns in values {
        let applied = baseline.with(param, value_ns);
        let mut counter = RequestCounter::default();
        scan(device, &applied, env, patterns, options, plan, &mut counter)?;
        out.push(SweepPoint {
            value_ns,
            erroneous_requests: counter.count,
        });
    }
    Ok(out)
}

/// Erroneous-request counts for the same scan under several environments.
///
/// All environments share one pass over the cells: the environment only
/// shifts each failure threshold by a scalar, so the design terms and any
/// needed noise draws are computed once and compared against every
/// environment's threshold.
pub fn env_sensitivity(
    device: &Device,
    applied: &TimingParams,
    envs: &[EnvConditions],
    patterns: &[DataPattern],
    options: &ScanOptions,
    plan: &ScanPlan,
) -> Result<Vec<u64>, ModelError> {
    for env in envs {
        env.validate(&device.variation)?;
    }
    plan.validate(&device.geometry)?;
    let geom = &device.geometry;
    let cfg = &device.variation;
    let mats = geom.mats_per_subarray_row;
    let bound = cfg.noise_bound_ns();
    let shifts: Vec<f64> = envs.iter().map(|e| env_offset(e, cfg)).collect();

    // The harshest environment binds; if even it proves clean against the
    // slowest possible cell, every count is zero without walking the plan.
    let max_shift = shifts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let whole_scan_clean = TimingParam::ALL.into_iter().all(|param| {
        applied.get(param) - max_shift - design_required_max(param, cfg, mats) >= bound
    });
    if whole_scan_clean {
        return Ok(vec![0; envs.len()]);
    }

    let mut counts = vec![0u64; envs.len()];
    for pattern in patterns {
        for _iteration in 0..options.iterations {
            for batch in plan.rows.chunks(256) {
                let row_hits: Vec<Vec<u64>> = batch
                    .par_iter()
                    .map(|&ext_row| {
                        env_sensitivity_row(
                            device, applied, &shifts, *pattern, ext_row, plan, options, geom,
                            cfg, mats, bound,
                        )
                    })
                    .collect();
                for hits in row_hits {
                    for (c, h) in counts.iter_mut().zip(hits) {
                        *c += h;
                    }
                }
            }
        }
    }
    Ok(counts)
}

/// Per-environment erroneous-request counts contributed by one row.
#[allow(clippy::too_many_arguments)]
fn env_sensitivity_row(
    device: &Device,
    applied: &TimingParams,
    shifts: &[f64],
    pattern: DataPattern,
    ext_row: u64,
    plan: &ScanPlan,
    options: &ScanOptions,
    geom: &DeviceGeometry,
    cfg: &VariationConfig,
    mats: usize,
    bound: f64,
) -> Vec<u64> {
    let internal_row = device
        .map
        .translate_row(ext_row, geom)
        .expect("plan validated");
    let trp_visible = match options.trp_manifestation {
        TrpManifestation::Always => true,
        TrpManifestation::StripeTransition => pattern.row_stripe && ext_row > 0,
    };
    let max_shift = shifts.iter().cloned().fold(f64::MIN, f64::max);
    let min_shift = shifts.iter().cloned().fold(f64::MAX, f64::min);

    let mut hits = vec![0u64; shifts.len()];
    for &ext_col in &plan.cols {
        // Bitmask over environments: does this request fail there?
        let mut request_fails = 0u64;
        'cell: for beat in 0..geom.burst_length {
            let anchor = locate_in_row(internal_row, ext_col, beat, 0, geom, device.map.column_layout);
            for param in TimingParam::ALL {
                let design = design_required(&anchor, param, cfg, mats);
                // Tightest and loosest thresholds across environments.
                let lo = applied.get(param) - max_shift - design;
                let hi = applied.get(param) - min_shift - design;
                if lo >= bound {
                    continue;
                }
                for bit in 0..geom.chips_per_dimm {
                    let visible = if param == TimingParam::Trp {
                        trp_visible
                    } else {
                        pattern.stored_bit(ext_row, beat * 8 + bit)
                    };
                    if !visible {
                        continue;
                    }
                    let noise = if hi < -bound {
                        // Fails in every environment; skip the draw.
                        f64::INFINITY
                    } else {
                        let cell = CellCoordinate {
                            chip: bit,
                            ..anchor
                        };
                        process_noise(&cell, param, cfg)
                    };
                    for (e, shift) in shifts.iter().enumerate() {
                        if noise > applied.get(param) - shift - design {
                            request_fails |= 1 << e;
                        }
                    }
                    if request_fails.count_ones() as usize == shifts.len() {
                        break 'cell;
                    }
                }
            }
        }
        for (e, h) in hits.iter_mut().enumerate() {
            if request_fails & (1 << e) != 0 {
                *h += 1;
            }
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::locate_cell;
    use crate::variation::{fails, FailSet};

    /// Small device for brute-force comparisons.
    fn small_device(seed: u64) -> Device {
        let geometry = DeviceGeometry::with_subarrays(2);
        let map = AddressMap::scrambled_for(&geometry, seed);
        let variation = VariationConfig {
            rng_seed: seed,
            ..Default::default()
        };
        Device::new(geometry, map, variation).unwrap()
    }

    fn flat_device(base_trp: f64, base_trcd: f64) -> Device {
        let geometry = DeviceGeometry::with_subarrays(2);
        let map = AddressMap::identity(geometry.row_bits());
        let variation = VariationConfig {
            base: TimingParams {
                trcd_ns: base_trcd,
                tras_ns: 30.0,
                trp_ns: base_trp,
                twr_ns: 12.0,
            },
            bitline_coeff_ns: 0.0,
            wordline_coeff_ns: 0.0,
            precharge_alpha_ns: 0.0,
            precharge_beta_ns: 0.0,
            temp_coeff_ns_per_c: 0.0,
            refresh_coeff_ns: 0.0,
            process_sigma_ns: 0.0,
            ..Default::default()
        };
        Device::new(geometry, map, variation).unwrap()
    }

    fn neutral() -> EnvConditions {
        EnvConditions::new(45.0, 64.0)
    }

    #[test]
    fn stored_bit_follows_unit_inversion_and_stripe() {
        let p = DataPattern::parse("0101").unwrap();
        assert!(!p.stored_bit(1, 0));
        assert!(p.stored_bit(1, 1));
        assert!(p.stored_bit(1, 5)); // unit repeats every 4 positions
        let inv = DataPattern::parse("0101-inv").unwrap();
        assert!(inv.stored_bit(1, 0));
        let striped = DataPattern::parse("0101-stripe").unwrap();
        // Even rows flip, odd rows hold the base pattern.
        assert!(striped.stored_bit(0, 0));
        assert!(!striped.stored_bit(1, 0));
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in DataPattern::standard_set()
            .into_iter()
            .chain(DataPattern::reduced_set())
        {
            assert_eq!(DataPattern::parse(&p.name()).unwrap(), p);
        }
        assert_eq!(DataPattern::standard_set().len(), 8);
        assert!(DataPattern::parse("012x").is_err());
        assert!(DataPattern::parse("0101-bogus").is_err());
    }

    #[test]
    fn uniform_trp_failure_counts_match_manifestation_rules() {
        // Flat model, no noise: applied trp below base fails every cell.
        let device = flat_device(9.0, 2.0);
        let applied = TimingParams::standard().with(TimingParam::Trp, 8.5);
        let plan = ScanPlan {
            rows: (0..8).collect(),
            cols: vec![0, 100],
        };
        let patterns = [DataPattern::parse("0101-stripe").unwrap()];

        // Stripe transition: the first row has no previous row to differ from.
        let log = collect_log(
            &device,
            &applied,
            &neutral(),
            &patterns,
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert_eq!(log.records.len(), 7 * 2 * 64);
        assert!(log.records.iter().all(|r| r.param == TimingParam::Trp));

        // Toggle mode: every cell of every row manifests.
        let opts = ScanOptions {
            trp_manifestation: TrpManifestation::Always,
            ..Default::default()
        };
        let log = collect_log(&device, &applied, &neutral(), &patterns, &opts, &plan).unwrap();
        assert_eq!(log.records.len(), 8 * 2 * 64);
    }

    #[test]
    fn charge_sensitive_failures_require_a_stored_one() {
        let device = flat_device(1.0, 9.0); // trcd base above applied
        let applied = TimingParams::standard().with(TimingParam::Trcd, 8.5);
        let plan = ScanPlan {
            rows: (0..4).collect(),
            cols: vec![7],
        };
        let all_zero = [DataPattern::parse("0000").unwrap()];
        let log = collect_log(
            &device,
            &applied,
            &neutral(),
            &all_zero,
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert!(log.records.is_empty(), "discharged cells cannot show trcd errors");

        let all_one = [DataPattern::parse("0000-inv").unwrap()];
        let log = collect_log(
            &device,
            &applied,
            &neutral(),
            &all_one,
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert_eq!(log.records.len(), 4 * 64);

        let half = [DataPattern::parse("0101").unwrap()];
        let log = collect_log(
            &device,
            &applied,
            &neutral(),
            &half,
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert_eq!(log.records.len(), 4 * 32);
    }

    #[test]
    fn records_emerge_in_lexicographic_order() {
        let device = small_device(7);
        let applied = TimingParams::standard().with(TimingParam::Trp, 7.0);
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan {
            rows: (0..device.geometry.rows_per_bank()).step_by(37).collect(),
            cols: vec![0, 5, 300],
        };
        let log = collect_log(
            &device,
            &applied,
            &env,
            &DataPattern::standard_set(),
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert!(!log.records.is_empty());
        assert!(log.records.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fast_path_matches_exhaustive_reference() {
        // Re-derive every record with the plain per-cell predicate, no
        // skip logic, and demand the identical record list.
        let device = small_device(3);
        let applied = TimingParams {
            trcd_ns: 7.0,
            tras_ns: 24.0,
            trp_ns: 7.5,
            twr_ns: 10.0,
        };
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan {
            rows: (0..device.geometry.rows_per_bank()).step_by(11).collect(),
            cols: vec![0, 63, 64, 200, 511],
        };
        let patterns = [
            DataPattern::parse("0101-stripe").unwrap(),
            DataPattern::parse("0011-inv-stripe").unwrap(),
        ];
        let opts = ScanOptions::default();
        let log = collect_log(&device, &applied, &env, &patterns, &opts, &plan).unwrap();

        let mut expected = Vec::new();
        for pattern in &patterns {
            for &ext_row in &plan.rows {
                for &ext_col in &plan.cols {
                    for beat in 0..8 {
                        for bit in 0..8 {
                            let coord = locate_cell(
                                ext_row, ext_col, beat, bit, &device.geometry, &device.map,
                            )
                            .unwrap();
                            let set: FailSet = fails(
                                &coord,
                                &applied,
                                &env,
                                &device.variation,
                                device.mats_per_row(),
                            );
                            for param in set.iter() {
                                let visible = if param == TimingParam::Trp {
                                    pattern.row_stripe && ext_row > 0
                                } else {
                                    pattern.stored_bit(ext_row, beat * 8 + bit)
                                };
                                if visible {
                                    expected.push(ErrorRecord {
                                        pattern: *pattern,
                                        iteration: 0,
                                        ext_row,
                                        ext_col: ext_col as u32,
                                        beat: beat as u8,
                                        bit: bit as u8,
                                        param,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(!expected.is_empty(), "reference scan should find errors");
        assert_eq!(log.records, expected);
    }

    #[test]
    fn scans_are_deterministic_and_seed_sensitive() {
        let applied = TimingParams::standard().with(TimingParam::Trp, 5.5);
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan {
            rows: (0..1024).collect(),
            cols: vec![0, 128, 511],
        };
        let patterns = DataPattern::reduced_set();
        let opts = ScanOptions::default();
        let a = collect_log(&small_device(1), &applied, &env, &patterns, &opts, &plan).unwrap();
        let b = collect_log(&small_device(1), &applied, &env, &patterns, &opts, &plan).unwrap();
        assert_eq!(a, b);
        let c = collect_log(&small_device(2), &applied, &env, &patterns, &opts, &plan).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let device = small_device(5);
        let applied = TimingParams::standard().with(TimingParam::Trp, 7.5);
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan {
            rows: (0..600).collect(),
            cols: vec![0, 256],
        };
        let patterns = DataPattern::reduced_set();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                collect_log(
                    &device,
                    &applied,
                    &env,
                    &patterns,
                    &ScanOptions::default(),
                    &plan,
                )
                .unwrap()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn sweep_counts_rise_as_the_parameter_shrinks() {
        let device = small_device(11);
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan::strided_row_sweep(&device.geometry, 4);
        let points = sweep(
            &device,
            TimingParam::Trp,
            &[12.5, 10.0, 6.25, 5.0],
            &TimingParams::standard(),
            &env,
            &DataPattern::reduced_set(),
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert_eq!(points[0].erroneous_requests, 0, "two steps below standard stays clean");
        assert!(points[1].erroneous_requests < points[2].erroneous_requests);
        assert!(points[2].erroneous_requests < points[3].erroneous_requests);
        // At the lowest value nearly every request fails.
        let total = (plan.rows.len() * plan.cols.len() * 2) as u64;
        assert!(points[3].erroneous_requests > total / 2);
    }

    #[test]
    fn full_device_scan_at_standard_timings_is_clean_without_walking() {
        // 16.7M requests would take minutes if visited; the slowest-cell
        // bound proves the scan clean up front.
        let device = Device::standard(1);
        let plan = ScanPlan::full(&device.geometry);
        let start = std::time::Instant::now();
        let log = collect_log(
            &device,
            &TimingParams::standard(),
            &EnvConditions::new(85.0, 512.0),
            &DataPattern::standard_set(),
            &ScanOptions::default(),
            &plan,
        )
        .unwrap();
        assert!(log.records.is_empty());
        assert!(start.elapsed().as_secs() < 5, "short-circuit did not engage");
    }

    #[test]
    fn request_counter_matches_set_count() {
        let device = small_device(13);
        let applied = TimingParams::standard().with(TimingParam::Trp, 5.5);
        let env = EnvConditions::new(85.0, 256.0);
        let plan = ScanPlan {
            rows: (0..512).collect(),
            cols: vec![0, 100, 200],
        };
        let patterns = DataPattern::reduced_set();
        let opts = ScanOptions::default();
        let log = collect_log(&device, &applied, &env, &patterns, &opts, &plan).unwrap();
        let mut counter = RequestCounter::default();
        scan(&device, &applied, &env, &patterns, &opts, &plan, &mut counter).unwrap();
        let distinct: std::collections::BTreeSet<_> = log
            .records
            .iter()
            .map(|r| (r.pattern, r.iteration, r.ext_row, r.ext_col))
            .collect();
        assert_eq!(counter.count, distinct.len() as u64);
        assert!(counter.count > 0);
    }

    #[test]
    fn env_sensitivity_agrees_with_independent_scans() {
        let device = small_device(17);
        let applied = TimingParams::standard().with(TimingParam::Trp, 6.0);
        let envs = [
            EnvConditions::new(45.0, 256.0),
            EnvConditions::new(85.0, 256.0),
            EnvConditions::new(85.0, 64.0),
        ];
        let plan = ScanPlan {
            rows: (0..device.geometry.rows_per_bank()).step_by(7).collect(),
            cols: vec![0, 128, 300, 511],
        };
        let patterns = DataPattern::reduced_set();
        let opts = ScanOptions::default();
        let joint = env_sensitivity(&device, &applied, &envs, &patterns, &opts, &plan).unwrap();
        for (env, joint_count) in envs.iter().zip(&joint) {
            let mut counter = RequestCounter::default();
            scan(&device, &applied, env, &patterns, &opts, &plan, &mut counter).unwrap();
            assert_eq!(*joint_count, counter.count);
        }
        assert!(joint[1] > joint[0], "hotter environment must fail more requests");
    }

    #[test]
    fn iterations_duplicate_records_with_new_indices() {
        let device = flat_device(9.0, 2.0);
        let applied = TimingParams::standard().with(TimingParam::Trp, 8.5);
        let plan = ScanPlan {
            rows: vec![1, 2],
            cols: vec![0],
        };
        let patterns = [DataPattern::parse("0101-stripe").unwrap()];
        let opts = ScanOptions {
            iterations: 3,
            ..Default::default()
        };
        let log = collect_log(&device, &applied, &neutral(), &patterns, &opts, &plan).unwrap();
        let per_iter = 2 * 64; // rows 1 and 2 both manifest
        assert_eq!(log.records.len(), 3 * per_iter);
        for it in 0..3u32 {
            let n = log.records.iter().filter(|r| r.iteration == it).count();
            assert_eq!(n, per_iter);
        }
    }
}
