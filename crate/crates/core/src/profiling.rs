//! Online latency profiling with per-subarray test regions.
//!
//! One row per 512-row subarray is reserved as a latency test region. The
//! reserved row is the one whose design-layer timing requirement is the
//! largest in its subarray, so any timing value that leaves the test
//! regions free of multi-bit codeword errors bounds the design requirement
//! of every data row. Profiling walks a descending grid of timing values,
//! finds the smallest value that keeps all test regions clean, and adds a
//! clock-cycle safety margin. Single-bit test-region errors are tolerated
//! because the code layer corrects them; only two or more error bits inside
//! one beat codeword disqualify a value.

use std::collections::BTreeSet;

use crate::error::ModelError;
use crate::geometry::DeviceGeometry;
use crate::harness::{scan, DataPattern, Device, ErrorRecord, RecordSink, ScanOptions, ScanPlan, TrpManifestation};
use crate::variation::{
    EnvConditions, TimingParam, TimingParams, VariationConfig, DDR3_1600_CYCLE_NS,
};

/// Reserved test rows plus the two per-module registers the mechanism
/// needs: a sticky failure flag and the address of the slowest region row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRegionMap {
    /// One internal row per subarray, ascending.
    pub reserved: Vec<u64>,
    /// Set when a test region shows an error during operation; a set flag
    /// asks for re-profiling.
    pub fail_flag: bool,
    /// External address of the region row that bound the last profile.
    pub slowest_region_row: u64,
}

impl TestRegionMap {
    pub fn is_reserved(&self, internal_row: u64) -> bool {
        self.reserved.binary_search(&internal_row).is_ok()
    }

    /// Fraction of rows taken from the data address space.
    pub fn capacity_overhead(&self, geometry: &DeviceGeometry) -> f64 {
        self.reserved.len() as f64 / geometry.rows_per_bank() as f64
    }

    /// External addresses of the reserved rows under the device's mapping.
    pub fn external_rows(&self, device: &Device) -> Vec<u64> {
        self.reserved
            .iter()
            .map(|&r| {
                device
                    .map
                    .external_row(r, &device.geometry)
                    .expect("reserved rows are in range")
            })
            .collect()
    }

    /// Internal data rows, i.e. everything not reserved.
    pub fn data_rows(&self, geometry: &DeviceGeometry) -> Vec<u64> {
        let reserved: BTreeSet<u64> = self.reserved.iter().copied().collect();
        (0..geometry.rows_per_bank())
            .filter(|r| !reserved.contains(r))
            .collect()
    }

    /// Test rows are pinned: row-remap repair must never move them.
    pub fn remap_exempt(&self) -> bool {
        true
    }

    pub fn record_region_failure(&mut self, ext_row: u64) {
        self.fail_flag = true;
        self.slowest_region_row = ext_row;
    }
}

/// The design-layer requirement of a row is the worst cell on it. A row
/// reaches bitline fraction one at either mat edge, but only the bottom
/// edge pairs it with the far wordline end on the same cell (odd columns
/// sense at the bottom and the largest column index is odd), so the bottom
/// edge row wins whenever the wordline term is positive.
fn row_design_score(local_row: usize, geometry: &DeviceGeometry, config: &VariationConfig) -> f64 {
    let span = (geometry.mat_rows - 1) as f64;
    let col_span = (geometry.mat_cols - 1) as f64;
    let u_even = (span - local_row as f64) / span;
    let u_odd = local_row as f64 / span;
    let best_even_col = (geometry.mat_cols - 2) as f64 / col_span;
    let best_odd_col = 1.0;
    let even = config.bitline_coeff_ns * u_even + config.wordline_coeff_ns * best_even_col;
    let odd = config.bitline_coeff_ns * u_odd + config.wordline_coeff_ns * best_odd_col;
    even.max(odd)
}

/// Reserve, in every subarray, the row with the largest design-layer
/// requirement. Process noise is deliberately excluded: the region is fixed
/// by the design, so the choice is identical across device instances and
/// seeds. Ties break to the smallest row index.
pub fn select_test_rows(device: &Device) -> TestRegionMap {
    let geometry = &device.geometry;
    let config = &device.variation;
    let mut best_local = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for local_row in 0..geometry.mat_rows {
        let score = row_design_score(local_row, geometry, config);
        if score > best_score {
            best_score = score;
            best_local = local_row;
        }
    }
    let reserved: Vec<u64> = (0..geometry.subarrays_per_bank)
        .map(|s| (s * geometry.mat_rows + best_local) as u64)
        .collect();
    let slowest = device
        .map
        .external_row(reserved[0], geometry)
        .expect("reserved row in range");
    TestRegionMap {
        reserved,
        fail_flag: false,
        slowest_region_row: slowest,
    }
}

/// True when every reserved row's design score is at least that of every
/// other row in its subarray. Row scores do not depend on the subarray, so
/// one local comparison covers all of them.
pub fn design_dominance_holds(device: &Device, region: &TestRegionMap) -> bool {
    let geometry = &device.geometry;
    if region.reserved.len() != geometry.subarrays_per_bank {
        return false;
    }
    let locals: Vec<usize> = region
        .reserved
        .iter()
        .map(|&r| (r as usize) % geometry.mat_rows)
        .collect();
    let max_score = (0..geometry.mat_rows)
        .map(|r| row_design_score(r, geometry, &device.variation))
        .fold(f64::NEG_INFINITY, f64::max);
    locals
        .iter()
        .all(|&l| row_design_score(l, geometry, &device.variation) >= max_score)
}

/// Descending candidate values per parameter. Each list starts at the
/// parameter's standard value; the walk stops at the first value that
/// produces a multi-bit codeword error.
#[derive(Debug, Clone)]
pub struct ProfileGrid {
    pub trcd: Vec<f64>,
    pub tras: Vec<f64>,
    pub trp: Vec<f64>,
    pub twr: Vec<f64>,
}

impl ProfileGrid {
    /// Standard value, then `levels` further steps of `step_ns` each,
    /// stopping above zero.
    pub fn descending(standard: &TimingParams, step_ns: f64, levels: usize) -> Self {
        let build = |start: f64| -> Vec<f64> {
            let mut v = vec![start];
            for k in 1..=levels {
                let val = start - step_ns * k as f64;
                if val <= 0.0 {
                    break;
                }
                v.push(val);
            }
            v
        };
        ProfileGrid {
            trcd: build(standard.trcd_ns),
            tras: build(standard.tras_ns),
            trp: build(standard.trp_ns),
            twr: build(standard.twr_ns),
        }
    }

    /// Only the standard values: profiling degenerates to a pass check.
    pub fn standard_only(standard: &TimingParams) -> Self {
        ProfileGrid {
            trcd: vec![standard.trcd_ns],
            tras: vec![standard.tras_ns],
            trp: vec![standard.trp_ns],
            twr: vec![standard.twr_ns],
        }
    }

    pub fn get(&self, p: TimingParam) -> &[f64] {
        match p {
            TimingParam::Trcd => &self.trcd,
            TimingParam::Tras => &self.tras,
            TimingParam::Trp => &self.trp,
            TimingParam::Twr => &self.twr,
        }
    }

    pub fn validate(&self, standard: &TimingParams) -> Result<(), ModelError> {
        for p in TimingParam::ALL {
            let values = self.get(p);
            if values.first() != Some(&standard.get(p)) {
                return Err(ModelError::invalid(
                    "profile grid",
                    format!("{} grid must start at the standard value", p.label()),
                ));
            }
            let descending = values.windows(2).all(|w| w[1] < w[0]);
            if !descending || values.iter().any(|v| *v <= 0.0) {
                return Err(ModelError::invalid(
                    "profile grid",
                    format!("{} grid must descend through positive values", p.label()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Clock cycles added on top of the minimal reliable value.
    pub margin_cycles: u32,
    pub clock_period_ns: f64,
    pub iterations: u32,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            margin_cycles: 1,
            clock_period_ns: DDR3_1600_CYCLE_NS,
            iterations: 1,
        }
    }
}

/// Operating values found by a profile run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOutcome {
    /// Smallest grid value per parameter that left every test region free
    /// of multi-bit codeword errors.
    pub minimal: TimingParams,
    /// Minimal plus the cycle margin, capped at the standard values.
    pub chosen: TimingParams,
    pub margin_cycles: u32,
    pub clock_period_ns: f64,
    /// First test row with a multi-bit error at the step below minimal,
    /// per parameter that hit one.
    pub binding_rows: Vec<(TimingParam, u64)>,
}

/// A profile either lands on operating values or rejects the device.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileResult {
    Profiled(ProfileOutcome),
    /// The standard value itself produced a multi-bit codeword error.
    Rejected { param: TimingParam },
}

/// Streaming detector for codewords with two or more failed bits. A
/// codeword is one beat of one request: the eight tracked data bits that
/// share a check-bit group.
#[derive(Debug, Default)]
pub struct MultiBitCodewords {
    key: Option<(DataPattern, u32, u64, u32, u8)>,
    bits: u32,
    last_bit: u8,
    pub codewords: u64,
    /// External row of the first multi-bit codeword, if any.
    pub first_row: Option<u64>,
    /// Parameter on the record that completed the first multi-bit codeword.
    pub first_param: Option<TimingParam>,
}

impl RecordSink for MultiBitCodewords {
    fn record(&mut self, rec: ErrorRecord) {
        let key = (rec.pattern, rec.iteration, rec.ext_row, rec.ext_col, rec.beat);
        if self.key != Some(key) {
            self.key = Some(key);
            self.bits = 1;
            self.last_bit = rec.bit;
            return;
        }
        if rec.bit == self.last_bit {
            return;
        }
        self.last_bit = rec.bit;
        self.bits += 1;
        if self.bits == 2 {
            self.codewords += 1;
            if self.first_row.is_none() {
                self.first_row = Some(rec.ext_row);
                self.first_param = Some(rec.param);
            }
        }
    }
}

/// Scan `plan` at one applied setting and report multi-bit codewords.
pub fn multi_bit_codewords(
    device: &Device,
    applied: &TimingParams,
    env: &EnvConditions,
    patterns: &[DataPattern],
    options: &ScanOptions,
    plan: &ScanPlan,
) -> Result<MultiBitCodewords, ModelError> {
    let mut sink = MultiBitCodewords::default();
    scan(device, applied, env, patterns, options, plan, &mut sink)?;
    Ok(sink)
}

/// Walk the grid per parameter (others held at standard) over the test
/// regions and return the minimal reliable values plus margin.
///
/// Region tests toggle every cell between accesses, so precharge failures
/// are always visible regardless of the pattern's stripe flag.
pub fn profile(
    device: &Device,
    region: &TestRegionMap,
    grid: &ProfileGrid,
    env: &EnvConditions,
    patterns: &[DataPattern],
    options: &ProfileOptions,
) -> Result<ProfileResult, ModelError> {
    let standard = TimingParams::standard();
    grid.validate(&standard)?;
    if patterns.is_empty() {
        return Err(ModelError::invalid("profile", "empty pattern set"));
    }
    let scan_opts = ScanOptions {
        iterations: options.iterations,
        trp_manifestation: TrpManifestation::Always,
    };
    let plan = ScanPlan::for_rows(region.external_rows(device), &device.geometry);

    // One scan at full standard settles rejection; the per-parameter walks
    // then start below standard, so any dirt they see is theirs.
    let at_standard = multi_bit_codewords(device, &standard, env, patterns, &scan_opts, &plan)?;
    if at_standard.codewords > 0 {
        return Ok(ProfileResult::Rejected {
            param: at_standard.first_param.expect("dirty scan has a record"),
        });
    }

    let mut minimal = standard;
    let mut binding_rows = Vec::new();
    for p in TimingParam::ALL {
        let mut clean = standard.get(p);
        for &value in &grid.get(p)[1..] {
            let applied = standard.with(p, value);
            let found = multi_bit_codewords(device, &applied, env, patterns, &scan_opts, &plan)?;
            if found.codewords > 0 {
                // Lowering a value never removes a failure, so everything
                // below this point is dirty too.
                if let Some(row) = found.first_row {
                    binding_rows.push((p, row));
                }
                break;
            }
            clean = value;
        }
        minimal = minimal.with(p, clean);
    }

    let margin = options.margin_cycles as f64 * options.clock_period_ns;
    let mut chosen = minimal;
    for p in TimingParam::ALL {
        let capped = (minimal.get(p) + margin).min(standard.get(p));
        chosen = chosen.with(p, capped);
    }
    Ok(ProfileResult::Profiled(ProfileOutcome {
        minimal,
        chosen,
        margin_cycles: options.margin_cycles,
        clock_period_ns: options.clock_period_ns,
        binding_rows,
    }))
}

/// Wall-clock cost of testing `tested_bytes` of capacity: each pattern is
/// written once and read once at the full interface bandwidth.
pub fn profiling_cost(tested_bytes: f64, bandwidth_bits_per_s: f64, pattern_count: u32) -> f64 {
    tested_bytes / (bandwidth_bits_per_s / 8.0) * pattern_count as f64 * 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{locate_in_row, ColumnLayout};
    use crate::variation::design_required;
    use crate::geometry::AddressMap;

    fn default_device(seed: u64) -> Device {
        Device::standard(seed)
    }

    /// Brute-force max design requirement of one local row over every
    /// (column, beat) cell of the row, via the real geometry path.
    fn brute_row_max(device: &Device, internal_row: u64) -> f64 {
        let g = &device.geometry;
        let mut max = f64::NEG_INFINITY;
        for ext_col in 0..g.external_columns() {
            for beat in 0..g.burst_length {
                let c = locate_in_row(internal_row, ext_col, beat, 0, g, ColumnLayout::BeatMajor);
                let req = design_required(&c, TimingParam::Trp, &device.variation, g.mats_per_subarray_row);
                if req > max {
                    max = req;
                }
            }
        }
        max
    }

    #[test]
    fn selected_rows_maximize_the_design_requirement() {
        let device = default_device(3);
        let region = select_test_rows(&device);
        assert_eq!(region.reserved.len(), device.geometry.subarrays_per_bank);
        // Bottom-edge row: odd columns put the full bitline span on the
        // same cell as the last (odd) column's full wordline span.
        for (s, &row) in region.reserved.iter().enumerate() {
            assert_eq!(row as usize, s * 512 + 511);
        }
        let selected = brute_row_max(&device, region.reserved[0]);
        for r in (0..512u64).step_by(31).chain([510, 511]) {
            assert!(selected >= brute_row_max(&device, r), "row {r} out-designs the test row");
        }
        assert!(selected > brute_row_max(&device, 0), "edge tie should break strictly");
        assert!(design_dominance_holds(&device, &region));
    }

    #[test]
    fn selection_ignores_seed_and_ties_break_low() {
        let a = select_test_rows(&default_device(1));
        let b = select_test_rows(&default_device(99));
        assert_eq!(a.reserved, b.reserved);

        // No wordline term: both mat edges tie, the lower index wins.
        let geometry = DeviceGeometry::default();
        let no_wordline = Device::new(
            geometry.clone(),
            AddressMap::identity(geometry.row_bits()),
            VariationConfig {
                wordline_coeff_ns: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let region = select_test_rows(&no_wordline);
        assert_eq!(region.reserved[0], 0);
        assert_eq!(region.reserved[1], 512);

        let flat = Device::new(
            geometry.clone(),
            AddressMap::identity(geometry.row_bits()),
            VariationConfig {
                bitline_coeff_ns: 0.0,
                wordline_coeff_ns: 0.0,
                precharge_alpha_ns: 0.0,
                precharge_beta_ns: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(select_test_rows(&flat).reserved[0], 0);
    }

    #[test]
    fn reserved_rows_are_excluded_from_the_data_space() {
        let device = default_device(7);
        let region = select_test_rows(&device);
        let data = region.data_rows(&device.geometry);
        assert_eq!(
            data.len() as u64,
            device.geometry.rows_per_bank() - region.reserved.len() as u64
        );
        for &r in &region.reserved {
            assert!(region.is_reserved(r));
            assert!(!data.contains(&r));
        }
        let overhead = region.capacity_overhead(&device.geometry);
        assert!((overhead - 1.0 / 512.0).abs() < 1e-12, "one row per 512-row subarray");
        assert!(region.remap_exempt());
    }

    #[test]
    fn registers_start_clear_and_record_failures() {
        let device = default_device(1);
        let mut region = select_test_rows(&device);
        assert!(!region.fail_flag);
        region.record_region_failure(42);
        assert!(region.fail_flag);
        assert_eq!(region.slowest_region_row, 42);
    }

    fn flat_trp_device(base_trp_ns: f64) -> Device {
        let geometry = DeviceGeometry::with_subarrays(2);
        Device::new(
            geometry.clone(),
            AddressMap::identity(geometry.row_bits()),
            VariationConfig {
                base: TimingParams {
                    trp_ns: base_trp_ns,
                    ..VariationConfig::default().base
                },
                bitline_coeff_ns: 0.0,
                wordline_coeff_ns: 0.0,
                precharge_alpha_ns: 0.0,
                precharge_beta_ns: 0.0,
                process_sigma_ns: 0.0,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn flat_device_walks_to_the_first_value_above_its_threshold() {
        // Every cell requires exactly 9.0 ns, so 10.0 is the smallest clean
        // grid value and one cycle of margin lands on 11.25.
        let device = flat_trp_device(9.0);
        let region = select_test_rows(&device);
        let standard = TimingParams::standard();
        let mut grid = ProfileGrid::standard_only(&standard);
        grid.trp = vec![13.75, 12.5, 11.25, 10.0, 8.75, 7.5, 6.25, 5.0];
        let env = EnvConditions::new(45.0, 64.0);
        let result = profile(
            &device,
            &region,
            &grid,
            &env,
            &DataPattern::reduced_set(),
            &ProfileOptions::default(),
        )
        .unwrap();
        let outcome = match result {
            ProfileResult::Profiled(o) => o,
            other => panic!("expected a profile, got {other:?}"),
        };
        assert_eq!(outcome.minimal.trp_ns, 10.0);
        assert_eq!(outcome.chosen.trp_ns, 11.25);
        assert_eq!(outcome.minimal.trcd_ns, standard.trcd_ns);
        assert_eq!(outcome.chosen.trcd_ns, standard.trcd_ns);
        assert!(outcome.binding_rows.iter().any(|(p, _)| *p == TimingParam::Trp));
    }

    #[test]
    fn device_slower_than_standard_is_rejected() {
        let device = flat_trp_device(14.0);
        let region = select_test_rows(&device);
        let grid = ProfileGrid::standard_only(&TimingParams::standard());
        let env = EnvConditions::new(45.0, 64.0);
        let result = profile(
            &device,
            &region,
            &grid,
            &env,
            &DataPattern::reduced_set(),
            &ProfileOptions::default(),
        )
        .unwrap();
        assert_eq!(result, ProfileResult::Rejected { param: TimingParam::Trp });
    }

    #[test]
    fn standard_only_grid_returns_standard_values() {
        let device = default_device(5);
        let region = select_test_rows(&device);
        let standard = TimingParams::standard();
        let grid = ProfileGrid::standard_only(&standard);
        let env = EnvConditions::new(85.0, 256.0);
        let result = profile(
            &device,
            &region,
            &grid,
            &env,
            &DataPattern::reduced_set(),
            &ProfileOptions::default(),
        )
        .unwrap();
        match result {
            ProfileResult::Profiled(o) => {
                assert_eq!(o.minimal, standard);
                assert_eq!(o.chosen, standard);
            }
            other => panic!("expected a profile, got {other:?}"),
        }
    }

    #[test]
    fn profile_on_the_default_device_lands_between_thresholds() {
        let device = default_device(1);
        let region = select_test_rows(&device);
        let standard = TimingParams::standard();
        let grid = ProfileGrid::descending(&standard, DDR3_1600_CYCLE_NS, 8);
        let env = EnvConditions::new(85.0, 256.0);
        let result = profile(
            &device,
            &region,
            &grid,
            &env,
            &DataPattern::reduced_set(),
            &ProfileOptions::default(),
        )
        .unwrap();
        let outcome = match result {
            ProfileResult::Profiled(o) => o,
            other => panic!("expected a profile, got {other:?}"),
        };
        for p in TimingParam::ALL {
            assert!(outcome.minimal.get(p) <= standard.get(p));
            assert!(outcome.chosen.get(p) >= outcome.minimal.get(p));
            assert!(outcome.chosen.get(p) <= standard.get(p));
            assert!(outcome.chosen.get(p) < standard.get(p), "{} should profile below standard", p.label());
        }
    }

    #[test]
    fn hotter_environment_never_chooses_lower_values() {
        let device = default_device(2);
        let region = select_test_rows(&device);
        let standard = TimingParams::standard();
        let grid = ProfileGrid::descending(&standard, DDR3_1600_CYCLE_NS, 8);
        let patterns = DataPattern::reduced_set();
        let opts = ProfileOptions::default();
        let run = |temp: f64| {
            match profile(&device, &region, &grid, &EnvConditions::new(temp, 256.0), &patterns, &opts).unwrap() {
                ProfileResult::Profiled(o) => o,
                other => panic!("expected a profile, got {other:?}"),
            }
        };
        let cool = run(45.0);
        let hot = run(85.0);
        for p in TimingParam::ALL {
            assert!(hot.chosen.get(p) >= cool.chosen.get(p), "{}", p.label());
        }
    }

    #[test]
    fn multi_bit_detector_counts_codewords_not_records() {
        let mut sink = MultiBitCodewords::default();
        let pattern = DataPattern::parse("0101").unwrap();
        let rec = |row: u64, col: u32, beat: u8, bit: u8, param: TimingParam| ErrorRecord {
            pattern,
            iteration: 0,
            ext_row: row,
            ext_col: col,
            beat,
            bit,
            param,
        };
        // One bit failing two parameters is still a single-bit codeword.
        sink.record(rec(1, 0, 0, 3, TimingParam::Trp));
        sink.record(rec(1, 0, 0, 3, TimingParam::Twr));
        assert_eq!(sink.codewords, 0);
        // Second distinct bit in the same codeword.
        sink.record(rec(1, 0, 0, 5, TimingParam::Trp));
        assert_eq!(sink.codewords, 1);
        // Third bit does not double-count the codeword.
        sink.record(rec(1, 0, 0, 7, TimingParam::Trp));
        assert_eq!(sink.codewords, 1);
        // Same bits on a different beat form a new codeword.
        sink.record(rec(1, 0, 1, 3, TimingParam::Trp));
        sink.record(rec(1, 0, 1, 4, TimingParam::Trp));
        assert_eq!(sink.codewords, 2);
        assert_eq!(sink.first_row, Some(1));
    }

    #[test]
    fn cost_model_matches_the_interface_arithmetic() {
        // 4 GB at 102.4 Gb/s, one pattern, write plus read.
        assert_eq!(profiling_cost(4e9, 102.4e9, 1), 0.625);
        let region = profiling_cost(8e6, 102.4e9, 1);
        assert!(region >= 1.22e-3 && region <= 1.31e-3, "{region}");
        assert_eq!(region, 1.25e-3);
        assert_eq!(profiling_cost(4e9, 102.4e9, 0), 0.0);
        // Linear in both bytes and patterns.
        assert_eq!(profiling_cost(8e9, 102.4e9, 1), 2.0 * profiling_cost(4e9, 102.4e9, 1));
        assert_eq!(profiling_cost(4e9, 102.4e9, 3), 3.0 * profiling_cost(4e9, 102.4e9, 1));
    }
}
