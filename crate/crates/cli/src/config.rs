//! Experiment configuration: flat, sectioned, plain-text key-value files.
//!
//! The format is INI-shaped: `[section]` headers, `key = value` lines, and
//! full-line comments starting with `#` or `;`. Every key has a default, so
//! an empty file is valid. Parsing is strict: unknown sections or keys,
//! duplicate keys, and unparseable values are rejected with the offending
//! line. [`ExperimentConfig::canonical_text`] writes every key back in one
//! fixed order with shortest-roundtrip number formatting; that byte-stable
//! form is what run identifiers hash, so a config plus a code version pins
//! every output byte.

use std::fmt;

use divasim_core::calibrate::CalibrationTargets;
use divasim_core::geometry::{AddressMap, BitPermutation, ColumnLayout, DeviceGeometry};
use divasim_core::harness::DataPattern;
use divasim_core::variation::{EnvConditions, TimingParam, TimingParams, VariationConfig};

/// A diagnostic anchored to where the bad input came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "{}:{}: {}", self.source, n, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Where the row-bit remap of a generated device comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RowMapSource {
    /// Derived from the run's device seed; different seeds give different
    /// hidden maps, which is how multi-seed experiments vary devices.
    #[default]
    SeedScrambled,
    /// External addresses equal internal addresses.
    Identity,
    /// A concrete permutation written out by `gen-device`.
    Explicit,
}

/// Address-map portion of a configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapSpec {
    pub column_layout: ColumnLayout,
    pub row_source: RowMapSource,
    /// Internal bit receiving each external bit; explicit source only.
    pub row_bit_map: Vec<usize>,
    /// XOR applied after the permutation; identity and explicit sources.
    pub row_xor_mask: Option<u64>,
}

impl MapSpec {
    /// Concrete map for one device. The seed only matters for the
    /// seed-scrambled source.
    pub fn build(&self, geometry: &DeviceGeometry, seed: u64) -> Result<AddressMap, ConfigError> {
        let semantic = |msg: String| ConfigError {
            source: "config".into(),
            line: None,
            message: msg,
        };
        let mut map = match self.row_source {
            RowMapSource::SeedScrambled => {
                if !self.row_bit_map.is_empty() || self.row_xor_mask.is_some() {
                    return Err(semantic(
                        "row_bit_map and row_xor_mask require row_source = identity or explicit"
                            .into(),
                    ));
                }
                AddressMap::scrambled_for(geometry, seed)
            }
            RowMapSource::Identity => {
                if !self.row_bit_map.is_empty() {
                    return Err(semantic(
                        "row_bit_map requires row_source = explicit".into(),
                    ));
                }
                let mut m = AddressMap::identity(geometry.row_bits());
                m.row_xor_mask = self.row_xor_mask.unwrap_or(0);
                m
            }
            RowMapSource::Explicit => {
                let perm = BitPermutation::new(self.row_bit_map.clone())
                    .map_err(|e| semantic(format!("row_bit_map: {e}")))?;
                AddressMap {
                    row_bit_permutation: perm,
                    row_xor_mask: self.row_xor_mask.unwrap_or(0),
                    column_layout: ColumnLayout::BeatMajor,
                }
            }
        };
        map.column_layout = self.column_layout;
        map.validate(geometry)
            .map_err(|e| semantic(format!("address map: {e}")))?;
        Ok(map)
    }

    /// Spec pinning `map` exactly, for writing generated devices back out.
    pub fn explicit_from(map: &AddressMap) -> MapSpec {
        MapSpec {
            column_layout: map.column_layout,
            row_source: RowMapSource::Explicit,
            row_bit_map: map.row_bit_permutation.as_slice().to_vec(),
            row_xor_mask: Some(map.row_xor_mask),
        }
    }
}

/// Which data-pattern collection a run writes.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PatternSet {
    /// Eight patterns: four units, each plus its inverse.
    #[default]
    Standard,
    /// Two patterns: the alternating unit plus its inverse.
    Reduced,
    /// Explicit list of pattern names.
    Named(Vec<String>),
}

impl PatternSet {
    pub fn resolve(&self) -> Result<Vec<DataPattern>, ConfigError> {
        match self {
            PatternSet::Standard => Ok(DataPattern::standard_set()),
            PatternSet::Reduced => Ok(DataPattern::reduced_set()),
            PatternSet::Named(names) => names
                .iter()
                .map(|n| {
                    DataPattern::parse(n).map_err(|e| ConfigError {
                        source: "config".into(),
                        line: None,
                        message: format!("pattern {n:?}: {e}"),
                    })
                })
                .collect(),
        }
    }
}

/// Region walked by scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanKind {
    /// Every row at sixteen evenly spaced columns.
    #[default]
    Rows,
    /// Every `stride`-th row at sixteen evenly spaced columns.
    RowsStrided,
    /// Every column at sixteen evenly spaced rows.
    Columns,
    /// Every row crossed with every column.
    Full,
}

impl PlanKind {
    pub fn build(
        &self,
        geometry: &DeviceGeometry,
        stride: u64,
    ) -> divasim_core::harness::ScanPlan {
        use divasim_core::harness::ScanPlan;
        match self {
            PlanKind::Rows => ScanPlan::row_sweep(geometry),
            PlanKind::RowsStrided => ScanPlan::strided_row_sweep(geometry, stride),
            PlanKind::Columns => ScanPlan::column_sweep(geometry),
            PlanKind::Full => ScanPlan::full(geometry),
        }
    }
}

/// One applied-timing grid per parameter. A single value pins the
/// parameter; several values make `sweep` walk it.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingGrids {
    pub trcd_ns: Vec<f64>,
    pub tras_ns: Vec<f64>,
    pub trp_ns: Vec<f64>,
    pub twr_ns: Vec<f64>,
}

impl Default for TimingGrids {
    fn default() -> Self {
        // The default precharge grid is the four-step reduction ladder the
        // sweep experiments use; the other parameters sit at standard.
        TimingGrids {
            trcd_ns: vec![13.75],
            tras_ns: vec![35.0],
            trp_ns: vec![12.5, 10.0, 7.5, 5.0],
            twr_ns: vec![15.0],
        }
    }
}

impl TimingGrids {
    pub fn grid(&self, param: TimingParam) -> &[f64] {
        match param {
            TimingParam::Trcd => &self.trcd_ns,
            TimingParam::Tras => &self.tras_ns,
            TimingParam::Trp => &self.trp_ns,
            TimingParam::Twr => &self.twr_ns,
        }
    }

    /// Applied values when no parameter is being swept: the first grid
    /// entry of each parameter.
    pub fn baseline(&self) -> TimingParams {
        TimingParams {
            trcd_ns: self.trcd_ns[0],
            tras_ns: self.tras_ns[0],
            trp_ns: self.trp_ns[0],
            twr_ns: self.twr_ns[0],
        }
    }

    /// Applied values while `swept` varies: standard for other multi-value
    /// grids, the pinned value for single-value ones.
    pub fn baseline_for(&self, swept: TimingParam) -> TimingParams {
        let mut t = TimingParams::standard();
        for param in TimingParam::ALL {
            if param == swept {
                continue;
            }
            let grid = self.grid(param);
            if grid.len() == 1 {
                t = t.with(param, grid[0]);
            }
        }
        t
    }
}

/// Knobs for the profiling walk.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub step_ns: f64,
    pub levels: usize,
    pub margin_cycles: u32,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec {
            step_ns: 1.25,
            levels: 8,
            margin_cycles: 1,
        }
    }
}

/// Cells and edges for the circuit subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub act_ns: f64,
    pub pre_ns: f64,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec {
            rows: vec![0, 511],
            cols: vec![0],
            act_ns: 0.0,
            pre_ns: 30.0,
        }
    }
}

/// Everything an experiment run reads, one section per concern.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: DeviceGeometry,
    pub map: MapSpec,
    pub variation: VariationConfig,
    pub temperatures_c: Vec<f64>,
    pub refresh_intervals_ms: Vec<f64>,
    pub timing: TimingGrids,
    pub pattern_set: PatternSet,
    pub iterations: u32,
    pub plan: PlanKind,
    pub stride: u64,
    /// Whether sweeps also write raw error logs. Off by default because
    /// deeply reduced timings fail most requests.
    pub emit_logs: bool,
    pub device_seeds: Vec<u64>,
    pub output_dir: String,
    pub profile: ProfileSpec,
    pub circuit: CircuitSpec,
    pub calibrate: CalibrationTargets,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: DeviceGeometry::default(),
            map: MapSpec::default(),
            variation: VariationConfig::default(),
            temperatures_c: vec![85.0],
            refresh_intervals_ms: vec![256.0],
            timing: TimingGrids::default(),
            pattern_set: PatternSet::default(),
            iterations: 1,
            plan: PlanKind::default(),
            stride: 32,
            emit_logs: false,
            device_seeds: vec![1],
            output_dir: "out".into(),
            profile: ProfileSpec::default(),
            circuit: CircuitSpec::default(),
            calibrate: CalibrationTargets::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse `text`, reporting problems against `source` (a file name or
    /// `--override`).
    pub fn parse(text: &str, source: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        let mut seen: Vec<(String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let at = |message: String| ConfigError {
                source: source.into(),
                line: Some(lineno),
                message,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| at("unterminated section header".into()))?
                    .trim();
                if !KNOWN_SECTIONS.contains(&name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected `key = value`".into()))?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(at(format!("key {key:?} before any [section] header")));
            }
            let slot = (section.clone(), key.to_string());
            if seen.contains(&slot) {
                return Err(at(format!("duplicate key {key:?} in [{section}]")));
            }
            seen.push(slot);
            cfg.set(&section, key, value)
                .map_err(|msg| at(msg))?;
        }
        cfg.validate().map_err(|message| ConfigError {
            source: source.into(),
            line: None,
            message,
        })?;
        Ok(cfg)
    }

    /// Apply one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            source: "--override".into(),
            line: None,
            message,
        };
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| err(format!("expected section.key=value, got {spec:?}")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| err(format!("expected section.key=value, got {spec:?}")))?;
        if !KNOWN_SECTIONS.contains(&section) {
            return Err(err(format!("unknown section [{section}]")));
        }
        self.set(section, key, value.trim()).map_err(err)
    }

    /// Semantic checks that span keys.
    pub fn validate(&self) -> Result<(), String> {
        self.geometry.validate().map_err(|e| e.to_string())?;
        self.variation.validate().map_err(|e| e.to_string())?;
        for &t in &self.temperatures_c {
            EnvConditions::new(t, self.refresh_intervals_ms[0])
                .validate(&self.variation)
                .map_err(|e| e.to_string())?;
        }
        for &r in &self.refresh_intervals_ms {
            EnvConditions::new(self.temperatures_c[0], r)
                .validate(&self.variation)
                .map_err(|e| e.to_string())?;
        }
        for param in TimingParam::ALL {
            let grid = self.timing.grid(param);
            for &v in grid {
                if !(v > 0.0) {
                    return Err(format!("[timing] {} values must be positive", param.label()));
                }
            }
            if grid.len() > 1 && grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(format!(
                    "[timing] {} grid must be strictly descending",
                    param.label()
                ));
            }
        }
        if self.iterations == 0 {
            return Err("[patterns] iterations must be at least 1".into());
        }
        self.pattern_set.resolve().map_err(|e| e.message)?;
        if self.stride == 0 {
            return Err("[scan] stride must be at least 1".into());
        }
        if self.device_seeds.is_empty() {
            return Err("[seeds] device list cannot be empty".into());
        }
        if !(self.profile.step_ns > 0.0) {
            return Err("[profile] step_ns must be positive".into());
        }
        if self.profile.levels == 0 {
            return Err("[profile] levels must be at least 1".into());
        }
        for &r in &self.circuit.rows {
            if r >= self.geometry.mat_rows {
                return Err(format!("[circuit] row {r} outside the mat"));
            }
        }
        for &c in &self.circuit.cols {
            if c >= self.geometry.mat_cols {
                return Err(format!("[circuit] col {c} outside the mat"));
            }
        }
        if !(self.circuit.pre_ns > self.circuit.act_ns && self.circuit.act_ns >= 0.0) {
            return Err("[circuit] pre_ns must follow a non-negative act_ns".into());
        }
        for (name, v) in [
            ("target_cold_over_hot", self.calibrate.cold_over_hot),
            ("target_fast_over_slow", self.calibrate.fast_over_slow),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("[calibrate] {name} must be strictly between 0 and 1"));
            }
        }
        if !(self.calibrate.applied_trp_ns > 0.0) {
            return Err("[calibrate] applied_trp_ns must be positive".into());
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        match section {
            "geometry" => match key {
                "chips_per_dimm" => self.geometry.chips_per_dimm = parse_count(value)?,
                "banks_per_chip" => self.geometry.banks_per_chip = parse_count(value)?,
                "subarrays_per_bank" => self.geometry.subarrays_per_bank = parse_count(value)?,
                "mats_per_subarray_row" => {
                    self.geometry.mats_per_subarray_row = parse_count(value)?
                }
                _ => return Err(unknown(section, key)),
            },
            "map" => match key {
                "column_layout" => {
                    self.map.column_layout = match value {
                        "beat-major" => ColumnLayout::BeatMajor,
                        "mat-per-beat" => ColumnLayout::MatPerBeat,
                        _ => {
                            return Err(format!(
                                "column_layout must be beat-major or mat-per-beat, got {value:?}"
                            ))
                        }
                    }
                }
                "row_source" => {
                    self.map.row_source = match value {
                        "seed-scrambled" => RowMapSource::SeedScrambled,
                        "identity" => RowMapSource::Identity,
                        "explicit" => RowMapSource::Explicit,
                        _ => {
                            return Err(format!(
                                "row_source must be seed-scrambled, identity, or explicit, got {value:?}"
                            ))
                        }
                    }
                }
                "row_bit_map" => self.map.row_bit_map = parse_list(value, parse_count)?,
                "row_xor_mask" => self.map.row_xor_mask = Some(parse_u64(value)?),
                _ => return Err(unknown(section, key)),
            },
            "variation" => {
                let f = &mut self.variation;
                match key {
                    "base_trcd_ns" => f.base.trcd_ns = parse_f64(value)?,
                    "base_tras_ns" => f.base.tras_ns = parse_f64(value)?,
                    "base_trp_ns" => f.base.trp_ns = parse_f64(value)?,
                    "base_twr_ns" => f.base.twr_ns = parse_f64(value)?,
                    "bitline_coeff_ns" => f.bitline_coeff_ns = parse_f64(value)?,
                    "wordline_coeff_ns" => f.wordline_coeff_ns = parse_f64(value)?,
                    "precharge_alpha_ns" => f.precharge_alpha_ns = parse_f64(value)?,
                    "precharge_beta_ns" => f.precharge_beta_ns = parse_f64(value)?,
                    "temp_coeff_ns_per_c" => f.temp_coeff_ns_per_c = parse_f64(value)?,
                    "refresh_coeff_ns" => f.refresh_coeff_ns = parse_f64(value)?,
                    "process_sigma_ns" => f.process_sigma_ns = parse_f64(value)?,
                    "temp_valid_min_c" => f.temp_valid_min_c = parse_f64(value)?,
                    "temp_valid_max_c" => f.temp_valid_max_c = parse_f64(value)?,
                    _ => return Err(unknown(section, key)),
                }
            }
            "env" => match key {
                "temperatures_c" => self.temperatures_c = parse_list(value, parse_f64)?,
                "refresh_intervals_ms" => {
                    self.refresh_intervals_ms = parse_list(value, parse_f64)?
                }
                _ => return Err(unknown(section, key)),
            },
            "timing" => match key {
                "trcd_ns" => self.timing.trcd_ns = parse_list(value, parse_f64)?,
                "tras_ns" => self.timing.tras_ns = parse_list(value, parse_f64)?,
                "trp_ns" => self.timing.trp_ns = parse_list(value, parse_f64)?,
                "twr_ns" => self.timing.twr_ns = parse_list(value, parse_f64)?,
                _ => return Err(unknown(section, key)),
            },
            "patterns" => match key {
                "set" => {
                    self.pattern_set = match value {
                        "standard" => PatternSet::Standard,
                        "reduced" => PatternSet::Reduced,
                        names => PatternSet::Named(
                            names.split(',').map(|s| s.trim().to_string()).collect(),
                        ),
                    }
                }
                "iterations" => {
                    self.iterations = value
                        .parse()
                        .map_err(|_| format!("iterations must be a count, got {value:?}"))?
                }
                _ => return Err(unknown(section, key)),
            },
            "scan" => match key {
                "plan" => {
                    self.plan = match value {
                        "rows" => PlanKind::Rows,
                        "rows-strided" => PlanKind::RowsStrided,
                        "columns" => PlanKind::Columns,
                        "full" => PlanKind::Full,
                        _ => {
                            return Err(format!(
                                "plan must be rows, rows-strided, columns, or full, got {value:?}"
                            ))
                        }
                    }
                }
                "stride" => self.stride = parse_u64(value)?,
                "emit_logs" => self.emit_logs = parse_bool(value)?,
                _ => return Err(unknown(section, key)),
            },
            "seeds" => match key {
                "device" => self.device_seeds = parse_list(value, parse_u64)?,
                _ => return Err(unknown(section, key)),
            },
            "output" => match key {
                "dir" => self.output_dir = value.to_string(),
                _ => return Err(unknown(section, key)),
            },
            "profile" => match key {
                "step_ns" => self.profile.step_ns = parse_f64(value)?,
                "levels" => self.profile.levels = parse_count(value)?,
                "margin_cycles" => {
                    self.profile.margin_cycles = value
                        .parse()
                        .map_err(|_| format!("margin_cycles must be a count, got {value:?}"))?
                }
                _ => return Err(unknown(section, key)),
            },
            "circuit" => match key {
                "rows" => self.circuit.rows = parse_list(value, parse_count)?,
                "cols" => self.circuit.cols = parse_list(value, parse_count)?,
                "act_ns" => self.circuit.act_ns = parse_f64(value)?,
                "pre_ns" => self.circuit.pre_ns = parse_f64(value)?,
                _ => return Err(unknown(section, key)),
            },
            "calibrate" => {
                let c = &mut self.calibrate;
                match key {
                    "target_cold_over_hot" => c.cold_over_hot = parse_f64(value)?,
                    "target_fast_over_slow" => c.fast_over_slow = parse_f64(value)?,
                    "applied_trp_ns" => c.applied_trp_ns = parse_f64(value)?,
                    "cold_temp_c" => c.cold.temperature_c = parse_f64(value)?,
                    "cold_refresh_ms" => c.cold.refresh_interval_ms = parse_f64(value)?,
                    "hot_temp_c" => {
                        c.hot.temperature_c = parse_f64(value)?;
                        c.hot_fast_refresh.temperature_c = c.hot.temperature_c;
                    }
                    "hot_refresh_ms" => c.hot.refresh_interval_ms = parse_f64(value)?,
                    "fast_refresh_ms" => c.hot_fast_refresh.refresh_interval_ms = parse_f64(value)?,
                    _ => return Err(unknown(section, key)),
                }
            }
            _ => return Err(format!("unknown section [{section}]")),
        }
        Ok(())
    }

    /// Every key in fixed order; the hashed, diffable form.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let g = &self.geometry;
        s.push_str("[geometry]\n");
        kv(&mut s, "chips_per_dimm", g.chips_per_dimm);
        kv(&mut s, "banks_per_chip", g.banks_per_chip);
        kv(&mut s, "subarrays_per_bank", g.subarrays_per_bank);
        kv(&mut s, "mats_per_subarray_row", g.mats_per_subarray_row);

        s.push_str("\n[map]\n");
        let layout = match self.map.column_layout {
            ColumnLayout::BeatMajor => "beat-major",
            ColumnLayout::MatPerBeat => "mat-per-beat",
        };
        kv(&mut s, "column_layout", layout);
        let source = match self.map.row_source {
            RowMapSource::SeedScrambled => "seed-scrambled",
            RowMapSource::Identity => "identity",
            RowMapSource::Explicit => "explicit",
        };
        kv(&mut s, "row_source", source);
        if !self.map.row_bit_map.is_empty() {
            kv(&mut s, "row_bit_map", join(&self.map.row_bit_map));
        }
        if let Some(mask) = self.map.row_xor_mask {
            kv(&mut s, "row_xor_mask", format!("0x{mask:x}"));
        }

        s.push_str("\n[variation]\n");
        let v = &self.variation;
        kv(&mut s, "base_trcd_ns", v.base.trcd_ns);
        kv(&mut s, "base_tras_ns", v.base.tras_ns);
        kv(&mut s, "base_trp_ns", v.base.trp_ns);
        kv(&mut s, "base_twr_ns", v.base.twr_ns);
        kv(&mut s, "bitline_coeff_ns", v.bitline_coeff_ns);
        kv(&mut s, "wordline_coeff_ns", v.wordline_coeff_ns);
        kv(&mut s, "precharge_alpha_ns", v.precharge_alpha_ns);
        kv(&mut s, "precharge_beta_ns", v.precharge_beta_ns);
        kv(&mut s, "temp_coeff_ns_per_c", v.temp_coeff_ns_per_c);
        kv(&mut s, "refresh_coeff_ns", v.refresh_coeff_ns);
        kv(&mut s, "process_sigma_ns", v.process_sigma_ns);
        kv(&mut s, "temp_valid_min_c", v.temp_valid_min_c);
        kv(&mut s, "temp_valid_max_c", v.temp_valid_max_c);

        s.push_str("\n[env]\n");
        kv(&mut s, "temperatures_c", join(&self.temperatures_c));
        kv(&mut s, "refresh_intervals_ms", join(&self.refresh_intervals_ms));

        s.push_str("\n[timing]\n");
        kv(&mut s, "trcd_ns", join(&self.timing.trcd_ns));
        kv(&mut s, "tras_ns", join(&self.timing.tras_ns));
        kv(&mut s, "trp_ns", join(&self.timing.trp_ns));
        kv(&mut s, "twr_ns", join(&self.timing.twr_ns));

        s.push_str("\n[patterns]\n");
        let set = match &self.pattern_set {
            PatternSet::Standard => "standard".to_string(),
            PatternSet::Reduced => "reduced".to_string(),
            PatternSet::Named(names) => names.join(", "),
        };
        kv(&mut s, "set", set);
        kv(&mut s, "iterations", self.iterations);

        s.push_str("\n[scan]\n");
        let plan = match self.plan {
            PlanKind::Rows => "rows",
            PlanKind::RowsStrided => "rows-strided",
            PlanKind::Columns => "columns",
            PlanKind::Full => "full",
        };
        kv(&mut s, "plan", plan);
        kv(&mut s, "stride", self.stride);
        kv(&mut s, "emit_logs", self.emit_logs);

        s.push_str("\n[seeds]\n");
        kv(&mut s, "device", join(&self.device_seeds));

        s.push_str("\n[output]\n");
        kv(&mut s, "dir", &self.output_dir);

        s.push_str("\n[profile]\n");
        kv(&mut s, "step_ns", self.profile.step_ns);
        kv(&mut s, "levels", self.profile.levels);
        kv(&mut s, "margin_cycles", self.profile.margin_cycles);

        s.push_str("\n[circuit]\n");
        kv(&mut s, "rows", join(&self.circuit.rows));
        kv(&mut s, "cols", join(&self.circuit.cols));
        kv(&mut s, "act_ns", self.circuit.act_ns);
        kv(&mut s, "pre_ns", self.circuit.pre_ns);

        s.push_str("\n[calibrate]\n");
        let c = &self.calibrate;
        kv(&mut s, "target_cold_over_hot", c.cold_over_hot);
        kv(&mut s, "target_fast_over_slow", c.fast_over_slow);
        kv(&mut s, "applied_trp_ns", c.applied_trp_ns);
        kv(&mut s, "cold_temp_c", c.cold.temperature_c);
        kv(&mut s, "cold_refresh_ms", c.cold.refresh_interval_ms);
        kv(&mut s, "hot_temp_c", c.hot.temperature_c);
        kv(&mut s, "hot_refresh_ms", c.hot.refresh_interval_ms);
        kv(&mut s, "fast_refresh_ms", c.hot_fast_refresh.refresh_interval_ms);
        s
    }

    /// Environment grid in row-major order: temperatures outer, refresh
    /// intervals inner.
    pub fn env_grid(&self) -> Vec<EnvConditions> {
        let mut out = Vec::new();
        for &t in &self.temperatures_c {
            for &r in &self.refresh_intervals_ms {
                out.push(EnvConditions::new(t, r));
            }
        }
        out
    }
}

const KNOWN_SECTIONS: [&str; 12] = [
    "geometry",
    "map",
    "variation",
    "env",
    "timing",
    "patterns",
    "scan",
    "seeds",
    "output",
    "profile",
    "circuit",
    "calibrate",
];

fn unknown(section: &str, key: &str) -> String {
    format!("unknown key {key:?} in [{section}]")
}

fn kv(s: &mut String, key: &str, value: impl fmt::Display) {
    s.push_str(key);
    s.push_str(" = ");
    use fmt::Write as _;
    let _ = write!(s, "{value}");
    s.push('\n');
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_f64(value: &str) -> Result<f64, String> {
    let x: f64 = value
        .parse()
        .map_err(|_| format!("expected a number, got {value:?}"))?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, got {value:?}"));
    }
    Ok(x)
}

fn parse_count(value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("expected a count, got {value:?}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

fn parse_u64(value: &str) -> Result<u64, String> {
    let res = match value.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => value.parse(),
    };
    res.map_err(|_| format!("expected an integer, got {value:?}"))
}

fn parse_list<T>(value: &str, item: fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let out: Vec<T> = value
        .split(',')
        .map(|s| item(s.trim()))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("expected at least one value".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_the_default_configuration() {
        let cfg = ExperimentConfig::parse("", "empty.ini").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn canonical_text_roundtrips_and_is_stable() {
        let cfg = ExperimentConfig::default();
        let text = cfg.canonical_text();
        let reparsed = ExperimentConfig::parse(&text, "canon.ini").unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.canonical_text(), text);
    }

    #[test]
    fn errors_carry_the_offending_line() {
        let text = "[variation]\nprocess_sigma_ns = 0.25\nbogus_key = 3\n";
        let err = ExperimentConfig::parse(text, "exp.ini").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().starts_with("exp.ini:3:"), "{err}");
        assert!(err.message.contains("bogus_key"), "{err}");

        let dup = "[env]\ntemperatures_c = 45\ntemperatures_c = 85\n";
        let err = ExperimentConfig::parse(dup, "exp.ini").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("duplicate"), "{err}");

        let bad = "[timing]\ntrp_ns = fast\n";
        let err = ExperimentConfig::parse(bad, "exp.ini").unwrap_err();
        assert_eq!(err.line, Some(2));

        let loose = "stray = 1\n";
        let err = ExperimentConfig::parse(loose, "exp.ini").unwrap_err();
        assert!(err.message.contains("before any"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_override("variation.process_sigma_ns=0.5").unwrap();
        assert_eq!(cfg.variation.process_sigma_ns, 0.5);
        cfg.apply_override("timing.trp_ns=7.5").unwrap();
        assert_eq!(cfg.timing.trp_ns, vec![7.5]);
        cfg.apply_override("map.column_layout=mat-per-beat").unwrap();
        assert_eq!(cfg.map.column_layout, ColumnLayout::MatPerBeat);
        assert!(cfg.apply_override("variation.nope=1").is_err());
        assert!(cfg.apply_override("no-equals").is_err());
    }

    #[test]
    fn map_specs_build_the_maps_they_describe() {
        let geometry = DeviceGeometry::default();
        let seeded = MapSpec::default().build(&geometry, 9).unwrap();
        assert_eq!(seeded, AddressMap::scrambled_for(&geometry, 9));

        let explicit = MapSpec::explicit_from(&seeded);
        let rebuilt = explicit.build(&geometry, 12345).unwrap();
        assert_eq!(rebuilt, seeded, "explicit specs ignore the seed");

        let identity = MapSpec {
            row_source: RowMapSource::Identity,
            row_xor_mask: Some(0b101),
            ..MapSpec::default()
        };
        let m = identity.build(&geometry, 0).unwrap();
        assert_eq!(m.row_xor_mask, 0b101);
        assert_eq!(m.translate_row(0, &geometry).unwrap(), 0b101);

        let conflicted = MapSpec {
            row_xor_mask: Some(1),
            ..MapSpec::default()
        };
        assert!(conflicted.build(&geometry, 0).is_err());
    }

    #[test]
    fn grid_baselines_follow_the_pinning_rule() {
        let cfg = ExperimentConfig::default();
        let base = cfg.timing.baseline();
        assert_eq!(base.trp_ns, 12.5, "first grid entry");
        assert_eq!(base.trcd_ns, 13.75);
        let while_sweeping = cfg.timing.baseline_for(TimingParam::Trp);
        assert_eq!(while_sweeping, TimingParams::standard());
    }

    #[test]
    fn semantic_validation_names_the_section() {
        let text = "[timing]\ntrp_ns = 5, 7.5\n";
        let err = ExperimentConfig::parse(text, "exp.ini").unwrap_err();
        assert!(err.message.contains("descending"), "{err}");

        let text = "[seeds]\ndevice = 1\n[patterns]\niterations = 0\n";
        let err = ExperimentConfig::parse(text, "exp.ini").unwrap_err();
        assert!(err.message.contains("iterations"), "{err}");

        let text = "[env]\ntemperatures_c = 300\n";
        assert!(ExperimentConfig::parse(text, "exp.ini").is_err());
    }
}
