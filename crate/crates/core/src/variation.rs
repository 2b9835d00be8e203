//! Required-latency model for individual cells.
//!
//! Each cell needs a minimum value of every timing parameter before an access
//! completes correctly. That requirement decomposes into a design part that
//! depends only on where the cell sits (bitline distance to its sense
//! amplifier, wordline distance to its driver, and how late the precharge
//! control signal reaches its mat), an environment part (temperature and
//! refresh interval), and a per-cell process-variation part drawn from a
//! keyed Gaussian. A cell fails a parameter exactly when the applied value is
//! below its requirement, so failure sets are pure functions of
//! `(device, applied, environment, seed)`.

use crate::error::ModelError;
use crate::geometry::CellCoordinate;
use crate::rng::{self, MAX_NORMAL_SIGMA};

/// The four timing parameters the model tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimingParam {
    Trcd,
    Tras,
    Trp,
    Twr,
}

impl TimingParam {
    pub const ALL: [TimingParam; 4] = [
        TimingParam::Trcd,
        TimingParam::Tras,
        TimingParam::Trp,
        TimingParam::Twr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TimingParam::Trcd => "trcd",
            TimingParam::Tras => "tras",
            TimingParam::Trp => "trp",
            TimingParam::Twr => "twr",
        }
    }

    pub fn parse(s: &str) -> Option<TimingParam> {
        match s {
            "trcd" => Some(TimingParam::Trcd),
            "tras" => Some(TimingParam::Tras),
            "trp" => Some(TimingParam::Trp),
            "twr" => Some(TimingParam::Twr),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            TimingParam::Trcd => 0,
            TimingParam::Tras => 1,
            TimingParam::Trp => 2,
            TimingParam::Twr => 3,
        }
    }

    /// Precharge propagation delays only gate parameters that time the
    /// precharge: the precharge window itself and the restore window that
    /// must finish before it.
    pub fn uses_precharge_arrival(self) -> bool {
        matches!(self, TimingParam::Trp | TimingParam::Tras)
    }
}

/// Clock period of the modeled DDR3-1600 part; memory controllers move
/// timings in whole cycles of this.
pub const DDR3_1600_CYCLE_NS: f64 = 1.25;

/// One value for each timing parameter, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub trcd_ns: f64,
    pub tras_ns: f64,
    pub trp_ns: f64,
    pub twr_ns: f64,
}

impl TimingParams {
    /// Datasheet values for the modeled DDR3-1600 part.
    pub fn standard() -> Self {
        TimingParams {
            trcd_ns: 13.75,
            tras_ns: 35.0,
            trp_ns: 13.75,
            twr_ns: 15.0,
        }
    }

    pub fn get(&self, p: TimingParam) -> f64 {
        match p {
            TimingParam::Trcd => self.trcd_ns,
            TimingParam::Tras => self.tras_ns,
            TimingParam::Trp => self.trp_ns,
            TimingParam::Twr => self.twr_ns,
        }
    }

    pub fn set(&mut self, p: TimingParam, value_ns: f64) {
        match p {
            TimingParam::Trcd => self.trcd_ns = value_ns,
            TimingParam::Tras => self.tras_ns = value_ns,
            TimingParam::Trp => self.trp_ns = value_ns,
            TimingParam::Twr => self.twr_ns = value_ns,
        }
    }

    pub fn with(&self, p: TimingParam, value_ns: f64) -> Self {
        let mut out = *self;
        out.set(p, value_ns);
        out
    }
}

/// Operating conditions a run is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConditions {
    pub temperature_c: f64,
    pub refresh_interval_ms: f64,
}

impl EnvConditions {
    pub fn new(temperature_c: f64, refresh_interval_ms: f64) -> Self {
        EnvConditions {
            temperature_c,
            refresh_interval_ms,
        }
    }

    pub fn validate(&self, config: &VariationConfig) -> Result<(), ModelError> {
        if !(self.temperature_c >= config.temp_valid_min_c
            && self.temperature_c <= config.temp_valid_max_c)
        {
            return Err(ModelError::invalid(
                "environment",
                format!(
                    "temperature {} C outside the model validity range {}..{} C",
                    self.temperature_c, config.temp_valid_min_c, config.temp_valid_max_c
                ),
            ));
        }
        if !(self.refresh_interval_ms > 0.0) {
            return Err(ModelError::invalid(
                "environment",
                "refresh interval must be positive",
            ));
        }
        Ok(())
    }
}

/// Coefficients of the required-latency model.
///
/// The defaults are the calibrated desk-scale set: design coefficients are
/// sized so a reduced-precharge sweep reproduces the documented qualitative
/// behavior (zero errors two steps below standard, mass failure six steps
/// below), and the environment coefficients are fitted by the `calibrate`
/// routine against the temperature and refresh sensitivity targets.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationConfig {
    /// Requirement floor per parameter for a hypothetical zero-distance cell
    /// at 45 C and a 64 ms refresh interval.
    pub base: TimingParams,
    /// Extra requirement at bitline distance 1.0 (ns).
    pub bitline_coeff_ns: f64,
    /// Extra requirement at wordline distance 1.0 (ns).
    pub wordline_coeff_ns: f64,
    /// Per-mat step of the precharge control delay on its main path (ns).
    pub precharge_alpha_ns: f64,
    /// Head start of the secondary precharge path from the far end (ns).
    pub precharge_beta_ns: f64,
    /// Requirement increase per degree C above 45 (ns).
    pub temp_coeff_ns_per_c: f64,
    /// Requirement increase per doubling of the refresh interval over 64 ms.
    pub refresh_coeff_ns: f64,
    /// Standard deviation of the per-cell process-variation term (ns).
    pub process_sigma_ns: f64,
    /// Seed for all keyed draws of this device instance.
    pub rng_seed: u64,
    pub temp_valid_min_c: f64,
    pub temp_valid_max_c: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            base: TimingParams {
                trcd_ns: 2.0,
                tras_ns: 18.0,
                trp_ns: 0.5,
                twr_ns: 4.0,
            },
            bitline_coeff_ns: 4.0,
            wordline_coeff_ns: 0.8,
            precharge_alpha_ns: 0.4,
            precharge_beta_ns: 0.3,
            temp_coeff_ns_per_c: 0.004_602_906_871_082_27,
            refresh_coeff_ns: 0.007_346_014_146_278_32,
            process_sigma_ns: 0.25,
            rng_seed: 1,
            temp_valid_min_c: 45.0,
            temp_valid_max_c: 85.0,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for p in TimingParam::ALL {
            if !(self.base.get(p) >= 0.0) {
                return Err(ModelError::invalid("variation config", "negative base requirement"));
            }
        }
        if self.bitline_coeff_ns < 0.0
            || self.wordline_coeff_ns < 0.0
            || self.temp_coeff_ns_per_c < 0.0
            || self.refresh_coeff_ns < 0.0
            || self.process_sigma_ns < 0.0
        {
            return Err(ModelError::invalid("variation config", "negative coefficient"));
        }
        if self.precharge_beta_ns < 0.0 {
            return Err(ModelError::invalid("variation config", "negative precharge beta"));
        }
        // The main precharge path must be slower per mat than the secondary
        // path's head start, otherwise the arrival maximum degenerates to an
        // edge mat and the interior-mat slowdown disappears.
        if self.precharge_alpha_ns != 0.0 && self.precharge_alpha_ns <= self.precharge_beta_ns {
            return Err(ModelError::invalid(
                "variation config",
                format!(
                    "precharge alpha ({}) must exceed beta ({})",
                    self.precharge_alpha_ns, self.precharge_beta_ns
                ),
            ));
        }
        if self.temp_valid_min_c >= self.temp_valid_max_c {
            return Err(ModelError::invalid("variation config", "empty temperature range"));
        }
        Ok(())
    }

    /// Largest possible magnitude of the process-variation term.
    pub fn noise_bound_ns(&self) -> f64 {
        self.process_sigma_ns * MAX_NORMAL_SIGMA
    }
}

/// When the precharge control signal reaches `mat`, relative to the earliest
/// mat.
///
/// The signal fans out on two paths: a main path entering at mat 0 that costs
/// `alpha` per mat, and a secondary path entering at the far end that starts
/// `beta` late and then also costs `alpha` per mat. Each mat hears whichever
/// path arrives first, so the last-served mat is an interior one.
pub fn precharge_arrival(mat: usize, mats_per_row: usize, config: &VariationConfig) -> f64 {
    debug_assert!(mat < mats_per_row);
    let main = config.precharge_alpha_ns * mat as f64;
    let secondary =
        config.precharge_beta_ns + config.precharge_alpha_ns * (mats_per_row - 1 - mat) as f64;
    main.min(secondary)
}

/// Largest precharge arrival across the row's mats.
pub fn precharge_arrival_max(mats_per_row: usize, config: &VariationConfig) -> f64 {
    (0..mats_per_row)
        .map(|m| precharge_arrival(m, mats_per_row, config))
        .fold(0.0, f64::max)
}

/// Design-only part of the requirement: position-dependent, no environment,
/// no process variation. This is what topology-aware mechanisms may assume
/// they know about a device.
pub fn design_required(
    coord: &CellCoordinate,
    param: TimingParam,
    config: &VariationConfig,
    mats_per_row: usize,
) -> f64 {
    let mut req = config.base.get(param)
        + config.bitline_coeff_ns * coord.bitline_distance
        + config.wordline_coeff_ns * coord.wordline_distance;
    if param.uses_precharge_arrival() {
        req += precharge_arrival(coord.mat, mats_per_row, config);
    }
    req
}

/// Largest design-layer requirement any cell of the device can have, taking
/// both position fractions at their maximum of one.
pub fn design_required_max(param: TimingParam, config: &VariationConfig, mats_per_row: usize) -> f64 {
    let mut req = config.base.get(param) + config.bitline_coeff_ns + config.wordline_coeff_ns;
    if param.uses_precharge_arrival() {
        req += precharge_arrival_max(mats_per_row, config);
    }
    req
}

/// Environment contribution, shared by every cell: linear in temperature
/// above 45 C and logarithmic in the refresh interval relative to 64 ms.
pub fn env_offset(env: &EnvConditions, config: &VariationConfig) -> f64 {
    config.temp_coeff_ns_per_c * (env.temperature_c - 45.0)
        + config.refresh_coeff_ns * (env.refresh_interval_ms / 64.0).log2()
}

/// Per-cell process-variation draw for one parameter, in nanoseconds.
pub fn process_noise(coord: &CellCoordinate, param: TimingParam, config: &VariationConfig) -> f64 {
    config.process_sigma_ns * rng::standard_normal(noise_key(coord, param), config.rng_seed)
}

/// Stable key identifying one (cell, parameter) pair across all access paths.
fn noise_key(coord: &CellCoordinate, param: TimingParam) -> u64 {
    (coord.chip as u64)
        | (coord.bank as u64) << 4
        | (coord.mat as u64) << 8
        | (coord.local_row as u64) << 12
        | (coord.local_col as u64) << 22
        | (coord.subarray as u64) << 32
        | (param.index() as u64) << 52
}

/// Full requirement for one (cell, parameter) pair under `env`.
pub fn required_latency(
    coord: &CellCoordinate,
    param: TimingParam,
    env: &EnvConditions,
    config: &VariationConfig,
    mats_per_row: usize,
) -> f64 {
    design_required(coord, param, config, mats_per_row)
        + env_offset(env, config)
        + process_noise(coord, param, config)
}

/// Set of failed timing parameters for one cell, as a small bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailSet(u8);

impl FailSet {
    pub const EMPTY: FailSet = FailSet(0);

    pub fn insert(&mut self, p: TimingParam) {
        self.0 |= 1 << p.index();
    }

    pub fn contains(self, p: TimingParam) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = TimingParam> {
        TimingParam::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

/// Which parameters fail for `coord` under `applied`: exactly those whose
/// applied value is below the cell's requirement.
pub fn fails(
    coord: &CellCoordinate,
    applied: &TimingParams,
    env: &EnvConditions,
    config: &VariationConfig,
    mats_per_row: usize,
) -> FailSet {
    let mut set = FailSet::EMPTY;
    for p in TimingParam::ALL {
        if applied.get(p) < required_latency(coord, p, env, config, mats_per_row) {
            set.insert(p);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{locate_cell, AddressMap, DeviceGeometry};
    use approx::assert_relative_eq;

    fn cell(ext_row: u64, ext_col: u64, beat: usize, bit: usize) -> CellCoordinate {
        let g = DeviceGeometry::default();
        let m = AddressMap::identity(g.row_bits());
        locate_cell(ext_row, ext_col, beat, bit, &g, &m).unwrap()
    }

    fn neutral_env() -> EnvConditions {
        EnvConditions::new(45.0, 64.0)
    }

    /// Config with every position and environment effect switched off.
    fn flat_config(base_trp: f64) -> VariationConfig {
        VariationConfig {
            base: TimingParams {
                trcd_ns: 9.0,
                tras_ns: 9.0,
                trp_ns: base_trp,
                twr_ns: 9.0,
            },
            bitline_coeff_ns: 0.0,
            wordline_coeff_ns: 0.0,
            precharge_alpha_ns: 0.0,
            precharge_beta_ns: 0.0,
            temp_coeff_ns_per_c: 0.0,
            refresh_coeff_ns: 0.0,
            process_sigma_ns: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn precharge_arrival_small_cases() {
        let cfg = VariationConfig {
            precharge_alpha_ns: 1.0,
            precharge_beta_ns: 0.5,
            ..Default::default()
        };
        // Mat 0 is served instantly by the main path.
        assert_eq!(precharge_arrival(0, 4, &cfg), 0.0);
        // The far mat is served by the secondary path's head start.
        assert_eq!(precharge_arrival(3, 4, &cfg), 0.5);
        // Interior mats wait longest: values 0, 1, 1.5, 0.5.
        let values: Vec<f64> = (0..4).map(|m| precharge_arrival(m, 4, &cfg)).collect();
        assert_eq!(values, vec![0.0, 1.0, 1.5, 0.5]);
        assert_eq!(precharge_arrival_max(4, &cfg), 1.5);
    }

    #[test]
    fn precharge_maximum_lands_on_an_interior_mat() {
        // Brute-force the argmax for the default coefficients and a spread of
        // row widths; alpha > beta keeps the maximum off the edges.
        let cfg = VariationConfig::default();
        for mats in [4usize, 8, 16] {
            let arrivals: Vec<f64> = (0..mats).map(|m| precharge_arrival(m, mats, &cfg)).collect();
            let argmax = arrivals
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(argmax > 0 && argmax < mats - 1, "argmax {argmax} not interior");
        }
    }

    #[test]
    fn degenerate_config_reduces_to_base() {
        let cfg = flat_config(9.0);
        let c = cell(100, 37, 3, 2);
        for p in TimingParam::ALL {
            assert_eq!(
                required_latency(&c, p, &neutral_env(), &cfg, 8),
                cfg.base.get(p)
            );
        }
    }

    #[test]
    fn bitline_term_is_linear_in_distance() {
        let mut cfg = flat_config(5.0);
        cfg.bitline_coeff_ns = 2.0;
        // Same column parity, different rows: distances 1.0 and 0.0.
        let near = cell(511, 0, 0, 0); // top side, local row 511 -> distance 0
        let far = cell(0, 0, 0, 0); // top side, local row 0 -> distance 1
        let e = neutral_env();
        let d_near = required_latency(&near, TimingParam::Trp, &e, &cfg, 8);
        let d_far = required_latency(&far, TimingParam::Trp, &e, &cfg, 8);
        assert_relative_eq!(d_far - d_near, 2.0);
    }

    #[test]
    fn environment_terms_shift_all_cells_equally() {
        let cfg = VariationConfig::default();
        let hot = EnvConditions::new(85.0, 64.0);
        let cold = EnvConditions::new(45.0, 64.0);
        let slow_refresh = EnvConditions::new(45.0, 256.0);
        assert_relative_eq!(
            env_offset(&hot, &cfg) - env_offset(&cold, &cfg),
            40.0 * cfg.temp_coeff_ns_per_c
        );
        assert_relative_eq!(
            env_offset(&slow_refresh, &cfg) - env_offset(&cold, &cfg),
            2.0 * cfg.refresh_coeff_ns
        );
        assert_eq!(env_offset(&cold, &cfg), 0.0);
    }

    #[test]
    fn fails_is_empty_at_standard_with_small_coefficients() {
        let cfg = VariationConfig::default();
        let e = EnvConditions::new(85.0, 256.0);
        let applied = TimingParams::standard();
        for ext_row in [0u64, 255, 511, 32767] {
            for ext_col in [0u64, 100, 511] {
                let c = cell(ext_row, ext_col, 0, 0);
                assert!(fails(&c, &applied, &e, &cfg, 8).is_empty());
            }
        }
    }

    #[test]
    fn single_parameter_threshold_behaves() {
        let cfg = flat_config(9.0);
        let c = cell(0, 0, 0, 0);
        let e = neutral_env();
        let ok = TimingParams::standard().with(TimingParam::Trp, 10.0);
        assert!(fails(&c, &ok, &e, &cfg, 8).is_empty());
        let low = TimingParams::standard().with(TimingParam::Trp, 8.5);
        let set = fails(&c, &low, &e, &cfg, 8);
        assert!(set.contains(TimingParam::Trp));
        assert_eq!(set.iter().count(), 1);
        // Exactly at the requirement: not a failure (strict inequality).
        let exact = TimingParams::standard().with(TimingParam::Trp, 9.0);
        assert!(fails(&c, &exact, &e, &cfg, 8).is_empty());
    }

    #[test]
    fn requirements_are_bit_deterministic() {
        let cfg = VariationConfig::default();
        let e = EnvConditions::new(85.0, 256.0);
        let c = cell(12345, 42, 5, 3);
        let a = required_latency(&c, TimingParam::Trp, &e, &cfg, 8);
        let b = required_latency(&c, TimingParam::Trp, &e, &cfg, 8);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn noise_is_independent_per_parameter_and_cell() {
        let cfg = VariationConfig::default();
        let c1 = cell(1, 1, 0, 0);
        let c2 = cell(2, 1, 0, 0);
        let n_rcd = process_noise(&c1, TimingParam::Trcd, &cfg);
        let n_trp = process_noise(&c1, TimingParam::Trp, &cfg);
        assert_ne!(n_rcd.to_bits(), n_trp.to_bits());
        assert_ne!(
            process_noise(&c1, TimingParam::Trp, &cfg).to_bits(),
            process_noise(&c2, TimingParam::Trp, &cfg).to_bits()
        );
    }

    #[test]
    fn failure_fraction_grows_as_applied_shrinks() {
        // Monte Carlo over a cell sample at the calibrated defaults: the
        // failing fraction must rise strictly through 10.0 -> 6.25 -> 5.0 ns.
        let cfg = VariationConfig::default();
        let e = EnvConditions::new(85.0, 256.0);
        let mut counts = [0u32; 3];
        let values = [10.0, 6.25, 5.0];
        for ext_row in (0..32768u64).step_by(97) {
            for ext_col in [0u64, 127, 313, 479] {
                let c = cell(ext_row, ext_col, 2, 1);
                for (i, v) in values.iter().enumerate() {
                    let applied = TimingParams::standard().with(TimingParam::Trp, *v);
                    if fails(&c, &applied, &e, &cfg, 8).contains(TimingParam::Trp) {
                        counts[i] += 1;
                    }
                }
            }
        }
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
    }

    #[test]
    fn lowering_a_value_never_removes_a_failure() {
        let cfg = VariationConfig::default();
        let e = EnvConditions::new(85.0, 256.0);
        for ext_row in (0..32768u64).step_by(1013) {
            let c = cell(ext_row, 200, 4, 6);
            let hi = TimingParams::standard().with(TimingParam::Trp, 8.0);
            let lo = TimingParams::standard().with(TimingParam::Trp, 6.0);
            let f_hi = fails(&c, &hi, &e, &cfg, 8);
            let f_lo = fails(&c, &lo, &e, &cfg, 8);
            for p in f_hi.iter() {
                assert!(f_lo.contains(p), "failure at 8.0 must persist at 6.0");
            }
        }
    }

    #[test]
    fn hotter_environment_never_lowers_a_requirement() {
        let cfg = VariationConfig::default();
        let hot = EnvConditions::new(85.0, 256.0);
        let cold = EnvConditions::new(45.0, 256.0);
        for ext_row in (0..32768u64).step_by(509) {
            let c = cell(ext_row, 300, 1, 1);
            for p in TimingParam::ALL {
                assert!(
                    required_latency(&c, p, &hot, &cfg, 8)
                        >= required_latency(&c, p, &cold, &cfg, 8)
                );
            }
        }
    }

    #[test]
    fn env_validation_enforces_the_model_range() {
        let cfg = VariationConfig::default();
        assert!(EnvConditions::new(30.0, 64.0).validate(&cfg).is_err());
        assert!(EnvConditions::new(64.0, 0.0).validate(&cfg).is_err());
        assert!(EnvConditions::new(55.0, 128.0).validate(&cfg).is_ok());
    }

    #[test]
    fn config_validation_rejects_alpha_not_above_beta() {
        let cfg = VariationConfig {
            precharge_alpha_ns: 0.2,
            precharge_beta_ns: 0.3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(VariationConfig::default().validate().is_ok());
    }
}
