//! Read/write latency totals and reduction arithmetic.
//!
//! A read pays activation, restore, and precharge back to back, so its
//! latency total is tRAS + tRP + tRCD; a write replaces the restore term
//! with the write recovery window, tWR + tRP + tRCD. Reductions are
//! reported against the standard values both as a percentage and as whole
//! clock cycles.

use crate::error::ModelError;
use crate::variation::TimingParams;

/// Latency totals for one set of operating values, with reductions
/// relative to a standard set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub read_total_ns: f64,
    pub write_total_ns: f64,
    /// Percent saved off the standard read total.
    pub read_reduction_pct: f64,
    /// Percent saved off the standard write total.
    pub write_reduction_pct: f64,
    pub read_reduction_cycles: i64,
    pub write_reduction_cycles: i64,
}

/// Total nanoseconds one read occupies: activate, restore, precharge.
pub fn read_total_ns(t: &TimingParams) -> f64 {
    t.tras_ns + t.trp_ns + t.trcd_ns
}

/// Total nanoseconds one write occupies: activate, recover, precharge.
pub fn write_total_ns(t: &TimingParams) -> f64 {
    t.twr_ns + t.trp_ns + t.trcd_ns
}

/// Summarizes reduced operating values against standard ones.
pub fn summarize(
    reduced: &TimingParams,
    standard: &TimingParams,
    clock_period_ns: f64,
) -> Result<LatencySummary, ModelError> {
    if clock_period_ns <= 0.0 {
        return Err(ModelError::invalid("clock period", "must be positive"));
    }
    for (r, s, name) in [
        (reduced.trcd_ns, standard.trcd_ns, "trcd"),
        (reduced.tras_ns, standard.tras_ns, "tras"),
        (reduced.trp_ns, standard.trp_ns, "trp"),
        (reduced.twr_ns, standard.twr_ns, "twr"),
    ] {
        if r > s {
            return Err(ModelError::invalid(
                "reduced timing",
                format!("{name} {r} exceeds the standard value {s}"),
            ));
        }
    }
    let read = read_total_ns(reduced);
    let write = write_total_ns(reduced);
    let read_std = read_total_ns(standard);
    let write_std = write_total_ns(standard);
    Ok(LatencySummary {
        read_total_ns: read,
        write_total_ns: write,
        read_reduction_pct: 100.0 * (1.0 - read / read_std),
        write_reduction_pct: 100.0 * (1.0 - write / write_std),
        read_reduction_cycles: ((read_std - read) / clock_period_ns).round() as i64,
        write_reduction_cycles: ((write_std - write) / clock_period_ns).round() as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::DDR3_1600_CYCLE_NS;
    use approx::assert_relative_eq;

    #[test]
    fn standard_values_reduce_nothing() {
        let std = TimingParams::standard();
        let s = summarize(&std, &std, DDR3_1600_CYCLE_NS).unwrap();
        assert_relative_eq!(s.read_reduction_pct, 0.0);
        assert_relative_eq!(s.write_reduction_pct, 0.0);
        assert_eq!(s.read_reduction_cycles, 0);
        assert_eq!(s.write_reduction_cycles, 0);
        assert_relative_eq!(s.read_total_ns, 62.5);
    }

    #[test]
    fn pinned_read_reduction_is_thirty_five_percent() {
        let std = TimingParams::standard();
        let reduced = TimingParams {
            tras_ns: 21.25,
            trp_ns: 10.0,
            trcd_ns: 9.375,
            twr_ns: std.twr_ns,
        };
        let s = summarize(&reduced, &std, DDR3_1600_CYCLE_NS).unwrap();
        assert_relative_eq!(read_total_ns(&reduced), 40.625);
        assert_relative_eq!(s.read_reduction_pct, 35.0);
        // 21.875ns saved is 17.5 cycles; rounding lands on 18.
        assert_eq!(s.read_reduction_cycles, 18);
    }

    #[test]
    fn halving_everything_halves_both_totals() {
        let std = TimingParams::standard();
        let half = TimingParams {
            trcd_ns: std.trcd_ns / 2.0,
            tras_ns: std.tras_ns / 2.0,
            trp_ns: std.trp_ns / 2.0,
            twr_ns: std.twr_ns / 2.0,
        };
        let s = summarize(&half, &std, DDR3_1600_CYCLE_NS).unwrap();
        assert_relative_eq!(s.read_reduction_pct, 50.0);
        assert_relative_eq!(s.write_reduction_pct, 50.0);
    }

    #[test]
    fn values_above_standard_are_rejected() {
        let std = TimingParams::standard();
        let mut above = std;
        above.trp_ns += 0.1;
        assert!(summarize(&above, &std, DDR3_1600_CYCLE_NS).is_err());
        assert!(summarize(&std, &std, 0.0).is_err());
    }
}
