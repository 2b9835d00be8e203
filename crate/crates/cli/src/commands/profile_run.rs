//! Run the online profiling walk on one device.

use std::io::Write;
use std::path::Path;

use divasim_core::profiling::{profile, select_test_rows, ProfileGrid, ProfileOptions, ProfileResult};
use divasim_core::variation::{TimingParam, TimingParams, DDR3_1600_CYCLE_NS};

use crate::config::ExperimentConfig;
use crate::{build_device, CliError, RunContext};

pub fn run(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let device = build_device(cfg, seed)?;
    let patterns = cfg.pattern_set.resolve()?;
    let env = cfg.env_grid()[0];
    let standard = TimingParams::standard();
    let grid = ProfileGrid::descending(&standard, cfg.profile.step_ns, cfg.profile.levels);
    let options = ProfileOptions {
        margin_cycles: cfg.profile.margin_cycles,
        clock_period_ns: DDR3_1600_CYCLE_NS,
        iterations: cfg.iterations,
    };
    let mut ctx = RunContext::new(cfg, seed, out_dir, "profile", Vec::new());

    let region = select_test_rows(&device);
    let mut regions = ctx.create("-regions.csv")?;
    writeln!(regions, "subarray,reserved_external_row")?;
    for (subarray, ext_row) in region.external_rows(&device).iter().enumerate() {
        writeln!(regions, "{subarray},{ext_row}")?;
    }
    regions.flush()?;

    let outcome = match profile(&device, &region, &grid, &env, &patterns, &options)? {
        ProfileResult::Profiled(outcome) => outcome,
        ProfileResult::Rejected { param } => {
            return Err(CliError::Runtime(format!(
                "device fails standard {} in its test regions; module would be rejected",
                param.label()
            )));
        }
    };

    let mut w = ctx.create(".csv")?;
    writeln!(w, "param,standard_ns,minimal_ns,chosen_ns,margin_cycles")?;
    for param in TimingParam::ALL {
        writeln!(
            w,
            "{},{},{},{},{}",
            param.label(),
            standard.get(param),
            outcome.minimal.get(param),
            outcome.chosen.get(param),
            outcome.margin_cycles
        )?;
    }
    w.flush()?;
    ctx.write_manifest()?;

    println!(
        "profile {} at {}C/{}ms: chosen trcd {} tras {} trp {} twr {}",
        ctx.run_id,
        env.temperature_c,
        env.refresh_interval_ms,
        outcome.chosen.trcd_ns,
        outcome.chosen.tras_ns,
        outcome.chosen.trp_ns,
        outcome.chosen.twr_ns
    );
    Ok(())
}
