//! Fit the environment coefficients and write the resulting config asset.

use std::io::Write;
use std::path::Path;

use divasim_core::calibrate::{calibrate, expected_requests};

use crate::config::ExperimentConfig;
use crate::{CliError, RunContext};

pub fn run(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let mut ctx = RunContext::new(cfg, seed, out_dir, "calibrate", Vec::new());
    let layout = cfg.map.column_layout;
    let fitted = calibrate(&cfg.variation, &cfg.geometry, layout, &cfg.calibrate)?;

    let mut tuned = cfg.clone();
    tuned.variation = fitted.clone();
    let mut w = ctx.create(".ini")?;
    w.write_all(tuned.canonical_text().as_bytes())?;
    w.flush()?;
    ctx.write_manifest()?;

    // Achieved ratios, from the same closed-form counts the fit used.
    let t = &cfg.calibrate;
    let applied = t.applied_trp_ns;
    let cold = expected_requests(&fitted, &cfg.geometry, layout, t.cold, applied)?;
    let hot = expected_requests(&fitted, &cfg.geometry, layout, t.hot, applied)?;
    let fast = expected_requests(&fitted, &cfg.geometry, layout, t.hot_fast_refresh, applied)?;
    println!(
        "calibrate {}: temp_coeff_ns_per_c {}, refresh_coeff_ns {}",
        ctx.run_id, fitted.temp_coeff_ns_per_c, fitted.refresh_coeff_ns
    );
    println!(
        "  cold/hot {:.6} (target {}), fast/slow {:.6} (target {})",
        cold / hot,
        t.cold_over_hot,
        fast / hot,
        t.fast_over_slow
    );
    println!("  asset {}", ctx.file_name(".ini"));
    Ok(())
}
