//! Compare uncorrectable-codeword fractions across ECC bit layouts.
//!
//! Each seed gets its own device; the scan collects every raw bit failure
//! at the configured baseline timings and the codeword analysis asks how
//! many (request, beat) groups hold more than one failed bit under the
//! straight-through layout versus the per-chip shuffled one.

use std::io::Write;
use std::path::Path;

use divasim_core::ecc::{analysis_scan_options, correctable_fraction_with_ecc_chip, ShuffleLayout};
use divasim_core::geometry::ColumnLayout;
use divasim_core::harness::collect_log;

use crate::config::ExperimentConfig;
use crate::{build_device, CliError, RunContext};

pub fn run(cfg: &ExperimentConfig, seeds: &[u64], out_dir: &Path) -> Result<(), CliError> {
    if cfg.map.column_layout != ColumnLayout::MatPerBeat {
        return Err(CliError::Config(
            "ecc-analyze needs map.column_layout = mat-per-beat so burst positions keep \
             stable per-mat characteristics"
                .into(),
        ));
    }
    let patterns = cfg.pattern_set.resolve()?;
    let env = cfg.env_grid()[0];
    let applied = cfg.timing.baseline();
    let mut options = analysis_scan_options();
    options.iterations = cfg.iterations;
    let mut ctx = RunContext::new(cfg, seeds[0], out_dir, "ecc-analyze", Vec::new());

    let mut w = ctx.create(".csv")?;
    writeln!(
        w,
        "seed,records,identity_uncorrectable,shuffled_uncorrectable,relative_reduction_pct"
    )?;
    let identity = ShuffleLayout::identity();
    let shuffled = ShuffleLayout::diva();
    let mut reductions = Vec::new();
    for &seed in seeds {
        let device = build_device(cfg, seed)?;
        let plan = cfg.plan.build(&device.geometry, cfg.stride);
        let log = collect_log(&device, &applied, &env, &patterns, &options, &plan)?;
        let frac = |layout: &ShuffleLayout| {
            correctable_fraction_with_ecc_chip(&log.records, layout, &device, &applied, &env)
        };
        let (id_unc, sh_unc) = match (frac(&identity), frac(&shuffled)) {
            (Some(id), Some(sh)) => (1.0 - id, 1.0 - sh),
            _ => {
                writeln!(w, "{seed},0,,,")?;
                continue;
            }
        };
        let reduction = if id_unc > 0.0 {
            (id_unc - sh_unc) / id_unc * 100.0
        } else {
            0.0
        };
        reductions.push(reduction);
        writeln!(
            w,
            "{seed},{},{id_unc},{sh_unc},{reduction}",
            log.records.len()
        )?;
    }
    w.flush()?;
    ctx.write_manifest()?;

    if reductions.is_empty() {
        println!("ecc-analyze {}: no codewords failed at the baseline timings", ctx.run_id);
    } else {
        let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
        println!(
            "ecc-analyze {}: mean uncorrectable reduction {mean:.1}% over {} seeds",
            ctx.run_id,
            reductions.len()
        );
    }
    Ok(())
}
