//! Scan the applied-timing grids and write failure profiles.
//!
//! Parameters with several grid values are swept one at a time while the
//! others hold their pinned or standard values. Each (parameter, value,
//! environment) run writes a per-residue request profile and a per-column
//! request profile; raw error logs are opt-in via `[scan] emit_logs`
//! because reduced timings can fail a large share of all requests.

use std::io::Write;
use std::path::Path;

use divasim_core::aggregate::{ColumnRequestCounter, ResidueCounter, ResidueKey};
use divasim_core::harness::{scan, Device, ErrorRecord, RecordSink, RequestCounter, RunMeta, ScanOptions};
use divasim_core::logfile::CsvSink;
use divasim_core::variation::{EnvConditions, TimingParam, TimingParams};

use crate::config::ExperimentConfig;
use crate::{build_device, env_tag, value_tag, CliError, RunContext};

pub fn run(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let device = build_device(cfg, seed)?;
    let patterns = cfg.pattern_set.resolve()?;
    let options = ScanOptions {
        iterations: cfg.iterations,
        ..ScanOptions::default()
    };
    let plan = cfg.plan.build(&device.geometry, cfg.stride);
    let mut ctx = RunContext::new(cfg, seed, out_dir, "sweep", Vec::new());

    let mut summary = ctx.create("-summary.csv")?;
    writeln!(
        summary,
        "swept_param,trcd_ns,tras_ns,trp_ns,twr_ns,temp_c,refresh_ms,failed_requests"
    )?;

    let swept: Vec<TimingParam> = TimingParam::ALL
        .into_iter()
        .filter(|p| cfg.timing.grid(*p).len() > 1)
        .collect();
    let envs = cfg.env_grid();

    if swept.is_empty() {
        let applied = cfg.timing.baseline();
        for env in &envs {
            let tag = format!("-baseline-{}", env_tag(env));
            let count = run_one(cfg, &device, &applied, env, &patterns, &options, &plan, &mut ctx, &tag)?;
            write_summary_row(&mut summary, "none", &applied, env, count)?;
        }
    }
    for param in swept {
        let baseline = cfg.timing.baseline_for(param);
        for &value in cfg.timing.grid(param) {
            let applied = baseline.with(param, value);
            for env in &envs {
                let tag = format!("-{}-{}-{}", param.label(), value_tag(value), env_tag(env));
                let count =
                    run_one(cfg, &device, &applied, env, &patterns, &options, &plan, &mut ctx, &tag)?;
                write_summary_row(&mut summary, param.label(), &applied, env, count)?;
            }
        }
    }
    summary.flush()?;
    ctx.write_manifest()?;
    println!("sweep {} complete", ctx.run_id);
    Ok(())
}

/// Everything one scan feeds, updated in a single pass.
struct SweepSinks<'a> {
    requests: RequestCounter,
    residue_internal: ResidueCounter<'a>,
    residue_external: ResidueCounter<'a>,
    columns: ColumnRequestCounter,
    log: Option<CsvSink<std::io::BufWriter<std::fs::File>>>,
}

impl RecordSink for SweepSinks<'_> {
    fn record(&mut self, rec: ErrorRecord) {
        self.requests.record(rec);
        self.residue_internal.record(rec);
        self.residue_external.record(rec);
        self.columns.record(rec);
        if let Some(log) = &mut self.log {
            log.record(rec);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    device: &Device,
    applied: &TimingParams,
    env: &EnvConditions,
    patterns: &[divasim_core::harness::DataPattern],
    options: &ScanOptions,
    plan: &divasim_core::harness::ScanPlan,
    ctx: &mut RunContext,
    tag: &str,
) -> Result<u64, CliError> {
    let log = if cfg.emit_logs {
        let w = ctx.create(&format!("{tag}-log.csv"))?;
        let meta = RunMeta {
            run_id: format!("{}{}", ctx.run_id, tag),
            applied: *applied,
            env: *env,
        };
        Some(CsvSink::new(w, meta)?)
    } else {
        None
    };
    let mut sinks = SweepSinks {
        requests: RequestCounter::default(),
        residue_internal: ResidueCounter::new(&device.map, &device.geometry, ResidueKey::Internal),
        residue_external: ResidueCounter::new(&device.map, &device.geometry, ResidueKey::External),
        columns: ColumnRequestCounter::new(&device.geometry),
        log,
    };
    scan(device, applied, env, patterns, options, plan, &mut sinks)?;
    if let Some(log) = sinks.log {
        log.finish()?.flush()?;
    }

    let mut residue = ctx.create(&format!("{tag}-residue.csv"))?;
    writeln!(residue, "residue,external_records,internal_records")?;
    for (r, (ext, int)) in sinks
        .residue_external
        .counts
        .iter()
        .zip(&sinks.residue_internal.counts)
        .enumerate()
    {
        writeln!(residue, "{r},{ext},{int}")?;
    }
    residue.flush()?;

    let mut columns = ctx.create(&format!("{tag}-columns.csv"))?;
    writeln!(columns, "ext_col,failed_requests")?;
    for (c, n) in sinks.columns.counts.iter().enumerate() {
        writeln!(columns, "{c},{n}")?;
    }
    columns.flush()?;
    Ok(sinks.requests.count)
}

fn write_summary_row<W: Write>(
    w: &mut W,
    param: &str,
    applied: &TimingParams,
    env: &EnvConditions,
    count: u64,
) -> Result<(), CliError> {
    writeln!(
        w,
        "{param},{},{},{},{},{},{},{count}",
        applied.trcd_ns,
        applied.tras_ns,
        applied.trp_ns,
        applied.twr_ns,
        env.temperature_c,
        env.refresh_interval_ms
    )?;
    Ok(())
}
