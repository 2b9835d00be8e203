//! Merge error logs into the standard analysis profiles.

use std::io::Write;
use std::path::{Path, PathBuf};

use divasim_core::aggregate::{
    BurstBitCounter, ColumnRequestCounter, ResidueCounter, ResidueKey,
};
use divasim_core::harness::{ErrorRecord, RecordSink, RequestCounter};
use divasim_core::inference::vulnerability_ratio;
use divasim_core::logfile::fold_log_csv;

use crate::config::ExperimentConfig;
use crate::{hex_digest, CliError, RunContext};

/// Per-row record counter plus every other profile, fed in one pass.
struct AggregateSinks<'a> {
    rows: Vec<u64>,
    requests: RequestCounter,
    residue_internal: ResidueCounter<'a>,
    residue_external: ResidueCounter<'a>,
    columns: ColumnRequestCounter,
    bursts: BurstBitCounter,
}

impl RecordSink for AggregateSinks<'_> {
    fn record(&mut self, rec: ErrorRecord) {
        self.rows[rec.ext_row as usize] += 1;
        self.requests.record(rec);
        self.residue_internal.record(rec);
        self.residue_external.record(rec);
        self.columns.record(rec);
        self.bursts.record(rec);
    }
}

pub fn run(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    inputs: &[PathBuf],
) -> Result<(), CliError> {
    // Hash the inputs first so the run id covers exactly the bytes read.
    let mut digests = Vec::with_capacity(inputs.len());
    let mut contents = Vec::with_capacity(inputs.len());
    for path in inputs {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        digests.push((path.display().to_string(), hex_digest(&bytes)));
        contents.push(bytes);
    }
    let mut ctx = RunContext::new(cfg, seed, out_dir, "aggregate", digests);

    let geometry = cfg.geometry.clone();
    // Residue attribution under the device's hidden map; the seed must
    // match the one the logs were collected with.
    let map = cfg.map.build(&geometry, seed)?;
    let mut sinks = AggregateSinks {
        rows: vec![0; geometry.rows_per_bank() as usize],
        requests: RequestCounter::default(),
        residue_internal: ResidueCounter::new(&map, &geometry, ResidueKey::Internal),
        residue_external: ResidueCounter::new(&map, &geometry, ResidueKey::External),
        columns: ColumnRequestCounter::new(&geometry),
        bursts: BurstBitCounter::new(),
    };
    let mut runs = 0usize;
    for bytes in &contents {
        runs += fold_log_csv(bytes.as_slice(), &mut sinks)?.len();
    }

    let mut rows = ctx.create("-rows.csv")?;
    writeln!(rows, "ext_row,records")?;
    for (r, n) in sinks.rows.iter().enumerate() {
        writeln!(rows, "{r},{n}")?;
    }
    rows.flush()?;

    let mut residue = ctx.create("-residue.csv")?;
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

    let mut columns = ctx.create("-columns.csv")?;
    writeln!(columns, "ext_col,failed_requests")?;
    for (c, n) in sinks.columns.counts.iter().enumerate() {
        writeln!(columns, "{c},{n}")?;
    }
    columns.flush()?;

    let mut bursts = ctx.create("-bursts.csv")?;
    writeln!(bursts, "burst_position,failed_bits")?;
    for (b, n) in sinks.bursts.counts.iter().enumerate() {
        writeln!(bursts, "{b},{n}")?;
    }
    bursts.flush()?;

    let ratio = vulnerability_ratio(&sinks.rows)?;
    let mut summary = ctx.create("-metrics.csv")?;
    writeln!(summary, "metric,value")?;
    writeln!(summary, "runs_merged,{runs}")?;
    writeln!(summary, "failed_requests,{}", sinks.requests.count)?;
    writeln!(summary, "records,{}", sinks.rows.iter().sum::<u64>())?;
    writeln!(summary, "vulnerability_ratio,{ratio}")?;
    summary.flush()?;

    ctx.write_manifest()?;
    println!(
        "aggregate {}: {} runs, {} records",
        ctx.run_id,
        runs,
        sinks.rows.iter().sum::<u64>()
    );
    Ok(())
}
