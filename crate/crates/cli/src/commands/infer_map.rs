//! Estimate the hidden row remap from a per-row error-count profile.

use std::io::Write;
use std::path::Path;

use divasim_core::inference::{estimate_row_mapping, vulnerability_ratio};

use crate::config::ExperimentConfig;
use crate::{hex_digest, CliError, RunContext};

pub fn run(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    input: &Path,
) -> Result<(), CliError> {
    let bytes = std::fs::read(input)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
    let counts = parse_counts(&bytes, input)?;
    let nbits = counts.len().trailing_zeros() as usize;
    if counts.len() != 1 << nbits {
        return Err(CliError::Runtime(format!(
            "{}: {} rows is not a power of two",
            input.display(),
            counts.len()
        )));
    }
    let digests = vec![(input.display().to_string(), hex_digest(&bytes))];
    let mut ctx = RunContext::new(cfg, seed, out_dir, "infer-map", digests);

    let estimate = estimate_row_mapping(&counts, nbits)?;
    let ratio = vulnerability_ratio(&counts)?;

    let mut w = ctx.create(".csv")?;
    writeln!(w, "external_bit,internal_bit,confidence")?;
    for (bit, &internal) in estimate.permutation.as_slice().iter().enumerate() {
        writeln!(w, "{bit},{internal},{}", estimate.confidence[internal])?;
    }
    w.flush()?;
    ctx.write_manifest()?;

    let mean = estimate.confidence.iter().sum::<f64>() / estimate.confidence.len() as f64;
    println!(
        "infer-map {}: {nbits}-bit map from {} rows, mean confidence {mean:.3}, vulnerability ratio {ratio:.1}",
        ctx.run_id, estimate.rows_used
    );
    Ok(())
}

/// Read a `row,count` CSV (any header) into a dense count vector.
fn parse_counts(bytes: &[u8], path: &Path) -> Result<Vec<u64>, CliError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| CliError::Runtime(format!("{}: not UTF-8", path.display())))?;
    let mut rows: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |s: Option<&str>| -> Option<u64> { s?.trim().parse().ok() };
        let row = parse(fields.next());
        let count = parse(fields.next());
        match (row, count) {
            (Some(r), Some(c)) => rows.push((r, c)),
            _ => {
                return Err(CliError::Runtime(format!(
                    "{}:{}: expected `row,count`, got {line:?}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    rows.sort_unstable();
    for (expect, &(row, _)) in rows.iter().enumerate() {
        if row != expect as u64 {
            return Err(CliError::Runtime(format!(
                "{}: rows must cover 0..{} densely",
                path.display(),
                rows.len()
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, c)| c).collect())
}
