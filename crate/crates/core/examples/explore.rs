//! Scratch exploration of model behavior at full device scale.

use divasim_core::aggregate::{counts_by_row, counts_by_row_residue, ResidueKey};
use divasim_core::harness::{collect_log, env_sensitivity, sweep, Device, ScanOptions, ScanPlan};
use divasim_core::stats::{autocorrelation, cosine_similarity};
use divasim_core::variation::{EnvConditions, TimingParam, TimingParams};
use divasim_core::DataPattern;

fn main() {
    let device = Device::standard(1);
    let hot = EnvConditions::new(85.0, 256.0);
    let cold = EnvConditions::new(45.0, 256.0);
    let fast_refresh = EnvConditions::new(85.0, 64.0);
    let patterns = DataPattern::reduced_set();
    let opts = ScanOptions::default();
    let plan = ScanPlan::row_sweep(&device.geometry);
    let total_requests = (plan.rows.len() * plan.cols.len() * patterns.len()) as f64;

    let t0 = std::time::Instant::now();
    let points = sweep(
        &device,
        TimingParam::Trp,
        &[12.5, 10.0, 7.5, 5.0],
        &TimingParams::standard(),
        &hot,
        &patterns,
        &opts,
        &plan,
    )
    .unwrap();
    println!("trp sweep at 85C/256ms ({}s):", t0.elapsed().as_secs_f32());
    for p in &points {
        println!(
            "  {:>5} ns -> {:>8} erroneous requests ({:.3}%)",
            p.value_ns,
            p.erroneous_requests,
            100.0 * p.erroneous_requests as f64 / total_requests
        );
    }

    let t0 = std::time::Instant::now();
    let applied = TimingParams::standard().with(TimingParam::Trp, 7.5);
    let counts =
        env_sensitivity(&device, &applied, &[cold, hot, fast_refresh], &patterns, &opts, &plan)
            .unwrap();
    println!(
        "env at trp 7.5 ({}s): cold {} hot {} fast-refresh {}",
        t0.elapsed().as_secs_f32(),
        counts[0],
        counts[1],
        counts[2]
    );
    println!(
        "  temp ratio cold/hot = {:.4} (target 0.10), refresh ratio fast/slow = {:.4} (target 0.85)",
        counts[0] as f64 / counts[1] as f64,
        counts[2] as f64 / counts[1] as f64
    );

    // Residue profiles for cosine + edge/middle structure.
    let t0 = std::time::Instant::now();
    let log_hot = collect_log(&device, &applied, &hot, &patterns, &opts, &plan).unwrap();
    let log_cold = collect_log(&device, &applied, &cold, &patterns, &opts, &plan).unwrap();
    let prof_hot: Vec<f64> =
        counts_by_row_residue(&log_hot.records, &device.map, &device.geometry, ResidueKey::Internal)
            .iter()
            .map(|c| *c as f64)
            .collect();
    let prof_cold: Vec<f64> =
        counts_by_row_residue(&log_cold.records, &device.map, &device.geometry, ResidueKey::Internal)
            .iter()
            .map(|c| *c as f64)
            .collect();
    println!("profiles ({}s):", t0.elapsed().as_secs_f32());
    println!("  cosine(cold, hot) = {:.4}", cosine_similarity(&prof_cold, &prof_hot));
    let edge: f64 = prof_hot[..16].iter().chain(&prof_hot[496..]).sum::<f64>() / 32.0;
    let middle: f64 = prof_hot[248..264].iter().sum::<f64>() / 16.0;
    println!("  hot edge mean {edge:.1} vs middle mean {middle:.1}");
    let decile = |p: &[f64]| {
        let mut v: Vec<f64> = p.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len() / 10;
        (v[v.len() - n..].iter().sum::<f64>(), v[..n].iter().sum::<f64>().max(1.0))
    };
    let (top, bottom) = decile(&prof_hot);
    println!("  vulnerability ratio (top decile / bottom decile) = {:.1}", top / bottom);

    // External per-row counts: the scrambled map must preserve lag-512
    // periodicity.
    let per_row: Vec<f64> = counts_by_row(&log_hot.records, &device.geometry)
        .iter()
        .map(|c| *c as f64)
        .collect();
    let r512 = autocorrelation(&per_row, 512);
    let mut best_other = (0usize, f64::MIN);
    for lag in 1..512 {
        let r = autocorrelation(&per_row, lag);
        if r > best_other.1 {
            best_other = (lag, r);
        }
    }
    println!(
        "  autocorr lag512 = {:.4}, best lag in 1..511 = {:.4} at {}",
        r512, best_other.1, best_other.0
    );

    // Per-mat structure: confirm the interior mat is hottest by column.
    let hot_cols = ScanPlan::column_sweep(&device.geometry);
    let log_cols = collect_log(&device, &applied, &hot, &patterns, &opts, &hot_cols).unwrap();
    let by_col = divasim_core::aggregate::requests_by_column(&log_cols.records, &device.geometry);
    let per_mat: Vec<u64> = by_col.chunks(64).map(|c| c.iter().sum()).collect();
    println!("  requests per mat (column sweep): {per_mat:?}");
}
