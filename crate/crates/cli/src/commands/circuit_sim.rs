//! Single-cell access transients at configured mat positions.

use std::io::Write;
use std::path::Path;

use divasim_core::circuit::{
    precharge_residual, restored_voltage, simulate_access, time_to_ready, CircuitParams,
};

use crate::config::ExperimentConfig;
use crate::{CliError, RunContext};

pub fn run(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let params = CircuitParams::default();
    let mut ctx = RunContext::new(cfg, seed, out_dir, "circuit-sim", Vec::new());

    let mut summary = ctx.create(".csv")?;
    writeln!(
        summary,
        "cell_row,cell_col,ready_ns,restored_v_at_precharge,final_cell_v,end_residual_v"
    )?;
    for &row in &cfg.circuit.rows {
        for &col in &cfg.circuit.cols {
            let w = simulate_access(row, col, cfg.circuit.act_ns, cfg.circuit.pre_ns, &params)?;
            let mut wave = ctx.create(&format!("-r{row}-c{col}.csv"))?;
            w.write_csv(&mut wave)?;
            wave.flush()?;

            let ready = time_to_ready(&w, &params)
                .map(|t| t.to_string())
                .unwrap_or_default();
            let restored = restored_voltage(&w, cfg.circuit.pre_ns)?;
            let end_ns = w.samples.last().expect("nonempty waveform").0;
            let residual = precharge_residual(&w, end_ns)?;
            writeln!(
                summary,
                "{row},{col},{ready},{restored},{},{residual}",
                w.final_cell_v
            )?;
        }
    }
    summary.flush()?;
    ctx.write_manifest()?;
    println!(
        "circuit-sim {}: {} waveforms",
        ctx.run_id,
        cfg.circuit.rows.len() * cfg.circuit.cols.len()
    );
    Ok(())
}
