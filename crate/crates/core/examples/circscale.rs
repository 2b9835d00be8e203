use divasim_core::circuit::{
    precharge_residual, restored_voltage, simulate_access, time_to_ready, CircuitParams,
};
use std::time::Instant;

fn main() {
    let p = CircuitParams::default();
    println!("stability bound: {:.3e} s (dt {:.3e})", p.stability_bound_s(), p.timestep_s);

    let t0 = Instant::now();
    let near = simulate_access(0, 0, 0.0, 30.0, &p).unwrap();
    println!("one sim: {:.2?} ({} samples)", t0.elapsed(), near.samples.len());
    let far = simulate_access(511, 0, 0.0, 30.0, &p).unwrap();
    let near_col = simulate_access(256, 0, 0.0, 30.0, &p).unwrap();
    let far_col = simulate_access(256, 511, 0.0, 30.0, &p).unwrap();

    let tn = time_to_ready(&near, &p);
    let tf = time_to_ready(&far, &p);
    println!("A ready: near {:?} far {:?}", tn, tf);
    println!(
        "B restored@30: near {:.4} far {:.4}",
        restored_voltage(&near, 30.0).unwrap(),
        restored_voltage(&far, 30.0).unwrap()
    );
    println!(
        "C residual@40: near {:.4} far {:.4}",
        precharge_residual(&near, 40.0).unwrap(),
        precharge_residual(&far, 40.0).unwrap()
    );
    println!(
        "D cell final: near-col {:.4} far-col {:.4}",
        near_col.final_cell_v, far_col.final_cell_v
    );
    println!(
        "E residual@33: near-col {:.4} far-col {:.4}",
        precharge_residual(&near_col, 33.0).unwrap(),
        precharge_residual(&far_col, 33.0).unwrap()
    );

    let half = CircuitParams { timestep_s: p.timestep_s / 2.0, ..p.clone() };
    let t1 = Instant::now();
    let fine = simulate_access(511, 0, 0.0, 30.0, &half).unwrap();
    println!("half-step sim: {:.2?}", t1.elapsed());
    println!(
        "halving: {:?} vs {:?}",
        time_to_ready(&far, &p),
        time_to_ready(&fine, &half)
    );
}
