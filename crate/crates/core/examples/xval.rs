// Scratch cross-check: realized full-device scan counts vs the closed-form
// expectation used by calibrate. Delete before release.

use std::time::Instant;

use divasim_core::calibrate::{expected_requests, expected_residue_profile};
use divasim_core::harness::{
    collect_log, env_sensitivity, scan, DataPattern, Device, ErrorRecord, RecordSink, ScanOptions,
    ScanPlan,
};
use divasim_core::stats::cosine_similarity;
use divasim_core::{EnvConditions, TimingParam, TimingParams};

struct ResidueRequests<'a> {
    device: &'a Device,
    counts: Vec<u64>,
    last: Option<(DataPattern, u32, u64, u32)>,
}

impl RecordSink for ResidueRequests<'_> {
    fn record(&mut self, rec: ErrorRecord) {
        let key = (rec.pattern, rec.iteration, rec.ext_row, rec.ext_col);
        if self.last == Some(key) {
            return;
        }
        self.last = Some(key);
        let internal = self
            .device
            .map
            .translate_row(rec.ext_row, &self.device.geometry)
            .unwrap();
        self.counts[(internal % 512) as usize] += 1;
    }
}

fn main() {
    let device = Device::standard(1);
    let applied = TimingParams::standard().with(TimingParam::Trp, 7.5);
    let envs = [
        EnvConditions::new(45.0, 256.0),
        EnvConditions::new(85.0, 256.0),
        EnvConditions::new(85.0, 64.0),
    ];
    let pattern = [DataPattern::parse("0101-stripe").unwrap()];
    let plan = ScanPlan::full(&device.geometry);
    let opts = ScanOptions::default();

    let layout = device.map.column_layout;
    for env in &envs {
        let e = expected_requests(&device.variation, &device.geometry, layout, *env, 7.5).unwrap();
        println!("model expected {env:?}: {e:.1}");
    }

    let t0 = Instant::now();
    let joint = env_sensitivity(&device, &applied, &envs, &pattern, &opts, &plan).unwrap();
    let t_joint = t0.elapsed();
    println!("realized joint counts: {joint:?}  ({t_joint:?})");
    println!(
        "realized ratios: cold/hot {:.4}  fast/slow {:.4}",
        joint[0] as f64 / joint[1] as f64,
        joint[2] as f64 / joint[1] as f64
    );

    // Per-residue request profile at the hot environment vs the model curve.
    let t1 = Instant::now();
    let mut sink = ResidueRequests {
        device: &device,
        counts: vec![0; 512],
        last: None,
    };
    scan(&device, &applied, &envs[1], &pattern, &opts, &plan, &mut sink).unwrap();
    let t_hot = t1.elapsed();
    let model =
        expected_residue_profile(&device.variation, &device.geometry, layout, envs[1], 7.5)
            .unwrap();
    let realized: Vec<f64> = sink.counts.iter().map(|&c| c as f64).collect();
    println!(
        "hot scan: {} requests in {t_hot:?}, cosine(model, realized) = {:.4}",
        sink.counts.iter().sum::<u64>(),
        cosine_similarity(&model, &realized)
    );

    // One materialized log at the hot point for record volume and timing.
    let t2 = Instant::now();
    let log = collect_log(&device, &applied, &envs[1], &pattern, &opts, &plan).unwrap();
    println!("hot collect_log: {} records in {:?}", log.records.len(), t2.elapsed());
}
