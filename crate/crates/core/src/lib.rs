//! Deterministic model of design-induced latency variation in DRAM, plus the
//! mechanisms that exploit it: failure-map inference, variation-aware
//! latency profiling, and ECC-aware data shuffling.

pub mod accounting;
pub mod aggregate;
pub mod calibrate;
pub mod circuit;
pub mod ecc;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod logfile;
pub mod profiling;
pub mod rng;
pub mod stats;
pub mod variation;

pub use accounting::{summarize, LatencySummary};
pub use ecc::{
    apply_shuffle, correctable_fraction, decode, encode, Codeword, DecodeStatus, ShuffleLayout,
};
pub use error::ModelError;
pub use harness::{
    DataPattern, Device, ErrorLog, ErrorRecord, RecordSink, RunMeta, ScanOptions, ScanPlan,
    TrpManifestation,
};
pub use geometry::{
    AddressMap, BitPermutation, CellCoordinate, ColumnLayout, DeviceGeometry, SenseAmpSide,
    BURST_BITS, MAT_COLS, MAT_ROWS,
};
pub use inference::{
    confidence_profile, estimate_row_mapping, synthetic_counts, vulnerability_ratio,
    MappingEstimate,
};
pub use variation::{
    design_required, env_offset, fails, precharge_arrival, precharge_arrival_max,
    required_latency, EnvConditions, FailSet, TimingParam, TimingParams, VariationConfig,
};
