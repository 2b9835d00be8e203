//! One module per subcommand.

pub mod aggregate;
pub mod calibrate_run;
pub mod circuit_sim;
pub mod ecc_analyze;
pub mod gen_device;
pub mod infer_map;
pub mod profile_run;
pub mod report;
pub mod sweep;
