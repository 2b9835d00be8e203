//! Command-line experiment runner.
//!
//! Every workflow is a subcommand reading one [`config::ExperimentConfig`]
//! plus a device seed. Outputs are CSVs named `<subcommand>-<run_id>...`
//! next to a `.manifest` listing the config hash, the seed, input hashes,
//! and every file written. The run id is the first twelve hex digits of a
//! hash over the canonical config text, the seed, the subcommand, and any
//! input digests, so identical invocations land on identical names with
//! byte-identical bodies, and nothing in an output depends on the clock.

pub mod commands;
pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::{ConfigError, ExperimentConfig};
use divasim_core::harness::Device;
use divasim_core::ModelError;

/// Deterministic simulator for design-induced DRAM latency variation.
#[derive(Debug, Parser)]
#[command(name = "divasim", version, about)]
pub struct Cli {
    /// Experiment configuration file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Device seed; overrides the configured seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long = "out-dir", global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for scans; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Config override, repeatable: section.key=value.
    #[arg(long = "override", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Materialize a seeded device and write its pinned configuration.
    GenDevice,
    /// Scan every multi-value timing grid and write per-residue counts.
    Sweep,
    /// Merge error logs into row, residue, column, and burst profiles.
    Aggregate {
        /// Error-log CSV files to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Estimate the hidden row remap from a per-row count profile.
    InferMap {
        /// Two-column CSV of external row and error count.
        input: PathBuf,
    },
    /// Walk the timing grid over the reserved test rows and pick
    /// operating values.
    Profile,
    /// Compare uncorrectable codeword fractions across ECC layouts.
    EccAnalyze,
    /// Simulate single-cell accesses and write the waveforms.
    CircuitSim,
    /// Fit the environment coefficients and write the config asset.
    Calibrate,
    /// Latency table for the standard, profiled, and shuffled mechanisms.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenDevice => "gen-device",
            Command::Sweep => "sweep",
            Command::Aggregate { .. } => "aggregate",
            Command::InferMap { .. } => "infer-map",
            Command::Profile => "profile",
            Command::EccAnalyze => "ecc-analyze",
            Command::CircuitSim => "circuit-sim",
            Command::Calibrate => "calibrate",
            Command::Report => "report",
        }
    }
}

/// Failure classified by exit code: configuration problems exit 2,
/// everything that breaks at run time exits 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parse the process arguments and run; returns the process exit code.
pub fn run_from_args() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("divasim: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // A second invocation in the same process keeps the first pool;
        // thread count only affects scheduling, never results.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("{}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text, &path.display().to_string())?
        }
        None => ExperimentConfig::default(),
    };
    for spec in &cli.overrides {
        cfg.apply_override(spec)?;
    }
    cfg.validate().map_err(CliError::Config)?;

    let seed = cli.seed.unwrap_or(cfg.device_seeds[0]);
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));

    match &cli.command {
        Command::GenDevice => commands::gen_device::run(&cfg, seed, &out_dir),
        Command::Sweep => commands::sweep::run(&cfg, seed, &out_dir),
        Command::Aggregate { inputs } => commands::aggregate::run(&cfg, seed, &out_dir, inputs),
        Command::InferMap { input } => commands::infer_map::run(&cfg, seed, &out_dir, input),
        Command::Profile => commands::profile_run::run(&cfg, seed, &out_dir),
        Command::EccAnalyze => {
            let seeds = match cli.seed {
                Some(s) => vec![s],
                None => cfg.device_seeds.clone(),
            };
            commands::ecc_analyze::run(&cfg, &seeds, &out_dir)
        }
        Command::CircuitSim => commands::circuit_sim::run(&cfg, seed, &out_dir),
        Command::Calibrate => commands::calibrate_run::run(&cfg, seed, &out_dir),
        Command::Report => commands::report::run(&cfg, seed, &out_dir),
    }
}

/// Shared bookkeeping for one subcommand invocation: naming, output
/// registration, and the manifest.
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub subcommand: &'static str,
    pub run_id: String,
    config_sha256: String,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl RunContext {
    /// `input_digests` are (display name, sha256) of files the command
    /// consumes; they participate in the run id.
    pub fn new(
        cfg: &ExperimentConfig,
        seed: u64,
        out_dir: &Path,
        subcommand: &'static str,
        input_digests: Vec<(String, String)>,
    ) -> RunContext {
        let canonical = cfg.canonical_text();
        let config_sha256 = hex_digest(canonical.as_bytes());
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hasher.update([0]);
        hasher.update(seed.to_string().as_bytes());
        hasher.update([0]);
        hasher.update(subcommand.as_bytes());
        for (_, digest) in &input_digests {
            hasher.update([0]);
            hasher.update(digest.as_bytes());
        }
        let run_id = hex_prefix(&hasher.finalize(), 12);
        RunContext {
            cfg: cfg.clone(),
            seed,
            out_dir: out_dir.to_path_buf(),
            subcommand,
            run_id,
            config_sha256,
            inputs: input_digests,
            outputs: Vec::new(),
        }
    }

    /// File name for this run: `<subcommand>-<run_id><suffix>`.
    pub fn file_name(&self, suffix: &str) -> String {
        format!("{}-{}{}", self.subcommand, self.run_id, suffix)
    }

    /// Create and register an output file.
    pub fn create(&mut self, suffix: &str) -> Result<BufWriter<File>, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let name = self.file_name(suffix);
        let file = File::create(self.out_dir.join(&name))?;
        self.outputs.push(name);
        Ok(BufWriter::new(file))
    }

    /// Write the manifest recording what this run read and produced.
    pub fn write_manifest(&self) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let name = self.file_name(".manifest");
        let path = self.out_dir.join(&name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "subcommand = {}", self.subcommand)?;
        writeln!(w, "run_id = {}", self.run_id)?;
        writeln!(w, "tool_version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "config_sha256 = {}", self.config_sha256)?;
        writeln!(w, "seed = {}", self.seed)?;
        for (name, digest) in &self.inputs {
            writeln!(w, "input = {name} sha256:{digest}")?;
        }
        for out in &self.outputs {
            writeln!(w, "output = {out}")?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Build the device a (config, seed) pair describes: the seed feeds both
/// the hidden address map and the process-noise stream.
pub fn build_device(cfg: &ExperimentConfig, seed: u64) -> Result<Device, CliError> {
    let geometry = cfg.geometry.clone();
    let map = cfg.map.build(&geometry, seed)?;
    let mut variation = cfg.variation.clone();
    variation.rng_seed = seed;
    Device::new(geometry, map, variation).map_err(CliError::from)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_prefix(&hasher.finalize(), 64)
}

fn hex_prefix(digest: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in digest {
        use std::fmt::Write as _;
        let _ = write!(s, "{b:02x}");
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// File-name-safe rendering of a number: `6.25` becomes `6p25`.
pub fn value_tag(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

/// File-name tag for an environment: temperature then refresh interval.
pub fn env_tag(env: &divasim_core::variation::EnvConditions) -> String {
    format!(
        "t{}-r{}",
        value_tag(env.temperature_c),
        value_tag(env.refresh_interval_ms)
    )
}
