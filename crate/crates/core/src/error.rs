use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// An index or address fell outside the range the device admits.
    #[error("{what} {got} out of range (must be < {limit})")]
    OutOfRange {
        what: &'static str,
        got: u64,
        limit: u64,
    },

    /// A structural parameter failed validation.
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// An input vector had the wrong shape for the requested operation.
    #[error("bad input shape: {why}")]
    Shape { why: String },

    /// The transient solver left its stable region.
    #[error(
        "integration unstable at step {step} (t = {time_ns:.4} ns, v = {voltage:.3e} V): \
         timestep {timestep_s:.3e} s exceeds the stability bound {bound_s:.3e} s"
    )]
    Unstable {
        step: u64,
        time_ns: f64,
        voltage: f64,
        timestep_s: f64,
        bound_s: f64,
    },

    /// A config file could not be parsed or failed validation.
    #[error("config error at line {line}: {why}")]
    Config { line: usize, why: String },
}

impl ModelError {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        ModelError::Invalid {
            what,
            why: why.into(),
        }
    }
}
