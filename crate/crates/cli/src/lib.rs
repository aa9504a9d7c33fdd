//! Command-line driver: configs, campaign dispatch, result bundles and
//! plot-data emission.

pub mod bundle;
pub mod config;
pub mod plot;
pub mod replay;
pub mod run;

use thiserror::Error;

/// Process exit codes. Stable; scripts may rely on them.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Command-line usage error (reported by the argument parser).
    pub const USAGE: i32 = 2;
    /// The config could not be read, parsed or validated.
    pub const CONFIG: i32 = 3;
    /// A simulation or an output write failed.
    pub const RUNTIME: i32 = 4;
    /// A detection campaign ran to completion and decided "not detected".
    pub const NOT_DETECTED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Simulation(#[from] jjsim_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A bundle lacks the product asked for.
    #[error("bundle has no {0} data")]
    MissingProduct(&'static str),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            _ => exit::RUNTIME,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
