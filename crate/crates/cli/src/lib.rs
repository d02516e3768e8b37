//! Subcommands behind the `flutrack` binary.
//!
//! Each command reads and writes files so every intermediate result can be
//! inspected: `filter` writes survivors, a weekly series and a manifest;
//! `correlate` turns series into a report; `simulate` writes a synthetic
//! corpus with ground-truth labels; `report` chains filter and correlate.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod commands;
pub mod manifest;
pub mod run;
pub mod simulate;

pub use manifest::RunManifest;
pub use run::{run_filter, FilterCounts, FilterOptions, FilterRun, StageCount};
pub use simulate::{generate, NoiseMix, SyntheticSpec, TweetClass};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const IO: i32 = 2;
    pub const DEGENERATE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] flutrack::filters::ConfigError),
    #[error(transparent)]
    Corpus(#[from] flutrack::corpus::CorpusError),
    #[error(transparent)]
    Stats(#[from] flutrack::stats::StatsError),
    #[error(transparent)]
    Spec(#[from] simulate::SpecError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use flutrack::filters::ConfigError;
        use flutrack::stats::StatsError;
        match self {
            CliError::Usage(_) | CliError::Spec(_) => exit::USAGE,
            CliError::Config(ConfigError::Io { .. }) => exit::IO,
            CliError::Config(_) => exit::USAGE,
            CliError::Corpus(_) | CliError::Io { .. } => exit::IO,
            CliError::Stats(e) if e.is_degenerate() => exit::DEGENERATE,
            CliError::Stats(StatsError::Io { .. }) => exit::IO,
            CliError::Stats(_) => exit::USAGE,
        }
    }
}
