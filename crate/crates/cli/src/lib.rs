//! Pipeline orchestration behind the `cellmine` binary. Every stage reads the
//! previous stage's files and writes its own, and is skipped when the
//! manifest shows its inputs and outputs unchanged.

pub mod config;
pub mod manifest;
pub mod stages;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{GatewayMode, ModelKind, Overrides, PipelineConfig, TargetKind};
pub use stages::{
    gen_fixtures_from_specs, gen_fixtures_suite, predict_csv, run_pipeline, run_stage, StageReport, StageStatus,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    MineText,
    MineGraph,
    Merge,
    Encode,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Ingest, Stage::MineText, Stage::MineGraph, Stage::Merge, Stage::Encode, Stage::Train, Stage::Evaluate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::MineText => "mine-text",
            Stage::MineGraph => "mine-graph",
            Stage::Merge => "merge",
            Stage::Encode => "encode",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{stage}: missing input {}", path.display())]
    StageInputMissing { stage: Stage, path: PathBuf },
    #[error("{stage} failed: {message}")]
    StageFailed { stage: Stage, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => EXIT_CONFIG,
            _ => EXIT_STAGE,
        }
    }

    pub(crate) fn failed(stage: Stage, e: impl fmt::Display) -> CliError {
        CliError::StageFailed { stage, message: e.to_string() }
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
