//! Experiment runner and HTTP play service for the qttt engines.

pub mod config;
pub mod plots;
pub mod run;
pub mod service;

use std::path::PathBuf;

pub use config::{Command, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("no result data found in {}", .0.display())]
    MissingData(PathBuf),
    #[error("no checkpoints found in {}", .0.display())]
    NoCheckpoints(PathBuf),
    #[error("address {0} is already in use")]
    PortInUse(String),
    #[error(transparent)]
    Engine(#[from] qttt_core::EngineError),
    #[error(transparent)]
    Train(#[from] qttt_core::trainer::TrainError),
    #[error(transparent)]
    Arena(#[from] qttt_core::arena::ArenaError),
    #[error(transparent)]
    Channel(#[from] qttt_core::channel::ChannelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
