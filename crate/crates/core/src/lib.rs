//! Tic-tac-toe engines built from classical, simulated-quantum and hybrid
//! networks, with Q-learning self-play, Elo arenas and a noisy-channel model.

pub mod arena;
pub mod channel;
pub mod circuits;
pub mod engines;
pub mod game;
pub mod nn;
pub mod qsim;
pub mod trainer;

pub use arena::{Agent, ArenaConfig, RandomAgent, RatingTable};
pub use channel::{ChannelConfig, NoiseModel, Pattern};
pub use engines::{build_engine, Engine, EngineError, EngineSpec, QFunction};
pub use game::{Board, Outcome, Player};
pub use qsim::Sampling;
pub use trainer::{train, TrainConfig};
