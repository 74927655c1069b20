//! Distance-dependent rotation noise on the link between a client holding the
//! classical layers and a server running the circuit.
//!
//! Model 1 sends qubits both ways, so noise follows the embedding and the
//! ansatz. Model 2 measures on the server and only the embedded state travels.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::arena::{evaluate_vs_random, Agent, ArenaConfig, ArenaError, Tournament};
use crate::engines::{build_engine, Engine, EngineError, EngineSpec, Insertions, QFunction, Tape};
use crate::game::Board;
use crate::qsim::{AngleExpr, QuantumCircuit, Sampling};
use crate::trainer::{train, TrainConfig, TrainError, Trainable};

pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("engine has no quantum layer")]
    NoQuantumLayer,
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard deviation of the rotation noise after `d` km of fiber.
pub fn noise_sigma(distance_km: f64, attenuation_db_per_km: f64) -> f64 {
    10f64.powf(attenuation_db_per_km * distance_km / 10.0) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Client measures: noisy in both directions.
    #[serde(rename = "1")]
    One,
    /// Server measures: noisy on the way in only.
    #[serde(rename = "2")]
    Two,
}

impl NoiseModel {
    pub fn traversals(self) -> usize {
        match self {
            NoiseModel::One => 2,
            NoiseModel::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            NoiseModel::One => 1,
            NoiseModel::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// Noiseless training and evaluation.
    A,
    /// Noiseless training, noisy evaluation.
    B,
    /// Noisy training and evaluation.
    C,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::A, Pattern::B, Pattern::C];

    pub fn noisy_training(self) -> bool {
        self == Pattern::C
    }

    pub fn noisy_evaluation(self) -> bool {
        self != Pattern::A
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub model: NoiseModel,
    pub distance_km: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation_db_per_km: f64,
    pub pattern: Pattern,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_DB_PER_KM
}

impl ChannelConfig {
    pub fn new(model: NoiseModel, distance_km: f64, pattern: Pattern) -> Self {
        ChannelConfig {
            model,
            distance_km,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            pattern,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(ChannelError::InvalidConfig("distance must be finite and >= 0".into()));
        }
        if !(self.attenuation_db_per_km > 0.0 && self.attenuation_db_per_km.is_finite()) {
            return Err(ChannelError::InvalidConfig("attenuation must be positive".into()));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        noise_sigma(self.distance_km, self.attenuation_db_per_km)
    }
}

/// RX, RY, RZ on every qubit with constant N(0, σ²) angles.
pub fn noise_layer(num_qubits: usize, sigma: f64, rng: &mut dyn RngCore) -> QuantumCircuit {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and >= 0");
    let mut c = QuantumCircuit::new(num_qubits);
    for q in 0..num_qubits {
        c.rx(q, AngleExpr::constant(normal.sample(rng)));
        c.ry(q, AngleExpr::constant(normal.sample(rng)));
        c.rz(q, AngleExpr::constant(normal.sample(rng)));
    }
    c
}

/// An engine whose quantum layer sees fresh channel noise on every call.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEngine {
    engine: Engine,
    config: ChannelConfig,
    sigma: f64,
    qubits: usize,
}

pub fn wrap_with_channel(engine: Engine, config: ChannelConfig) -> Result<ChannelEngine, ChannelError> {
    config.validate()?;
    let qubits = engine
        .quantum_layer()
        .ok_or(ChannelError::NoQuantumLayer)?
        .num_qubits();
    Ok(ChannelEngine {
        sigma: config.sigma(),
        engine,
        config,
        qubits,
    })
}

impl ChannelEngine {
    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Draws one realization of the channel. A zero-width channel inserts
    /// nothing and consumes no randomness.
    pub fn sample_insertions(&self, rng: &mut dyn RngCore) -> Insertions {
        if self.sigma == 0.0 {
            return Insertions::none();
        }
        let after_embedding = Some(noise_layer(self.qubits, self.sigma, rng));
        let after_ansatz = match self.config.model {
            NoiseModel::One => Some(noise_layer(self.qubits, self.sigma, rng)),
            NoiseModel::Two => None,
        };
        Insertions {
            after_embedding,
            after_ansatz,
        }
    }

    /// The circuit actually run for one inference.
    pub fn realized_circuit(&self, rng: &mut dyn RngCore) -> QuantumCircuit {
        let layer = self.engine.quantum_layer().expect("checked when wrapped");
        layer.realize(&self.sample_insertions(rng))
    }
}

impl QFunction for ChannelEngine {
    fn q_values(&self, board: &Board, rng: &mut dyn RngCore) -> [f64; 9] {
        self.forward_tape(board, rng)
            .expect("a built engine accepts every board")
            .values
    }
}

impl Trainable for ChannelEngine {
    /// Noise angles enter as constants of the sampled circuit.
    fn forward_tape(&self, board: &Board, rng: &mut dyn RngCore) -> Result<Tape, EngineError> {
        let insert = self.sample_insertions(rng);
        self.engine.forward(board, &insert, rng)
    }

    fn backward_tape(
        &self,
        tape: &Tape,
        grad_out: &[f64; 9],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>, EngineError> {
        self.engine.backward(tape, grad_out, rng)
    }

    fn params(&self) -> Vec<f64> {
        self.engine.params()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), EngineError> {
        self.engine.set_params(params)
    }
}

/// Settings shared by the noise experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub games: usize,
    pub arena: ArenaConfig,
    /// Measurement mode during rated play; training is unaffected.
    pub sampling: Sampling,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            games: 10_000,
            arena: ArenaConfig::default(),
            sampling: Sampling::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRun {
    pub pattern: Pattern,
    pub engine: Engine,
    pub tournament: Tournament,
}

impl PatternRun {
    pub fn final_rating(&self) -> f64 {
        self.tournament.table.entries[0].rating
    }
}

/// Rated evaluation of `engine` in `eval.sampling` mode, through `channel` when given.
pub fn evaluate_engine(
    engine: &Engine,
    channel: Option<&ChannelConfig>,
    eval: &EvalConfig,
) -> Result<Tournament, ChannelError> {
    let id = engine.id();
    let engine = engine.clone().with_sampling(eval.sampling);
    Ok(match channel {
        Some(cfg) => {
            let wrapped = wrap_with_channel(engine, *cfg)?;
            evaluate_vs_random(&id, &wrapped as &dyn Agent, eval.games, &eval.arena)?
        }
        None => evaluate_vs_random(&id, &engine as &dyn Agent, eval.games, &eval.arena)?,
    })
}

/// Trains a fresh engine for `spec` under `config.pattern` and rates it
/// against the random mover.
pub fn run_pattern_experiment(
    spec: EngineSpec,
    config: &ChannelConfig,
    train_cfg: &TrainConfig,
    eval: &EvalConfig,
) -> Result<PatternRun, ChannelError> {
    config.validate()?;
    let engine = build_engine(spec)?;
    let engine = if config.pattern.noisy_training() {
        let mut wrapped = wrap_with_channel(engine, *config)?;
        train(&mut wrapped, train_cfg)?;
        wrapped.into_engine()
    } else {
        let mut e = engine;
        train(&mut e, train_cfg)?;
        e
    };
    let tournament = evaluate_engine(&engine, config.pattern.noisy_evaluation().then_some(config), eval)?;
    Ok(PatternRun {
        pattern: config.pattern,
        engine,
        tournament,
    })
}

/// All three patterns; A and B share one noiseless training run.
pub fn run_all_patterns(
    spec: EngineSpec,
    model: NoiseModel,
    distance_km: f64,
    train_cfg: &TrainConfig,
    eval: &EvalConfig,
) -> Result<[PatternRun; 3], ChannelError> {
    let cfg = |pattern| ChannelConfig::new(model, distance_km, pattern);
    cfg(Pattern::A).validate()?;
    let mut clean = build_engine(spec)?;
    train(&mut clean, train_cfg)?;
    let a = PatternRun {
        pattern: Pattern::A,
        tournament: evaluate_engine(&clean, None, eval)?,
        engine: clean.clone(),
    };
    let b = PatternRun {
        pattern: Pattern::B,
        tournament: evaluate_engine(&clean, Some(&cfg(Pattern::B)), eval)?,
        engine: clean,
    };
    let c = run_pattern_experiment(spec, &cfg(Pattern::C), train_cfg, eval)?;
    Ok([a, b, c])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub model: u8,
    pub pattern: Pattern,
    pub distance_km: f64,
    pub sigma: f64,
    pub final_rating: f64,
    pub seed: u64,
}

/// Pattern-B ratings of an already trained engine at each distance, with the
/// model and fiber of `channel`. Cells run in parallel; each uses
/// `eval.arena.seed`.
pub fn distance_sweep(
    engine: &Engine,
    channel: &ChannelConfig,
    distances: &[f64],
    eval: &EvalConfig,
) -> Result<Vec<SweepPoint>, ChannelError> {
    engine.quantum_layer().ok_or(ChannelError::NoQuantumLayer)?;
    distances
        .par_iter()
        .map(|&d| {
            let cfg = ChannelConfig {
                distance_km: d,
                pattern: Pattern::B,
                ..*channel
            };
            cfg.validate()?;
            let t = evaluate_engine(engine, Some(&cfg), eval)?;
            Ok(SweepPoint {
                model: cfg.model.number(),
                pattern: Pattern::B,
                distance_km: d,
                sigma: cfg.sigma(),
                final_rating: t.table.entries[0].rating,
                seed: eval.arena.seed,
            })
        })
        .collect()
}

/// `n` distances spaced evenly in log10 between `lo` and `hi` inclusive.
pub fn log_distances(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// CSV `model,pattern,distance_km,sigma,final_rating,seed`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<(), ChannelError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Seeded stream for noise draws outside a game.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
