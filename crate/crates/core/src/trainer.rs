//! Q-learning by self-play.
//!
//! Each episode is one game with the same engine in both seats. Afterwards
//! every recorded transition is replayed in move order: the target is
//! `r + γ·max Q(s', ·)`, the loss is Huber on the chosen action's output only,
//! and Adam takes one step per transition. The tabular reference at the bottom
//! applies the classic blend `Q ← Q + α(target − Q)` directly.

use std::collections::HashMap;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::{argmax_legal, select_move, Engine, EngineError, Insertions, QFunction, Tape};
use crate::game::{Board, MinimaxCache, Outcome, Player};
use crate::nn::{huber, AdamConfig, AdamState, HuberParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("failed to write training log: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Board,
    pub action: usize,
    pub reward: f64,
    /// Board after the opponent's reply, `None` once the game is over.
    pub next: Option<Board>,
    pub perspective: Player,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub adam: AdamConfig,
    pub huber: HuberParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 10_000,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay: 0.9995,
            adam: AdamConfig::default(),
            huber: HuberParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.epsilon_start <= 1.0
            && self.epsilon_start >= self.epsilon_min
            && self.epsilon_min >= 0.0)
        {
            return bad("need 1 >= epsilon_start >= epsilon_min >= 0");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must lie in (0, 1]");
        }
        if !(self.adam.step_size > 0.0 && self.huber.delta > 0.0) {
            return bad("step size and huber delta must be positive");
        }
        Ok(())
    }

    /// Exploration rate used in episode `e` (0-based).
    pub fn epsilon_at(&self, e: usize) -> f64 {
        let mut eps = self.epsilon_start;
        for _ in 0..e {
            eps = (eps * self.epsilon_decay).max(self.epsilon_min);
        }
        eps
    }
}

/// Something the trainer can differentiate and update.
pub trait Trainable: QFunction {
    fn forward_tape(&self, board: &Board, rng: &mut dyn RngCore) -> Result<Tape, EngineError>;
    fn backward_tape(
        &self,
        tape: &Tape,
        grad_out: &[f64; 9],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>, EngineError>;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<(), EngineError>;
}

impl Trainable for Engine {
    fn forward_tape(&self, board: &Board, rng: &mut dyn RngCore) -> Result<Tape, EngineError> {
        self.forward(board, &Insertions::none(), rng)
    }

    fn backward_tape(
        &self,
        tape: &Tape,
        grad_out: &[f64; 9],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>, EngineError> {
        self.backward(tape, grad_out, rng)
    }

    fn params(&self) -> Vec<f64> {
        Engine::params(self)
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), EngineError> {
        Engine::set_params(self, params)
    }
}

/// `r + γ·max_{a'} Q(s', a')`; just `r` when the game ended.
pub fn q_target<Q: QFunction + ?Sized>(t: &Transition, q: &Q, gamma: f64, rng: &mut dyn RngCore) -> f64 {
    match &t.next {
        None => t.reward,
        Some(next) => {
            let legal = next.legal_moves();
            if legal.is_empty() {
                return t.reward;
            }
            let values = q.q_values(next, rng);
            let best = argmax_legal(&values, &legal).expect("non-empty legal moves");
            t.reward + gamma * values[best]
        }
    }
}

/// Transitions of one self-play game, split by seat.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub o: Vec<Transition>,
    pub x: Vec<Transition>,
    pub outcome: Outcome,
}

impl Episode {
    /// Both seats' transitions in the order their states occurred.
    pub fn chronological(&self) -> Vec<&Transition> {
        let mut out = Vec::with_capacity(self.o.len() + self.x.len());
        for i in 0..self.o.len().max(self.x.len()) {
            out.extend(self.o.get(i));
            out.extend(self.x.get(i));
        }
        out
    }

    pub fn plies(&self) -> usize {
        self.o.len() + self.x.len()
    }
}

pub fn self_play_episode<Q: QFunction + ?Sized>(
    q: &Q,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<Episode, EngineError> {
    let mut board = Board::new();
    // (state, action) per ply in order
    let mut plies: Vec<(Board, usize)> = Vec::with_capacity(9);
    while !board.outcome().is_terminal() {
        let a = select_move(q, &board, epsilon, rng)?;
        plies.push((board, a));
        board = board.apply_move(a).expect("selected moves are legal");
    }
    let outcome = board.outcome();
    let n = plies.len();
    let mut ep = Episode {
        o: Vec::new(),
        x: Vec::new(),
        outcome,
    };
    for (i, &(state, action)) in plies.iter().enumerate() {
        let perspective = state.to_move();
        // A seat's last move is followed by at most one opponent reply.
        let terminal = i + 2 >= n;
        let t = Transition {
            state,
            action,
            reward: if terminal { outcome.reward_for(perspective) } else { 0.0 },
            next: (!terminal).then(|| plies[i + 2].0),
            perspective,
        };
        match perspective {
            Player::O => ep.o.push(t),
            Player::X => ep.x.push(t),
        }
    }
    Ok(ep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeatResult {
    W,
    L,
    D,
}

impl SeatResult {
    fn of(outcome: Outcome, seat: Player) -> Self {
        match outcome.winner() {
            Some(p) if p == seat => SeatResult::W,
            Some(_) => SeatResult::L,
            None => SeatResult::D,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub epsilon: f64,
    pub mean_loss: f64,
    pub result_o: SeatResult,
    pub result_x: SeatResult,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// CSV with header `episode,epsilon,mean_loss,result_o,result_x`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains in place; the rng stream is seeded from `config.seed`.
pub fn train<T: Trainable + ?Sized>(engine: &mut T, config: &TrainConfig) -> Result<TrainLog, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = engine.params();
    let mut adam = AdamState::new(params.len(), config.adam);
    let mut log = TrainLog::default();
    let mut epsilon = config.epsilon_start;
    for episode in 0..config.episodes {
        let ep = self_play_episode(&*engine, epsilon, &mut rng)?;
        let mut total = 0.0;
        for t in ep.chronological() {
            let target = q_target(t, &*engine, config.gamma, &mut rng);
            let tape = engine.forward_tape(&t.state, &mut rng)?;
            let (loss, dloss) = huber(tape.values[t.action], target, config.huber);
            total += loss;
            let mut grad_out = [0.0; 9];
            grad_out[t.action] = dloss;
            let grads = engine.backward_tape(&tape, &grad_out, &mut rng)?;
            adam.step(&mut params, &grads).map_err(EngineError::from)?;
            engine.set_params(&params)?;
        }
        log.rows.push(LogRow {
            episode,
            epsilon,
            mean_loss: total / ep.plies() as f64,
            result_o: SeatResult::of(ep.outcome, Player::O),
            result_x: SeatResult::of(ep.outcome, Player::X),
        });
        epsilon = (epsilon * config.epsilon_decay).max(config.epsilon_min);
    }
    Ok(log)
}

/// Lookup-table Q-learning over reachable positions; unseen entries are 0.
#[derive(Debug, Clone, Default)]
pub struct TabularQ {
    table: HashMap<Board, [f64; 9]>,
}

impl TabularQ {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn states(&self) -> usize {
        self.table.len()
    }

    pub fn value(&self, board: &Board) -> [f64; 9] {
        self.table.get(board).copied().unwrap_or([0.0; 9])
    }

    /// One tabular update: `Q(s,a) ← Q(s,a) + α(r + γ·max Q(s',·) − Q(s,a))`.
    pub fn update(&mut self, t: &Transition, alpha: f64, gamma: f64) {
        let target = match &t.next {
            Some(next) if !next.legal_moves().is_empty() => {
                let v = self.value(next);
                let best = argmax_legal(&v, &next.legal_moves()).expect("non-empty");
                t.reward + gamma * v[best]
            }
            _ => t.reward,
        };
        let row = self.table.entry(t.state).or_insert([0.0; 9]);
        row[t.action] += alpha * (target - row[t.action]);
    }

    /// Same episode and epsilon schedule as [`train`], with the table update
    /// in place of the optimizer.
    pub fn train(&mut self, config: &TrainConfig, alpha: f64) -> Result<(), TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut epsilon = config.epsilon_start;
        for _ in 0..config.episodes {
            let ep = self_play_episode(self, epsilon, &mut rng)?;
            for t in ep.chronological() {
                self.update(t, alpha, config.gamma);
            }
            epsilon = (epsilon * config.epsilon_decay).max(config.epsilon_min);
        }
        Ok(())
    }
}

impl QFunction for TabularQ {
    fn q_values(&self, board: &Board, _: &mut dyn RngCore) -> [f64; 9] {
        self.value(board)
    }
}

/// Whether greedy play by `q` avoids losing against every line of
/// minimax-optimal opposition, from both seats.
pub fn never_loses_to_minimax<Q: QFunction + ?Sized>(q: &Q) -> bool {
    fn walk<Q: QFunction + ?Sized>(
        q: &Q,
        board: Board,
        me: Player,
        cache: &mut MinimaxCache,
        rng: &mut dyn RngCore,
    ) -> bool {
        let outcome = board.outcome();
        if outcome.is_terminal() {
            return outcome.winner() != Some(me.opponent());
        }
        if board.to_move() == me {
            let a = select_move(q, &board, 0.0, rng).expect("game not over");
            walk(q, board.apply_move(a).expect("legal"), me, cache, rng)
        } else {
            cache
                .optimal_moves(&board)
                .into_iter()
                .all(|a| walk(q, board.apply_move(a).expect("legal"), me, cache, rng))
        }
    }
    let mut cache = MinimaxCache::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    [Player::O, Player::X]
        .into_iter()
        .all(|me| walk(q, Board::new(), me, &mut cache, &mut rng))
}
