//! Elo ratings, 100-game blocks, round-robin tournaments and rated runs
//! against a uniform-random opponent.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::{select_move, QFunction};
use crate::game::{Board, Outcome, Player};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("a tournament needs at least two entrants")]
    TooFewEntrants,
    #[error("duplicate entrant id {0}")]
    DuplicateId(String),
    #[error("games per block must be positive")]
    EmptyBlock,
    #[error("game log is inconsistent: {0}")]
    BadLog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Probability that A beats B.
pub fn expected_score(r_a: f64, r_b: f64) -> f64 {
    1.0 / (10f64.powf((r_b - r_a) / 400.0) + 1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockResult {
    pub wins_a: u32,
    pub wins_b: u32,
    pub draws: u32,
}

impl BlockResult {
    pub fn games(&self) -> u32 {
        self.wins_a + self.wins_b + self.draws
    }

    pub fn decisive(&self) -> u32 {
        self.wins_a + self.wins_b
    }

    /// The same block seen from B's side.
    pub fn flipped(&self) -> BlockResult {
        BlockResult {
            wins_a: self.wins_b,
            wins_b: self.wins_a,
            draws: self.draws,
        }
    }
}

/// `R + K·(N_wins − N_games·W)` with draws left out of `N_games`.
pub fn update_rating(r_a: f64, block: &BlockResult, w_ab: f64, k: f64) -> f64 {
    r_a + k * (block.wins_a as f64 - block.decisive() as f64 * w_ab)
}

/// New ratings for both sides, each computed from the pre-block values.
pub fn update_pair(r_a: f64, r_b: f64, block: &BlockResult, k: f64) -> (f64, f64) {
    let w_ab = expected_score(r_a, r_b);
    (
        update_rating(r_a, block, w_ab, k),
        update_rating(r_b, &block.flipped(), 1.0 - w_ab, k),
    )
}

/// Picks a move for the side to move.
pub trait Agent: Send + Sync {
    fn choose(&self, board: &Board, rng: &mut dyn RngCore) -> usize;
}

/// Greedy play (epsilon 0) for anything with action values.
impl<T: QFunction + ?Sized> Agent for T {
    fn choose(&self, board: &Board, rng: &mut dyn RngCore) -> usize {
        select_move(self, board, 0.0, rng).expect("agents are only asked on live boards")
    }
}

/// Uniformly random legal mover.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAgent;

impl QFunction for RandomAgent {
    /// Fresh uniform noise, so greedy selection is a uniform legal pick.
    fn q_values(&self, _: &Board, rng: &mut dyn RngCore) -> [f64; 9] {
        std::array::from_fn(|_| rng.random::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameResult {
    A,
    B,
    Draw,
}

/// One line of the game log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub pair: [String; 2],
    pub block: usize,
    pub game: usize,
    /// Seat of the first entrant in `pair`.
    pub seat_a: Player,
    pub moves: Vec<usize>,
    pub result: GameResult,
}

/// Plays one game; returns the move list and final outcome.
pub fn play_game(o: &dyn Agent, x: &dyn Agent, rng: &mut dyn RngCore) -> (Vec<usize>, Outcome) {
    let mut board = Board::new();
    let mut moves = Vec::with_capacity(9);
    loop {
        let outcome = board.outcome();
        if outcome.is_terminal() {
            return (moves, outcome);
        }
        let agent = if board.to_move() == Player::O { o } else { x };
        let cell = agent.choose(&board, rng);
        board = board.apply_move(cell).expect("agents return legal moves");
        moves.push(cell);
    }
}

/// A block of games with alternating first move (A is O in even games).
/// Game `g` draws from stream `g` of a generator seeded with `seed`, so the
/// result does not depend on scheduling.
pub fn play_block(
    a: &dyn Agent,
    b: &dyn Agent,
    ids: [&str; 2],
    block: usize,
    games: usize,
    seed: u64,
) -> (BlockResult, Vec<GameRecord>) {
    let records: Vec<GameRecord> = (0..games)
        .into_par_iter()
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(g as u64);
            let seat_a = if g % 2 == 0 { Player::O } else { Player::X };
            let (o, x) = if seat_a == Player::O { (a, b) } else { (b, a) };
            let (moves, outcome) = play_game(o, x, &mut rng);
            let result = match outcome.winner() {
                None => GameResult::Draw,
                Some(p) if p == seat_a => GameResult::A,
                Some(_) => GameResult::B,
            };
            GameRecord {
                pair: [ids[0].to_string(), ids[1].to_string()],
                block,
                game: g,
                seat_a,
                moves,
                result,
            }
        })
        .collect();
    (tally(&records), records)
}

fn tally(records: &[GameRecord]) -> BlockResult {
    let mut r = BlockResult::default();
    for rec in records {
        match rec.result {
            GameResult::A => r.wins_a += 1,
            GameResult::B => r.wins_b += 1,
            GameResult::Draw => r.draws += 1,
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaConfig {
    pub games_per_block: usize,
    pub k: f64,
    pub initial_rating: f64,
    pub seed: u64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            games_per_block: 100,
            k: 32.0,
            initial_rating: 1500.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub games_played: usize,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEntry {
    pub id: String,
    pub rating: f64,
    pub games_played: usize,
    /// One point per completed block; the starting rating is not repeated here.
    pub history: Vec<HistoryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    pub k: f64,
    pub initial_rating: f64,
    pub entries: Vec<RatingEntry>,
}

impl RatingTable {
    pub fn new<S: AsRef<str>>(ids: &[S], cfg: &ArenaConfig) -> Result<Self, ArenaError> {
        let mut entries: Vec<RatingEntry> = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            if entries.iter().any(|e| e.id == id) {
                return Err(ArenaError::DuplicateId(id.to_string()));
            }
            entries.push(RatingEntry {
                id: id.to_string(),
                rating: cfg.initial_rating,
                games_played: 0,
                history: Vec::new(),
            });
        }
        Ok(RatingTable {
            k: cfg.k,
            initial_rating: cfg.initial_rating,
            entries,
        })
    }

    pub fn get(&self, id: &str) -> Option<&RatingEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn rating(&self, id: &str) -> Option<f64> {
        self.get(id).map(|e| e.rating)
    }

    fn index(&self, id: &str) -> Result<usize, ArenaError> {
        self.entries
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| ArenaError::BadLog(format!("unknown entrant {id}")))
    }

    /// Applies one finished block between entrants `i` and `j`.
    fn apply_block(&mut self, i: usize, j: usize, block: &BlockResult) {
        let (ra, rb) = update_pair(self.entries[i].rating, self.entries[j].rating, block, self.k);
        for (idx, r) in [(i, ra), (j, rb)] {
            let e = &mut self.entries[idx];
            e.rating = r;
            e.games_played += block.games() as usize;
            e.history.push(HistoryPoint {
                games_played: e.games_played,
                rating: r,
            });
        }
    }

    /// Ids in descending rating order, ties by id.
    pub fn ranking(&self) -> Vec<&str> {
        let mut v: Vec<&RatingEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.rating.total_cmp(&a.rating).then_with(|| a.id.cmp(&b.id)));
        v.into_iter().map(|e| e.id.as_str()).collect()
    }

    /// CSV `engine_id,games_played,rating`, one row per history point.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<(), ArenaError> {
        #[derive(Serialize)]
        struct Row<'a> {
            engine_id: &'a str,
            games_played: usize,
            rating: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            for h in &e.history {
                w.serialize(Row {
                    engine_id: &e.id,
                    games_played: h.games_played,
                    rating: h.rating,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of a rated run: final table plus the full game log.
#[derive(Debug, Clone, PartialEq)]
pub struct Tournament {
    pub table: RatingTable,
    pub log: Vec<GameRecord>,
}

impl Tournament {
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<(), ArenaError> {
        for r in &self.log {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<GameRecord>, ArenaError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Every unordered pair plays one block; the pair order is a seeded shuffle.
pub fn round_robin(entrants: &[(&str, &dyn Agent)], cfg: &ArenaConfig) -> Result<Tournament, ArenaError> {
    if entrants.len() < 2 {
        return Err(ArenaError::TooFewEntrants);
    }
    if cfg.games_per_block == 0 {
        return Err(ArenaError::EmptyBlock);
    }
    let ids: Vec<&str> = entrants.iter().map(|e| e.0).collect();
    let mut table = RatingTable::new(&ids, cfg)?;
    let mut pairs: Vec<(usize, usize)> = (0..entrants.len())
        .flat_map(|i| (i + 1..entrants.len()).map(move |j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairs.shuffle(&mut rng);
    let mut log = Vec::with_capacity(pairs.len() * cfg.games_per_block);
    for (block, &(i, j)) in pairs.iter().enumerate() {
        let seed = rng.next_u64();
        let (result, records) = play_block(
            entrants[i].1,
            entrants[j].1,
            [ids[i], ids[j]],
            block,
            cfg.games_per_block,
            seed,
        );
        table.apply_block(i, j, &result);
        log.extend(records);
    }
    Ok(Tournament { table, log })
}

/// Replays the rating updates from a game log alone.
pub fn recount<S: AsRef<str>>(
    ids: &[S],
    log: &[GameRecord],
    cfg: &ArenaConfig,
) -> Result<RatingTable, ArenaError> {
    let mut table = RatingTable::new(ids, cfg)?;
    let mut start = 0;
    while start < log.len() {
        let block = log[start].block;
        let end = start + log[start..].iter().take_while(|r| r.block == block).count();
        let pair = &log[start].pair;
        if log[start..end].iter().any(|r| &r.pair != pair) {
            return Err(ArenaError::BadLog(format!("block {block} mixes pairs")));
        }
        let i = table.index(&pair[0])?;
        let j = table.index(&pair[1])?;
        table.apply_block(i, j, &tally(&log[start..end]));
        start = end;
    }
    Ok(table)
}

pub const RANDOM_ID: &str = "random";

/// Rated run against [`RandomAgent`]: `games / games_per_block` blocks, both
/// sides updated after each block.
pub fn evaluate_vs_random(
    id: &str,
    agent: &dyn Agent,
    games: usize,
    cfg: &ArenaConfig,
) -> Result<Tournament, ArenaError> {
    if cfg.games_per_block == 0 {
        return Err(ArenaError::EmptyBlock);
    }
    let mut table = RatingTable::new(&[id, RANDOM_ID], cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(games);
    for block in 0..games / cfg.games_per_block {
        let seed = rng.next_u64();
        let (result, records) = play_block(agent, &RandomAgent, [id, RANDOM_ID], block, cfg.games_per_block, seed);
        table.apply_block(0, 1, &result);
        log.extend(records);
    }
    Ok(Tournament { table, log })
}

/// Wins, losses and draws of `agent` against [`RandomAgent`], alternating seats.
pub fn non_loss_vs_random(agent: &dyn Agent, games: usize, seed: u64) -> (BlockResult, f64) {
    let (r, _) = play_block(agent, &RandomAgent, ["agent", RANDOM_ID], 0, games, seed);
    let rate = (r.wins_a + r.draws) as f64 / games.max(1) as f64;
    (r, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_score_examples() {
        assert_eq!(expected_score(1500.0, 1500.0), 0.5);
        assert!((expected_score(1500.0, 1570.0) - 0.400_603_2).abs() < 1e-7);
        let w = expected_score(1432.0, 1611.5);
        assert!((w + expected_score(1611.5, 1432.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn update_examples() {
        let block = BlockResult { wins_a: 60, wins_b: 40, draws: 0 };
        assert_eq!(update_rating(1500.0, &block, 0.5, 32.0), 1820.0);
        let draws = BlockResult { wins_a: 0, wins_b: 0, draws: 100 };
        assert_eq!(update_rating(1500.0, &draws, 0.3, 32.0), 1500.0);
        let (a, b) = update_pair(1480.0, 1530.0, &BlockResult { wins_a: 3, wins_b: 7, draws: 90 }, 32.0);
        assert!(((a - 1480.0) + (b - 1530.0)).abs() < 1e-9);
    }

    struct Fixed(usize);
    impl Agent for Fixed {
        /// First legal cell at or after the preferred one.
        fn choose(&self, board: &Board, _: &mut dyn RngCore) -> usize {
            (0..9).map(|i| (self.0 + i) % 9).find(|&c| board.is_legal(c)).unwrap()
        }
    }

    #[test]
    fn three_entrants_play_three_blocks() {
        let (a, b, c) = (Fixed(0), Fixed(4), RandomAgent);
        let entrants: Vec<(&str, &dyn Agent)> = vec![("a", &a), ("b", &b), ("c", &c)];
        let t = round_robin(&entrants, &ArenaConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(t.log.len(), 300);
        for e in &t.table.entries {
            assert_eq!(e.games_played, 200);
            assert_eq!(e.history.len(), 2);
        }
        let total: f64 = t.table.entries.iter().map(|e| e.rating).sum();
        assert!((total - 4500.0).abs() < 1e-9);
        let again = round_robin(&entrants, &ArenaConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(t, again);

        let recounted = recount(&["a", "b", "c"], &t.log, &ArenaConfig::default()).unwrap();
        assert_eq!(recounted, t.table);

        let mut buf = Vec::new();
        t.write_log(&mut buf).unwrap();
        assert_eq!(read_log(buf.as_slice()).unwrap(), t.log);
    }

    #[test]
    fn identical_greedy_engines_stay_close() {
        let (a, b) = (Fixed(0), Fixed(0));
        let entrants: Vec<(&str, &dyn Agent)> = vec![("a", &a), ("b", &b)];
        let t = round_robin(&entrants, &ArenaConfig::default()).unwrap();
        let diff = t.table.rating("a").unwrap() - t.table.rating("b").unwrap();
        assert!(diff.abs() <= 2.0 * 32.0 * 100.0);
        // alternating seats make the block symmetric
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn too_few_entrants() {
        let a = Fixed(0);
        let entrants: Vec<(&str, &dyn Agent)> = vec![("a", &a)];
        assert!(matches!(
            round_robin(&entrants, &ArenaConfig::default()),
            Err(ArenaError::TooFewEntrants)
        ));
    }

    #[test]
    fn random_agent_is_uniform_and_legal() {
        let board: Board = "OX.O.X...O".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 9];
        for _ in 0..9000 {
            counts[RandomAgent.choose(&board, &mut rng)] += 1;
        }
        for c in [0, 1, 3, 5] {
            assert_eq!(counts[c], 0);
        }
        for c in [2, 4, 6, 7, 8] {
            assert!((1600..2000).contains(&counts[c]), "{counts:?}");
        }
    }

    #[test]
    fn history_csv_rows() {
        let t = evaluate_vs_random("fixed", &Fixed(4), 1000, &ArenaConfig::default()).unwrap();
        assert_eq!(t.table.get("fixed").unwrap().history.len(), 10);
        let mut buf = Vec::new();
        t.table.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("engine_id,games_played,rating\n"));
        assert_eq!(text.lines().count(), 21);
    }
}
