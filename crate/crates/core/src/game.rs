//! Tic-tac-toe rules, the numeric board encoding fed to every engine, and an
//! exhaustive minimax oracle.
//!
//! Cells are indexed row-major `0..9`. `O` always opens the game.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight winning lines.
pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("illegal move at cell {cell}: {reason}")]
    IllegalMove { cell: usize, reason: &'static str },
    #[error("invalid board: {0}")]
    InvalidBoard(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    O,
    X,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::O => Player::X,
            Player::X => Player::O,
        }
    }

    pub fn mark(self) -> Cell {
        match self {
            Player::O => Cell::O,
            Player::X => Cell::X,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Player::O => 'O',
            Player::X => 'X',
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Cell {
    #[default]
    Empty,
    O,
    X,
}

impl Cell {
    fn as_char(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::O => 'O',
            Cell::X => 'X',
        }
    }

    /// O → +1, X → −1, empty → 0.
    pub fn value(self) -> f64 {
        match self {
            Cell::Empty => 0.0,
            Cell::O => 1.0,
            Cell::X => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Ongoing,
    OWins,
    XWins,
    Draw,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Ongoing
    }

    pub fn winner(self) -> Option<Player> {
        match self {
            Outcome::OWins => Some(Player::O),
            Outcome::XWins => Some(Player::X),
            _ => None,
        }
    }

    /// +1 win, −1 loss, 0 draw (or ongoing) from `player`'s point of view.
    pub fn reward_for(self, player: Player) -> f64 {
        match self.winner() {
            Some(w) if w == player => 1.0,
            Some(_) => -1.0,
            None => 0.0,
        }
    }
}

/// A 3×3 position plus the side to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Board {
    cells: [Cell; 9],
    to_move: Player,
}

impl Default for Board {
    fn default() -> Self {
        Self::new()
    }
}

impl Board {
    /// The empty board with O to move.
    pub fn new() -> Self {
        Board {
            cells: [Cell::Empty; 9],
            to_move: Player::O,
        }
    }

    /// Builds a board from explicit cells.
    ///
    /// Mark counts may differ by at most one in either direction so that
    /// colour-swapped positions stay representable; [`Board::is_standard`]
    /// checks the stricter O-moves-first invariant. Positions with two
    /// completed lines belonging to different players are rejected.
    pub fn from_cells(cells: [Cell; 9], to_move: Player) -> Result<Self, GameError> {
        let (o, x) = count_marks(&cells);
        if o.abs_diff(x) > 1 {
            return Err(GameError::InvalidBoard(format!(
                "mark counts O={o} X={x} differ by more than one"
            )));
        }
        let board = Board { cells, to_move };
        if board.has_line(Player::O) && board.has_line(Player::X) {
            return Err(GameError::InvalidBoard("both players have a line".into()));
        }
        Ok(board)
    }

    pub fn cells(&self) -> &[Cell; 9] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> Cell {
        self.cells[index]
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn move_count(&self) -> usize {
        self.cells.iter().filter(|c| **c != Cell::Empty).count()
    }

    /// True when the position could arise from a game where O moved first.
    pub fn is_standard(&self) -> bool {
        let (o, x) = count_marks(&self.cells);
        let expected = if o == x { Player::O } else { Player::X };
        (o == x || o == x + 1) && self.to_move == expected
    }

    pub fn legal_moves(&self) -> Vec<usize> {
        if self.outcome().is_terminal() {
            return Vec::new();
        }
        self.empty_cells().collect()
    }

    fn empty_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..9).filter(|&i| self.cells[i] == Cell::Empty)
    }

    pub fn is_legal(&self, cell: usize) -> bool {
        cell < 9 && self.cells[cell] == Cell::Empty && !self.outcome().is_terminal()
    }

    pub fn apply_move(&self, cell: usize) -> Result<Board, GameError> {
        if cell >= 9 {
            return Err(GameError::IllegalMove {
                cell,
                reason: "index out of range",
            });
        }
        if self.outcome().is_terminal() {
            return Err(GameError::IllegalMove {
                cell,
                reason: "game is over",
            });
        }
        if self.cells[cell] != Cell::Empty {
            return Err(GameError::IllegalMove {
                cell,
                reason: "cell is occupied",
            });
        }
        let mut next = *self;
        next.cells[cell] = self.to_move.mark();
        next.to_move = self.to_move.opponent();
        Ok(next)
    }

    fn has_line(&self, player: Player) -> bool {
        let mark = player.mark();
        LINES
            .iter()
            .any(|line| line.iter().all(|&i| self.cells[i] == mark))
    }

    pub fn outcome(&self) -> Outcome {
        if self.has_line(Player::O) {
            Outcome::OWins
        } else if self.has_line(Player::X) {
            Outcome::XWins
        } else if self.cells.iter().all(|c| *c != Cell::Empty) {
            Outcome::Draw
        } else {
            Outcome::Ongoing
        }
    }

    /// O → +1.0, X → −1.0, empty → 0.0, index-aligned with the cells.
    pub fn encode(&self) -> [f64; 9] {
        self.cells.map(Cell::value)
    }

    /// Swaps every mark and the side to move.
    pub fn swapped(&self) -> Board {
        Board {
            cells: self.cells.map(|c| match c {
                Cell::Empty => Cell::Empty,
                Cell::O => Cell::X,
                Cell::X => Cell::O,
            }),
            to_move: self.to_move.opponent(),
        }
    }
}

fn count_marks(cells: &[Cell; 9]) -> (usize, usize) {
    cells.iter().fold((0, 0), |(o, x), c| match c {
        Cell::O => (o + 1, x),
        Cell::X => (o, x + 1),
        Cell::Empty => (o, x),
    })
}

impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cells {
            write!(f, "{}", c.as_char())?;
        }
        write!(f, "{}", self.to_move.as_char())
    }
}

impl FromStr for Board {
    type Err = GameError;

    /// Parses nine cell chars over `.`/`O`/`X` followed by the side to move.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 10 {
            return Err(GameError::InvalidBoard(format!(
                "expected 10 characters, got {}",
                chars.len()
            )));
        }
        let mut cells = [Cell::Empty; 9];
        for (slot, ch) in cells.iter_mut().zip(&chars[..9]) {
            *slot = match ch {
                '.' => Cell::Empty,
                'O' => Cell::O,
                'X' => Cell::X,
                other => {
                    return Err(GameError::InvalidBoard(format!("bad cell char {other:?}")))
                }
            };
        }
        let to_move = match chars[9] {
            'O' => Player::O,
            'X' => Player::X,
            other => {
                return Err(GameError::InvalidBoard(format!(
                    "bad side-to-move char {other:?}"
                )))
            }
        };
        Board::from_cells(cells, to_move)
    }
}

impl Serialize for Board {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Board {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact game-theoretic value from O's perspective: +1, 0 or −1.
pub fn minimax_value(board: &Board) -> i8 {
    MinimaxCache::new().value(board)
}

/// Memoized minimax; reuse one cache across many queries.
#[derive(Debug, Default)]
pub struct MinimaxCache {
    memo: HashMap<Board, i8>,
}

impl MinimaxCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&mut self, board: &Board) -> i8 {
        if let Some(v) = self.memo.get(board) {
            return *v;
        }
        let v = match board.outcome() {
            Outcome::OWins => 1,
            Outcome::XWins => -1,
            Outcome::Draw => 0,
            Outcome::Ongoing => {
                let children = board.empty_cells().map(|c| {
                    let next = board.apply_move(c).expect("empty cell is legal");
                    self.value(&next)
                });
                let children: Vec<i8> = children.collect();
                match board.to_move() {
                    Player::O => children.into_iter().max().unwrap_or(0),
                    Player::X => children.into_iter().min().unwrap_or(0),
                }
            }
        };
        self.memo.insert(*board, v);
        v
    }

    /// Value of playing `cell` from the mover's perspective (+1 best).
    pub fn move_value(&mut self, board: &Board, cell: usize) -> Option<i8> {
        let next = board.apply_move(cell).ok()?;
        let v = self.value(&next);
        Some(match board.to_move() {
            Player::O => v,
            Player::X => -v,
        })
    }

    /// Every legal move achieving the best value for the side to move.
    pub fn optimal_moves(&mut self, board: &Board) -> Vec<usize> {
        let scored: Vec<(usize, i8)> = board
            .legal_moves()
            .into_iter()
            .filter_map(|c| self.move_value(board, c).map(|v| (c, v)))
            .collect();
        let best = scored.iter().map(|(_, v)| *v).max();
        scored
            .into_iter()
            .filter(|(_, v)| Some(*v) == best)
            .map(|(c, _)| c)
            .collect()
    }
}

/// All positions reachable from the empty board with O moving first,
/// including terminal ones.
pub fn reachable_positions() -> Vec<Board> {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![Board::new()];
    let mut out = Vec::new();
    while let Some(b) = stack.pop() {
        if !seen.insert(b) {
            continue;
        }
        out.push(b);
        for c in b.legal_moves() {
            stack.push(b.apply_move(c).expect("legal"));
        }
    }
    out
}
