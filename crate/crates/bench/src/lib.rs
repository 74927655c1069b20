//! Shared fixtures for the benchmarks.

use qttt_core::Board;

/// A few mid-game positions with both sides to move.
pub fn sample_boards() -> Vec<Board> {
    [".........O", "....O....X", "O...X....O", "OX..O...XO", "OXO.X.X.OO"]
        .iter()
        .map(|s| s.parse().expect("fixture boards are valid"))
        .collect()
}
