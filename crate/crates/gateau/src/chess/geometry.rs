//! Shared move geometry: direction tables used by both the rules engine
//! and the move-graph construction.

/// The eight sliding directions in canonical order:
/// N, NE, E, SE, S, SW, W, NW, as (file delta, rank delta).
pub const SLIDING_DIRS: [(i32, i32); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// The eight knight jumps in clockwise order starting from (+1, +2).
pub const KNIGHT_DELTAS: [(i32, i32); 8] = [
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
    (-2, 1),
    (-1, 2),
];

/// Underpromotion directions in canonical order: capture-left, push,
/// capture-right (file delta relative to the promoting side's forward).
pub const UNDERPROMO_DIRS: [i32; 3] = [-1, 0, 1];

/// Underpromotion target pieces in canonical order.
pub const UNDERPROMO_PIECES: usize = 3; // knight, bishop, rook

pub fn offset(
    file: usize,
    rank: usize,
    df: i32,
    dr: i32,
    side: usize,
) -> Option<(usize, usize)> {
    let f = file as i32 + df;
    let r = rank as i32 + dr;
    if f < 0 || r < 0 || f >= side as i32 || r >= side as i32 {
        None
    } else {
        Some((f as usize, r as usize))
    }
}
