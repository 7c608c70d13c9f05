use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::search::{run_search, SearchError, SearchParams};
use crate::chess::{Color, GameOutcome, Move, Position, Status, Variant};
use crate::net::Evaluator;

/// Per-ply search output recorded during a game.
#[derive(Debug, Clone)]
pub struct PlyInfo {
    /// Improved policy over legal actions at that ply.
    pub policy: Vec<(usize, f64)>,
    /// Root value estimate from the mover's perspective.
    pub root_value: f64,
}

/// A finished game with everything a replay frame or PGN needs.
#[derive(Debug, Clone)]
pub struct PlayedGame {
    pub variant: Variant,
    pub moves: Vec<Move>,
    pub outcome: GameOutcome,
    pub plies: Vec<PlyInfo>,
}

/// Plays one game, alternating searches per side. The two evaluators may
/// share a parameter set (self-play) or differ (matches). Deterministic
/// for a fixed seed.
pub fn play_game(
    white: &Evaluator,
    black: &Evaluator,
    params: &SearchParams,
    max_plies: u32,
    seed: u64,
) -> Result<PlayedGame, SearchError> {
    let variant = white.graph.variant;
    let mut pos = Position::starting(variant);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moves = Vec::new();
    let mut plies = Vec::new();
    let outcome = loop {
        match pos.status(max_plies) {
            Status::Finished(outcome) => break outcome,
            Status::Ongoing => {}
        }
        let evaluator = match pos.side_to_move {
            Color::White => white,
            Color::Black => black,
        };
        let mut ply_params = params.clone();
        ply_params.seed = rng.gen();
        let result = run_search(&pos, evaluator, &ply_params, max_plies)?;
        plies.push(PlyInfo {
            policy: result.improved_policy,
            root_value: result.root_value,
        });
        moves.push(result.mv);
        pos = pos.apply_move_unchecked(result.mv);
    };
    Ok(PlayedGame {
        variant,
        moves,
        outcome,
        plies,
    })
}
