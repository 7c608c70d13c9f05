use thiserror::Error;

use super::rating::{fit_ratings_ols, RatingError, ANCHOR_MEAN};
use super::table::{MatchTable, TableError, Wdl};

pub const DEFAULT_MATCH_GAMES: u32 = 60;
pub const MATCHMAKING_ROUNDS: u32 = 5;

#[derive(Debug, Error)]
pub enum MatchmakingError {
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("matchmaking needs at least one opponent in the table")]
    NoOpponents,
    #[error("match callback failed: {0}")]
    Play(String),
}

/// Adaptive matchmaking: each new player plays five matches, each time
/// against the rated player currently closest to it (a newcomer starts at
/// the anchor rating of 1000). The table is re-fitted between rounds with
/// the rough least-squares estimate.
pub fn run_matchmaking(
    table: &mut MatchTable,
    unmatched: &[String],
    games_per_match: u32,
    mut play: impl FnMut(&str, &str, u32) -> Result<Wdl, String>,
) -> Result<(), MatchmakingError> {
    for player in unmatched {
        table.add_player(player)?;
        for _round in 0..MATCHMAKING_ROUNDS {
            let ratings = fit_ratings_of_matched(table)?;
            let own = ratings
                .iter()
                .find(|(name, _)| name == player)
                .map(|&(_, r)| r)
                .unwrap_or(ANCHOR_MEAN);
            let opponent = ratings
                .iter()
                .filter(|(name, _)| name != player)
                .min_by(|a, b| {
                    let da = (a.1 - own).abs();
                    let db = (b.1 - own).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(name, _)| name.clone())
                .ok_or(MatchmakingError::NoOpponents)?;
            let wdl = play(player, &opponent, games_per_match).map_err(MatchmakingError::Play)?;
            table.record(player, &opponent, wdl)?;
        }
    }
    Ok(())
}

/// Ratings of the players that already have games; isolated players are
/// skipped so the in-loop fit never sees a disconnected graph.
fn fit_ratings_of_matched(
    table: &MatchTable,
) -> Result<Vec<(String, f64)>, MatchmakingError> {
    let mut matched = MatchTable::new();
    for (i, j, wdl) in table.pairs() {
        matched.record(&table.players()[i], &table.players()[j], wdl)?;
    }
    if matched.players().is_empty() {
        // No games at all yet: everyone sits at the anchor.
        return Ok(table
            .players()
            .iter()
            .map(|p| (p.clone(), ANCHOR_MEAN))
            .collect());
    }
    let fitted = fit_ratings_ols(&matched)?;
    Ok(fitted
        .players
        .iter()
        .cloned()
        .zip(fitted.ratings.iter().copied())
        .collect())
}
