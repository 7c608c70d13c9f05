//! Rating estimation: symmetric match tables, the anchored pairwise
//! regression with delta-method variances, adaptive matchmaking, and PGN
//! interchange.

mod matchmaking;
mod pgn_io;
mod rating;
mod table;

pub use matchmaking::{run_matchmaking, MatchmakingError, DEFAULT_MATCH_GAMES, MATCHMAKING_ROUNDS};
pub use pgn_io::{export_match_pgn, ingest_pgn, PgnIoError};
pub use rating::{
    expected_score, fit_ratings_ols, fit_ratings_wls, pair_estimate, RatingError, RatingVector,
    ANCHOR_MEAN, ELO_SCALE,
};
pub use table::{MatchTable, TableError, Wdl};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_symmetry_is_maintained() {
        let mut table = MatchTable::new();
        table.record("x", "y", Wdl::new(3, 2, 1)).unwrap();
        table.record("y", "x", Wdl::new(1, 0, 2)).unwrap();
        assert_eq!(table.get("x", "y").unwrap(), Wdl::new(5, 2, 2));
        assert_eq!(table.get("y", "x").unwrap(), Wdl::new(2, 2, 5));
    }

    #[test]
    fn table_csv_round_trip() {
        let mut table = MatchTable::new();
        table.record("a", "b", Wdl::new(10, 5, 3)).unwrap();
        table.record("b", "c", Wdl::new(1, 2, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matches.csv");
        table.save_csv(&path).unwrap();
        let loaded = MatchTable::load_csv(&path).unwrap();
        for p in table.players() {
            for q in table.players() {
                assert_eq!(table.get(p, q), loaded.get(p, q), "{p} vs {q}");
            }
        }
        // Commas in names are rejected up front.
        assert!(matches!(
            MatchTable::new().add_player("a,b"),
            Err(TableError::BadPlayerName(_))
        ));
    }
}
