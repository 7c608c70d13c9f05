use std::fs;
use std::path::Path;

use thiserror::Error;

use super::table::{MatchTable, TableError, Wdl};
use crate::chess::{emit_pgn, parse_pgn_summaries, ChessError, GameRecord};

#[derive(Debug, Error)]
pub enum PgnIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ChessError },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Builds a match table from PGN files whose White/Black tags name the
/// players. Each game contributes one win, draw, or loss.
pub fn ingest_pgn(paths: &[&Path]) -> Result<MatchTable, PgnIoError> {
    let mut table = MatchTable::new();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|source| PgnIoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let games = parse_pgn_summaries(&text).map_err(|source| PgnIoError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        for game in games {
            let wdl = match game.result.as_str() {
                "1-0" => Wdl::new(1, 0, 0),
                "0-1" => Wdl::new(0, 0, 1),
                _ => Wdl::new(0, 1, 0),
            };
            table.record(&game.white, &game.black, wdl)?;
        }
    }
    Ok(table)
}

/// Writes game records into one PGN file. Atomic via temp + rename.
pub fn export_match_pgn(records: &[GameRecord], path: &Path) -> Result<(), PgnIoError> {
    let io = |source| PgnIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = String::new();
    for record in records {
        out.push_str(&emit_pgn(record));
        out.push('\n');
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, out).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
