use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Win/draw/loss counts of an ordered pair, from the first player's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Wdl {
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
}

impl Wdl {
    pub fn new(wins: u32, draws: u32, losses: u32) -> Wdl {
        Wdl {
            wins,
            draws,
            losses,
        }
    }

    pub fn games(&self) -> u32 {
        self.wins + self.draws + self.losses
    }

    pub fn reversed(&self) -> Wdl {
        Wdl {
            wins: self.losses,
            draws: self.draws,
            losses: self.wins,
        }
    }

    pub fn add(&mut self, other: Wdl) {
        self.wins += other.wins;
        self.draws += other.draws;
        self.losses += other.losses;
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("unknown player '{0}'")]
    UnknownPlayer(String),
    #[error("player name '{0}' may not contain commas or newlines")]
    BadPlayerName(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed match table at line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Symmetric win/draw/loss counts between players: the entry for (j, i) is
/// always the reverse of (i, j).
#[derive(Debug, Clone, Default)]
pub struct MatchTable {
    players: Vec<String>,
    counts: BTreeMap<(usize, usize), Wdl>,
}

impl MatchTable {
    pub fn new() -> MatchTable {
        MatchTable::default()
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn player_index(&self, name: &str) -> Option<usize> {
        self.players.iter().position(|p| p == name)
    }

    /// Registers a player (idempotent). Names must be CSV-safe.
    pub fn add_player(&mut self, name: &str) -> Result<usize, TableError> {
        if name.contains(',') || name.contains('\n') || name.is_empty() {
            return Err(TableError::BadPlayerName(name.to_string()));
        }
        Ok(match self.player_index(name) {
            Some(i) => i,
            None => {
                self.players.push(name.to_string());
                self.players.len() - 1
            }
        })
    }

    /// Accumulates a match result for `a` against `b`; the symmetric entry
    /// is maintained automatically.
    pub fn record(&mut self, a: &str, b: &str, result: Wdl) -> Result<(), TableError> {
        let i = self.add_player(a)?;
        let j = self.add_player(b)?;
        self.counts.entry((i, j)).or_default().add(result);
        self.counts.entry((j, i)).or_default().add(result.reversed());
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Option<Wdl> {
        let i = self.player_index(a)?;
        let j = self.player_index(b)?;
        self.counts.get(&(i, j)).copied()
    }

    /// Ordered pairs (i < j) with at least one game.
    pub fn pairs(&self) -> Vec<(usize, usize, Wdl)> {
        self.counts
            .iter()
            .filter(|&(&(i, j), w)| i < j && w.games() > 0)
            .map(|(&(i, j), &w)| (i, j, w))
            .collect()
    }

    /// Total games involving `player`.
    pub fn games_of(&self, name: &str) -> u32 {
        match self.player_index(name) {
            None => 0,
            Some(i) => self
                .counts
                .iter()
                .filter(|&(&(a, _), _)| a == i)
                .map(|(_, w)| w.games())
                .sum(),
        }
    }

    /// Checks the match graph is connected over all players; on failure
    /// returns the components for the error message.
    pub fn components(&self) -> Vec<Vec<String>> {
        let n = self.players.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for (&(i, j), w) in &self.counts {
            if w.games() > 0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(self.players[i].clone());
        }
        groups.into_values().collect()
    }

    /// Persists the table as CSV: `player_i,player_j,wins,draws,losses`,
    /// one row per unordered pair (from the lexicographically first
    /// player's side). Atomic via temp + rename.
    pub fn save_csv(&self, path: &Path) -> Result<(), TableError> {
        let io = |source| TableError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = String::from("player_i,player_j,wins,draws,losses\n");
        for (i, j, w) in self.pairs() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.players[i], self.players[j], w.wins, w.draws, w.losses
            ));
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, out).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load_csv(path: &Path) -> Result<MatchTable, TableError> {
        let io = |source| TableError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = fs::read_to_string(path).map_err(io)?;
        let mut table = MatchTable::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                if line != "player_i,player_j,wins,draws,losses" {
                    return Err(TableError::Format {
                        line: 1,
                        message: format!("unexpected header '{line}'"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(TableError::Format {
                    line: lineno + 1,
                    message: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<u32, TableError> {
                s.parse().map_err(|_| TableError::Format {
                    line: lineno + 1,
                    message: format!("bad count '{s}'"),
                })
            };
            let wdl = Wdl::new(parse(fields[2])?, parse(fields[3])?, parse(fields[4])?);
            table.record(fields[0], fields[1], wdl)?;
        }
        Ok(table)
    }
}
