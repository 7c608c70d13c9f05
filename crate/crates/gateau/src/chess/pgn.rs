use super::fen::emit_fen;
use super::position::Position;
use super::san::move_to_san;
use super::types::{ChessError, GameOutcome, Move, Variant};

/// A completed game ready for PGN export.
#[derive(Debug, Clone)]
pub struct GameRecord {
    pub variant: Variant,
    pub white: String,
    pub black: String,
    pub moves: Vec<Move>,
    pub outcome: GameOutcome,
    /// Starting position if not the variant default.
    pub start: Option<Position>,
    pub round: Option<u32>,
}

impl GameRecord {
    pub fn starting_position(&self) -> Position {
        self.start
            .clone()
            .unwrap_or_else(|| Position::starting(self.variant))
    }
}

/// Seven Tag Roster plus a Variant tag, followed by SAN movetext.
pub fn emit_pgn(record: &GameRecord) -> String {
    let mut out = String::new();
    let result = record.outcome.pgn_result();
    let tag = |out: &mut String, key: &str, value: &str| {
        out.push_str(&format!("[{} \"{}\"]\n", key, value.replace('"', "'")));
    };
    tag(&mut out, "Event", "gateau match");
    tag(&mut out, "Site", "local");
    tag(&mut out, "Date", "????.??.??");
    let round = record
        .round
        .map(|r| r.to_string())
        .unwrap_or_else(|| "-".to_string());
    tag(&mut out, "Round", &round);
    tag(&mut out, "White", &record.white);
    tag(&mut out, "Black", &record.black);
    tag(&mut out, "Result", result);
    tag(&mut out, "Variant", record.variant.name());
    if let Some(start) = &record.start {
        tag(&mut out, "SetUp", "1");
        tag(&mut out, "FEN", &emit_fen(start));
    }
    out.push('\n');

    let mut pos = record.starting_position();
    let mut line = String::new();
    for (i, &mv) in record.moves.iter().enumerate() {
        let mut token = String::new();
        if i % 2 == 0 {
            token.push_str(&format!("{}. ", pos.fullmove_number));
        }
        token.push_str(&move_to_san(&pos, mv));
        if line.len() + token.len() + 1 > 80 {
            out.push_str(line.trim_end());
            out.push('\n');
            line.clear();
        }
        line.push_str(&token);
        line.push(' ');
        pos = pos.apply_move_unchecked(mv);
    }
    line.push_str(result);
    out.push_str(line.trim_end());
    out.push('\n');
    out
}

/// Tag-level view of one PGN game: enough for match bookkeeping.
#[derive(Debug, Clone)]
pub struct PgnGameSummary {
    pub white: String,
    pub black: String,
    pub result: String,
    pub variant: Option<String>,
    /// 1-based index of the game within its source text.
    pub index: usize,
}

/// Splits concatenated PGN text into per-game tag summaries. Movetext is
/// skipped; the Result tag is validated against the movetext terminator.
pub fn parse_pgn_summaries(text: &str) -> Result<Vec<PgnGameSummary>, ChessError> {
    let mut games = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while lines.peek().is_some() {
        // Skip blank lines between games.
        while let Some((_, line)) = lines.peek() {
            if line.trim().is_empty() {
                lines.next();
            } else {
                break;
            }
        }
        if lines.peek().is_none() {
            break;
        }
        let index = games.len() + 1;
        let mut white = None;
        let mut black = None;
        let mut result = None;
        let mut variant = None;
        // Tag section.
        while let Some((_, line)) = lines.peek() {
            let trimmed = line.trim();
            if !trimmed.starts_with('[') {
                break;
            }
            let (lineno, line) = lines.next().unwrap();
            let (key, value) = parse_tag_line(line.trim(), lineno + 1)?;
            match key.as_str() {
                "White" => white = Some(value),
                "Black" => black = Some(value),
                "Result" => result = Some(value),
                "Variant" => variant = Some(value),
                _ => {}
            }
        }
        // Movetext: skip the separating blank line(s), then read until the
        // next blank line or tag section. Remember the final token.
        while let Some((_, line)) = lines.peek() {
            if line.trim().is_empty() {
                lines.next();
            } else {
                break;
            }
        }
        let mut last_token = None;
        while let Some((_, line)) = lines.peek() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('[') {
                break;
            }
            let (_, line) = lines.next().unwrap();
            if let Some(tok) = line.split_whitespace().last() {
                last_token = Some(tok.to_string());
            }
        }
        let result = result.ok_or_else(|| {
            ChessError::parse(0, format!("game {index}: missing Result tag"))
        })?;
        if !matches!(result.as_str(), "1-0" | "0-1" | "1/2-1/2") {
            return Err(ChessError::parse(
                0,
                format!("game {index}: malformed result tag '{result}'"),
            ));
        }
        if let Some(tok) = &last_token {
            if matches!(tok.as_str(), "1-0" | "0-1" | "1/2-1/2" | "*") && tok != &result {
                return Err(ChessError::parse(
                    0,
                    format!(
                        "game {index}: movetext terminator '{tok}' disagrees with Result '{result}'"
                    ),
                ));
            }
        }
        games.push(PgnGameSummary {
            white: white.ok_or_else(|| {
                ChessError::parse(0, format!("game {index}: missing White tag"))
            })?,
            black: black.ok_or_else(|| {
                ChessError::parse(0, format!("game {index}: missing Black tag"))
            })?,
            result,
            variant,
            index,
        });
    }
    Ok(games)
}

fn parse_tag_line(line: &str, lineno: usize) -> Result<(String, String), ChessError> {
    let inner = line
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ChessError::parse(lineno, format!("malformed tag line: {line}")))?;
    let space = inner
        .find(' ')
        .ok_or_else(|| ChessError::parse(lineno, format!("malformed tag line: {line}")))?;
    let key = inner[..space].to_string();
    let value = inner[space + 1..]
        .trim()
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| ChessError::parse(lineno, format!("malformed tag value: {line}")))?
        .to_string();
    Ok((key, value))
}
