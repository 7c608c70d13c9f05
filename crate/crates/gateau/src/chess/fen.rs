use super::board::Board;
use super::position::{CastlingRights, Position};
use super::types::{ChessError, Color, Piece, Square, Variant};

pub const START_FEN_CHESS: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";
pub const START_FEN_GARDNER: &str = "rnbqk/ppppp/5/PPPPP/RNBQK w - - 0 1";

pub fn emit_fen(pos: &Position) -> String {
    let side = pos.board.side();
    let mut castle = String::new();
    for (flag, ch) in pos.castling.0.iter().zip(['K', 'Q', 'k', 'q']) {
        if *flag {
            castle.push(ch);
        }
    }
    if castle.is_empty() {
        castle.push('-');
    }
    let ep = match pos.en_passant {
        Some(sq) => sq.name(side),
        None => "-".to_string(),
    };
    format!(
        "{} {} {} {} {} {}",
        pos.board.placement_fen(),
        match pos.side_to_move {
            Color::White => 'w',
            Color::Black => 'b',
        },
        castle,
        ep,
        pos.halfmove_clock,
        pos.fullmove_number
    )
}

/// Parses a FEN string for the given variant. The Gardner grammar is the
/// standard one restricted to 5 ranks/files, with castling and en passant
/// always "-".
pub fn parse_fen(text: &str, variant: Variant) -> Result<Position, ChessError> {
    let side = variant.board_side();
    let mut fields = FieldCursor::new(text);

    let (placement, placement_off) = fields.next("piece placement")?;
    let board = parse_placement(placement, placement_off, variant)?;

    let (stm_text, stm_off) = fields.next("side to move")?;
    let side_to_move = match stm_text {
        "w" => Color::White,
        "b" => Color::Black,
        other => {
            return Err(ChessError::parse(
                stm_off,
                format!("invalid side to move '{other}'"),
            ))
        }
    };

    let (castle_text, castle_off) = fields.next("castling rights")?;
    let mut castling = CastlingRights::none();
    if castle_text != "-" {
        for (i, ch) in castle_text.chars().enumerate() {
            let idx = match ch {
                'K' => 0,
                'Q' => 1,
                'k' => 2,
                'q' => 3,
                _ => {
                    return Err(ChessError::parse(
                        castle_off + i,
                        format!("invalid castling flag '{ch}'"),
                    ))
                }
            };
            if castling.0[idx] {
                return Err(ChessError::parse(
                    castle_off + i,
                    format!("duplicate castling flag '{ch}'"),
                ));
            }
            castling.0[idx] = true;
        }
    }

    let (ep_text, ep_off) = fields.next("en passant target")?;
    let en_passant = if ep_text == "-" {
        None
    } else {
        Some(Square::parse(ep_text, side).ok_or_else(|| {
            ChessError::parse(ep_off, format!("invalid en-passant square '{ep_text}'"))
        })?)
    };

    let (half_text, half_off) = fields.next("halfmove clock")?;
    let halfmove_clock: u32 = half_text
        .parse()
        .map_err(|_| ChessError::parse(half_off, format!("invalid halfmove clock '{half_text}'")))?;

    let (full_text, full_off) = fields.next("fullmove number")?;
    let fullmove_number: u32 = full_text.parse().map_err(|_| {
        ChessError::parse(full_off, format!("invalid fullmove number '{full_text}'"))
    })?;
    if fullmove_number == 0 {
        return Err(ChessError::parse(full_off, "fullmove number must be >= 1"));
    }

    if let Some((extra, extra_off)) = fields.peek() {
        return Err(ChessError::parse(
            extra_off,
            format!("unexpected trailing field '{extra}'"),
        ));
    }

    Position::from_parts(
        board,
        side_to_move,
        castling,
        en_passant,
        halfmove_clock,
        fullmove_number,
    )
}

/// Parses just a piece-placement field into a board, without any game-state
/// validation. Used for history digests, which may hold either side in check.
pub fn parse_placement_fen(text: &str, variant: Variant) -> Result<Board, ChessError> {
    parse_placement(text, 0, variant)
}

fn parse_placement(text: &str, base: usize, variant: Variant) -> Result<Board, ChessError> {
    let side = variant.board_side();
    let mut board = Board::empty(variant);
    let mut rank = side; // counts down; the first FEN rank is the top one
    let mut file = 0usize;
    let mut started_rank = false;
    for (i, ch) in text.chars().enumerate() {
        let off = base + i;
        if !started_rank {
            if rank == 0 {
                return Err(ChessError::parse(off, "too many ranks"));
            }
            rank -= 1;
            file = 0;
            started_rank = true;
        }
        match ch {
            '/' => {
                if file != side {
                    return Err(ChessError::parse(
                        off,
                        format!("rank has {file} files, expected {side}"),
                    ));
                }
                started_rank = false;
            }
            '1'..='9' => {
                file += ch as usize - '0' as usize;
                if file > side {
                    return Err(ChessError::parse(off, "rank overflows board width"));
                }
            }
            _ => {
                let piece = Piece::from_fen_char(ch)
                    .ok_or_else(|| ChessError::parse(off, format!("invalid piece '{ch}'")))?;
                if file >= side {
                    return Err(ChessError::parse(off, "rank overflows board width"));
                }
                board.set(Square::from_coords(file, rank, side), Some(piece));
                file += 1;
            }
        }
    }
    if rank != 0 || file != side {
        return Err(ChessError::parse(
            base + text.len(),
            format!("expected {side} ranks of {side} files"),
        ));
    }
    Ok(board)
}

struct FieldCursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> FieldCursor<'a> {
    fn new(text: &'a str) -> FieldCursor<'a> {
        FieldCursor { text, pos: 0 }
    }

    fn peek(&mut self) -> Option<(&'a str, usize)> {
        let rest = &self.text[self.pos..];
        let skip = rest.len() - rest.trim_start().len();
        let start = self.pos + skip;
        if start >= self.text.len() {
            return None;
        }
        let rest = &self.text[start..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        Some((&rest[..end], start))
    }

    fn next(&mut self, what: &str) -> Result<(&'a str, usize), ChessError> {
        match self.peek() {
            Some((field, start)) => {
                self.pos = start + field.len();
                Ok((field, start))
            }
            None => Err(ChessError::parse(
                self.text.len(),
                format!("missing field: {what}"),
            )),
        }
    }
}
