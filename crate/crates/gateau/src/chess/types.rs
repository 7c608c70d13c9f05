use std::fmt;

use thiserror::Error;

/// Board geometry and action-space dimensions for a supported chess variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Standard 8x8 chess.
    Chess,
    /// Gardner 5x5 chess: no castling, no double push, no en passant,
    /// promotion on the 5th rank.
    Gardner,
}

impl Variant {
    pub fn board_side(self) -> usize {
        match self {
            Variant::Chess => 8,
            Variant::Gardner => 5,
        }
    }

    pub fn square_count(self) -> usize {
        self.board_side() * self.board_side()
    }

    /// Number of move types per source square: 8*(side-1) sliding
    /// + 8 knight + 9 underpromotion.
    pub fn move_type_count(self) -> usize {
        8 * (self.board_side() - 1) + 8 + 9
    }

    /// Size of the flat action space: square_count * move_type_count.
    pub fn action_count(self) -> usize {
        self.square_count() * self.move_type_count()
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Chess => "chess",
            Variant::Gardner => "gardner",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        match name {
            "chess" => Some(Variant::Chess),
            "gardner" => Some(Variant::Gardner),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn opponent(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Color::White => 0,
            Color::Black => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PieceKind {
    Pawn,
    Knight,
    Bishop,
    Rook,
    Queen,
    King,
}

impl PieceKind {
    pub fn index(self) -> usize {
        match self {
            PieceKind::Pawn => 0,
            PieceKind::Knight => 1,
            PieceKind::Bishop => 2,
            PieceKind::Rook => 3,
            PieceKind::Queen => 4,
            PieceKind::King => 5,
        }
    }

    pub fn san_letter(self) -> char {
        match self {
            PieceKind::Pawn => 'P',
            PieceKind::Knight => 'N',
            PieceKind::Bishop => 'B',
            PieceKind::Rook => 'R',
            PieceKind::Queen => 'Q',
            PieceKind::King => 'K',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Piece {
    pub color: Color,
    pub kind: PieceKind,
}

impl Piece {
    pub fn new(color: Color, kind: PieceKind) -> Piece {
        Piece { color, kind }
    }

    pub fn fen_char(self) -> char {
        let c = match self.kind {
            PieceKind::Pawn => 'p',
            PieceKind::Knight => 'n',
            PieceKind::Bishop => 'b',
            PieceKind::Rook => 'r',
            PieceKind::Queen => 'q',
            PieceKind::King => 'k',
        };
        match self.color {
            Color::White => c.to_ascii_uppercase(),
            Color::Black => c,
        }
    }

    pub fn from_fen_char(c: char) -> Option<Piece> {
        let color = if c.is_ascii_uppercase() {
            Color::White
        } else {
            Color::Black
        };
        let kind = match c.to_ascii_lowercase() {
            'p' => PieceKind::Pawn,
            'n' => PieceKind::Knight,
            'b' => PieceKind::Bishop,
            'r' => PieceKind::Rook,
            'q' => PieceKind::Queen,
            'k' => PieceKind::King,
            _ => return None,
        };
        Some(Piece { color, kind })
    }
}

/// A square index in absolute orientation: `rank * side + file`,
/// rank 0 = white's back rank, file 0 = the a-file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square(pub u8);

impl Square {
    pub fn from_coords(file: usize, rank: usize, side: usize) -> Square {
        debug_assert!(file < side && rank < side);
        Square((rank * side + file) as u8)
    }

    pub fn file(self, side: usize) -> usize {
        self.0 as usize % side
    }

    pub fn rank(self, side: usize) -> usize {
        self.0 as usize / side
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self, side: usize) -> String {
        let file = (b'a' + self.file(side) as u8) as char;
        format!("{}{}", file, self.rank(side) + 1)
    }

    pub fn parse(text: &str, side: usize) -> Option<Square> {
        let bytes = text.as_bytes();
        if bytes.len() != 2 {
            return None;
        }
        let file = bytes[0].checked_sub(b'a')? as usize;
        let rank = bytes[1].checked_sub(b'1')? as usize;
        if file >= side || rank >= side {
            return None;
        }
        Some(Square::from_coords(file, rank, side))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveSpecial {
    None,
    Castle,
    EnPassant,
    DoublePush,
}

/// A move in absolute orientation. `promotion` is present iff a pawn
/// reaches the final rank by this move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<PieceKind>,
    pub special: MoveSpecial,
}

impl Move {
    pub fn new(from: Square, to: Square) -> Move {
        Move {
            from,
            to,
            promotion: None,
            special: MoveSpecial::None,
        }
    }

    pub fn with_promotion(from: Square, to: Square, kind: PieceKind) -> Move {
        Move {
            from,
            to,
            promotion: Some(kind),
            special: MoveSpecial::None,
        }
    }

    pub fn special(from: Square, to: Square, special: MoveSpecial) -> Move {
        Move {
            from,
            to,
            promotion: None,
            special,
        }
    }

    /// Long algebraic form, e.g. "e2e4" or "e7e8q".
    pub fn uci(&self, side: usize) -> String {
        let mut s = format!("{}{}", self.from.name(side), self.to.name(side));
        if let Some(kind) = self.promotion {
            s.push(kind.san_letter().to_ascii_lowercase());
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameResult {
    WhiteWin,
    BlackWin,
    Draw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeReason {
    Checkmate,
    Stalemate,
    FiftyMove,
    Threefold,
    InsufficientMaterial,
    Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameOutcome {
    pub result: GameResult,
    pub reason: OutcomeReason,
}

impl GameOutcome {
    /// Outcome value from `color`'s perspective: +1 win, -1 loss, 0 draw.
    pub fn value_for(&self, color: Color) -> f64 {
        match (self.result, color) {
            (GameResult::WhiteWin, Color::White) => 1.0,
            (GameResult::WhiteWin, Color::Black) => -1.0,
            (GameResult::BlackWin, Color::Black) => 1.0,
            (GameResult::BlackWin, Color::White) => -1.0,
            (GameResult::Draw, _) => 0.0,
        }
    }

    pub fn pgn_result(&self) -> &'static str {
        match self.result {
            GameResult::WhiteWin => "1-0",
            GameResult::BlackWin => "0-1",
            GameResult::Draw => "1/2-1/2",
        }
    }
}

#[derive(Debug, Error)]
pub enum ChessError {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("illegal move {uci} in position {fen}")]
    IllegalMove { uci: String, fen: String },
    #[error("invalid position: {0}")]
    InvalidPosition(String),
}

impl ChessError {
    pub fn parse(offset: usize, message: impl Into<String>) -> ChessError {
        ChessError::Parse {
            offset,
            message: message.into(),
        }
    }
}
