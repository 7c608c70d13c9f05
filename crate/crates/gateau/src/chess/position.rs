use std::collections::VecDeque;

use super::board::Board;
use super::geometry::{offset, KNIGHT_DELTAS, SLIDING_DIRS};
use super::types::{
    ChessError, Color, GameOutcome, GameResult, Move, MoveSpecial, OutcomeReason, Piece,
    PieceKind, Square, Variant,
};

pub const HISTORY_LEN: usize = 7;

/// Castling rights in absolute orientation:
/// white kingside, white queenside, black kingside, black queenside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CastlingRights(pub [bool; 4]);

impl CastlingRights {
    pub fn all() -> CastlingRights {
        CastlingRights([true; 4])
    }

    pub fn none() -> CastlingRights {
        CastlingRights([false; 4])
    }

    pub fn kingside(&self, color: Color) -> bool {
        self.0[color.index() * 2]
    }

    pub fn queenside(&self, color: Color) -> bool {
        self.0[color.index() * 2 + 1]
    }

    fn clear(&mut self, color: Color) {
        self.0[color.index() * 2] = false;
        self.0[color.index() * 2 + 1] = false;
    }
}

/// A prior position retained for feature encoding: its piece placement and
/// how many times it had already occurred when it was current.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub board: Board,
    pub repetitions: u8,
}

/// Complete game state for one variant. Value semantics: every operation
/// is a pure function of its inputs, so positions can be shared or copied
/// freely across threads.
#[derive(Debug, Clone)]
pub struct Position {
    pub board: Board,
    pub side_to_move: Color,
    pub castling: CastlingRights,
    pub en_passant: Option<Square>,
    pub halfmove_clock: u32,
    pub fullmove_number: u32,
    ply: u32,
    history_keys: Vec<u64>,
    recent: VecDeque<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ongoing,
    Finished(GameOutcome),
}

impl Position {
    pub fn starting(variant: Variant) -> Position {
        let castling = match variant {
            Variant::Chess => CastlingRights::all(),
            Variant::Gardner => CastlingRights::none(),
        };
        Position {
            board: Board::starting(variant),
            side_to_move: Color::White,
            castling,
            en_passant: None,
            halfmove_clock: 0,
            fullmove_number: 1,
            ply: 0,
            history_keys: Vec::new(),
            recent: VecDeque::new(),
        }
    }

    pub fn from_parts(
        board: Board,
        side_to_move: Color,
        castling: CastlingRights,
        en_passant: Option<Square>,
        halfmove_clock: u32,
        fullmove_number: u32,
    ) -> Result<Position, ChessError> {
        let ply = (fullmove_number.saturating_sub(1)) * 2
            + match side_to_move {
                Color::White => 0,
                Color::Black => 1,
            };
        let pos = Position {
            board,
            side_to_move,
            castling,
            en_passant,
            halfmove_clock,
            fullmove_number,
            ply,
            history_keys: Vec::new(),
            recent: VecDeque::new(),
        };
        pos.validate()?;
        Ok(pos)
    }

    pub fn variant(&self) -> Variant {
        self.board.variant
    }

    pub fn ply(&self) -> u32 {
        self.ply
    }

    pub fn validate(&self) -> Result<(), ChessError> {
        for &color in &[Color::White, Color::Black] {
            let kings = self.board.count(color, PieceKind::King);
            if kings != 1 {
                return Err(ChessError::InvalidPosition(format!(
                    "expected exactly one {:?} king, found {kings}",
                    color
                )));
            }
        }
        let side = self.board.side();
        for (sq, p) in self.board.squares() {
            if p.kind == PieceKind::Pawn && (sq.rank(side) == 0 || sq.rank(side) == side - 1) {
                return Err(ChessError::InvalidPosition(format!(
                    "pawn on terminal rank at {}",
                    sq.name(side)
                )));
            }
        }
        if self.variant() == Variant::Gardner {
            if self.castling != CastlingRights::none() {
                return Err(ChessError::InvalidPosition(
                    "castling rights are not valid in gardner chess".into(),
                ));
            }
            if self.en_passant.is_some() {
                return Err(ChessError::InvalidPosition(
                    "en passant is not valid in gardner chess".into(),
                ));
            }
        }
        let opponent = self.side_to_move.opponent();
        let king = self.board.king_square(opponent).expect("king checked above");
        if is_attacked(&self.board, king, self.side_to_move) {
            return Err(ChessError::InvalidPosition(
                "side not to move is in check".into(),
            ));
        }
        Ok(())
    }

    /// Repetition key: board placement, side to move, castling rights and
    /// en-passant target (standard triple-repetition semantics).
    pub fn key(&self) -> u64 {
        let mut h = Fnv::new();
        for i in 0..self.variant().square_count() {
            let sq = Square(i as u8);
            let code = match self.board.piece_at(sq) {
                None => 0u8,
                Some(p) => 1 + (p.color.index() * 6 + p.kind.index()) as u8,
            };
            h.write(code);
        }
        h.write(self.side_to_move.index() as u8);
        for &b in &self.castling.0 {
            h.write(b as u8);
        }
        match self.en_passant {
            Some(sq) => h.write(1 + sq.0),
            None => h.write(0),
        }
        h.finish()
    }

    /// How many times this position occurred earlier in the game.
    pub fn repetition_count(&self) -> usize {
        let key = self.key();
        self.history_keys.iter().filter(|&&k| k == key).count()
    }

    /// Up to seven most recent prior positions, newest first.
    pub fn recent_history(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.recent.iter()
    }

    /// Replaces the retained history. Used when reconstructing a position
    /// from a stored frame record.
    pub fn restore_history(&mut self, entries: Vec<HistoryEntry>, current_repetitions: u8) {
        self.recent = entries.into_iter().take(HISTORY_LEN).collect();
        // Synthesize keys so repetition_count reflects the stored count.
        let key = self.key();
        self.history_keys = vec![key; current_repetitions as usize];
    }

    pub fn in_check(&self) -> bool {
        let king = self
            .board
            .king_square(self.side_to_move)
            .expect("valid positions have a king");
        is_attacked(&self.board, king, self.side_to_move.opponent())
    }

    /// Applies a move after verifying it is legal.
    pub fn apply_move(&self, mv: Move) -> Result<Position, ChessError> {
        if !self.legal_moves().contains(&mv) {
            return Err(ChessError::IllegalMove {
                uci: mv.uci(self.board.side()),
                fen: super::fen::emit_fen(self),
            });
        }
        Ok(self.apply_move_unchecked(mv))
    }

    /// Applies a move that is known to come from `legal_moves`.
    pub fn apply_move_unchecked(&self, mv: Move) -> Position {
        let mut next = self.clone();
        let side = self.board.side();
        let mover = self
            .board
            .piece_at(mv.from)
            .expect("legal move has a piece on its source square");

        next.history_keys.push(self.key());
        next.recent.push_front(HistoryEntry {
            board: self.board.clone(),
            repetitions: self.repetition_count().min(255) as u8,
        });
        next.recent.truncate(HISTORY_LEN);

        let is_capture =
            self.board.piece_at(mv.to).is_some() || mv.special == MoveSpecial::EnPassant;
        next.halfmove_clock = if is_capture || mover.kind == PieceKind::Pawn {
            0
        } else {
            self.halfmove_clock + 1
        };

        // Board update.
        next.board.set(mv.from, None);
        let placed = match mv.promotion {
            Some(kind) => Piece::new(mover.color, kind),
            None => mover,
        };
        next.board.set(mv.to, Some(placed));
        match mv.special {
            MoveSpecial::EnPassant => {
                let captured = Square::from_coords(mv.to.file(side), mv.from.rank(side), side);
                next.board.set(captured, None);
            }
            MoveSpecial::Castle => {
                let rank = mv.from.rank(side);
                let (rook_from, rook_to) = if mv.to.file(side) > mv.from.file(side) {
                    (
                        Square::from_coords(side - 1, rank, side),
                        Square::from_coords(mv.to.file(side) - 1, rank, side),
                    )
                } else {
                    (
                        Square::from_coords(0, rank, side),
                        Square::from_coords(mv.to.file(side) + 1, rank, side),
                    )
                };
                let rook = next.board.piece_at(rook_from);
                next.board.set(rook_from, None);
                next.board.set(rook_to, rook);
            }
            _ => {}
        }

        // Castling-rights update.
        if mover.kind == PieceKind::King {
            next.castling.clear(mover.color);
        }
        if self.variant() == Variant::Chess {
            for (corner_file, corner_rank, idx) in [
                (side - 1, 0, 0usize), // white kingside rook
                (0, 0, 1),             // white queenside rook
                (side - 1, side - 1, 2),
                (0, side - 1, 3),
            ] {
                let corner = Square::from_coords(corner_file, corner_rank, side);
                if mv.from == corner || mv.to == corner {
                    next.castling.0[idx] = false;
                }
            }
        }

        next.en_passant = if mv.special == MoveSpecial::DoublePush {
            let dir: i32 = if mover.color == Color::White { 1 } else { -1 };
            Some(Square::from_coords(
                mv.from.file(side),
                (mv.from.rank(side) as i32 + dir) as usize,
                side,
            ))
        } else {
            None
        };

        next.side_to_move = self.side_to_move.opponent();
        if self.side_to_move == Color::Black {
            next.fullmove_number += 1;
        }
        next.ply += 1;
        next
    }

    /// Game status with a ply cap: reaching `max_plies` with the game
    /// still ongoing scores as a truncation draw.
    pub fn status(&self, max_plies: u32) -> Status {
        if self.legal_moves().is_empty() {
            return if self.in_check() {
                let result = match self.side_to_move {
                    Color::White => GameResult::BlackWin,
                    Color::Black => GameResult::WhiteWin,
                };
                Status::Finished(GameOutcome {
                    result,
                    reason: OutcomeReason::Checkmate,
                })
            } else {
                Status::Finished(GameOutcome {
                    result: GameResult::Draw,
                    reason: OutcomeReason::Stalemate,
                })
            };
        }
        if self.halfmove_clock >= 100 {
            return Status::Finished(GameOutcome {
                result: GameResult::Draw,
                reason: OutcomeReason::FiftyMove,
            });
        }
        if self.repetition_count() >= 2 {
            return Status::Finished(GameOutcome {
                result: GameResult::Draw,
                reason: OutcomeReason::Threefold,
            });
        }
        if self.insufficient_material() {
            return Status::Finished(GameOutcome {
                result: GameResult::Draw,
                reason: OutcomeReason::InsufficientMaterial,
            });
        }
        if self.ply >= max_plies {
            return Status::Finished(GameOutcome {
                result: GameResult::Draw,
                reason: OutcomeReason::Truncation,
            });
        }
        Status::Ongoing
    }

    /// Kings only, or king + single minor piece versus bare king.
    fn insufficient_material(&self) -> bool {
        let mut extras = Vec::new();
        for (_, p) in self.board.squares() {
            if p.kind != PieceKind::King {
                extras.push(p.kind);
                if extras.len() > 1 {
                    return false;
                }
            }
        }
        match extras.as_slice() {
            [] => true,
            [PieceKind::Knight] | [PieceKind::Bishop] => true,
            _ => false,
        }
    }

    pub fn legal_moves(&self) -> Vec<Move> {
        super::movegen::legal_moves(self)
    }

    pub fn perft(&self, depth: u32) -> u64 {
        if depth == 0 {
            return 1;
        }
        let moves = self.legal_moves();
        if depth == 1 {
            return moves.len() as u64;
        }
        moves
            .into_iter()
            .map(|m| self.apply_move_unchecked(m).perft(depth - 1))
            .sum()
    }
}

/// Is `sq` attacked by any piece of `by`?
pub fn is_attacked(board: &Board, sq: Square, by: Color) -> bool {
    let side = board.side();
    let (file, rank) = (sq.file(side), sq.rank(side));

    for (df, dr) in KNIGHT_DELTAS {
        if let Some((f, r)) = offset(file, rank, df, dr, side) {
            if board.piece_at(Square::from_coords(f, r, side))
                == Some(Piece::new(by, PieceKind::Knight))
            {
                return true;
            }
        }
    }

    // Pawn attacks: a pawn of `by` sitting one step diagonally "behind" sq.
    let pawn_dr: i32 = match by {
        Color::White => -1,
        Color::Black => 1,
    };
    for df in [-1, 1] {
        if let Some((f, r)) = offset(file, rank, df, pawn_dr, side) {
            if board.piece_at(Square::from_coords(f, r, side))
                == Some(Piece::new(by, PieceKind::Pawn))
            {
                return true;
            }
        }
    }

    for (dir_idx, (df, dr)) in SLIDING_DIRS.iter().enumerate() {
        let diagonal = dir_idx % 2 == 1;
        let mut dist = 1;
        while let Some((f, r)) = offset(file, rank, df * dist, dr * dist, side) {
            if let Some(p) = board.piece_at(Square::from_coords(f, r, side)) {
                if p.color == by {
                    let slides = match p.kind {
                        PieceKind::Queen => true,
                        PieceKind::Bishop => diagonal,
                        PieceKind::Rook => !diagonal,
                        PieceKind::King => dist == 1,
                        _ => false,
                    };
                    if slides {
                        return true;
                    }
                }
                break;
            }
            dist += 1;
        }
    }
    false
}

/// FNV-1a, used for repetition keys. Deterministic across runs.
struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, byte: u8) {
        self.0 ^= byte as u64;
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
