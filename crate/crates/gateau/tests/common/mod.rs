//! Independent oracles shared by the integration tests: a square-pair
//! scanning move generator (structurally unlike the engine's piece-centric
//! ray generator) and a mate-in-one position builder verified by
//! exhaustive depth-2 lookahead.

use gateau::chess::{
    is_attacked as engine_attacked, Board, Color, Move, MoveSpecial, PieceKind, Position, Square,
    Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn delta(from: Square, to: Square, side: usize) -> (i32, i32) {
    (
        to.file(side) as i32 - from.file(side) as i32,
        to.rank(side) as i32 - from.rank(side) as i32,
    )
}

fn path_clear(board: &Board, from: Square, to: Square) -> bool {
    let side = board.side();
    let (df, dr) = delta(from, to, side);
    let steps = df.abs().max(dr.abs());
    let (sf, sr) = (df.signum(), dr.signum());
    for k in 1..steps {
        let f = from.file(side) as i32 + sf * k;
        let r = from.rank(side) as i32 + sr * k;
        if board
            .piece_at(Square::from_coords(f as usize, r as usize, side))
            .is_some()
        {
            return false;
        }
    }
    true
}

/// Could a piece of this kind geometrically slide/jump from `from` to
/// `to` on this board (ignoring the occupant of `to`)? Pawns excluded.
fn piece_reaches(kind: PieceKind, board: &Board, from: Square, to: Square) -> bool {
    let side = board.side();
    let (df, dr) = delta(from, to, side);
    if (df, dr) == (0, 0) {
        return false;
    }
    match kind {
        PieceKind::Knight => df.abs() * dr.abs() == 2,
        PieceKind::King => df.abs().max(dr.abs()) == 1,
        PieceKind::Rook => (df == 0 || dr == 0) && path_clear(board, from, to),
        PieceKind::Bishop => df.abs() == dr.abs() && path_clear(board, from, to),
        PieceKind::Queen => {
            (df == 0 || dr == 0 || df.abs() == dr.abs()) && path_clear(board, from, to)
        }
        PieceKind::Pawn => false,
    }
}

/// Attack scan by brute enumeration over all of `by`'s pieces.
pub fn naive_attacked(board: &Board, target: Square, by: Color) -> bool {
    let side = board.side();
    for (from, piece) in board.squares() {
        if piece.color != by {
            continue;
        }
        if piece.kind == PieceKind::Pawn {
            let dir: i32 = if by == Color::White { 1 } else { -1 };
            let (df, dr) = delta(from, target, side);
            if dr == dir && df.abs() == 1 {
                return true;
            }
        } else if piece_reaches(piece.kind, board, from, target) {
            return true;
        }
    }
    false
}

fn apply_to_board(board: &Board, mv: Move, mover: Color) -> Board {
    let side = board.side();
    let mut next = board.clone();
    let piece = board.piece_at(mv.from).expect("source occupied");
    next.set(mv.from, None);
    next.set(
        mv.to,
        Some(match mv.promotion {
            Some(kind) => gateau::chess::Piece::new(mover, kind),
            None => piece,
        }),
    );
    match mv.special {
        MoveSpecial::EnPassant => {
            next.set(
                Square::from_coords(mv.to.file(side), mv.from.rank(side), side),
                None,
            );
        }
        MoveSpecial::Castle => {
            let rank = mv.from.rank(side);
            let (rf, rt) = if mv.to.file(side) > mv.from.file(side) {
                (side - 1, mv.to.file(side) - 1)
            } else {
                (0, mv.to.file(side) + 1)
            };
            let rook = next.piece_at(Square::from_coords(rf, rank, side));
            next.set(Square::from_coords(rf, rank, side), None);
            next.set(Square::from_coords(rt, rank, side), rook);
        }
        _ => {}
    }
    next
}

/// Exhaustive square-pair legal move generation.
pub fn naive_legal_moves(pos: &Position) -> Vec<Move> {
    let board = &pos.board;
    let side = board.side();
    let us = pos.side_to_move;
    let them = us.opponent();
    let mut candidates: Vec<Move> = Vec::new();

    for (from, piece) in board.squares() {
        if piece.color != us {
            continue;
        }
        for idx in 0..side * side {
            let to = Square(idx as u8);
            if to == from {
                continue;
            }
            if let Some(p) = board.piece_at(to) {
                if p.color == us {
                    continue;
                }
            }
            if piece.kind == PieceKind::Pawn {
                let dir: i32 = if us == Color::White { 1 } else { -1 };
                let start_rank = if us == Color::White { 1 } else { side - 2 };
                let last_rank = if us == Color::White { side - 1 } else { 0 };
                let (df, dr) = delta(from, to, side);
                let push1 = df == 0 && dr == dir && board.piece_at(to).is_none();
                let push2 = pos.variant() == Variant::Chess
                    && df == 0
                    && dr == 2 * dir
                    && from.rank(side) == start_rank
                    && board.piece_at(to).is_none()
                    && path_clear(board, from, to);
                let capture = df.abs() == 1 && dr == dir && board.piece_at(to).is_some();
                let ep = pos.variant() == Variant::Chess
                    && df.abs() == 1
                    && dr == dir
                    && board.piece_at(to).is_none()
                    && pos.en_passant == Some(to);
                if push1 || capture {
                    if to.rank(side) == last_rank {
                        for kind in [
                            PieceKind::Queen,
                            PieceKind::Rook,
                            PieceKind::Bishop,
                            PieceKind::Knight,
                        ] {
                            candidates.push(Move::with_promotion(from, to, kind));
                        }
                    } else {
                        candidates.push(Move::new(from, to));
                    }
                } else if push2 {
                    candidates.push(Move::special(from, to, MoveSpecial::DoublePush));
                } else if ep {
                    candidates.push(Move::special(from, to, MoveSpecial::EnPassant));
                }
            } else if piece_reaches(piece.kind, board, from, to) {
                candidates.push(Move::new(from, to));
            }
        }
    }

    // Castling, standard board only.
    if pos.variant() == Variant::Chess {
        let home = if us == Color::White { 0 } else { side - 1 };
        let king_sq = Square::from_coords(4, home, side);
        if board.piece_at(king_sq) == Some(gateau::chess::Piece::new(us, PieceKind::King))
            && !naive_attacked(board, king_sq, them)
        {
            let sides: [(bool, usize, Vec<usize>, [usize; 2]); 2] = [
                (true, 7, vec![5, 6], [5, 6]),
                (false, 0, vec![1, 2, 3], [3, 2]),
            ];
            for (kingside, rook_file, empties, path) in sides {
                let allowed = if kingside {
                    pos.castling.kingside(us)
                } else {
                    pos.castling.queenside(us)
                };
                let rook_sq = Square::from_coords(rook_file, home, side);
                if allowed
                    && board.piece_at(rook_sq)
                        == Some(gateau::chess::Piece::new(us, PieceKind::Rook))
                    && empties
                        .iter()
                        .all(|&f| board.piece_at(Square::from_coords(f, home, side)).is_none())
                    && path
                        .iter()
                        .all(|&f| !naive_attacked(board, Square::from_coords(f, home, side), them))
                {
                    candidates.push(Move::special(
                        king_sq,
                        Square::from_coords(path[1], home, side),
                        MoveSpecial::Castle,
                    ));
                }
            }
        }
    }

    candidates.retain(|&mv| {
        let next = apply_to_board(board, mv, us);
        let king = next.king_square(us).expect("king survives");
        !naive_attacked(&next, king, them)
    });
    candidates
}

/// Perft over the oracle generator. State evolution reuses the engine's
/// move application; the independently generated move sets are what this
/// oracle pins down.
pub fn naive_perft(pos: &Position, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = naive_legal_moves(pos);
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .into_iter()
        .map(|m| naive_perft(&pos.apply_move_unchecked(m), depth - 1))
        .sum()
}

/// Checkmate test by pure oracle machinery: the mover has no legal moves
/// and its king is attacked.
pub fn naive_is_checkmate(pos: &Position) -> bool {
    let king = pos
        .board
        .king_square(pos.side_to_move)
        .expect("valid position");
    naive_legal_moves(pos).is_empty()
        && naive_attacked(&pos.board, king, pos.side_to_move.opponent())
}

/// Mate-in-one instance: the position, its unique mating move, and the
/// total number of legal moves.
pub struct MateInOne {
    pub position: Position,
    pub mating_move: Move,
    pub legal_count: usize,
}

/// Generates queen/rook endgame positions where exactly one legal move
/// checkmates, each verified by exhaustive depth-2 oracle search.
pub fn generate_mate_in_one(count: usize, seed: u64) -> Vec<MateInOne> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while found.len() < count {
        let Some(pos) = random_sparse_position(&mut rng) else {
            continue;
        };
        let moves = naive_legal_moves(&pos);
        if moves.len() < 3 {
            continue;
        }
        let mut mating: Vec<Move> = Vec::new();
        for &mv in &moves {
            let next = pos.apply_move_unchecked(mv);
            if naive_is_checkmate(&next) {
                mating.push(mv);
            }
        }
        if mating.len() != 1 {
            continue;
        }
        let fen = gateau::chess::emit_fen(&pos);
        if !seen.insert(fen) {
            continue;
        }
        // Cross-check against the engine's generator: the mating move is
        // legal there too (its uniqueness is the oracle's claim).
        assert!(pos.legal_moves().contains(&mating[0]));
        found.push(MateInOne {
            position: pos,
            mating_move: mating[0],
            legal_count: moves.len(),
        });
    }
    found
}

fn random_sparse_position(rng: &mut ChaCha8Rng) -> Option<Position> {
    use gateau::chess::{parse_fen, Piece};
    let side = 8usize;
    let mut board = Board::empty(Variant::Chess);
    let bk = Square::from_coords(rng.gen_range(0..side), rng.gen_range(0..side), side);
    let wk = Square::from_coords(rng.gen_range(0..side), rng.gen_range(0..side), side);
    let (df, dr) = (
        (bk.file(side) as i32 - wk.file(side) as i32).abs(),
        (bk.rank(side) as i32 - wk.rank(side) as i32).abs(),
    );
    if df.max(dr) < 2 {
        return None;
    }
    board.set(bk, Some(Piece::new(Color::Black, PieceKind::King)));
    board.set(wk, Some(Piece::new(Color::White, PieceKind::King)));
    let heavy = if rng.gen_bool(0.6) {
        PieceKind::Queen
    } else {
        PieceKind::Rook
    };
    let hq = Square::from_coords(rng.gen_range(0..side), rng.gen_range(0..side), side);
    if board.piece_at(hq).is_some() {
        return None;
    }
    board.set(hq, Some(Piece::new(Color::White, heavy)));
    // Round-trip through FEN so the standard validation applies.
    let fen = format!("{} w - - 0 1", board.placement_fen());
    let pos = parse_fen(&fen, Variant::Chess).ok()?;
    // Engine and oracle must agree that black is not already in check.
    if engine_attacked(&pos.board, bk, Color::White) || naive_attacked(&pos.board, bk, Color::White)
    {
        return None;
    }
    Some(pos)
}
