use super::board::Board;
use super::geometry::{offset, KNIGHT_DELTAS, SLIDING_DIRS};
use super::position::{is_attacked, Position};
use super::types::{Color, Move, MoveSpecial, Piece, PieceKind, Square, Variant};

const PROMOTION_KINDS: [PieceKind; 4] = [
    PieceKind::Queen,
    PieceKind::Rook,
    PieceKind::Bishop,
    PieceKind::Knight,
];

pub fn legal_moves(pos: &Position) -> Vec<Move> {
    let mut moves = Vec::with_capacity(64);
    pseudo_legal_moves(pos, &mut moves);
    moves.retain(|&mv| leaves_king_safe(pos, mv));
    moves
}

fn pseudo_legal_moves(pos: &Position, out: &mut Vec<Move>) {
    let board = &pos.board;
    let us = pos.side_to_move;
    for (from, piece) in board.squares() {
        if piece.color != us {
            continue;
        }
        match piece.kind {
            PieceKind::Pawn => pawn_moves(pos, from, out),
            PieceKind::Knight => leaper_moves(board, from, us, &KNIGHT_DELTAS, out),
            PieceKind::King => {
                let king_deltas: Vec<(i32, i32)> = SLIDING_DIRS.to_vec();
                leaper_moves(board, from, us, &king_deltas, out);
                castle_moves(pos, from, out);
            }
            PieceKind::Bishop => slider_moves(board, from, us, true, false, out),
            PieceKind::Rook => slider_moves(board, from, us, false, true, out),
            PieceKind::Queen => slider_moves(board, from, us, true, true, out),
        }
    }
}

fn pawn_moves(pos: &Position, from: Square, out: &mut Vec<Move>) {
    let board = &pos.board;
    let side = board.side();
    let us = pos.side_to_move;
    let dir: i32 = match us {
        Color::White => 1,
        Color::Black => -1,
    };
    let promo_rank = match us {
        Color::White => side - 1,
        Color::Black => 0,
    };
    let start_rank = match us {
        Color::White => 1,
        Color::Black => side - 2,
    };
    let (file, rank) = (from.file(side), from.rank(side));

    let push_target = |to: Square, out: &mut Vec<Move>| {
        if to.rank(side) == promo_rank {
            for kind in PROMOTION_KINDS {
                out.push(Move::with_promotion(from, to, kind));
            }
        } else {
            out.push(Move::new(from, to));
        }
    };

    if let Some((f, r)) = offset(file, rank, 0, dir, side) {
        let to = Square::from_coords(f, r, side);
        if board.piece_at(to).is_none() {
            push_target(to, out);
            // Double push: standard chess only, from the pawn's start rank.
            if pos.variant() == Variant::Chess && rank == start_rank {
                if let Some((f2, r2)) = offset(file, rank, 0, 2 * dir, side) {
                    let to2 = Square::from_coords(f2, r2, side);
                    if board.piece_at(to2).is_none() {
                        out.push(Move::special(from, to2, MoveSpecial::DoublePush));
                    }
                }
            }
        }
    }

    for df in [-1, 1] {
        if let Some((f, r)) = offset(file, rank, df, dir, side) {
            let to = Square::from_coords(f, r, side);
            match board.piece_at(to) {
                Some(p) if p.color != us => push_target(to, out),
                None if pos.variant() == Variant::Chess && pos.en_passant == Some(to) => {
                    out.push(Move::special(from, to, MoveSpecial::EnPassant));
                }
                _ => {}
            }
        }
    }
}

fn leaper_moves(
    board: &Board,
    from: Square,
    us: Color,
    deltas: &[(i32, i32)],
    out: &mut Vec<Move>,
) {
    let side = board.side();
    let (file, rank) = (from.file(side), from.rank(side));
    for &(df, dr) in deltas {
        if let Some((f, r)) = offset(file, rank, df, dr, side) {
            let to = Square::from_coords(f, r, side);
            match board.piece_at(to) {
                Some(p) if p.color == us => {}
                _ => out.push(Move::new(from, to)),
            }
        }
    }
}

fn slider_moves(
    board: &Board,
    from: Square,
    us: Color,
    diagonal: bool,
    orthogonal: bool,
    out: &mut Vec<Move>,
) {
    let side = board.side();
    let (file, rank) = (from.file(side), from.rank(side));
    for (dir_idx, &(df, dr)) in SLIDING_DIRS.iter().enumerate() {
        let is_diag = dir_idx % 2 == 1;
        if (is_diag && !diagonal) || (!is_diag && !orthogonal) {
            continue;
        }
        let mut dist = 1;
        while let Some((f, r)) = offset(file, rank, df * dist, dr * dist, side) {
            let to = Square::from_coords(f, r, side);
            match board.piece_at(to) {
                None => out.push(Move::new(from, to)),
                Some(p) => {
                    if p.color != us {
                        out.push(Move::new(from, to));
                    }
                    break;
                }
            }
            dist += 1;
        }
    }
}

fn castle_moves(pos: &Position, from: Square, out: &mut Vec<Move>) {
    if pos.variant() != Variant::Chess {
        return;
    }
    let board = &pos.board;
    let side = board.side();
    let us = pos.side_to_move;
    let home_rank = match us {
        Color::White => 0,
        Color::Black => side - 1,
    };
    if from != Square::from_coords(4, home_rank, side) {
        return;
    }
    let them = us.opponent();
    if is_attacked(board, from, them) {
        return;
    }
    // (kingside?, rook file, empty files, king path files)
    let options: [(bool, usize, &[usize], [usize; 2]); 2] = [
        (true, 7, &[5, 6], [5, 6]),
        (false, 0, &[1, 2, 3], [3, 2]),
    ];
    for (kingside, rook_file, empties, path) in options {
        let allowed = if kingside {
            pos.castling.kingside(us)
        } else {
            pos.castling.queenside(us)
        };
        if !allowed {
            continue;
        }
        let rook_sq = Square::from_coords(rook_file, home_rank, side);
        if board.piece_at(rook_sq) != Some(Piece::new(us, PieceKind::Rook)) {
            continue;
        }
        if empties
            .iter()
            .any(|&f| board.piece_at(Square::from_coords(f, home_rank, side)).is_some())
        {
            continue;
        }
        if path
            .iter()
            .any(|&f| is_attacked(board, Square::from_coords(f, home_rank, side), them))
        {
            continue;
        }
        let to = Square::from_coords(path[1], home_rank, side);
        out.push(Move::special(from, to, MoveSpecial::Castle));
    }
}

/// Plays the move on a scratch board and checks the mover's king is not
/// left in check.
fn leaves_king_safe(pos: &Position, mv: Move) -> bool {
    let side = pos.board.side();
    let us = pos.side_to_move;
    let mut board = pos.board.clone();
    let mover = board.piece_at(mv.from).expect("pseudo move has a piece");
    board.set(mv.from, None);
    board.set(
        mv.to,
        Some(match mv.promotion {
            Some(kind) => Piece::new(us, kind),
            None => mover,
        }),
    );
    match mv.special {
        MoveSpecial::EnPassant => {
            board.set(
                Square::from_coords(mv.to.file(side), mv.from.rank(side), side),
                None,
            );
        }
        MoveSpecial::Castle => {
            // King path safety is verified during generation; only the
            // final king square needs the standard check here.
            let rank = mv.from.rank(side);
            let (rook_from, rook_to) = if mv.to.file(side) > mv.from.file(side) {
                (side - 1, mv.to.file(side) - 1)
            } else {
                (0, mv.to.file(side) + 1)
            };
            let rook = board.piece_at(Square::from_coords(rook_from, rank, side));
            board.set(Square::from_coords(rook_from, rank, side), None);
            board.set(Square::from_coords(rook_to, rank, side), rook);
        }
        _ => {}
    }
    let king = board
        .king_square(us)
        .expect("king is present after any pseudo-legal move");
    !is_attacked(&board, king, us.opponent())
}
