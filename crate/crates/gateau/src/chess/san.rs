use super::position::{Position, Status};
use super::types::{Move, MoveSpecial, PieceKind};

/// Standard algebraic notation for a legal move, with disambiguation and
/// check/checkmate suffixes.
pub fn move_to_san(pos: &Position, mv: Move) -> String {
    let side = pos.board.side();
    let piece = pos
        .board
        .piece_at(mv.from)
        .expect("SAN is only emitted for legal moves");
    let mut san = String::new();

    if mv.special == MoveSpecial::Castle {
        san = if mv.to.file(side) > mv.from.file(side) {
            "O-O".to_string()
        } else {
            "O-O-O".to_string()
        };
    } else if piece.kind == PieceKind::Pawn {
        let is_capture =
            pos.board.piece_at(mv.to).is_some() || mv.special == MoveSpecial::EnPassant;
        if is_capture {
            san.push((b'a' + mv.from.file(side) as u8) as char);
            san.push('x');
        }
        san.push_str(&mv.to.name(side));
        if let Some(kind) = mv.promotion {
            san.push('=');
            san.push(kind.san_letter());
        }
    } else {
        san.push(piece.kind.san_letter());
        san.push_str(&disambiguator(pos, mv, piece.kind));
        if pos.board.piece_at(mv.to).is_some() {
            san.push('x');
        }
        san.push_str(&mv.to.name(side));
    }

    let next = pos.apply_move_unchecked(mv);
    if next.in_check() {
        // Distinguish mate from check via the successor's legal moves.
        if matches!(next.status(u32::MAX), Status::Finished(_)) && next.legal_moves().is_empty() {
            san.push('#');
        } else {
            san.push('+');
        }
    }
    san
}

fn disambiguator(pos: &Position, mv: Move, kind: PieceKind) -> String {
    let side = pos.board.side();
    let rivals: Vec<_> = pos
        .legal_moves()
        .into_iter()
        .filter(|other| {
            other.to == mv.to
                && other.from != mv.from
                && pos.board.piece_at(other.from).map(|p| p.kind) == Some(kind)
        })
        .collect();
    if rivals.is_empty() {
        return String::new();
    }
    let same_file = rivals
        .iter()
        .any(|o| o.from.file(side) == mv.from.file(side));
    let same_rank = rivals
        .iter()
        .any(|o| o.from.rank(side) == mv.from.rank(side));
    if !same_file {
        ((b'a' + mv.from.file(side) as u8) as char).to_string()
    } else if !same_rank {
        (mv.from.rank(side) + 1).to_string()
    } else {
        mv.from.name(side)
    }
}
