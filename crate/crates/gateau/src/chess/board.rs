use super::types::{Color, Piece, PieceKind, Square, Variant};

/// Piece placement for either variant. Squares are stored in absolute
/// orientation; only the first `side * side` slots are used.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Board {
    pub variant: Variant,
    squares: [Option<Piece>; 64],
}

impl Board {
    pub fn empty(variant: Variant) -> Board {
        Board {
            variant,
            squares: [None; 64],
        }
    }

    pub fn side(&self) -> usize {
        self.variant.board_side()
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        self.squares[sq.index()]
    }

    pub fn set(&mut self, sq: Square, piece: Option<Piece>) {
        self.squares[sq.index()] = piece;
    }

    pub fn squares(&self) -> impl Iterator<Item = (Square, Piece)> + '_ {
        let n = self.variant.square_count();
        (0..n).filter_map(move |i| self.squares[i].map(|p| (Square(i as u8), p)))
    }

    pub fn king_square(&self, color: Color) -> Option<Square> {
        self.squares().find_map(|(sq, p)| {
            (p.color == color && p.kind == PieceKind::King).then_some(sq)
        })
    }

    pub fn count(&self, color: Color, kind: PieceKind) -> usize {
        self.squares()
            .filter(|(_, p)| p.color == color && p.kind == kind)
            .count()
    }

    /// The FEN piece-placement field (ranks from top to bottom).
    pub fn placement_fen(&self) -> String {
        let side = self.side();
        let mut out = String::new();
        for rank in (0..side).rev() {
            let mut empties = 0;
            for file in 0..side {
                match self.piece_at(Square::from_coords(file, rank, side)) {
                    Some(p) => {
                        if empties > 0 {
                            out.push_str(&empties.to_string());
                            empties = 0;
                        }
                        out.push(p.fen_char());
                    }
                    None => empties += 1,
                }
            }
            if empties > 0 {
                out.push_str(&empties.to_string());
            }
            if rank > 0 {
                out.push('/');
            }
        }
        out
    }

    pub fn starting(variant: Variant) -> Board {
        let side = variant.board_side();
        let mut board = Board::empty(variant);
        let back: &[PieceKind] = match variant {
            Variant::Chess => &[
                PieceKind::Rook,
                PieceKind::Knight,
                PieceKind::Bishop,
                PieceKind::Queen,
                PieceKind::King,
                PieceKind::Bishop,
                PieceKind::Knight,
                PieceKind::Rook,
            ],
            Variant::Gardner => &[
                PieceKind::Rook,
                PieceKind::Knight,
                PieceKind::Bishop,
                PieceKind::Queen,
                PieceKind::King,
            ],
        };
        for (file, &kind) in back.iter().enumerate() {
            board.set(
                Square::from_coords(file, 0, side),
                Some(Piece::new(Color::White, kind)),
            );
            board.set(
                Square::from_coords(file, side - 1, side),
                Some(Piece::new(Color::Black, kind)),
            );
        }
        for file in 0..side {
            board.set(
                Square::from_coords(file, 1, side),
                Some(Piece::new(Color::White, PieceKind::Pawn)),
            );
            board.set(
                Square::from_coords(file, side - 2, side),
                Some(Piece::new(Color::Black, PieceKind::Pawn)),
            );
        }
        board
    }
}
