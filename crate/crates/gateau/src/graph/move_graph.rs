use thiserror::Error;

use crate::chess::geometry::{offset, KNIGHT_DELTAS, SLIDING_DIRS, UNDERPROMO_DIRS};
use crate::chess::{Color, Move, MoveSpecial, PieceKind, Position, Square, Variant};

/// Kind of geometric move an edge represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// One of 8 directions x distance 1..side-1.
    Sliding { dir: usize, dist: usize },
    /// One of 8 knight jumps.
    Knight { jump: usize },
    /// Promotion to knight/bishop/rook, moving capture-left/push/capture-right.
    Underpromotion { dir: usize, piece: PieceKind },
}

/// One directed edge of the move graph, in canonical orientation
/// (the side to move plays "up").
#[derive(Debug, Clone, Copy)]
pub struct GraphEdge {
    pub source: usize,
    pub dest: usize,
    pub move_type: usize,
    pub action: usize,
    pub kind: EdgeKind,
}

/// The static directed multigraph of geometric moves for one variant.
/// Nodes are squares in canonical indexing; edges carry their flat action
/// index `source * move_type_count + move_type`.
#[derive(Debug, Clone)]
pub struct MoveGraph {
    pub variant: Variant,
    pub edges: Vec<GraphEdge>,
    /// action index -> edge index, for edges that exist.
    action_to_edge: Vec<Option<u32>>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("action {action} has no on-board edge for {variant}")]
    OffBoardAction { action: usize, variant: Variant },
    #[error("move {uci} is not representable on the {variant} move graph")]
    UnrepresentableMove { uci: String, variant: Variant },
    #[error("variant mismatch: position is {position}, graph is {graph}")]
    VariantMismatch { position: Variant, graph: Variant },
}

/// Move-type layout per source square: sliding direction-major
/// (N, NE, E, SE, S, SW, W, NW) x distance 1..side-1, then 8 knight jumps
/// clockwise from (+1,+2), then underpromotions
/// (capture-left, push, capture-right) x (knight, bishop, rook).
pub fn move_type_of(kind: EdgeKind, side: usize) -> usize {
    let max_dist = side - 1;
    match kind {
        EdgeKind::Sliding { dir, dist } => dir * max_dist + (dist - 1),
        EdgeKind::Knight { jump } => 8 * max_dist + jump,
        EdgeKind::Underpromotion { dir, piece } => {
            let piece_idx = match piece {
                PieceKind::Knight => 0,
                PieceKind::Bishop => 1,
                PieceKind::Rook => 2,
                _ => unreachable!("underpromotion edges are knight/bishop/rook only"),
            };
            8 * max_dist + 8 + dir * 3 + piece_idx
        }
    }
}

fn kind_of_move_type(move_type: usize, side: usize) -> EdgeKind {
    let max_dist = side - 1;
    if move_type < 8 * max_dist {
        EdgeKind::Sliding {
            dir: move_type / max_dist,
            dist: move_type % max_dist + 1,
        }
    } else if move_type < 8 * max_dist + 8 {
        EdgeKind::Knight {
            jump: move_type - 8 * max_dist,
        }
    } else {
        let u = move_type - 8 * max_dist - 8;
        EdgeKind::Underpromotion {
            dir: u / 3,
            piece: [PieceKind::Knight, PieceKind::Bishop, PieceKind::Rook][u % 3],
        }
    }
}

/// Displacement of a move type as (file delta, rank delta) in canonical
/// orientation.
pub fn displacement_of(kind: EdgeKind) -> (i32, i32) {
    match kind {
        EdgeKind::Sliding { dir, dist } => {
            let (df, dr) = SLIDING_DIRS[dir];
            (df * dist as i32, dr * dist as i32)
        }
        EdgeKind::Knight { jump } => KNIGHT_DELTAS[jump],
        EdgeKind::Underpromotion { dir, .. } => (UNDERPROMO_DIRS[dir], 1),
    }
}

impl MoveGraph {
    /// Builds the deterministic edge list: all geometric moves that stay on
    /// the board, enumerated square-major then move-type-major, which makes
    /// the action indices strictly increasing.
    pub fn build(variant: Variant) -> MoveGraph {
        let side = variant.board_side();
        let mtc = variant.move_type_count();
        let mut edges = Vec::new();
        let mut action_to_edge = vec![None; variant.action_count()];
        for node in 0..side * side {
            let (file, rank) = (node % side, node / side);
            for move_type in 0..mtc {
                let kind = kind_of_move_type(move_type, side);
                if let EdgeKind::Underpromotion { .. } = kind {
                    // Only the current player promotes: edges go "up" from
                    // the second-to-last rank.
                    if rank != side - 2 {
                        continue;
                    }
                }
                let (df, dr) = displacement_of(kind);
                if let Some((tf, tr)) = offset(file, rank, df, dr, side) {
                    let action = node * mtc + move_type;
                    action_to_edge[action] = Some(edges.len() as u32);
                    edges.push(GraphEdge {
                        source: node,
                        dest: tr * side + tf,
                        move_type,
                        action,
                        kind,
                    });
                }
            }
        }
        MoveGraph {
            variant,
            edges,
            action_to_edge,
        }
    }

    pub fn node_count(&self) -> usize {
        self.variant.square_count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_of_action(&self, action: usize) -> Result<&GraphEdge, GraphError> {
        self.action_to_edge
            .get(action)
            .copied()
            .flatten()
            .map(|i| &self.edges[i as usize])
            .ok_or(GraphError::OffBoardAction {
                action,
                variant: self.variant,
            })
    }

    pub fn edge_index_of_action(&self, action: usize) -> Option<usize> {
        self.action_to_edge
            .get(action)
            .copied()
            .flatten()
            .map(|i| i as usize)
    }
}

/// Canonical node index of an absolute square for the given mover: ranks
/// are mirrored for black so the side to move always plays "up"; files are
/// kept (a-file on the left).
pub fn canonical_node(sq: Square, mover: Color, side: usize) -> usize {
    let rank = match mover {
        Color::White => sq.rank(side),
        Color::Black => side - 1 - sq.rank(side),
    };
    rank * side + sq.file(side)
}

/// Absolute square for a canonical node index, inverse of [`canonical_node`].
pub fn absolute_square(node: usize, mover: Color, side: usize) -> Square {
    let (file, rank) = (node % side, node / side);
    let abs_rank = match mover {
        Color::White => rank,
        Color::Black => side - 1 - rank,
    };
    Square::from_coords(file, abs_rank, side)
}

/// Flat action index of a legal-representable move, from the perspective of
/// `mover`. Queen promotions ride the plain sliding edge.
pub fn action_of_move(mv: &Move, mover: Color, variant: Variant) -> Result<usize, GraphError> {
    let side = variant.board_side();
    let src = canonical_node(mv.from, mover, side);
    let dst = canonical_node(mv.to, mover, side);
    let (sf, sr) = (src % side, src / side);
    let (tf, tr) = (dst % side, dst / side);
    let (df, dr) = (tf as i32 - sf as i32, tr as i32 - sr as i32);

    let kind = match mv.promotion {
        Some(piece) if piece != PieceKind::Queen => {
            let dir = UNDERPROMO_DIRS
                .iter()
                .position(|&d| d == df)
                .filter(|_| dr == 1)
                .ok_or_else(|| GraphError::UnrepresentableMove {
                    uci: mv.uci(side),
                    variant,
                })?;
            EdgeKind::Underpromotion { dir, piece }
        }
        _ => classify_displacement(df, dr).ok_or_else(|| GraphError::UnrepresentableMove {
            uci: mv.uci(side),
            variant,
        })?,
    };
    Ok(src * variant.move_type_count() + move_type_of(kind, side))
}

fn classify_displacement(df: i32, dr: i32) -> Option<EdgeKind> {
    if let Some(jump) = KNIGHT_DELTAS.iter().position(|&(f, r)| (f, r) == (df, dr)) {
        return Some(EdgeKind::Knight { jump });
    }
    if df == 0 && dr == 0 {
        return None;
    }
    let dist = df.abs().max(dr.abs()) as usize;
    let unit = (df.signum(), dr.signum());
    if df != 0 && dr != 0 && df.abs() != dr.abs() {
        return None;
    }
    SLIDING_DIRS
        .iter()
        .position(|&d| d == unit)
        .map(|dir| EdgeKind::Sliding { dir, dist })
}

/// Resolves an action index to a concrete move in `pos`. Queen promotion is
/// inferred when a pawn reaches the final rank via a distance-1 sliding
/// edge; castle/en-passant/double-push flags are inferred from the board.
pub fn move_of_action(
    action: usize,
    pos: &Position,
    graph: &MoveGraph,
) -> Result<Move, GraphError> {
    if pos.variant() != graph.variant {
        return Err(GraphError::VariantMismatch {
            position: pos.variant(),
            graph: graph.variant,
        });
    }
    let side = graph.variant.board_side();
    let mover = pos.side_to_move;
    let edge = graph.edge_of_action(action)?;
    let from = absolute_square(edge.source, mover, side);
    let to = absolute_square(edge.dest, mover, side);
    let piece = pos.board.piece_at(from);
    let is_pawn = piece.map(|p| p.kind) == Some(PieceKind::Pawn);
    let is_king = piece.map(|p| p.kind) == Some(PieceKind::King);

    let (promotion, special) = match edge.kind {
        EdgeKind::Underpromotion { piece, .. } => (Some(piece), MoveSpecial::None),
        EdgeKind::Sliding { dir, dist } => {
            let (_, dr) = SLIDING_DIRS[dir];
            let last_rank = match mover {
                Color::White => side - 1,
                Color::Black => 0,
            };
            if is_pawn && dist == 1 && dr == 1 && to.rank(side) == last_rank {
                (Some(PieceKind::Queen), MoveSpecial::None)
            } else if is_pawn && dist == 2 && dr == 1 && df_of(dir) == 0 {
                (None, MoveSpecial::DoublePush)
            } else if is_pawn
                && dist == 1
                && dr == 1
                && df_of(dir) != 0
                && pos.en_passant == Some(to)
                && pos.board.piece_at(to).is_none()
            {
                (None, MoveSpecial::EnPassant)
            } else if is_king && dist == 2 && dr == 0 {
                (None, MoveSpecial::Castle)
            } else {
                (None, MoveSpecial::None)
            }
        }
        EdgeKind::Knight { .. } => (None, MoveSpecial::None),
    };
    Ok(Move {
        from,
        to,
        promotion,
        special,
    })
}

fn df_of(dir: usize) -> i32 {
    SLIDING_DIRS[dir].0
}
