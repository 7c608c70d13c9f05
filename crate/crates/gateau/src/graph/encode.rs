use ndarray::Array2;

use super::move_graph::{action_of_move, displacement_of, EdgeKind, GraphError, MoveGraph};
use crate::chess::{Board, PieceKind, Position, Variant};

pub const NODE_FEATURE_DIM: usize = 119;
pub const EDGE_FEATURE_DIM: usize = 15;
const HISTORY_BLOCKS: usize = 7;
const PIECE_PLANES: usize = 12;

/// Per-position feature matrices in the current player's canonical
/// orientation: one row per node (square) and per edge (geometric move).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub node_features: Array2<f64>,
    pub edge_features: Array2<f64>,
}

/// Node feature column names, in layout order.
pub fn node_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(NODE_FEATURE_DIM);
    let pieces = ["pawn", "knight", "bishop", "rook", "queen", "king"];
    let one_hot = |names: &mut Vec<String>, prefix: &str| {
        for owner in ["mover", "opponent"] {
            for p in pieces {
                names.push(format!("{prefix}{owner}_{p}"));
            }
        }
    };
    one_hot(&mut names, "");
    names.push("repeated_once".into());
    names.push("repeated_twice".into());
    for k in 1..=HISTORY_BLOCKS {
        one_hot(&mut names, &format!("hist{k}_"));
        names.push(format!("hist{k}_repeated_once"));
        names.push(format!("hist{k}_repeated_twice"));
    }
    names.push("current_player".into());
    names.push("move_count".into());
    for n in [
        "castle_mover_kingside",
        "castle_mover_queenside",
        "castle_opponent_kingside",
        "castle_opponent_queenside",
    ] {
        names.push(n.into());
    }
    names.push("no_progress_count".into());
    debug_assert_eq!(names.len(), NODE_FEATURE_DIM);
    names
}

/// Edge feature column names, in layout order.
pub fn edge_feature_names() -> Vec<String> {
    [
        "legal",
        "squares_left",
        "squares_up",
        "promote_knight",
        "promote_bishop",
        "promote_rook",
        "promote_queen",
        "pawn_white",
        "pawn_black",
        "piece_knight",
        "piece_bishop",
        "piece_rook",
        "piece_queen",
        "king_white",
        "king_black",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Encodes a position into node/edge feature matrices. The board is
/// flipped so the side to move plays "up"; piece planes are mover-first.
pub fn encode_position(pos: &Position, graph: &MoveGraph) -> Result<FeatureSet, GraphError> {
    if pos.variant() != graph.variant {
        return Err(GraphError::VariantMismatch {
            position: pos.variant(),
            graph: graph.variant,
        });
    }
    let side = graph.variant.board_side();
    let nodes = graph.node_count();
    let mover = pos.side_to_move;

    let mut node_features = Array2::zeros((nodes, NODE_FEATURE_DIM));

    let fill_block = |mat: &mut Array2<f64>, col: usize, board: &Board, repetitions: u8| {
        for node in 0..nodes {
            let sq = super::move_graph::absolute_square(node, mover, side);
            if let Some(p) = board.piece_at(sq) {
                let owner = if p.color == mover { 0 } else { 6 };
                mat[[node, col + owner + p.kind.index()]] = 1.0;
            }
            if repetitions >= 1 {
                mat[[node, col + PIECE_PLANES]] = 1.0;
            }
            if repetitions >= 2 {
                mat[[node, col + PIECE_PLANES + 1]] = 1.0;
            }
        }
    };

    fill_block(
        &mut node_features,
        0,
        &pos.board,
        pos.repetition_count().min(255) as u8,
    );
    for (k, entry) in pos.recent_history().take(HISTORY_BLOCKS).enumerate() {
        fill_block(
            &mut node_features,
            14 + k * 14,
            &entry.board,
            entry.repetitions,
        );
    }

    // Scalar planes, broadcast to every node. The current-player plane is
    // constant: in canonical orientation the mover always plays up.
    let move_count = (pos.fullmove_number as f64 / 100.0).min(1.0);
    let no_progress = (pos.halfmove_clock as f64 / 100.0).min(1.0);
    let castle = [
        pos.castling.kingside(mover),
        pos.castling.queenside(mover),
        pos.castling.kingside(mover.opponent()),
        pos.castling.queenside(mover.opponent()),
    ];
    for node in 0..nodes {
        node_features[[node, 112]] = 1.0;
        node_features[[node, 113]] = move_count;
        for (i, &c) in castle.iter().enumerate() {
            node_features[[node, 114 + i]] = c as usize as f64;
        }
        node_features[[node, 118]] = no_progress;
    }

    let mut edge_features = static_edge_features(graph);
    for mv in pos.legal_moves() {
        let action = action_of_move(&mv, mover, graph.variant)
            .expect("legal moves are representable on the move graph");
        let edge = graph
            .edge_index_of_action(action)
            .expect("legal moves map onto existing edges");
        edge_features[[edge, 0]] = 1.0;
    }

    Ok(FeatureSet {
        node_features,
        edge_features,
    })
}

/// The position-independent part of the edge features (everything except
/// the legality column, which stays zero here).
pub fn static_edge_features(graph: &MoveGraph) -> Array2<f64> {
    let side = graph.variant.board_side();
    let is_chess = graph.variant == Variant::Chess;
    let mut feats = Array2::zeros((graph.edge_count(), EDGE_FEATURE_DIM));
    for (row, edge) in graph.edges.iter().enumerate() {
        let (df, dr) = displacement_of(edge.kind);
        let src_rank = edge.source / side;
        let src_file = edge.source % side;
        feats[[row, 1]] = -df as f64;
        feats[[row, 2]] = dr as f64;
        match edge.kind {
            EdgeKind::Underpromotion { piece, .. } => {
                let idx = match piece {
                    PieceKind::Knight => 3,
                    PieceKind::Bishop => 4,
                    PieceKind::Rook => 5,
                    _ => unreachable!(),
                };
                feats[[row, idx]] = 1.0;
                // Only an up-moving ("white") pawn traverses these edges.
                feats[[row, 7]] = 1.0;
            }
            EdgeKind::Knight { .. } => {
                feats[[row, 9]] = 1.0;
            }
            EdgeKind::Sliding { dir, dist } => {
                let diagonal = dir % 2 == 1;
                // A pawn promoting to a queen rides the plain sliding edge.
                if dist == 1 && dr == 1 && src_rank == side - 2 {
                    feats[[row, 6]] = 1.0;
                }
                let white_pawn = (dist == 1 && dr == 1 && df.abs() <= 1)
                    || (is_chess && dist == 2 && df == 0 && dr == 2 && src_rank == 1);
                let black_pawn = (dist == 1 && dr == -1 && df.abs() <= 1)
                    || (is_chess && dist == 2 && df == 0 && dr == -2 && src_rank == side - 2);
                feats[[row, 7]] = white_pawn as usize as f64;
                feats[[row, 8]] = black_pawn as usize as f64;
                if diagonal {
                    feats[[row, 10]] = 1.0;
                } else {
                    feats[[row, 11]] = 1.0;
                }
                feats[[row, 12]] = 1.0;
                if dist == 1 {
                    feats[[row, 13]] = 1.0;
                    feats[[row, 14]] = 1.0;
                } else if is_chess && dist == 2 && dr == 0 && src_file == 4 {
                    // Castling: the king's lateral two-square slide from its
                    // starting square, for the up-moving or down-moving side.
                    if src_rank == 0 {
                        feats[[row, 13]] = 1.0;
                    } else if src_rank == side - 1 {
                        feats[[row, 14]] = 1.0;
                    }
                }
            }
        }
    }
    feats
}

/// Writes the node features as CSV, one row per square.
pub fn node_features_csv(fs: &FeatureSet) -> String {
    matrix_csv("node", &node_feature_names(), &fs.node_features)
}

/// Writes the edge features as CSV, one row per graph edge.
pub fn edge_features_csv(fs: &FeatureSet, graph: &MoveGraph) -> String {
    let mut header = vec![
        "edge".to_string(),
        "source".to_string(),
        "dest".to_string(),
        "move_type".to_string(),
        "action".to_string(),
    ];
    header.extend(edge_feature_names());
    let mut out = header.join(",");
    out.push('\n');
    for (i, edge) in graph.edges.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}",
            i, edge.source, edge.dest, edge.move_type, edge.action
        ));
        for j in 0..EDGE_FEATURE_DIM {
            out.push_str(&format!(",{}", fs.edge_features[[i, j]]));
        }
        out.push('\n');
    }
    out
}

fn matrix_csv(index_name: &str, names: &[String], mat: &Array2<f64>) -> String {
    let mut out = String::from(index_name);
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for i in 0..mat.nrows() {
        out.push_str(&i.to_string());
        for j in 0..mat.ncols() {
            out.push_str(&format!(",{}", mat[[i, j]]));
        }
        out.push('\n');
    }
    out
}

/// Legality mask over the flat action space.
pub fn legal_action_mask(pos: &Position, graph: &MoveGraph) -> Result<Vec<bool>, GraphError> {
    if pos.variant() != graph.variant {
        return Err(GraphError::VariantMismatch {
            position: pos.variant(),
            graph: graph.variant,
        });
    }
    let mut mask = vec![false; graph.variant.action_count()];
    for mv in pos.legal_moves() {
        let action = action_of_move(&mv, pos.side_to_move, graph.variant)
            .expect("legal moves are representable");
        mask[action] = true;
    }
    Ok(mask)
}
