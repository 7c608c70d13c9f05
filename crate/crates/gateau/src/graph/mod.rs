//! Static per-variant move graphs and position feature encoding in the
//! current player's canonical orientation.

mod encode;
mod move_graph;

pub use encode::{
    edge_feature_names, edge_features_csv, encode_position, legal_action_mask,
    node_feature_names, node_features_csv, static_edge_features, FeatureSet, EDGE_FEATURE_DIM,
    NODE_FEATURE_DIM,
};
pub use move_graph::{
    absolute_square, action_of_move, canonical_node, displacement_of, move_of_action,
    move_type_of, EdgeKind, GraphEdge, GraphError, MoveGraph,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::{emit_fen, parse_fen, Color, Position, Square, Variant};

    /// Independent enumeration of edge counts by pure square-pair geometry,
    /// never consulting the graph builder's move-type tables.
    fn geometric_counts(side: i32) -> (usize, usize, usize) {
        let mut sliding = 0;
        let mut knight = 0;
        for sf in 0..side {
            for sr in 0..side {
                for tf in 0..side {
                    for tr in 0..side {
                        let (df, dr) = (tf - sf, tr - sr);
                        if (df, dr) == (0, 0) {
                            continue;
                        }
                        if df.abs() * dr.abs() == 2 {
                            knight += 1;
                        } else if df == 0 || dr == 0 || df.abs() == dr.abs() {
                            sliding += 1;
                        }
                    }
                }
            }
        }
        // Promotions to three pieces from every second-to-last-rank square,
        // moving straight up or diagonally up within the board.
        let mut underpromo = 0;
        for sf in 0..side {
            for df in [-1, 0, 1] {
                if (0..side).contains(&(sf + df)) {
                    underpromo += 3;
                }
            }
        }
        (sliding, knight, underpromo)
    }

    #[test]
    fn edge_counts_match_enumeration_oracle() {
        for (variant, expected_total) in [(Variant::Chess, 1858), (Variant::Gardner, 455)] {
            let graph = MoveGraph::build(variant);
            assert_eq!(graph.edge_count(), expected_total, "{variant}");

            let side = variant.board_side();
            let mut sliding = 0;
            let mut knight = 0;
            let mut underpromo = 0;
            for e in &graph.edges {
                match e.kind {
                    EdgeKind::Sliding { .. } => sliding += 1,
                    EdgeKind::Knight { .. } => knight += 1,
                    EdgeKind::Underpromotion { .. } => underpromo += 1,
                }
            }
            let oracle = geometric_counts(side as i32);
            assert_eq!((sliding, knight, underpromo), oracle, "{variant}");
        }
        let chess = geometric_counts(8);
        assert_eq!(chess, (1456, 336, 66));
        let gardner = geometric_counts(5);
        assert_eq!(gardner, (320, 96, 39));
    }

    #[test]
    fn actions_are_unique_and_in_range() {
        for variant in [Variant::Chess, Variant::Gardner] {
            let graph = MoveGraph::build(variant);
            let mut seen = vec![false; variant.action_count()];
            for e in &graph.edges {
                assert_eq!(
                    e.action,
                    e.source * variant.move_type_count() + e.move_type
                );
                assert!(!seen[e.action], "duplicate action {}", e.action);
                seen[e.action] = true;
            }
        }
    }

    #[test]
    fn canonical_action_examples() {
        // a1 north distance 1 is the very first move type from node 0.
        let mv = crate::chess::Move::new(
            Square::parse("a1", 8).unwrap(),
            Square::parse("a2", 8).unwrap(),
        );
        assert_eq!(action_of_move(&mv, Color::White, Variant::Chess).unwrap(), 0);
        // e2e4: node 12, north distance 2 = move type 1.
        let mv = crate::chess::Move::special(
            Square::parse("e2", 8).unwrap(),
            Square::parse("e4", 8).unwrap(),
            crate::chess::MoveSpecial::DoublePush,
        );
        assert_eq!(
            action_of_move(&mv, Color::White, Variant::Chess).unwrap(),
            12 * 73 + 1
        );
    }

    #[test]
    fn action_round_trip_on_positions() {
        let graph = MoveGraph::build(Variant::Chess);
        let mut pos = Position::starting(Variant::Chess);
        for _ in 0..30 {
            let moves = pos.legal_moves();
            if moves.is_empty() {
                break;
            }
            for &m in &moves {
                let action = action_of_move(&m, pos.side_to_move, Variant::Chess).unwrap();
                let back = move_of_action(action, &pos, &graph).unwrap();
                assert_eq!(back, m, "round trip failed in {}", emit_fen(&pos));
            }
            pos = pos.apply_move_unchecked(moves[moves.len() / 2]);
        }
    }

    #[test]
    fn edge_action_round_trip_is_bijective() {
        for variant in [Variant::Chess, Variant::Gardner] {
            let graph = MoveGraph::build(variant);
            for e in &graph.edges {
                let edge = graph.edge_of_action(e.action).unwrap();
                assert_eq!(edge.source, e.source);
                assert_eq!(edge.dest, e.dest);
            }
            // An off-board action: a1 (corner node 0) moving south.
            let side = variant.board_side();
            let south_one = move_type_of(EdgeKind::Sliding { dir: 4, dist: 1 }, side);
            assert!(graph.edge_of_action(south_one).is_err());
        }
    }

    #[test]
    fn start_positions_encode_exactly() {
        let graph = MoveGraph::build(Variant::Chess);
        let pos = Position::starting(Variant::Chess);
        let fs = encode_position(&pos, &graph).unwrap();
        assert_eq!(fs.node_features.shape(), &[64, NODE_FEATURE_DIM]);
        assert_eq!(fs.edge_features.shape(), &[1858, EDGE_FEATURE_DIM]);
        let legal: f64 = fs.edge_features.column(0).sum();
        assert_eq!(legal, 20.0);

        let graph = MoveGraph::build(Variant::Gardner);
        let pos = Position::starting(Variant::Gardner);
        let fs = encode_position(&pos, &graph).unwrap();
        assert_eq!(fs.node_features.shape(), &[25, NODE_FEATURE_DIM]);
        assert_eq!(fs.edge_features.shape(), &[455, EDGE_FEATURE_DIM]);
        assert_eq!(fs.edge_features.column(0).sum(), 7.0);
        // Castling features are always zero on the small board.
        for node in 0..25 {
            for c in 114..118 {
                assert_eq!(fs.node_features[[node, c]], 0.0);
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let graph = MoveGraph::build(Variant::Gardner);
        let mut pos = Position::starting(Variant::Gardner);
        for _ in 0..6 {
            pos = pos.apply_move_unchecked(pos.legal_moves()[0]);
        }
        let a = encode_position(&pos, &graph).unwrap();
        let b = encode_position(&pos, &graph).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_ranges() {
        let graph = MoveGraph::build(Variant::Chess);
        let mut pos = Position::starting(Variant::Chess);
        for _ in 0..12 {
            let moves = pos.legal_moves();
            pos = pos.apply_move_unchecked(moves[moves.len() / 3]);
        }
        let fs = encode_position(&pos, &graph).unwrap();
        for v in fs.node_features.iter() {
            assert!((0.0..=1.0).contains(v));
        }
        for (i, row) in fs.edge_features.rows().into_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if j == 1 || j == 2 {
                    assert!(v.abs() <= 7.0, "edge {i} col {j} = {v}");
                } else {
                    assert!((0.0..=1.0).contains(v), "edge {i} col {j} = {v}");
                }
            }
        }
    }

    #[test]
    fn legality_maps_one_to_one() {
        let graph = MoveGraph::build(Variant::Chess);
        // A promotion-rich position: white pawns about to promote, with
        // captures available onto d8 and f8.
        let pos = parse_fen("3r1q2/4P3/8/8/8/2k5/8/4K3 w - - 0 1", Variant::Chess).unwrap();
        let moves = pos.legal_moves();
        let fs = encode_position(&pos, &graph).unwrap();
        let flagged: usize = fs
            .edge_features
            .column(0)
            .iter()
            .filter(|&&v| v == 1.0)
            .count();
        // Queen promotions share the sliding edge; N/B/R promotions use
        // their dedicated parallel edges. Every legal move gets a distinct
        // action, so flagged edges == distinct legal moves... except the
        // four promotion choices per (from, to) collapse to 4 edges as well.
        let mut actions: Vec<usize> = moves
            .iter()
            .map(|m| action_of_move(m, pos.side_to_move, Variant::Chess).unwrap())
            .collect();
        actions.sort_unstable();
        let deduped = {
            let mut a = actions.clone();
            a.dedup();
            a
        };
        assert_eq!(deduped.len(), actions.len(), "actions are distinct per move");
        assert_eq!(flagged, deduped.len());
    }

    #[test]
    fn mirror_positions_encode_identically() {
        // Color-flip and rank-flip a midgame position; canonical encoding
        // must erase which absolute color is to move.
        let fen = "r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3";
        let mirrored = mirror_fen(fen);
        let graph = MoveGraph::build(Variant::Chess);
        let a = encode_position(&parse_fen(fen, Variant::Chess).unwrap(), &graph).unwrap();
        let b = encode_position(&parse_fen(&mirrored, Variant::Chess).unwrap(), &graph).unwrap();
        assert_eq!(a, b);
    }

    fn mirror_fen(fen: &str) -> String {
        let fields: Vec<&str> = fen.split_whitespace().collect();
        let placement: Vec<String> = fields[0]
            .split('/')
            .rev()
            .map(|rank| {
                rank.chars()
                    .map(|c| {
                        if c.is_ascii_alphabetic() {
                            if c.is_ascii_uppercase() {
                                c.to_ascii_lowercase()
                            } else {
                                c.to_ascii_uppercase()
                            }
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect();
        let stm = if fields[1] == "w" { "b" } else { "w" };
        let castle: String = if fields[2] == "-" {
            "-".into()
        } else {
            let mut flags: Vec<char> = fields[2]
                .chars()
                .map(|c| {
                    if c.is_ascii_uppercase() {
                        c.to_ascii_lowercase()
                    } else {
                        c.to_ascii_uppercase()
                    }
                })
                .collect();
            flags.sort_by_key(|&c| match c {
                'K' => 0,
                'Q' => 1,
                'k' => 2,
                'q' => 3,
                _ => 4,
            });
            flags.into_iter().collect()
        };
        let ep = if fields[3] == "-" {
            "-".to_string()
        } else {
            let bytes = fields[3].as_bytes();
            let rank = (bytes[1] - b'0') as usize;
            format!("{}{}", bytes[0] as char, 9 - rank)
        };
        format!(
            "{} {} {} {} {} {}",
            placement.join("/"),
            stm,
            castle,
            ep,
            fields[4],
            fields[5]
        )
    }

    #[test]
    fn csv_dumps_have_expected_shape() {
        let graph = MoveGraph::build(Variant::Gardner);
        let pos = Position::starting(Variant::Gardner);
        let fs = encode_position(&pos, &graph).unwrap();
        let nodes = node_features_csv(&fs);
        assert_eq!(nodes.lines().count(), 26);
        assert_eq!(nodes.lines().next().unwrap().split(',').count(), 120);
        let edges = edge_features_csv(&fs, &graph);
        assert_eq!(edges.lines().count(), 456);
        assert_eq!(edges.lines().next().unwrap().split(',').count(), 20);
    }

    #[test]
    fn variant_mismatch_is_an_error() {
        let graph = MoveGraph::build(Variant::Chess);
        let pos = Position::starting(Variant::Gardner);
        assert!(matches!(
            encode_position(&pos, &graph),
            Err(GraphError::VariantMismatch { .. })
        ));
    }
}
