//! Cross-checks the rules engine against the independent square-pair
//! oracle, on the published perft sequence and on random game positions.

mod common;

use common::{naive_attacked, naive_legal_moves, naive_perft};
use gateau::chess::{emit_fen, Position, Status, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn standard_perft_sequence_confirmed_by_oracle() {
    let start = Position::starting(Variant::Chess);
    let published = [20u64, 400, 8902, 197281];
    for (i, &expected) in published.iter().enumerate() {
        let depth = i as u32 + 1;
        assert_eq!(start.perft(depth), expected, "engine perft({depth})");
    }
    for (i, &expected) in published.iter().enumerate() {
        let depth = i as u32 + 1;
        assert_eq!(naive_perft(&start, depth), expected, "oracle perft({depth})");
    }
}

#[test]
fn gardner_perft_confirmed_by_oracle() {
    let start = Position::starting(Variant::Gardner);
    // Frozen after confirmation by the oracle below; depth 1 is the
    // hand-enumerable 5 pawn pushes plus 2 knight moves.
    let frozen = [7u64, 53, 506, 4775, 52512];
    for (i, &expected) in frozen.iter().enumerate() {
        let depth = i as u32 + 1;
        assert_eq!(start.perft(depth), expected, "engine perft({depth})");
        assert_eq!(naive_perft(&start, depth), expected, "oracle perft({depth})");
    }
}

#[test]
fn random_positions_agree_with_oracle() {
    for variant in [Variant::Chess, Variant::Gardner] {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        for game in 0..12 {
            let mut pos = Position::starting(variant);
            for _ply in 0..60 {
                if !matches!(pos.status(200), Status::Ongoing) {
                    break;
                }
                let mut engine: Vec<String> = pos
                    .legal_moves()
                    .iter()
                    .map(|m| format!("{}{:?}", m.uci(pos.board.side()), m.special))
                    .collect();
                let mut oracle: Vec<String> = naive_legal_moves(&pos)
                    .iter()
                    .map(|m| format!("{}{:?}", m.uci(pos.board.side()), m.special))
                    .collect();
                engine.sort();
                oracle.sort();
                assert_eq!(
                    engine,
                    oracle,
                    "move sets diverge in game {game} at {}",
                    emit_fen(&pos)
                );
                let king = pos.board.king_square(pos.side_to_move).unwrap();
                assert_eq!(
                    pos.in_check(),
                    naive_attacked(&pos.board, king, pos.side_to_move.opponent()),
                    "check detection diverges at {}",
                    emit_fen(&pos)
                );
                checked += 1;
                let moves = pos.legal_moves();
                let pick = rng.gen_range(0..moves.len());
                pos = pos.apply_move_unchecked(moves[pick]);
            }
        }
        assert!(checked > 200, "{variant}: only {checked} positions checked");
    }
}

#[test]
fn perft_cross_check_on_midgame_positions() {
    // Depth-2 perft agreement from randomly reached midgame positions
    // exercises captures, promotions, pins and special moves deeper than
    // the start position does.
    for variant in [Variant::Chess, Variant::Gardner] {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for game in 0..6 {
            let mut pos = Position::starting(variant);
            for _ in 0..rng.gen_range(10..40) {
                let moves = pos.legal_moves();
                if moves.is_empty() {
                    break;
                }
                let pick = rng.gen_range(0..moves.len());
                pos = pos.apply_move_unchecked(moves[pick]);
            }
            if pos.legal_moves().is_empty() {
                continue;
            }
            assert_eq!(
                pos.perft(2),
                naive_perft(&pos, 2),
                "game {game} at {}",
                emit_fen(&pos)
            );
        }
    }
}
