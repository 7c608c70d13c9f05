//! Gumbel-style Monte Carlo tree search over exact game dynamics,
//! producing the played move, an improved policy target, and a root value
//! estimate.

mod play;
mod search;

pub use play::{play_game, PlayedGame, PlyInfo};
pub use search::{run_search, SearchError, SearchParams, SearchResult};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::{parse_fen, Position, Status, Variant};
    use crate::graph::MoveGraph;
    use crate::net::{Checkpoint, Evaluator, ModelConfig};

    fn small_params(seed: u64) -> SearchParams {
        SearchParams {
            simulations: 24,
            seed,
            ..SearchParams::default()
        }
    }

    #[test]
    fn search_is_deterministic() {
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 3);
        let graph = MoveGraph::build(Variant::Gardner);
        let eval = Evaluator::new(&cp.model, &graph);
        let pos = Position::starting(Variant::Gardner);
        let a = run_search(&pos, &eval, &small_params(9), 256).unwrap();
        let b = run_search(&pos, &eval, &small_params(9), 256).unwrap();
        assert_eq!(a.mv, b.mv);
        assert_eq!(a.improved_policy, b.improved_policy);
        assert_eq!(a.root_value, b.root_value);
        // A different seed may pick a different move but stays legal.
        let c = run_search(&pos, &eval, &small_params(10), 256).unwrap();
        assert!(pos.legal_moves().contains(&c.mv));
    }

    #[test]
    fn improved_policy_is_a_distribution() {
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 4);
        let graph = MoveGraph::build(Variant::Gardner);
        let eval = Evaluator::new(&cp.model, &graph);
        let pos = Position::starting(Variant::Gardner);
        let r = run_search(&pos, &eval, &small_params(1), 256).unwrap();
        assert_eq!(r.improved_policy.len(), 7);
        let total: f64 = r.improved_policy.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(r.improved_policy.iter().all(|&(_, p)| p >= 0.0));
        assert!(r.root_value.abs() <= 1.0);
    }

    #[test]
    fn single_legal_move_is_returned_immediately() {
        // Black king in check with a single escape square.
        let pos = parse_fen("R6k/8/5K2/8/8/8/8/8 b - - 0 1", Variant::Chess).unwrap();
        assert_eq!(pos.legal_moves().len(), 1);
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 5);
        let graph = MoveGraph::build(Variant::Chess);
        let eval = Evaluator::new(&cp.model, &graph);
        let r = run_search(&pos, &eval, &small_params(2), 512).unwrap();
        assert_eq!(r.mv, pos.legal_moves()[0]);
        assert_eq!(r.improved_policy.len(), 1);
        assert!((r.improved_policy[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_root_is_an_error() {
        let mut pos = Position::starting(Variant::Chess);
        for uci in ["f2f3", "e7e5", "g2g4", "d8h4"] {
            let mv = pos
                .legal_moves()
                .into_iter()
                .find(|m| m.uci(8) == uci)
                .unwrap();
            pos = pos.apply_move_unchecked(mv);
        }
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 6);
        let graph = MoveGraph::build(Variant::Chess);
        let eval = Evaluator::new(&cp.model, &graph);
        assert!(matches!(
            run_search(&pos, &eval, &small_params(0), 512),
            Err(SearchError::TerminalRoot)
        ));
        let ongoing = Position::starting(Variant::Chess);
        let mut tiny = small_params(0);
        tiny.simulations = 1;
        assert!(matches!(
            run_search(&ongoing, &eval, &tiny, 512),
            Err(SearchError::BudgetTooSmall(1))
        ));
    }

    #[test]
    fn played_games_are_legal_and_terminate() {
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 7);
        let graph = MoveGraph::build(Variant::Gardner);
        let eval = Evaluator::new(&cp.model, &graph);
        let mut params = small_params(3);
        params.simulations = 8;
        let game = play_game(&eval, &eval, &params, 60, 11).unwrap();
        assert_eq!(game.moves.len(), game.plies.len());
        // Replay through the rules engine: every move must be legal and the
        // final status must reproduce the recorded outcome.
        let mut pos = Position::starting(Variant::Gardner);
        for mv in &game.moves {
            assert!(pos.legal_moves().contains(mv));
            pos = pos.apply_move_unchecked(*mv);
        }
        assert_eq!(pos.status(60), Status::Finished(game.outcome));

        // Determinism of the whole game for a fixed seed.
        let again = play_game(&eval, &eval, &params, 60, 11).unwrap();
        assert_eq!(again.moves, game.moves);
    }
}
