use ndarray::Array2;

use super::forward::{forward, masked_policy, to_tensor, BatchGraph, BnMode, ParamVars};
use super::params::ModelParams;
use crate::chess::{Move, Position};
use crate::graph::{action_of_move, encode_position, GraphError, MoveGraph};
use crate::tensor::Tape;

/// One legal action with its network prior.
#[derive(Debug, Clone)]
pub struct ActionEval {
    pub action: usize,
    pub edge: usize,
    pub mv: Move,
    pub logit: f64,
    pub prob: f64,
}

/// Network output for a single position, restricted to legal actions.
#[derive(Debug, Clone)]
pub struct PositionEval {
    /// Expected outcome in [-1, 1] from the side to move's perspective.
    pub value: f64,
    pub actions: Vec<ActionEval>,
}

impl PositionEval {
    /// Probability vector over the flat action space (zero off-support).
    pub fn action_distribution(&self, action_count: usize) -> Vec<f64> {
        let mut out = vec![0.0; action_count];
        for a in &self.actions {
            out[a.action] = a.prob;
        }
        out
    }
}

/// Bundles a parameter set with a move graph for repeated single-position
/// inference. Immutable and cheap to share across threads.
pub struct Evaluator<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a MoveGraph,
    bg: BatchGraph,
}

impl<'a> Evaluator<'a> {
    pub fn new(params: &'a ModelParams, graph: &'a MoveGraph) -> Evaluator<'a> {
        let edge_src: Vec<usize> = graph.edges.iter().map(|e| e.source).collect();
        let edge_dst: Vec<usize> = graph.edges.iter().map(|e| e.dest).collect();
        Evaluator {
            params,
            graph,
            bg: BatchGraph::single(graph.node_count(), edge_src, edge_dst),
        }
    }

    /// Runs the network in inference mode (running batch-norm statistics).
    pub fn evaluate(&self, pos: &Position) -> Result<PositionEval, GraphError> {
        let fs = encode_position(pos, self.graph)?;
        self.evaluate_encoded(pos, &fs.node_features, &fs.edge_features)
    }

    pub fn evaluate_encoded(
        &self,
        pos: &Position,
        node_features: &Array2<f64>,
        edge_features: &Array2<f64>,
    ) -> Result<PositionEval, GraphError> {
        let mut tape = Tape::new();
        let vars = ParamVars::insert(&mut tape, self.params, false);
        let out = forward(
            &mut tape,
            self.params,
            &vars,
            &self.bg,
            to_tensor(node_features),
            to_tensor(edge_features),
            BnMode::Inference,
        );
        let value = tape.value(out.values).iter().next().copied().unwrap();
        let edge_logits: Vec<f64> = tape.value(out.edge_logits).iter().copied().collect();

        let moves = pos.legal_moves();
        let mut actions = Vec::with_capacity(moves.len());
        let mut legal_edges = Vec::with_capacity(moves.len());
        for mv in moves {
            let action = action_of_move(&mv, pos.side_to_move, self.graph.variant)?;
            let edge = self
                .graph
                .edge_index_of_action(action)
                .expect("legal actions map onto edges");
            legal_edges.push(edge);
            actions.push(ActionEval {
                action,
                edge,
                mv,
                logit: edge_logits[edge],
                prob: 0.0,
            });
        }
        let dense = masked_policy(&edge_logits, &legal_edges, edge_logits.len());
        for a in actions.iter_mut() {
            a.prob = dense[a.edge];
        }
        Ok(PositionEval { value, actions })
    }
}
