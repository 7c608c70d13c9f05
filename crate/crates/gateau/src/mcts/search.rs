use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chess::{Move, Position, Status};
use crate::graph::GraphError;
use crate::net::Evaluator;
use crate::tensor::segment_softmax_forward;

/// Search configuration. Defaults: 128 simulations, Gumbel scale 1.0,
/// 16 considered root actions, completed-Q transform constants 50 / 1.0.
#[derive(Debug, Clone)]
pub struct SearchParams {
    pub simulations: u32,
    pub gumbel_scale: f64,
    pub considered_actions: usize,
    pub c_visit: f64,
    pub c_scale: f64,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> SearchParams {
        SearchParams {
            simulations: 128,
            gumbel_scale: 1.0,
            considered_actions: 16,
            c_visit: 50.0,
            c_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search root is a terminal position")]
    TerminalRoot,
    #[error("simulation budget {0} is below the minimum of 2")]
    BudgetTooSmall(u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Output of one tree search from a root position.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub mv: Move,
    /// Improved policy over legal actions: (action index, probability).
    pub improved_policy: Vec<(usize, f64)>,
    /// Visit-weighted mean child value from the root's perspective.
    pub root_value: f64,
}

struct Node {
    position: Position,
    /// Exact outcome value from this node's side to move, for terminals.
    terminal_value: Option<f64>,
    /// Network value from this node's side to move.
    value: f64,
    moves: Vec<Move>,
    actions: Vec<usize>,
    prior_logits: Vec<f64>,
    visits: Vec<u32>,
    /// Accumulated backed-up values from this node's perspective.
    totals: Vec<f64>,
    children: Vec<Option<usize>>,
}

impl Node {
    fn total_visits(&self) -> u32 {
        self.visits.iter().sum()
    }

    fn q(&self, a: usize) -> f64 {
        self.totals[a] / self.visits[a] as f64
    }
}

struct Tree<'a> {
    nodes: Vec<Node>,
    evaluator: &'a Evaluator<'a>,
    max_plies: u32,
    params: &'a SearchParams,
}

impl Tree<'_> {
    fn new_node(&mut self, position: Position) -> Result<usize, SearchError> {
        let terminal_value = match position.status(self.max_plies) {
            Status::Finished(outcome) => Some(outcome.value_for(position.side_to_move)),
            Status::Ongoing => None,
        };
        let node = if terminal_value.is_some() {
            Node {
                position,
                terminal_value,
                value: terminal_value.unwrap(),
                moves: Vec::new(),
                actions: Vec::new(),
                prior_logits: Vec::new(),
                visits: Vec::new(),
                totals: Vec::new(),
                children: Vec::new(),
            }
        } else {
            let eval = self.evaluator.evaluate(&position)?;
            let n = eval.actions.len();
            Node {
                position,
                terminal_value: None,
                value: eval.value,
                moves: eval.actions.iter().map(|a| a.mv).collect(),
                actions: eval.actions.iter().map(|a| a.action).collect(),
                prior_logits: eval.actions.iter().map(|a| a.logit).collect(),
                visits: vec![0; n],
                totals: vec![0.0; n],
                children: vec![None; n],
            }
        };
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }

    /// Runs one simulation from `node`, descending into `forced` at the
    /// root. Returns the resulting value from `node`'s perspective.
    fn simulate(&mut self, node: usize, forced: Option<usize>) -> Result<f64, SearchError> {
        if let Some(v) = self.nodes[node].terminal_value {
            return Ok(v);
        }
        let action = match forced {
            Some(a) => a,
            None => self.select_nonroot(node),
        };
        let value = match self.nodes[node].children[action] {
            Some(child) => -self.simulate(child, None)?,
            None => {
                let mv = self.nodes[node].moves[action];
                let child_pos = self.nodes[node].position.apply_move_unchecked(mv);
                let child = self.new_node(child_pos)?;
                self.nodes[node].children[action] = Some(child);
                -self.nodes[child].value
            }
        };
        let n = &mut self.nodes[node];
        n.visits[action] += 1;
        n.totals[action] += value;
        Ok(value)
    }

    /// Completed action values: empirical Q for visited actions, the mixed
    /// value (network value blended with the visited children's
    /// prior-weighted mean) for unvisited ones.
    fn completed_q(&self, node: usize) -> Vec<f64> {
        let n = &self.nodes[node];
        let priors = segment_softmax_forward(
            &n.prior_logits,
            &vec![0; n.prior_logits.len()],
            1,
        );
        let total_visits = n.total_visits();
        let mut visited_prior = 0.0;
        let mut visited_q = 0.0;
        for a in 0..n.visits.len() {
            if n.visits[a] > 0 {
                visited_prior += priors[a];
                visited_q += priors[a] * n.q(a);
            }
        }
        let v_mix = if visited_prior > 0.0 {
            (n.value + (total_visits as f64) * (visited_q / visited_prior))
                / (1.0 + total_visits as f64)
        } else {
            n.value
        };
        (0..n.visits.len())
            .map(|a| if n.visits[a] > 0 { n.q(a) } else { v_mix })
            .collect()
    }

    fn sigma(&self, node: usize, q: f64) -> f64 {
        let max_visit = self.nodes[node].visits.iter().copied().max().unwrap_or(0);
        (self.params.c_visit + max_visit as f64) * self.params.c_scale * q
    }

    /// Improved policy at a node: softmax of prior logit + sigma(completed
    /// Q) over its legal actions.
    fn improved_policy(&self, node: usize) -> Vec<f64> {
        let n = &self.nodes[node];
        let completed = self.completed_q(node);
        let scores: Vec<f64> = n
            .prior_logits
            .iter()
            .zip(&completed)
            .map(|(&logit, &q)| logit + self.sigma(node, q))
            .collect();
        segment_softmax_forward(&scores, &vec![0; scores.len()], 1)
    }

    /// Deterministic non-root rule: argmax of improved prior minus the
    /// normalized visit deficit.
    fn select_nonroot(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        let improved = self.improved_policy(node);
        let total = n.total_visits() as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..improved.len() {
            let score = improved[a] - n.visits[a] as f64 / (1.0 + total);
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }
}

/// Gumbel-style root search: sample one Gumbel per legal action, keep the
/// top `considered_actions` by gumbel + prior logit, spend the simulation
/// budget on them by sequential halving, and pick the argmax of
/// gumbel + logit + sigma(completed Q).
pub fn run_search(
    root: &Position,
    evaluator: &Evaluator,
    params: &SearchParams,
    max_plies: u32,
) -> Result<SearchResult, SearchError> {
    if params.simulations < 2 {
        return Err(SearchError::BudgetTooSmall(params.simulations));
    }
    if !matches!(root.status(max_plies), Status::Ongoing) {
        return Err(SearchError::TerminalRoot);
    }

    let mut tree = Tree {
        nodes: Vec::with_capacity(params.simulations as usize + 1),
        evaluator,
        max_plies,
        params,
    };
    let root_idx = tree.new_node(root.clone())?;
    let legal = tree.nodes[root_idx].moves.len();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let gumbels: Vec<f64> = (0..legal)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            -(-u.ln()).ln() * params.gumbel_scale
        })
        .collect();

    // Finalists: top-m by gumbel + prior logit.
    let m = params.considered_actions.max(1).min(legal);
    let mut order: Vec<usize> = (0..legal).collect();
    let root_logits = tree.nodes[root_idx].prior_logits.clone();
    order.sort_by(|&a, &b| {
        let sa = gumbels[a] + root_logits[a];
        let sb = gumbels[b] + root_logits[b];
        sb.partial_cmp(&sa).unwrap()
    });
    let finalists: Vec<usize> = order[..m].to_vec();

    // Sequential halving over the finalists.
    let phases = (m as f64).log2().ceil().max(1.0) as u32;
    let mut remaining = finalists.clone();
    let mut budget = params.simulations;
    for phase in 0..phases {
        let per = ((params.simulations as usize) / (phases as usize * remaining.len())).max(1);
        let per = if phase + 1 == phases {
            per.max(budget as usize / remaining.len())
        } else {
            per
        };
        'outer: for &action in &remaining {
            for _ in 0..per {
                if budget == 0 {
                    break 'outer;
                }
                tree.simulate(root_idx, Some(action))?;
                budget -= 1;
            }
        }
        if remaining.len() > 1 {
            let completed = tree.completed_q(root_idx);
            remaining.sort_by(|&a, &b| {
                let sa = gumbels[a] + root_logits[a] + tree.sigma(root_idx, completed[a]);
                let sb = gumbels[b] + root_logits[b] + tree.sigma(root_idx, completed[b]);
                sb.partial_cmp(&sa).unwrap()
            });
            remaining.truncate(remaining.len().div_ceil(2));
        }
        if budget == 0 {
            break;
        }
    }
    // Spend any leftover budget round-robin over the surviving candidates.
    while budget > 0 {
        for &action in &remaining {
            if budget == 0 {
                break;
            }
            tree.simulate(root_idx, Some(action))?;
            budget -= 1;
        }
    }

    // Final selection among the finalists.
    let completed = tree.completed_q(root_idx);
    let best = finalists
        .iter()
        .copied()
        .max_by(|&a, &b| {
            let sa = gumbels[a] + root_logits[a] + tree.sigma(root_idx, completed[a]);
            let sb = gumbels[b] + root_logits[b] + tree.sigma(root_idx, completed[b]);
            sa.partial_cmp(&sb).unwrap()
        })
        .expect("at least one finalist");

    let improved = tree.improved_policy(root_idx);
    let node = &tree.nodes[root_idx];
    let improved_policy: Vec<(usize, f64)> = node
        .actions
        .iter()
        .copied()
        .zip(improved.iter().copied())
        .collect();

    let total_visits = node.total_visits();
    let root_value = if total_visits > 0 {
        (0..node.visits.len())
            .map(|a| node.totals[a])
            .sum::<f64>()
            / total_visits as f64
    } else {
        node.value
    };

    Ok(SearchResult {
        mv: node.moves[best],
        improved_policy,
        root_value,
    })
}
