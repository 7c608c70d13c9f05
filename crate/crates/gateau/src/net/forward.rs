use std::sync::Arc;

use ndarray::{Array2, ArrayD, IxDyn};

use super::params::{AttentionDirection, BnIdx, GateauIdx, ModelParams};
use crate::tensor::{segment_softmax_forward, BatchStats, Tape, Tensor, Var};

/// Connectivity of one graph or of several disjoint graphs batched
/// together (node indices offset per graph).
#[derive(Debug, Clone)]
pub struct BatchGraph {
    pub node_count: usize,
    pub graph_count: usize,
    pub edge_src: Arc<Vec<usize>>,
    pub edge_dst: Arc<Vec<usize>>,
    /// Graph id of every node, for attention pooling.
    pub node_graph: Arc<Vec<usize>>,
}

impl BatchGraph {
    pub fn single(node_count: usize, edge_src: Vec<usize>, edge_dst: Vec<usize>) -> BatchGraph {
        BatchGraph {
            node_count,
            graph_count: 1,
            edge_src: Arc::new(edge_src),
            edge_dst: Arc::new(edge_dst),
            node_graph: Arc::new(vec![0; node_count]),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edge_src.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Inference,
}

/// Tape handles for every parameter tensor, aligned with the registry.
pub struct ParamVars {
    pub vars: Vec<Var>,
}

impl ParamVars {
    pub fn insert(tape: &mut Tape, params: &ModelParams, trainable: bool) -> ParamVars {
        ParamVars {
            vars: params
                .values
                .iter()
                .map(|v| tape.leaf(v.clone(), trainable))
                .collect(),
        }
    }

    fn get(&self, idx: usize) -> Var {
        self.vars[idx]
    }
}

pub struct ForwardOutput {
    /// Per-graph value in [-1, 1], shape [graph_count, 1].
    pub values: Var,
    /// Per-edge policy logit, shape [edge_count].
    pub edge_logits: Var,
    /// Batch statistics per batch-norm site (train mode only), as
    /// (stat index, stats) pairs in application order.
    pub bn_stats: Vec<(usize, BatchStats)>,
}

struct Ctx<'a> {
    tape: &'a mut Tape,
    params: &'a ModelParams,
    vars: &'a ParamVars,
    mode: BnMode,
    bn_stats: Vec<(usize, BatchStats)>,
}

impl Ctx<'_> {
    fn batch_norm(&mut self, x: Var, idx: &BnIdx) -> Var {
        let gamma = self.vars.get(idx.gamma);
        let beta = self.vars.get(idx.beta);
        match self.mode {
            BnMode::Train => {
                let (y, stats) = self.tape.batch_norm_train(x, gamma, beta);
                self.bn_stats.push((idx.stat, stats));
                y
            }
            BnMode::Inference => {
                let stat = &self.params.stats[idx.stat];
                self.tape
                    .batch_norm_inference(x, gamma, beta, &stat.mean, &stat.var)
            }
        }
    }

    fn bnr(&mut self, x: Var, idx: &BnIdx) -> Var {
        let y = self.batch_norm(x, idx);
        self.tape.relu(y)
    }

    fn linear(&mut self, x: Var, idx: &super::params::LinearIdx) -> Var {
        let y = self.tape.matmul(x, self.vars.get(idx.w));
        self.tape.add_row(y, self.vars.get(idx.b))
    }

    fn gateau(&mut self, h: Var, g: Var, idx: &GateauIdx, bg: &BatchGraph) -> (Var, Var) {
        let gv = GateauVars {
            src_proj: self.vars.get(idx.src_proj),
            dst_proj: self.vars.get(idx.dst_proj),
            edge_proj: self.vars.get(idx.edge_proj),
            attn: self.vars.get(idx.attn),
            self_proj: self.vars.get(idx.self_proj),
            neighbor_proj: self.vars.get(idx.neighbor_proj),
            edge_mix: self.vars.get(idx.edge_mix),
        };
        gateau_layer(
            self.tape,
            &gv,
            h,
            g,
            bg,
            self.params.config.attention,
            self.params.config.hidden,
        )
    }
}

/// Tape handles for one graph layer's parameters.
pub struct GateauVars {
    pub src_proj: Var,
    pub dst_proj: Var,
    pub edge_proj: Var,
    pub attn: Var,
    pub self_proj: Var,
    pub neighbor_proj: Var,
    pub edge_mix: Var,
}

/// One graph layer: the new edge features combine the projections of the
/// edge's endpoints with the previous edge features; attention weights are
/// a per-node softmax of those new edge features; node features aggregate
/// the attention-weighted messages plus an explicit self contribution, so
/// a node with no edges in the attended direction keeps its projected self.
pub fn gateau_layer(
    tape: &mut Tape,
    gv: &GateauVars,
    h: Var,
    g: Var,
    bg: &BatchGraph,
    attention: AttentionDirection,
    hidden: usize,
) -> (Var, Var) {
    let t = tape;
    let src_all = t.matmul(h, gv.src_proj);
    let dst_all = t.matmul(h, gv.dst_proj);
    let src_part = t.gather_rows(src_all, bg.edge_src.clone());
    let dst_part = t.gather_rows(dst_all, bg.edge_dst.clone());
    let edge_part = t.matmul(g, gv.edge_proj);
    let sum = t.add(src_part, dst_part);
    let g_new = t.add(sum, edge_part);

    let attn = t.reshape(gv.attn, &[hidden, 1]);
    let raw = t.matmul(g_new, attn);
    let raw = t.reshape(raw, &[bg.edge_count()]);
    let logits = t.leaky_relu(raw, super::LEAKY_SLOPE);
    let (att_segments, neighbor_side) = match attention {
        AttentionDirection::OutEdges => (bg.edge_src.clone(), bg.edge_dst.clone()),
        AttentionDirection::InEdges => (bg.edge_dst.clone(), bg.edge_src.clone()),
    };
    let alpha = t.segment_softmax(logits, att_segments.clone(), bg.node_count);

    let neighbor_all = t.matmul(h, gv.neighbor_proj);
    let neighbor_part = t.gather_rows(neighbor_all, neighbor_side);
    let edge_mix = t.matmul(g, gv.edge_mix);
    let messages = t.add(neighbor_part, edge_mix);
    let weighted = t.scale_rows(messages, alpha);
    let aggregated = t.segment_sum(weighted, att_segments, bg.node_count);
    let self_part = t.matmul(h, gv.self_proj);
    let h_new = t.add(self_part, aggregated);
    (h_new, g_new)
}

/// Full network forward pass: embeddings, residual tower, value and policy
/// heads. Works on a single graph or a batch of disjoint graphs.
pub fn forward(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &ParamVars,
    bg: &BatchGraph,
    node_features: Tensor,
    edge_features: Tensor,
    mode: BnMode,
) -> ForwardOutput {
    assert_eq!(node_features.shape()[0], bg.node_count, "node row count");
    assert_eq!(edge_features.shape()[0], bg.edge_count(), "edge row count");
    let layout = params.layout.clone();
    let node_in = tape.leaf(node_features, false);
    let edge_in = tape.leaf(edge_features, false);

    let mut ctx = Ctx {
        tape,
        params,
        vars,
        mode,
        bn_stats: Vec::new(),
    };

    let mut h = ctx.linear(node_in, &layout.node_embed);
    let mut g = ctx.linear(edge_in, &layout.edge_embed);

    for block in &layout.blocks {
        let h1 = ctx.bnr(h, &block.pre1.node);
        let g1 = ctx.bnr(g, &block.pre1.edge);
        let (h2, g2) = ctx.gateau(h1, g1, &block.gat1, bg);
        let h3 = ctx.bnr(h2, &block.pre2.node);
        let g3 = ctx.bnr(g2, &block.pre2.edge);
        let (h4, g4) = ctx.gateau(h3, g3, &block.gat2, bg);
        h = ctx.tape.add(h, h4);
        g = ctx.tape.add(g, g4);
    }

    // Value head: BNR -> Linear -> BNR -> attention pool -> ReLU ->
    // Linear(1) -> tanh.
    let vh = &layout.value_head;
    let x = ctx.bnr(h, &vh.bn1);
    let x = ctx.linear(x, &vh.lin1);
    let x = ctx.bnr(x, &vh.bn2);
    let pooled = attention_pool(
        ctx.tape,
        x,
        ctx.vars.get(vh.pool_attn),
        bg.node_graph.clone(),
        bg.graph_count,
        params.config.hidden,
    );
    let pooled = ctx.tape.relu(pooled);
    let v = ctx.linear(pooled, &vh.lin2);
    let values = ctx.tape.tanh(v);

    // Policy head: BNR -> Linear -> BNR -> Linear(1), one logit per edge.
    let ph = &layout.policy_head;
    let y = ctx.bnr(g, &ph.bn1);
    let y = ctx.linear(y, &ph.lin1);
    let y = ctx.bnr(y, &ph.bn2);
    let y = ctx.linear(y, &ph.lin2);
    let edge_logits = ctx.tape.reshape(y, &[bg.edge_count()]);

    let bn_stats = std::mem::take(&mut ctx.bn_stats);
    ForwardOutput {
        values,
        edge_logits,
        bn_stats,
    }
}

/// Attention-weighted sum of node features into one vector per graph:
/// weights are a softmax of LeakyReLU(a . h_i) over each graph's nodes.
pub fn attention_pool(
    tape: &mut Tape,
    h: Var,
    attn: Var,
    node_graph: Arc<Vec<usize>>,
    graph_count: usize,
    hidden: usize,
) -> Var {
    assert!(
        !node_graph.is_empty(),
        "attention pooling requires at least one node"
    );
    let a = tape.reshape(attn, &[hidden, 1]);
    let raw = tape.matmul(h, a);
    let raw = tape.reshape(raw, &[node_graph.len()]);
    let logits = tape.leaky_relu(raw, super::LEAKY_SLOPE);
    let weights = tape.segment_softmax(logits, node_graph.clone(), graph_count);
    let weighted = tape.scale_rows(h, weights);
    tape.segment_sum(weighted, node_graph, graph_count)
}

/// Masked policy: softmax of the given logits restricted to `legal`
/// entries, scattered back into a dense vector of length `len` that is
/// exactly zero elsewhere.
pub fn masked_policy(edge_logits: &[f64], legal: &[usize], len: usize) -> Vec<f64> {
    assert!(!legal.is_empty(), "policy needs at least one legal action");
    let logits: Vec<f64> = legal.iter().map(|&e| edge_logits[e]).collect();
    let probs = segment_softmax_forward(&logits, &vec![0; logits.len()], 1);
    let mut out = vec![0.0; len];
    for (&e, &p) in legal.iter().zip(probs.iter()) {
        out[e] = p;
    }
    out
}

/// Converts feature matrices into the dense tensors the forward pass eats.
pub fn to_tensor(mat: &Array2<f64>) -> Tensor {
    ArrayD::from_shape_vec(IxDyn(&[mat.nrows(), mat.ncols()]), mat.iter().copied().collect())
        .unwrap()
}
