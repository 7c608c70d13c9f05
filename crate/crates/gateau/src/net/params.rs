use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EDGE_FEATURE_DIM, NODE_FEATURE_DIM};
use crate::tensor::Tensor;

/// Which edge set a node's attention softmax normalizes over. The layer
/// aggregates along the same edges, from their other endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionDirection {
    /// Node i attends over edges with source i (its own moves).
    OutEdges,
    /// Node i attends over edges with destination i (moves landing on it).
    InEdges,
}

/// Architecture hyper-parameters. Every tensor shape depends only on these
/// two numbers, never on the board size, which is what lets one parameter
/// set drive both variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Embedding width (hs).
    pub hidden: usize,
    /// Number of residual blocks (L), each holding two graph layers.
    pub blocks: usize,
    pub attention: AttentionDirection,
}

impl ModelConfig {
    pub fn new(hidden: usize, blocks: usize) -> ModelConfig {
        ModelConfig {
            hidden,
            blocks,
            attention: AttentionDirection::OutEdges,
        }
    }

    /// The reference configuration: hs = 128, L = 5.
    pub fn reference() -> ModelConfig {
        ModelConfig::new(128, 5)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearIdx {
    pub w: usize,
    pub b: usize,
}

/// Batch-norm affine parameters plus the index of its running statistics.
#[derive(Debug, Clone, Copy)]
pub struct BnIdx {
    pub gamma: usize,
    pub beta: usize,
    pub stat: usize,
}

/// One graph-attention layer: six weight matrices and the attention vector.
#[derive(Debug, Clone, Copy)]
pub struct GateauIdx {
    /// Projects the edge's source node features into g'.
    pub src_proj: usize,
    /// Projects the edge's destination node features into g'.
    pub dst_proj: usize,
    /// Mixes the previous edge features into g'.
    pub edge_proj: usize,
    /// Attention vector dotted with g' to produce the raw attention logit.
    pub attn: usize,
    /// Self-edge projection of the node's own features.
    pub self_proj: usize,
    /// Projects neighbor node features into the aggregated message.
    pub neighbor_proj: usize,
    /// Mixes the edge features into the aggregated message.
    pub edge_mix: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BnrPairIdx {
    pub node: BnIdx,
    pub edge: BnIdx,
}

#[derive(Debug, Clone, Copy)]
pub struct ResBlockIdx {
    pub pre1: BnrPairIdx,
    pub gat1: GateauIdx,
    pub pre2: BnrPairIdx,
    pub gat2: GateauIdx,
}

#[derive(Debug, Clone, Copy)]
pub struct ValueHeadIdx {
    pub bn1: BnIdx,
    pub lin1: LinearIdx,
    pub bn2: BnIdx,
    pub pool_attn: usize,
    pub lin2: LinearIdx,
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyHeadIdx {
    pub bn1: BnIdx,
    pub lin1: LinearIdx,
    pub bn2: BnIdx,
    pub lin2: LinearIdx,
}

/// Semantic indices into the flat parameter registry.
#[derive(Debug, Clone)]
pub struct Layout {
    pub node_embed: LinearIdx,
    pub edge_embed: LinearIdx,
    pub blocks: Vec<ResBlockIdx>,
    pub value_head: ValueHeadIdx,
    pub policy_head: PolicyHeadIdx,
}

/// Running mean/variance for one batch-norm site.
#[derive(Debug, Clone)]
pub struct RunningStat {
    pub name: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// All trainable tensors plus batch-norm running statistics, in a flat,
/// deterministically ordered registry.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub values: Vec<Tensor>,
    pub stats: Vec<RunningStat>,
    pub layout: Layout,
}

struct Registry {
    names: Vec<String>,
    values: Vec<Tensor>,
    stats: Vec<RunningStat>,
}

impl Registry {
    fn tensor(&mut self, name: String, shape: &[usize]) -> usize {
        self.names.push(name);
        self.values.push(ArrayD::zeros(IxDyn(shape)));
        self.values.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> LinearIdx {
        LinearIdx {
            w: self.tensor(format!("{name}.weight"), &[fan_in, fan_out]),
            b: self.tensor(format!("{name}.bias"), &[fan_out]),
        }
    }

    fn batch_norm(&mut self, name: &str, width: usize) -> BnIdx {
        let gamma = self.tensor(format!("{name}.gamma"), &[width]);
        let beta = self.tensor(format!("{name}.beta"), &[width]);
        self.stats.push(RunningStat {
            name: name.to_string(),
            mean: vec![0.0; width],
            var: vec![1.0; width],
        });
        BnIdx {
            gamma,
            beta,
            stat: self.stats.len() - 1,
        }
    }

    fn bnr_pair(&mut self, name: &str, width: usize) -> BnrPairIdx {
        BnrPairIdx {
            node: self.batch_norm(&format!("{name}.node_bn"), width),
            edge: self.batch_norm(&format!("{name}.edge_bn"), width),
        }
    }

    fn gateau(&mut self, name: &str, hs: usize) -> GateauIdx {
        GateauIdx {
            src_proj: self.tensor(format!("{name}.src_proj"), &[hs, hs]),
            dst_proj: self.tensor(format!("{name}.dst_proj"), &[hs, hs]),
            edge_proj: self.tensor(format!("{name}.edge_proj"), &[hs, hs]),
            attn: self.tensor(format!("{name}.attn"), &[hs]),
            self_proj: self.tensor(format!("{name}.self_proj"), &[hs, hs]),
            neighbor_proj: self.tensor(format!("{name}.neighbor_proj"), &[hs, hs]),
            edge_mix: self.tensor(format!("{name}.edge_mix"), &[hs, hs]),
        }
    }
}

impl ModelParams {
    /// Builds the registry with zeroed tensors. Use [`ModelParams::init`]
    /// for a trainable starting point.
    pub fn zeroed(config: ModelConfig) -> ModelParams {
        let hs = config.hidden;
        let mut reg = Registry {
            names: Vec::new(),
            values: Vec::new(),
            stats: Vec::new(),
        };
        let node_embed = reg.linear("node_embed", NODE_FEATURE_DIM, hs);
        let edge_embed = reg.linear("edge_embed", EDGE_FEATURE_DIM, hs);
        let mut blocks = Vec::with_capacity(config.blocks);
        for b in 0..config.blocks {
            let pre1 = reg.bnr_pair(&format!("block{b}.pre1"), hs);
            let gat1 = reg.gateau(&format!("block{b}.gat1"), hs);
            let pre2 = reg.bnr_pair(&format!("block{b}.pre2"), hs);
            let gat2 = reg.gateau(&format!("block{b}.gat2"), hs);
            blocks.push(ResBlockIdx {
                pre1,
                gat1,
                pre2,
                gat2,
            });
        }
        let value_head = ValueHeadIdx {
            bn1: reg.batch_norm("value_head.bn1", hs),
            lin1: reg.linear("value_head.lin1", hs, hs),
            bn2: reg.batch_norm("value_head.bn2", hs),
            pool_attn: reg.tensor("value_head.pool_attn".into(), &[hs]),
            lin2: reg.linear("value_head.lin2", hs, 1),
        };
        let policy_head = PolicyHeadIdx {
            bn1: reg.batch_norm("policy_head.bn1", hs),
            lin1: reg.linear("policy_head.lin1", hs, hs),
            bn2: reg.batch_norm("policy_head.bn2", hs),
            lin2: reg.linear("policy_head.lin2", hs, 1),
        };
        ModelParams {
            config,
            names: reg.names,
            values: reg.values,
            stats: reg.stats,
            layout: Layout {
                node_embed,
                edge_embed,
                blocks,
                value_head,
                policy_head,
            },
        }
    }

    /// Fan-in uniform initialization for matrices and attention vectors,
    /// zero biases, identity batch-norm affine. Deterministic per seed.
    pub fn init(config: ModelConfig, seed: u64) -> ModelParams {
        let mut params = ModelParams::zeroed(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, value) in params.names.iter().zip(params.values.iter_mut()) {
            if name.ends_with(".bias") || name.ends_with(".beta") {
                continue; // stays zero
            }
            if name.ends_with(".gamma") {
                value.fill(1.0);
                continue;
            }
            let fan_in = if value.ndim() == 2 {
                value.shape()[0]
            } else {
                value.shape()[0] // attention vectors: dotted against hs dims
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            value.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        params.snap_to_f32();
        params
    }

    /// Rounds every parameter and running statistic to its nearest 32-bit
    /// float. Checkpoints store 32-bit payloads; keeping the in-memory
    /// state on that grid makes save/load round trips bit-exact.
    pub fn snap_to_f32(&mut self) {
        for v in self.values.iter_mut() {
            v.mapv_inplace(|x| x as f32 as f64);
        }
        for s in self.stats.iter_mut() {
            for m in s.mean.iter_mut() {
                *m = *m as f32 as f64;
            }
            for v in s.var.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Total trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Weight-matrix elements in one graph layer: exactly 6 hidden^2.
    pub fn gateau_weight_matrix_count(&self, idx: &GateauIdx) -> usize {
        [
            idx.src_proj,
            idx.dst_proj,
            idx.edge_proj,
            idx.self_proj,
            idx.neighbor_proj,
            idx.edge_mix,
        ]
        .iter()
        .map(|&i| self.values[i].len())
        .sum()
    }

    /// Exponential-moving-average update of one batch-norm site's running
    /// statistics (momentum 0.9).
    pub fn update_running_stat(&mut self, stat: usize, mean: &[f64], var: &[f64]) {
        const MOMENTUM: f64 = 0.9;
        let s = &mut self.stats[stat];
        for (r, &b) in s.mean.iter_mut().zip(mean) {
            *r = MOMENTUM * *r + (1.0 - MOMENTUM) * b;
        }
        for (r, &b) in s.var.iter_mut().zip(var) {
            *r = MOMENTUM * *r + (1.0 - MOMENTUM) * b;
        }
    }
}
