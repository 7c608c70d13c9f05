//! The edge-featured graph-attention network: residual tower, attention
//! pooling, value/policy heads, checkpoint files, and the gradient-check
//! suite.

mod checkpoint;
mod evaluator;
mod forward;
mod gradcheck;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use evaluator::{ActionEval, Evaluator, PositionEval};
pub use forward::{
    attention_pool, forward, gateau_layer, masked_policy, to_tensor, BatchGraph, BnMode,
    ForwardOutput, GateauVars, ParamVars,
};
pub use gradcheck::{full_model_error, run_gradcheck, GradcheckReport, MODEL_TOL, PRIMITIVE_TOL};
pub use params::{
    AttentionDirection, BnIdx, BnrPairIdx, GateauIdx, Layout, LinearIdx, ModelConfig,
    ModelParams, PolicyHeadIdx, ResBlockIdx, RunningStat, ValueHeadIdx,
};

/// Negative-side slope shared by every LeakyReLU in the network.
pub const LEAKY_SLOPE: f64 = 0.2;

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{ArrayD, IxDyn};
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::chess::{Position, Variant};
    use crate::graph::{encode_position, MoveGraph};
    use crate::tensor::{Tape, Tensor};

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
    }

    #[test]
    fn reference_parameter_count_near_one_million() {
        let params = ModelParams::zeroed(ModelConfig::reference());
        let count = params.parameter_count();
        assert!(
            (950_000..=1_150_000).contains(&count),
            "parameter count {count}"
        );
    }

    #[test]
    fn layer_weight_matrices_are_six_hs_squared() {
        for hs in [16, 32, 128] {
            let params = ModelParams::zeroed(ModelConfig::new(hs, 2));
            for block in &params.layout.blocks {
                for gat in [&block.gat1, &block.gat2] {
                    assert_eq!(params.gateau_weight_matrix_count(gat), 6 * hs * hs);
                }
            }
        }
    }

    #[test]
    fn shapes_are_board_size_independent() {
        // The registry never mentions a node or edge count.
        let params = ModelParams::zeroed(ModelConfig::new(8, 1));
        for (name, v) in params.names.iter().zip(params.values.iter()) {
            for &d in v.shape() {
                assert!(
                    d == 8 || d == 1 || d == 119 || d == 15,
                    "{name} has dimension {d}"
                );
            }
        }
    }

    fn single_layer_vars(tape: &mut Tape, hs: usize, seed: u64) -> GateauVars {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |tape: &mut Tape, rng: &mut ChaCha8Rng| {
            let t = rand_tensor(rng, &[hs, hs]);
            tape.leaf(t, false)
        };
        GateauVars {
            src_proj: mat(tape, &mut rng),
            dst_proj: mat(tape, &mut rng),
            edge_proj: mat(tape, &mut rng),
            attn: {
                let t = rand_tensor(&mut rng, &[hs]);
                tape.leaf(t, false)
            },
            self_proj: mat(tape, &mut rng),
            neighbor_proj: mat(tape, &mut rng),
            edge_mix: mat(tape, &mut rng),
        }
    }

    #[test]
    fn isolated_node_keeps_projected_self() {
        let hs = 6;
        let mut tape = Tape::new();
        let gv = single_layer_vars(&mut tape, hs, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rand_tensor(&mut rng, &[1, hs]);
        let hv = tape.leaf(h.clone(), false);
        let gvv = tape.leaf(ArrayD::zeros(IxDyn(&[0, hs])), false);
        let bg = BatchGraph::single(1, vec![], vec![]);
        let (h_new, _) = gateau_layer(
            &mut tape,
            &gv,
            hv,
            gvv,
            &bg,
            AttentionDirection::OutEdges,
            hs,
        );
        // Expect exactly h . self_proj.
        let expected = {
            let mut t = Tape::new();
            let a = t.leaf(h, false);
            let
w = t.leaf(tape.value(gv.self_proj).clone(), false);
            let y = t.matmul(a, w);
            t.value(y).clone()
        };
        assert_eq!(tape.value(h_new), &expected);
    }

    #[test]
    fn zero_attention_vector_gives_uniform_weights() {
        // With a = 0 every attention logit is zero, so the aggregation is a
        // plain average over each node's out-edges. Compare a 2-out-edge
        // node against the hand-computed mean of its messages.
        let hs = 4;
        let mut tape = Tape::new();
        let mut gv = single_layer_vars(&mut tape, hs, 3);
        gv.attn = tape.leaf(ArrayD::zeros(IxDyn(&[hs])), false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = rand_tensor(&mut rng, &[3, hs]);
        let g = rand_tensor(&mut rng, &[2, hs]);
        let hv = tape.leaf(h.clone(), false);
        let gvv = tape.leaf(g.clone(), false);
        let bg = BatchGraph::single(3, vec![0, 0], vec![1, 2]);
        let (h_new, _) = gateau_layer(
            &mut tape,
            &gv,
            hv,
            gvv,
            &bg,
            AttentionDirection::OutEdges,
            hs,
        );

        let matmul = |a: &Tensor, b: &Tensor| {
            let mut t = Tape::new();
            let av = t.leaf(a.clone(), false);
            let bv = t.leaf(b.clone(), false);
            let y = t.matmul(av, bv);
            t.value(y).clone()
        };
        let self_part = matmul(&h, tape.value(gv.self_proj));
        let neighbor = matmul(&h, tape.value(gv.neighbor_proj));
        let mixed = matmul(&g, tape.value(gv.edge_mix));
        for j in 0..hs {
            let msg0 = neighbor[[1, j]] + mixed[[0, j]];
            let msg1 = neighbor[[2, j]] + mixed[[1, j]];
            let expected = self_part[[0, j]] + 0.5 * msg0 + 0.5 * msg1;
            let got = tape.value(h_new)[[0, j]];
            assert!((got - expected).abs() < 1e-12, "col {j}: {got} vs {expected}");
        }
    }

    #[test]
    fn layer_is_permutation_equivariant() {
        let hs = 5;
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = rand_tensor(&mut rng, &[n, hs]);
        let edges: Vec<(usize, usize)> =
            vec![(0, 1), (0, 3), (1, 2), (2, 5), (3, 4), (4, 0), (5, 1), (5, 3)];
        let g = rand_tensor(&mut rng, &[edges.len(), hs]);

        let run = |perm: &[usize]| -> (Tensor, Tensor) {
            let mut tape = Tape::new();
            let gv = single_layer_vars(&mut tape, hs, 6);
            let mut hp = ArrayD::zeros(IxDyn(&[n, hs]));
            for i in 0..n {
                for j in 0..hs {
                    hp[[perm[i], j]] = h[[i, j]];
                }
            }
            let src: Vec<usize> = edges.iter().map(|&(s, _)| perm[s]).collect();
            let dst: Vec<usize> = edges.iter().map(|&(_, d)| perm[d]).collect();
            let hv = tape.leaf(hp, false);
            let gvv = tape.leaf(g.clone(), false);
            let bg = BatchGraph::single(n, src, dst);
            let (h_new, g_new) = gateau_layer(
                &mut tape,
                &gv,
                hv,
                gvv,
                &bg,
                AttentionDirection::OutEdges,
                hs,
            );
            (tape.value(h_new).clone(), tape.value(g_new).clone())
        };

        let identity: Vec<usize> = (0..n).collect();
        let mut perm = identity.clone();
        perm.shuffle(&mut rng);
        let (h_id, g_id) = run(&identity);
        let (h_pm, g_pm) = run(&perm);
        for i in 0..n {
            for j in 0..hs {
                assert!((h_id[[i, j]] - h_pm[[perm[i], j]]).abs() < 1e-6);
            }
        }
        for e in 0..edges.len() {
            for j in 0..hs {
                assert!((g_id[[e, j]] - g_pm[[e, j]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn attention_pool_properties() {
        let hs = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = rand_tensor(&mut rng, &[5, hs]);
        let run = |h: &Tensor, attn: &Tensor| {
            let mut tape = Tape::new();
            let hv = tape.leaf(h.clone(), false);
            let av = tape.leaf(attn.clone(), false);
            let pooled = attention_pool(&mut tape, hv, av, Arc::new(vec![0; h.shape()[0]]), 1, hs);
            tape.value(pooled).clone()
        };

        // Zero attention vector: the exact mean of the node features.
        let pooled = run(&h, &ArrayD::zeros(IxDyn(&[hs])));
        for j in 0..hs {
            let mean: f64 = (0..5).map(|i| h[[i, j]]).sum::<f64>() / 5.0;
            assert!((pooled[[0, j]] - mean).abs() < 1e-12);
        }

        // Single node: identity.
        let one = rand_tensor(&mut rng, &[1, hs]);
        let attn = rand_tensor(&mut rng, &[hs]);
        let pooled = run(&one, &attn);
        for j in 0..hs {
            assert!((pooled[[0, j]] - one[[0, j]]).abs() < 1e-12);
        }

        // Permutation invariance, exact to 1e-6.
        let mut shuffled = h.clone();
        let mut order: Vec<usize> = (0..5).collect();
        order.shuffle(&mut rng);
        for (new_i, &old_i) in order.iter().enumerate() {
            for j in 0..hs {
                shuffled[[new_i, j]] = h[[old_i, j]];
            }
        }
        let a = run(&h, &attn);
        let b = run(&shuffled, &attn);
        for j in 0..hs {
            assert!((a[[0, j]] - b[[0, j]]).abs() < 1e-6);
        }
    }

    #[test]
    #[should_panic(expected = "at least one node")]
    fn attention_pool_rejects_empty_graph() {
        let mut tape = Tape::new();
        let h = tape.leaf(ArrayD::zeros(IxDyn(&[0, 4])), false);
        let a = tape.leaf(ArrayD::zeros(IxDyn(&[4])), false);
        attention_pool(&mut tape, h, a, Arc::new(vec![]), 1, 4);
    }

    fn eval_start(variant: Variant, params: &ModelParams) -> (PositionEval, usize) {
        let graph = MoveGraph::build(variant);
        let pos = Position::starting(variant);
        let eval = Evaluator::new(params, &graph);
        let out = eval.evaluate(&pos).unwrap();
        (out, variant.action_count())
    }

    #[test]
    fn model_runs_on_both_board_sizes() {
        let params = ModelParams::init(ModelConfig::new(16, 1), 42);
        for variant in [Variant::Chess, Variant::Gardner] {
            let (out, action_count) = eval_start(variant, &params);
            assert!(out.value.abs() <= 1.0);
            let dense = out.action_distribution(action_count);
            assert_eq!(
                dense.len(),
                match variant {
                    Variant::Chess => 4672,
                    Variant::Gardner => 1225,
                }
            );
            let total: f64 = dense.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "policy sums to 1, got {total}");
            // Mass strictly on legal actions.
            let legal = crate::graph::legal_action_mask(
                &Position::starting(variant),
                &MoveGraph::build(variant),
            )
            .unwrap();
            for (a, &p) in dense.iter().enumerate() {
                if !legal[a] {
                    assert_eq!(p, 0.0, "illegal action {a} has mass");
                }
            }
        }
    }

    #[test]
    fn full_model_permutation_symmetry() {
        // Relabel the nodes of a real position's graph: the value must not
        // change and the policy must follow the induced action relabeling.
        let params = ModelParams::init(ModelConfig::new(12, 1), 9);
        let graph = MoveGraph::build(Variant::Gardner);
        let pos = Position::starting(Variant::Gardner);
        let fs = encode_position(&pos, &graph).unwrap();

        let n = graph.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);

        let run = |src: Vec<usize>, dst: Vec<usize>, nodes: Tensor| {
            let mut tape = Tape::new();
            let vars = ParamVars::insert(&mut tape, &params, false);
            let bg = BatchGraph::single(n, src, dst);
            let out = forward(
                &mut tape,
                &params,
                &vars,
                &bg,
                nodes,
                to_tensor(&fs.edge_features),
                BnMode::Inference,
            );
            let value = tape.value(out.values).iter().next().copied().unwrap();
            let logits: Vec<f64> = tape.value(out.edge_logits).iter().copied().collect();
            (value, logits)
        };

        let src: Vec<usize> = graph.edges.iter().map(|e| e.source).collect();
        let dst: Vec<usize> = graph.edges.iter().map(|e| e.dest).collect();
        let (v1, l1) = run(src.clone(), dst.clone(), to_tensor(&fs.node_features));

        let mut permuted_nodes = fs.node_features.clone();
        for i in 0..n {
            for j in 0..crate::graph::NODE_FEATURE_DIM {
                permuted_nodes[[perm[i], j]] = fs.node_features[[i, j]];
            }
        }
        let psrc: Vec<usize> = src.iter().map(|&s| perm[s]).collect();
        let pdst: Vec<usize> = dst.iter().map(|&d| perm[d]).collect();
        let (v2, l2) = run(psrc, pdst, to_tensor(&permuted_nodes));

        assert!((v1 - v2).abs() < 1e-5, "value changed: {v1} vs {v2}");
        for e in 0..l1.len() {
            assert!((l1[e] - l2[e]).abs() < 1e-5, "edge {e} logit changed");
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut cp = Checkpoint::fresh(ModelConfig::new(8, 1), 77);
        cp.iteration = 3;
        cp.variant_history = vec!["gardner".into()];
        // Perturb the running stats so they differ from their defaults.
        cp.model.stats[0].mean[2] = 0.25;
        cp.model.stats[0].var[1] = 1.5;
        save_checkpoint(&cp, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.iteration, 3);
        assert_eq!(loaded.variant_history, vec!["gardner".to_string()]);
        assert_eq!(loaded.model.config, cp.model.config);
        for (a, b) in cp.model.values.iter().zip(loaded.model.values.iter()) {
            assert_eq!(a, b);
        }
        for (a, b) in cp.model.stats.iter().zip(loaded.model.stats.iter()) {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.var, b.var);
        }

        // Identical forward outputs on a fixed input.
        let graph = MoveGraph::build(Variant::Gardner);
        let pos = Position::starting(Variant::Gardner);
        let before = Evaluator::new(&cp.model, &graph).evaluate(&pos).unwrap();
        let after = Evaluator::new(&loaded.model, &graph).evaluate(&pos).unwrap();
        assert_eq!(before.value, after.value);
        for (x, y) in before.actions.iter().zip(after.actions.iter()) {
            assert_eq!(x.logit, y.logit);
        }
    }

    #[test]
    fn checkpoint_corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let cp = Checkpoint::fresh(ModelConfig::new(8, 1), 5);
        save_checkpoint(&cp, &path).unwrap();

        // Truncation.
        let bytes = std::fs::read(&path).unwrap();
        let cut = path.with_extension("cut");
        std::fs::write(&cut, &bytes[..bytes.len() - 64]).unwrap();
        assert!(matches!(
            load_checkpoint(&cut),
            Err(CheckpointError::Checksum(_))
        ));

        // Flipped payload byte.
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0xff;
        let bad = path.with_extension("bad");
        std::fs::write(&bad, &flipped).unwrap();
        assert!(matches!(
            load_checkpoint(&bad),
            Err(CheckpointError::Checksum(_))
        ));

        // Wrong version.
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let versioned = text.replacen("gateau-checkpoint 1", "gateau-checkpoint 9", 1);
        let vpath = path.with_extension("v9");
        std::fs::write(&vpath, versioned.as_bytes()).unwrap();
        assert!(matches!(
            load_checkpoint(&vpath),
            Err(CheckpointError::Version { found: 9, .. })
        ));
    }

    #[test]
    fn small_board_checkpoint_drives_large_board() {
        // Variant independence: parameters trained (or initialized) against
        // one board size evaluate on the other without any shape error.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gardner.ckpt");
        let mut cp = Checkpoint::fresh(ModelConfig::new(8, 1), 21);
        cp.variant_history = vec!["gardner".into()];
        save_checkpoint(&cp, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let (out, action_count) = eval_start(Variant::Chess, &loaded.model);
        assert_eq!(action_count, 4672);
        assert!(out.value.abs() <= 1.0);
    }

    #[test]
    fn gradcheck_suite_passes_quickly() {
        // The full 100-seed sweep runs in the acceptance suite; this is a
        // smoke pass over a few seeds.
        let report = run_gradcheck(3, 1);
        for (name, _, err, tol) in &report.checks {
            assert!(err <= tol, "{name}: rel error {err} > {tol}");
        }
        assert!(report.passed());
    }
}
