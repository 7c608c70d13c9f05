use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, ArrayD, IxDyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::frame::{
    frames_from_game, load_window, save_window, update_window, FrameError, FrameWindow,
    ReplayFrame,
};
use crate::chess::Variant;
use crate::graph::{encode_position, MoveGraph, EDGE_FEATURE_DIM, NODE_FEATURE_DIM};
use crate::mcts::{play_game, PlayedGame, SearchError, SearchParams};
use crate::net::{
    forward, load_checkpoint, save_checkpoint, BatchGraph, BnMode, Checkpoint, CheckpointError,
    Evaluator, ModelConfig, ParamVars,
};
use crate::tensor::{AdamConfig, AdamState, Tape};

const LOG_EPS: f64 = 1e-9;

/// Everything one training run needs. `Default` holds the canonical loop
/// parameters; presets scale them per experiment.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub variant: Variant,
    pub iterations: u32,
    pub games_per_iter: u32,
    pub window_size: usize,
    pub epochs_per_iter: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_plies: u32,
    pub hidden: usize,
    pub blocks: usize,
    pub checkpoint_stride: u32,
    pub threads: usize,
    pub seed: u64,
    pub search: SearchParams,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            variant: Variant::Chess,
            iterations: 100,
            games_per_iter: 256,
            window_size: 1_000_000,
            epochs_per_iter: 1,
            batch_size: 2048,
            learning_rate: 0.001,
            max_plies: 512,
            hidden: 128,
            blocks: 5,
            checkpoint_stride: 5,
            threads: 0,
            seed: 0,
            search: SearchParams::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint was trained with hidden={ckpt_hidden}, blocks={ckpt_blocks}; config asks for hidden={cfg_hidden}, blocks={cfg_blocks}")]
    ConfigMismatch {
        ckpt_hidden: usize,
        ckpt_blocks: usize,
        cfg_hidden: usize,
        cfg_blocks: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("training window is empty")]
    EmptyWindow,
}

fn io_err(path: &Path, source: std::io::Error) -> TrainError {
    TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Per-frame AlphaZero loss terms: cross-entropy of the predicted policy
/// against the search policy, and squared value error. `predicted_policy`
/// is dense over the action space with zeros on masked actions.
pub fn frame_loss(
    policy_target: &[(u32, f32)],
    predicted_policy: &[f64],
    value_target: f64,
    predicted_value: f64,
) -> Result<(f64, f64), FrameError> {
    let mut ce = 0.0;
    for &(action, prob) in policy_target {
        if prob == 0.0 {
            continue;
        }
        let p = predicted_policy
            .get(action as usize)
            .copied()
            .unwrap_or(0.0);
        if p == 0.0 {
            return Err(FrameError::SupportMismatch { action, prob });
        }
        ce -= prob as f64 * (p + LOG_EPS).ln();
    }
    let verr = (value_target - predicted_value) * (value_target - predicted_value);
    Ok((ce, verr))
}

/// Deterministic per-game seed: master seed, iteration, game index.
fn game_seed(master: u64, iteration: u32, game: u32) -> u64 {
    let mut x = master
        ^ (iteration as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (game as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x
}

/// Plays `games_per_iter` self-play games in parallel (one task per game,
/// shared immutable parameters) and returns their frames and records.
pub fn generate_selfplay(
    cp: &Checkpoint,
    graph: &MoveGraph,
    cfg: &TrainConfig,
    iteration: u32,
) -> Result<(Vec<ReplayFrame>, Vec<PlayedGame>), TrainError> {
    let games: Vec<Result<PlayedGame, SearchError>> = {
        let run = |game_idx: u32| {
            let evaluator = Evaluator::new(&cp.model, graph);
            let seed = game_seed(cfg.seed, iteration, game_idx);
            play_game(&evaluator, &evaluator, &cfg.search, cfg.max_plies, seed)
        };
        if cfg.threads == 1 {
            (0..cfg.games_per_iter).map(run).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .expect("thread pool");
            pool.install(|| {
                use rayon::prelude::*;
                (0..cfg.games_per_iter)
                    .into_par_iter()
                    .map(run)
                    .collect()
            })
        }
    };
    let mut frames = Vec::new();
    let mut records = Vec::new();
    for game in games {
        let game = game?;
        frames.extend(frames_from_game(&game, iteration));
        records.push(game);
    }
    Ok((frames, records))
}

/// One encoded mini-batch: stacked features, offset connectivity, legal
/// edge gathering and targets.
struct Batch {
    bg: BatchGraph,
    node_features: ArrayD<f64>,
    edge_features: ArrayD<f64>,
    legal_edges: Arc<Vec<usize>>,
    legal_graph: Arc<Vec<usize>>,
    policy_targets: ArrayD<f64>,
    value_targets: ArrayD<f64>,
}

fn encode_batch(frames: &[&ReplayFrame], graph: &MoveGraph) -> Result<Batch, TrainError> {
    let b = frames.len();
    let n = graph.node_count();
    let e = graph.edge_count();
    let mut node_features = Array2::<f64>::zeros((b * n, NODE_FEATURE_DIM));
    let mut edge_features = Array2::<f64>::zeros((b * e, EDGE_FEATURE_DIM));
    let mut edge_src = Vec::with_capacity(b * e);
    let mut edge_dst = Vec::with_capacity(b * e);
    let mut node_graph = Vec::with_capacity(b * n);
    let mut legal_edges = Vec::new();
    let mut legal_graph = Vec::new();
    let mut policy_targets = Vec::new();
    let mut values = Vec::with_capacity(b);

    for (i, frame) in frames.iter().enumerate() {
        let pos = frame.position()?;
        let fs = encode_position(&pos, graph).expect("variant match");
        node_features
            .slice_mut(ndarray::s![i * n..(i + 1) * n, ..])
            .assign(&fs.node_features);
        edge_features
            .slice_mut(ndarray::s![i * e..(i + 1) * e, ..])
            .assign(&fs.edge_features);
        for edge in &graph.edges {
            edge_src.push(i * n + edge.source);
            edge_dst.push(i * n + edge.dest);
        }
        node_graph.extend(std::iter::repeat(i).take(n));

        // All legal edges participate in the softmax; the target probability
        // is the frame's sparse policy where present and zero elsewhere.
        let mut target_of = std::collections::HashMap::new();
        for &(action, prob) in &frame.policy {
            let edge = graph.edge_index_of_action(action as usize).ok_or(
                FrameError::SupportMismatch {
                    action,
                    prob,
                },
            )?;
            target_of.insert(edge, prob as f64);
        }
        let mut seen = 0;
        for (edge_idx, _) in graph.edges.iter().enumerate() {
            if fs.edge_features[[edge_idx, 0]] == 1.0 {
                legal_edges.push(i * e + edge_idx);
                legal_graph.push(i);
                let t = target_of.remove(&edge_idx).unwrap_or(0.0);
                policy_targets.push(t);
                seen += 1;
            }
        }
        debug_assert!(seen > 0, "frame has no legal actions");
        if let Some((&edge, &prob)) = target_of.iter().next() {
            // Leftover target mass on an edge the encoder says is illegal.
            let action = graph.edges[edge].action as u32;
            return Err(TrainError::Frame(FrameError::SupportMismatch {
                action,
                prob: prob as f32,
            }));
        }
        values.push(frame.value as f64);
    }

    Ok(Batch {
        bg: BatchGraph {
            node_count: b * n,
            graph_count: b,
            edge_src: Arc::new(edge_src),
            edge_dst: Arc::new(edge_dst),
            node_graph: Arc::new(node_graph),
        },
        node_features: node_features.into_dyn(),
        edge_features: edge_features.into_dyn(),
        legal_edges: Arc::new(legal_edges),
        legal_graph: Arc::new(legal_graph),
        policy_targets: ArrayD::from_shape_vec(IxDyn(&[policy_targets.len()]), policy_targets)
            .unwrap(),
        value_targets: ArrayD::from_shape_vec(IxDyn(&[values.len(), 1]), values).unwrap(),
    })
}

/// Runs forward + loss on one batch; returns (loss var, policy CE, value
/// error, tape, vars, bn stats).
fn batch_loss(
    cp: &Checkpoint,
    batch: &Batch,
    mode: BnMode,
) -> (Tape, ParamVars, crate::tensor::Var, f64, f64, Vec<(usize, crate::tensor::BatchStats)>) {
    let mut tape = Tape::new();
    let vars = ParamVars::insert(&mut tape, &cp.model, true);
    let out = forward(
        &mut tape,
        &cp.model,
        &vars,
        &batch.bg,
        batch.node_features.clone(),
        batch.edge_features.clone(),
        mode,
    );
    let b = batch.bg.graph_count;

    let wide = tape.reshape(out.edge_logits, &[batch.bg.edge_src.len(), 1]);
    let picked = tape.gather_rows(wide, batch.legal_edges.clone());
    let legal_logits = tape.reshape(picked, &[batch.legal_edges.len()]);
    let probs = tape.segment_softmax(legal_logits, batch.legal_graph.clone(), b);
    let safe = tape.add_scalar(probs, LOG_EPS);
    let logp = tape.log(safe);
    let targets = tape.leaf(batch.policy_targets.clone(), false);
    let weighted = tape.mul(logp, targets);
    let ce_sum = tape.sum(weighted);
    let neg_ce = tape.neg(ce_sum);
    let policy_loss = tape.scale(neg_ce, 1.0 / b as f64);

    let value_targets = tape.leaf(batch.value_targets.clone(), false);
    let diff = tape.sub(out.values, value_targets);
    let sq = tape.mul(diff, diff);
    let value_loss = tape.mean(sq);

    let total = tape.add(policy_loss, value_loss);

    let p = tape.value(policy_loss).iter().next().copied().unwrap();
    let v = tape.value(value_loss).iter().next().copied().unwrap();
    (tape, vars, total, p, v, out.bn_stats)
}

/// Loss metrics of one iteration.
#[derive(Debug, Clone)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub games: u32,
    pub plies: u64,
    pub wall_seconds: f64,
}

/// Shuffled mini-batch epochs over the window with Adam updates. The
/// window order is left untouched; shuffling happens on an index vector.
pub fn train_iteration(
    cp: &mut Checkpoint,
    adam: &mut AdamState,
    window: &FrameWindow,
    graph: &MoveGraph,
    cfg: &TrainConfig,
    iteration: u32,
) -> Result<(f64, f64), TrainError> {
    if window.is_empty() {
        return Err(TrainError::EmptyWindow);
    }
    let mut policy_sum = 0.0;
    let mut value_sum = 0.0;
    let mut batches = 0u32;
    for epoch in 0..cfg.epochs_per_iter {
        let mut order: Vec<usize> = (0..window.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ ((iteration as u64) << 32) ^ (0x5AFF_1E00 + epoch as u64),
        );
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let frames: Vec<&ReplayFrame> = chunk.iter().map(|&i| &window.frames[i]).collect();
            let batch = encode_batch(&frames, graph)?;
            let (tape, vars, total, p, v, bn_stats) = batch_loss(cp, &batch, BnMode::Train);
            let grads = tape.backward(total);
            let grad_list: Vec<Option<crate::tensor::Tensor>> = vars
                .vars
                .iter()
                .map(|&var| grads.get(var).cloned())
                .collect();
            adam.step(&mut cp.model.values, &grad_list);
            for (stat, stats) in bn_stats {
                cp.model.update_running_stat(stat, &stats.mean, &stats.var);
            }
            cp.model.snap_to_f32();
            policy_sum += p;
            value_sum += v;
            batches += 1;
        }
    }
    let b = batches.max(1) as f64;
    Ok((policy_sum / b, value_sum / b))
}

/// Paths used by a training run rooted at `out_dir`.
pub struct RunPaths {
    pub out_dir: PathBuf,
    pub checkpoints: PathBuf,
    pub window: PathBuf,
    pub metrics: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path) -> RunPaths {
        RunPaths {
            out_dir: out_dir.to_path_buf(),
            checkpoints: out_dir.join("checkpoints"),
            window: out_dir.join("window.frames"),
            metrics: out_dir.join("metrics.csv"),
        }
    }

    pub fn checkpoint(&self, iteration: u32) -> PathBuf {
        self.checkpoints.join(format!("iter{iteration:04}.ckpt"))
    }
}

/// The outer loop: self-play generation, window update, training epochs,
/// checkpoint persistence at the configured stride, metrics CSV. Resumes
/// from the newest checkpoint in `out_dir` when one exists.
pub fn run_training(
    cfg: &TrainConfig,
    initial: Option<Checkpoint>,
    out_dir: &Path,
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<Checkpoint, TrainError> {
    let paths = RunPaths::new(out_dir);
    std::fs::create_dir_all(&paths.checkpoints).map_err(|e| io_err(&paths.checkpoints, e))?;
    let graph = MoveGraph::build(cfg.variant);

    // Resume: newest saved iteration wins over the provided start point.
    let mut start_iteration = 0u32;
    let mut resumed: Option<Checkpoint> = None;
    for i in (0..=cfg.iterations).rev() {
        let path = paths.checkpoint(i);
        if path.exists() {
            resumed = Some(load_checkpoint(&path)?);
            start_iteration = i;
            break;
        }
    }

    let mut cp = match resumed {
        Some(cp) => cp,
        None => {
            let mut cp = match initial {
                Some(cp) => cp,
                None => Checkpoint::fresh(ModelConfig::new(cfg.hidden, cfg.blocks), cfg.seed),
            };
            if cp.model.config.hidden != cfg.hidden || cp.model.config.blocks != cfg.blocks {
                return Err(TrainError::ConfigMismatch {
                    ckpt_hidden: cp.model.config.hidden,
                    ckpt_blocks: cp.model.config.blocks,
                    cfg_hidden: cfg.hidden,
                    cfg_blocks: cfg.blocks,
                });
            }
            if cp.variant_history.last().map(|s| s.as_str()) != Some(cfg.variant.name()) {
                cp.variant_history.push(cfg.variant.name().to_string());
            }
            cp.iteration = 0;
            save_checkpoint(&cp, &paths.checkpoint(0))?;
            cp
        }
    };

    let mut window = if paths.window.exists() && start_iteration > 0 {
        load_window(&paths.window, &graph)?
    } else {
        FrameWindow::default()
    };

    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        &cp.model.values,
    );

    if !paths.metrics.exists() {
        std::fs::write(
            &paths.metrics,
            "iteration,policy_loss,value_loss,games,plies,wall_seconds\n",
        )
        .map_err(|e| io_err(&paths.metrics, e))?;
    }

    for iteration in start_iteration..cfg.iterations {
        let t0 = Instant::now();
        let (frames, games) = generate_selfplay(&cp, &graph, cfg, iteration)?;
        let plies: u64 = games.iter().map(|g| g.moves.len() as u64).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0xA11C_E000 + iteration as u64));
        window = update_window(frames, window, cfg.window_size, &mut rng)?;

        let (policy_loss, value_loss) =
            train_iteration(&mut cp, &mut adam, &window, &graph, cfg, iteration)?;

        cp.iteration = iteration + 1;
        let is_last = iteration + 1 == cfg.iterations;
        if is_last || (iteration + 1) % cfg.checkpoint_stride == 0 {
            save_checkpoint(&cp, &paths.checkpoint(iteration + 1))?;
        }
        save_window(&window, cfg.variant, &paths.window)?;

        let metrics = IterationMetrics {
            iteration: iteration + 1,
            policy_loss,
            value_loss,
            games: cfg.games_per_iter,
            plies,
            wall_seconds: t0.elapsed().as_secs_f64(),
        };
        let line = format!(
            "{},{:.6},{:.6},{},{},{:.3}\n",
            metrics.iteration,
            metrics.policy_loss,
            metrics.value_loss,
            metrics.games,
            metrics.plies,
            metrics.wall_seconds
        );
        append(&paths.metrics, &line)?;
        on_iteration(&metrics);
    }
    Ok(cp)
}

fn append(path: &Path, line: &str) -> Result<(), TrainError> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| io_err(path, e))
}
