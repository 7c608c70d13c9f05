//! Finite-difference verification suite: every differentiable primitive at
//! many random seeds, plus the full network on a small synthetic graph.
//! Used by the `gradcheck` subcommand and the acceptance tests.

use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{forward, BatchGraph, BnMode, ParamVars};
use super::params::{ModelConfig, ModelParams};
use crate::tensor::{finite_difference, max_rel_error, Tape, Tensor, Var};

pub const PRIMITIVE_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    /// (check name, seeds run, worst relative error, tolerance)
    pub checks: Vec<(String, usize, f64, f64)>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, _, err, tol)| err <= tol)
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

fn avoid_kinks(mut t: Tensor, margin: f64) -> Tensor {
    t.mapv_inplace(|v| {
        if v.abs() < margin {
            v + margin * 2.0 * v.signum().max(0.5)
        } else {
            v
        }
    });
    t
}

/// Checks d(loss)/d(input) for a scalar loss built by `f`, against central
/// finite differences, returning the relative error.
fn check<F>(input: &Tensor, f: F) -> f64
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let mut tape = Tape::new();
    let leaf = tape.leaf(input.clone(), true);
    let out = f(&mut tape, leaf);
    let loss = tape.sum(out);
    let grads = tape.backward(loss);
    let analytic = grads.get(leaf).expect("trainable leaf gradient");
    let numeric = finite_difference(input, FD_STEP, |probe| {
        let mut t = Tape::new();
        let leaf = t.leaf(probe.clone(), false);
        let out = f(&mut t, leaf);
        let l = t.sum(out);
        t.value(l).iter().next().copied().unwrap()
    });
    max_rel_error(analytic, &numeric)
}

/// Runs every primitive check over `seeds_per_check` random seeds and the
/// full-model check over a handful, collecting the worst errors.
pub fn run_gradcheck(seeds_per_check: usize, model_seeds: usize) -> GradcheckReport {
    let mut checks: Vec<(String, usize, f64, f64)> = Vec::new();
    let mut record = |name: &str, seeds: usize, err: f64, tol: f64| {
        checks.push((name.to_string(), seeds, err, tol));
    };

    type NamedCheck = (&'static str, fn(&mut ChaCha8Rng) -> f64);
    let primitive_checks: Vec<NamedCheck> = vec![
        ("matmul", |rng| {
            let a = rand_tensor(rng, &[3, 4]);
            let b = rand_tensor(rng, &[4, 2]);
            let e1 = check(&a, |t, x| {
                let bv = t.leaf(b.clone(), false);
                t.matmul(x, bv)
            });
            let e2 = check(&b, |t, x| {
                let av = t.leaf(a.clone(), false);
                t.matmul(av, x)
            });
            e1.max(e2)
        }),
        ("add", |rng| {
            let a = rand_tensor(rng, &[4, 3]);
            let b = rand_tensor(rng, &[4, 3]);
            check(&a, |t, x| {
                let bv = t.leaf(b.clone(), false);
                t.add(x, bv)
            })
        }),
        ("mul", |rng| {
            let a = rand_tensor(rng, &[4, 3]);
            let b = rand_tensor(rng, &[4, 3]);
            check(&a, |t, x| {
                let bv = t.leaf(b.clone(), false);
                t.mul(x, bv)
            })
        }),
        ("relu", |rng| {
            let a = avoid_kinks(rand_tensor(rng, &[5, 3]), 10.0 * FD_STEP);
            check(&a, |t, x| t.relu(x))
        }),
        ("leaky_relu", |rng| {
            let a = avoid_kinks(rand_tensor(rng, &[5, 3]), 10.0 * FD_STEP);
            check(&a, |t, x| t.leaky_relu(x, 0.2))
        }),
        ("tanh", |rng| {
            let a = rand_tensor(rng, &[5, 3]);
            check(&a, |t, x| t.tanh(x))
        }),
        ("exp", |rng| {
            let a = rand_tensor(rng, &[5, 3]);
            check(&a, |t, x| t.exp(x))
        }),
        ("log", |rng| {
            let a = rand_tensor(rng, &[5, 3]);
            check(&a, |t, x| {
                let e = t.exp(x);
                let pos = t.add_scalar(e, 0.3);
                t.log(pos)
            })
        }),
        ("segment_softmax", |rng| {
            let m = 8;
            let segments: Arc<Vec<usize>> = Arc::new((0..m).map(|_| rng.gen_range(0..3)).collect());
            let weights = rand_tensor(rng, &[m]);
            let x = rand_tensor(rng, &[m]);
            check(&x, move |t, x| {
                let w = t.leaf(weights.clone(), false);
                let p = t.segment_softmax(x, segments.clone(), 3);
                let eps = t.add_scalar(p, 1e-9);
                let lp = t.log(eps);
                t.mul(lp, w)
            })
        }),
        ("segment_sum", |rng| {
            let m = 7;
            let segments: Arc<Vec<usize>> = Arc::new((0..m).map(|_| rng.gen_range(0..3)).collect());
            let x = rand_tensor(rng, &[m, 3]);
            check(&x, move |t, x| {
                let y = t.segment_sum(x, segments.clone(), 3);
                t.mul(y, y)
            })
        }),
        ("gather", |rng| {
            let idx: Arc<Vec<usize>> = Arc::new((0..9).map(|_| rng.gen_range(0..5)).collect());
            let x = rand_tensor(rng, &[5, 3]);
            check(&x, move |t, x| {
                let y = t.gather_rows(x, idx.clone());
                t.mul(y, y)
            })
        }),
        ("scatter_add", |rng| {
            let idx: Arc<Vec<usize>> = Arc::new((0..6).map(|_| rng.gen_range(0..4)).collect());
            let x = rand_tensor(rng, &[6, 3]);
            check(&x, move |t, x| {
                let y = t.scatter_add_rows(x, idx.clone(), 4);
                t.mul(y, y)
            })
        }),
        ("batch_norm_train", |rng| {
            let x = rand_tensor(rng, &[6, 3]);
            let gamma = rand_tensor(rng, &[3]);
            let beta = rand_tensor(rng, &[3]);
            let e1 = check(&x, |t, x| {
                let g = t.leaf(gamma.clone(), false);
                let b = t.leaf(beta.clone(), false);
                let (y, _) = t.batch_norm_train(x, g, b);
                t.mul(y, y)
            });
            let e2 = check(&gamma, |t, g| {
                let x = t.leaf(x.clone(), false);
                let b = t.leaf(beta.clone(), false);
                let (y, _) = t.batch_norm_train(x, g, b);
                t.mul(y, y)
            });
            e1.max(e2)
        }),
        ("batch_norm_inference", |rng| {
            let x = rand_tensor(rng, &[6, 3]);
            let gamma = rand_tensor(rng, &[3]);
            let beta = rand_tensor(rng, &[3]);
            check(&x, |t, x| {
                let g = t.leaf(gamma.clone(), false);
                let b = t.leaf(beta.clone(), false);
                let y = t.batch_norm_inference(x, g, b, &[0.1, -0.2, 0.05], &[1.2, 0.8, 1.0]);
                t.mul(y, y)
            })
        }),
    ];

    for (name, f) in primitive_checks {
        let mut worst: f64 = 0.0;
        for seed in 0..seeds_per_check {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed as u64);
            worst = worst.max(f(&mut rng));
        }
        record(name, seeds_per_check, worst, PRIMITIVE_TOL);
    }

    let mut worst: f64 = 0.0;
    for seed in 0..model_seeds {
        worst = worst.max(full_model_error(seed as u64));
    }
    record("full_model", model_seeds, worst, MODEL_TOL);

    GradcheckReport { checks }
}

/// Loss of the full network on a 3-node toy graph, differentiated with
/// respect to every parameter tensor and compared to finite differences.
/// Returns the worst relative error over all parameters.
pub fn full_model_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed ^ seed);
    let config = ModelConfig::new(4, 1);
    let mut params = ModelParams::init(config, seed);
    // Off-identity batch-norm affine exercises every gradient path.
    for (name, value) in params.names.iter().zip(params.values.iter_mut()) {
        if name.ends_with(".gamma") {
            value.mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
        }
        if name.ends_with(".beta") || name.ends_with(".bias") {
            value.mapv_inplace(|_| rng.gen_range(-0.2..0.2));
        }
    }

    let bg = BatchGraph::single(3, vec![0, 0, 1, 2, 2], vec![1, 2, 2, 0, 1]);
    let node_features = rand_tensor(&mut rng, &[3, crate::graph::NODE_FEATURE_DIM]);
    let edge_features = rand_tensor(&mut rng, &[5, crate::graph::EDGE_FEATURE_DIM]);
    // Target: a fixed policy over edges {1, 3} and a value of +0.5.
    let legal: Arc<Vec<usize>> = Arc::new(vec![1, 3]);
    let target = ArrayD::from_shape_vec(IxDyn(&[2]), vec![0.7, 0.3]).unwrap();

    let loss_of = |params: &ModelParams, mode: BnMode| -> (Tape, ParamVars, Var) {
        let mut tape = Tape::new();
        let vars = ParamVars::insert(&mut tape, params, true);
        let out = forward(
            &mut tape,
            params,
            &vars,
            &bg,
            node_features.clone(),
            edge_features.clone(),
            mode,
        );
        let legal_logits = {
            let wide = tape.reshape(out.edge_logits, &[5, 1]);
            let picked = tape.gather_rows(wide, legal.clone());
            tape.reshape(picked, &[2])
        };
        let probs = tape.segment_softmax(legal_logits, Arc::new(vec![0, 0]), 1);
        let safe = tape.add_scalar(probs, 1e-9);
        let logp = tape.log(safe);
        let tv = tape.leaf(target.clone(), false);
        let weighted = tape.mul(logp, tv);
        let ce = tape.sum(weighted);
        let nce = tape.neg(ce);
        let half = tape.leaf(ArrayD::from_elem(IxDyn(&[1, 1]), 0.5), false);
        let diff = tape.sub(out.values, half);
        let sq = tape.mul(diff, diff);
        let verr = tape.sum(sq);
        let sum = tape.add(nce, verr);
        let loss = tape.sum(sum);
        (tape, vars, loss)
    };

    // Mixed modes: train exercises batch statistics, inference the running
    // ones.
    let mut worst: f64 = 0.0;
    for mode in [BnMode::Train, BnMode::Inference] {
        let (tape, vars, loss) = loss_of(&params, mode);
        let grads = tape.backward(loss);
        for i in 0..params.values.len() {
            let analytic = grads
                .get(vars.vars[i])
                .cloned()
                .unwrap_or_else(|| ArrayD::zeros(params.values[i].raw_dim()));
            let base = params.values[i].clone();
            let numeric = finite_difference(&base, FD_STEP, |probe| {
                let mut p = params.clone();
                p.values[i] = probe.clone();
                let (tape, _, loss) = loss_of(&p, mode);
                tape.value(loss).iter().next().copied().unwrap()
            });
            worst = worst.max(max_rel_error(&analytic, &numeric));
        }
    }
    worst
}
