use std::sync::Arc;

use ndarray::{ArrayD, Axis, IxDyn};

/// Dense value type used throughout the engine. Double precision keeps the
/// finite-difference oracles honest; checkpoints store 32-bit payloads.
pub type Tensor = ArrayD<f64>;

pub fn all_finite(t: &Tensor) -> bool {
    t.iter().all(|v| v.is_finite())
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul,
    Add,
    AddRow,
    Sub,
    Neg,
    Mul,
    Scale(f64),
    AddScalar,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Exp,
    Log,
    ScaleRows,
    SegmentSoftmax {
        segments: Arc<Vec<usize>>,
    },
    SegmentSum {
        segments: Arc<Vec<usize>>,
    },
    GatherRows {
        indices: Arc<Vec<usize>>,
    },
    ScatterAddRows {
        indices: Arc<Vec<usize>>,
    },
    BatchNormTrain {
        /// Saved normalized activations and per-channel 1/std.
        x_hat: Tensor,
        inv_std: Vec<f64>,
    },
    BatchNormInference {
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Sum,
    Mean,
    Reshape,
}

struct Node {
    value: Tensor,
    op: Op,
    parents: [usize; 3],
    needs_grad: bool,
}

/// Statistics of one training-mode batch-norm application, used by the
/// caller to update running statistics.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;

/// Wengert-list tape: operations append nodes in topological order, and
/// [`Tape::backward`] walks them once in reverse. Single-threaded by
/// design; one tape per training step.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients for every node that required them, indexed by `Var`.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zero-shaped tensors are
    /// never stored, `None` means the node needs no gradient.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, parents: [usize; 3]) -> Var {
        let needs_grad = parents
            .iter()
            .any(|&p| p != NO_PARENT && self.nodes[p].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            parents,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Inserts an input tensor. `trainable` marks it as a parameter whose
    /// gradient will be produced by `backward`.
    pub fn leaf(&mut self, value: Tensor, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            parents: [NO_PARENT; 3],
            needs_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        assert_eq!(av.ndim(), 2, "matmul lhs must be 2-d");
        assert_eq!(bv.ndim(), 2, "matmul rhs must be 2-d");
        assert_eq!(
            av.shape()[1],
            bv.shape()[0],
            "matmul inner dimensions differ: {:?} x {:?}",
            av.shape(),
            bv.shape()
        );
        let a2 = av.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b2 = bv.view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let out = a2.dot(&b2).into_dyn();
        self.push(out, Op::Matmul, [a.0, b.0, NO_PARENT])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "add shapes differ"
        );
        let out = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(out, Op::Add, [a.0, b.0, NO_PARENT])
    }

    /// Adds a length-n row vector to every row of an [m, n] matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let rv = &self.nodes[row.0].value;
        assert_eq!(av.ndim(), 2, "add_row lhs must be 2-d");
        assert_eq!(rv.ndim(), 1, "add_row rhs must be 1-d");
        assert_eq!(av.shape()[1], rv.shape()[0], "add_row widths differ");
        let n = av.shape()[1];
        let mut out = av.clone();
        let bias = rv.as_slice().expect("contiguous");
        for r in out.as_slice_mut().expect("contiguous").chunks_exact_mut(n) {
            for (o, &b) in r.iter_mut().zip(bias) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow, [a.0, row.0, NO_PARENT])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "sub shapes differ"
        );
        let out = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(out, Op::Sub, [a.0, b.0, NO_PARENT])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.mapv(|v| -v);
        self.push(out, Op::Neg, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(
            self.nodes[a.0].value.shape(),
            self.nodes[b.0].value.shape(),
            "mul shapes differ"
        );
        let out = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(out, Op::Mul, [a.0, b.0, NO_PARENT])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.nodes[a.0].value.mapv(|v| v * c);
        self.push(out, Op::Scale(c), [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.nodes[a.0].value.mapv(|v| v + c);
        self.push(out, Op::AddScalar, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.mapv(|v| v.max(0.0));
        self.push(out, Op::Relu, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.nodes[a.0].value.mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(slope), [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(out, Op::Tanh, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.mapv(f64::exp);
        self.push(out, Op::Exp, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.mapv(f64::ln);
        self.push(out, Op::Log, [a.0, NO_PARENT, NO_PARENT])
    }

    /// Scales row i of an [m, n] matrix by s[i].
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let sv = &self.nodes[s.0].value;
        assert_eq!(av.ndim(), 2, "scale_rows lhs must be 2-d");
        assert_eq!(sv.ndim(), 1, "scale_rows scales must be 1-d");
        assert_eq!(av.shape()[0], sv.shape()[0], "scale_rows row counts differ");
        let n = av.shape()[1];
        let mut out = av.clone();
        let scales = sv.as_slice().expect("contiguous");
        for (row, &c) in out
            .as_slice_mut()
            .expect("contiguous")
            .chunks_exact_mut(n)
            .zip(scales)
        {
            for v in row {
                *v *= c;
            }
        }
        self.push(out, Op::ScaleRows, [a.0, s.0, NO_PARENT])
    }

    /// Softmax over a 1-d tensor, normalized independently within each
    /// segment. Segment ids may appear in any order but must be in range.
    pub fn segment_softmax(&mut self, a: Var, segments: Arc<Vec<usize>>, num_segments: usize) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.ndim(), 1, "segment_softmax input must be 1-d");
        assert_eq!(av.shape()[0], segments.len(), "segment id count mismatch");
        assert!(
            segments.iter().all(|&s| s < num_segments),
            "segment id out of range"
        );
        let x = av.as_slice().expect("contiguous");
        let out = segment_softmax_forward(x, &segments, num_segments);
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[x.len()]), out).unwrap(),
            Op::SegmentSoftmax { segments },
            [a.0, NO_PARENT, NO_PARENT],
        )
    }

    /// Sums the rows of an [m, n] matrix into `num_segments` buckets.
    pub fn segment_sum(&mut self, a: Var, segments: Arc<Vec<usize>>, num_segments: usize) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.ndim(), 2, "segment_sum input must be 2-d");
        assert_eq!(av.shape()[0], segments.len(), "segment id count mismatch");
        assert!(
            segments.iter().all(|&s| s < num_segments),
            "segment id out of range"
        );
        let n = av.shape()[1];
        let x = av.as_slice().expect("contiguous");
        let mut out = vec![0.0; num_segments * n];
        for (row, &seg) in segments.iter().enumerate().map(|(r, s)| (r, s)) {
            let src = &x[row * n..(row + 1) * n];
            let dst = &mut out[seg * n..(seg + 1) * n];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[num_segments, n]), out).unwrap();
        self.push(out, Op::SegmentSum { segments }, [a.0, NO_PARENT, NO_PARENT])
    }

    /// Selects rows of an [N, n] matrix; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: Arc<Vec<usize>>) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.ndim(), 2, "gather_rows input must be 2-d");
        let rows = av.shape()[0];
        assert!(indices.iter().all(|&i| i < rows), "gather index out of range");
        let n = av.shape()[1];
        let x = av.as_slice().expect("contiguous");
        let mut out = vec![0.0; indices.len() * n];
        for (r, &i) in indices.iter().enumerate() {
            out[r * n..(r + 1) * n].copy_from_slice(&x[i * n..(i + 1) * n]);
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[indices.len(), n]), out).unwrap();
        self.push(out, Op::GatherRows { indices }, [a.0, NO_PARENT, NO_PARENT])
    }

    /// Adds row e of the input into row indices[e] of an output with
    /// `out_rows` rows (the adjoint of gather_rows).
    pub fn scatter_add_rows(&mut self, a: Var, indices: Arc<Vec<usize>>, out_rows: usize) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.ndim(), 2, "scatter_add_rows input must be 2-d");
        assert_eq!(av.shape()[0], indices.len(), "index count mismatch");
        assert!(indices.iter().all(|&i| i < out_rows), "scatter index out of range");
        let n = av.shape()[1];
        let x = av.as_slice().expect("contiguous");
        let mut out = vec![0.0; out_rows * n];
        for (r, &i) in indices.iter().enumerate() {
            let src = &x[r * n..(r + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
        let out = ArrayD::from_shape_vec(IxDyn(&[out_rows, n]), out).unwrap();
        self.push(out, Op::ScatterAddRows { indices }, [a.0, NO_PARENT, NO_PARENT])
    }

    /// Training-mode batch normalization over instance rows, per channel.
    /// Returns the batch statistics so the caller can maintain running
    /// estimates for inference.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var) -> (Var, BatchStats) {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.ndim(), 2, "batch_norm input must be 2-d");
        let (m, n) = (xv.shape()[0], xv.shape()[1]);
        assert_eq!(self.nodes[gamma.0].value.shape(), &[n], "gamma width");
        assert_eq!(self.nodes[beta.0].value.shape(), &[n], "beta width");
        assert!(m >= 1, "batch_norm needs at least one row");

        let xs = xv.as_slice().expect("contiguous");
        let mut mean = vec![0.0; n];
        let mut var = vec![0.0; n];
        for row in xs.chunks_exact(n) {
            for (j, &v) in row.iter().enumerate() {
                mean[j] += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= m as f64;
        }
        for row in xs.chunks_exact(n) {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        for v in var.iter_mut() {
            *v /= m as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();

        let mut x_hat = xv.clone();
        for row in x_hat.as_slice_mut().expect("contiguous").chunks_exact_mut(n) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let gamma_v = self.nodes[gamma.0].value.clone();
        let beta_v = self.nodes[beta.0].value.clone();
        let gs = gamma_v.as_slice().expect("contiguous");
        let bs = beta_v.as_slice().expect("contiguous");
        let mut out = x_hat.clone();
        for row in out.as_slice_mut().expect("contiguous").chunks_exact_mut(n) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * gs[j] + bs[j];
            }
        }
        let stats = BatchStats {
            mean,
            var: var.clone(),
        };
        let var_node = self.push(
            out,
            Op::BatchNormTrain { x_hat, inv_std },
            [x.0, gamma.0, beta.0],
        );
        (var_node, stats)
    }

    /// Inference-mode batch normalization with fixed running statistics.
    pub fn batch_norm_inference(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f64],
        running_var: &[f64],
    ) -> Var {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.ndim(), 2, "batch_norm input must be 2-d");
        let n = xv.shape()[1];
        assert_eq!(running_mean.len(), n, "running mean width");
        assert_eq!(running_var.len(), n, "running var width");
        let inv_std: Vec<f64> = running_var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma_v = self.nodes[gamma.0].value.clone();
        let beta_v = self.nodes[beta.0].value.clone();
        let gs = gamma_v.as_slice().expect("contiguous");
        let bs = beta_v.as_slice().expect("contiguous");
        let mut out = xv.clone();
        for row in out.as_slice_mut().expect("contiguous").chunks_exact_mut(n) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - running_mean[j]) * inv_std[j] * gs[j] + bs[j];
            }
        }
        self.push(
            out,
            Op::BatchNormInference {
                mean: running_mean.to_vec(),
                inv_std,
            },
            [x.0, gamma.0, beta.0],
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = ArrayD::from_elem(IxDyn(&[]), self.nodes[a.0].value.sum());
        self.push(out, Op::Sum, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let out = ArrayD::from_elem(IxDyn(&[]), v.sum() / v.len() as f64);
        self.push(out, Op::Mean, [a.0, NO_PARENT, NO_PARENT])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = &self.nodes[a.0].value;
        assert_eq!(
            v.len(),
            shape.iter().product::<usize>(),
            "reshape element count mismatch"
        );
        let out = v.clone().into_shape_with_order(IxDyn(shape)).unwrap();
        self.push(out, Op::Reshape, [a.0, NO_PARENT, NO_PARENT])
    }

    /// Reverse pass from a scalar loss. Returns one gradient per node that
    /// transitively feeds a trainable leaf.
    pub fn backward(&self, loss: Var) -> Gradients {
        let lv = &self.nodes[loss.0].value;
        assert!(
            lv.len() == 1,
            "backward requires a scalar loss, got shape {:?}",
            lv.shape()
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(ArrayD::from_elem(lv.raw_dim(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(grad) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let send = |grads: &mut Vec<Option<Tensor>>, parent: usize, g: Tensor| {
                if parent == NO_PARENT || !self.nodes[parent].needs_grad {
                    return;
                }
                match &mut grads[parent] {
                    Some(acc) => *acc += &g,
                    slot @ None => *slot = Some(g),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(grad);
                    continue;
                }
                Op::Matmul => {
                    let a = &self.nodes[node.parents[0]].value;
                    let b = &self.nodes[node.parents[1]].value;
                    let g2 = grad.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    let a2 = a.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    let b2 = b.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                    send(&mut grads, node.parents[0], g2.dot(&b2.t()).into_dyn());
                    send(&mut grads, node.parents[1], a2.t().dot(&g2).into_dyn());
                }
                Op::Add => {
                    send(&mut grads, node.parents[0], grad.clone());
                    send(&mut grads, node.parents[1], grad);
                }
                Op::AddRow => {
                    let col_sum = grad.sum_axis(Axis(0));
                    send(&mut grads, node.parents[0], grad);
                    send(&mut grads, node.parents[1], col_sum.into_dyn());
                }
                Op::Sub => {
                    send(&mut grads, node.parents[0], grad.clone());
                    send(&mut grads, node.parents[1], grad.mapv(|v| -v));
                }
                Op::Neg => send(&mut grads, node.parents[0], grad.mapv(|v| -v)),
                Op::Mul => {
                    let a = &self.nodes[node.parents[0]].value;
                    let b = &self.nodes[node.parents[1]].value;
                    send(&mut grads, node.parents[0], &grad * b);
                    send(&mut grads, node.parents[1], &grad * a);
                }
                Op::Scale(c) => send(&mut grads, node.parents[0], grad.mapv(|v| v * c)),
                Op::AddScalar => send(&mut grads, node.parents[0], grad),
                Op::Relu => {
                    let x = &self.nodes[node.parents[0]].value;
                    let g = ndarray::Zip::from(&grad)
                        .and(x)
                        .map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 });
                    send(&mut grads, node.parents[0], g);
                }
                Op::LeakyRelu(slope) => {
                    let x = &self.nodes[node.parents[0]].value;
                    let s = *slope;
                    let g = ndarray::Zip::from(&grad)
                        .and(x)
                        .map_collect(|&g, &x| if x > 0.0 { g } else { s * g });
                    send(&mut grads, node.parents[0], g);
                }
                Op::Tanh => {
                    let y = &node.value;
                    send(&mut grads, node.parents[0], &grad * &y.mapv(|y| 1.0 - y * y));
                }
                Op::Exp => send(&mut grads, node.parents[0], &grad * &node.value),
                Op::Log => {
                    let x = &self.nodes[node.parents[0]].value;
                    send(&mut grads, node.parents[0], &grad / x);
                }
                Op::ScaleRows => {
                    let a = &self.nodes[node.parents[0]].value;
                    let s = &self.nodes[node.parents[1]].value;
                    let n = a.shape()[1];
                    let scales = s.as_slice().unwrap();
                    let mut ga = grad.clone();
                    for (row, &c) in ga
                        .as_slice_mut()
                        .unwrap()
                        .chunks_exact_mut(n)
                        .zip(scales)
                    {
                        for v in row {
                            *v *= c;
                        }
                    }
                    let gsl = grad.as_slice().unwrap();
                    let asl = a.as_slice().unwrap();
                    let gs: Vec<f64> = gsl
                        .chunks_exact(n)
                        .zip(asl.chunks_exact(n))
                        .map(|(g, a)| g.iter().zip(a).map(|(&g, &a)| g * a).sum())
                        .collect();
                    send(&mut grads, node.parents[0], ga);
                    send(
                        &mut grads,
                        node.parents[1],
                        ArrayD::from_shape_vec(IxDyn(&[gs.len()]), gs).unwrap(),
                    );
                }
                Op::SegmentSoftmax { segments } => {
                    let y = node.value.as_slice().unwrap();
                    let dy = grad.as_slice().unwrap();
                    let num_segments = segments.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; num_segments];
                    for ((&yi, &gi), &seg) in y.iter().zip(dy).zip(segments.iter()) {
                        dot[seg] += yi * gi;
                    }
                    let dx: Vec<f64> = y
                        .iter()
                        .zip(dy)
                        .zip(segments.iter())
                        .map(|((&yi, &gi), &seg)| yi * (gi - dot[seg]))
                        .collect();
                    send(
                        &mut grads,
                        node.parents[0],
                        ArrayD::from_shape_vec(IxDyn(&[dx.len()]), dx).unwrap(),
                    );
                }
                Op::SegmentSum { segments } => {
                    let n = node.value.shape()[1];
                    let gsl = grad.as_slice().unwrap();
                    let mut dx = vec![0.0; segments.len() * n];
                    for (r, &seg) in segments.iter().enumerate() {
                        dx[r * n..(r + 1) * n].copy_from_slice(&gsl[seg * n..(seg + 1) * n]);
                    }
                    send(
                        &mut grads,
                        node.parents[0],
                        ArrayD::from_shape_vec(IxDyn(&[segments.len(), n]), dx).unwrap(),
                    );
                }
                Op::GatherRows { indices } => {
                    let rows = self.nodes[node.parents[0]].value.shape()[0];
                    let n = node.value.shape()[1];
                    let gsl = grad.as_slice().unwrap();
                    let mut dx = vec![0.0; rows * n];
                    for (r, &i) in indices.iter().enumerate() {
                        let src = &gsl[r * n..(r + 1) * n];
                        let dst = &mut dx[i * n..(i + 1) * n];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += v;
                        }
                    }
                    send(
                        &mut grads,
                        node.parents[0],
                        ArrayD::from_shape_vec(IxDyn(&[rows, n]), dx).unwrap(),
                    );
                }
                Op::ScatterAddRows { indices } => {
                    let n = node.value.shape()[1];
                    let gsl = grad.as_slice().unwrap();
                    let mut dx = vec![0.0; indices.len() * n];
                    for (r, &i) in indices.iter().enumerate() {
                        dx[r * n..(r + 1) * n].copy_from_slice(&gsl[i * n..(i + 1) * n]);
                    }
                    send(
                        &mut grads,
                        node.parents[0],
                        ArrayD::from_shape_vec(IxDyn(&[indices.len(), n]), dx).unwrap(),
                    );
                }
                Op::BatchNormTrain { x_hat, inv_std } => {
                    let gamma = &self.nodes[node.parents[1]].value;
                    let gam = gamma.as_slice().unwrap();
                    let m = x_hat.shape()[0] as f64;
                    let n = x_hat.shape()[1];
                    let gsl = grad.as_slice().unwrap();
                    let xsl = x_hat.as_slice().unwrap();
                    let mut d_gamma = vec![0.0; n];
                    let mut d_beta = vec![0.0; n];
                    let mut sum_dxhat = vec![0.0; n];
                    let mut sum_dxhat_xhat = vec![0.0; n];
                    for (grow, xrow) in gsl.chunks_exact(n).zip(xsl.chunks_exact(n)) {
                        for j in 0..n {
                            d_gamma[j] += grow[j] * xrow[j];
                            d_beta[j] += grow[j];
                            let dxh = grow[j] * gam[j];
                            sum_dxhat[j] += dxh;
                            sum_dxhat_xhat[j] += dxh * xrow[j];
                        }
                    }
                    let mut dx = grad.clone();
                    for (drow, xrow) in dx
                        .as_slice_mut()
                        .unwrap()
                        .chunks_exact_mut(n)
                        .zip(xsl.chunks_exact(n))
                    {
                        for j in 0..n {
                            let dxh = drow[j] * gam[j];
                            drow[j] = inv_std[j] / m
                                * (m * dxh - sum_dxhat[j] - xrow[j] * sum_dxhat_xhat[j]);
                        }
                    }
                    send(&mut grads, node.parents[0], dx);
                    send(
                        &mut grads,
                        node.parents[1],
                        ArrayD::from_shape_vec(IxDyn(&[n]), d_gamma).unwrap(),
                    );
                    send(
                        &mut grads,
                        node.parents[2],
                        ArrayD::from_shape_vec(IxDyn(&[n]), d_beta).unwrap(),
                    );
                }
                Op::BatchNormInference { mean, inv_std } => {
                    let x = &self.nodes[node.parents[0]].value;
                    let gamma = &self.nodes[node.parents[1]].value;
                    let gam = gamma.as_slice().unwrap();
                    let n = x.shape()[1];
                    let gsl = grad.as_slice().unwrap();
                    let xsl = x.as_slice().unwrap();
                    let mut d_gamma = vec![0.0; n];
                    let mut d_beta = vec![0.0; n];
                    for (grow, xrow) in gsl.chunks_exact(n).zip(xsl.chunks_exact(n)) {
                        for j in 0..n {
                            let xhat = (xrow[j] - mean[j]) * inv_std[j];
                            d_gamma[j] += grow[j] * xhat;
                            d_beta[j] += grow[j];
                        }
                    }
                    let mut dx = grad.clone();
                    for drow in dx.as_slice_mut().unwrap().chunks_exact_mut(n) {
                        for j in 0..n {
                            drow[j] *= gam[j] * inv_std[j];
                        }
                    }
                    send(&mut grads, node.parents[0], dx);
                    send(
                        &mut grads,
                        node.parents[1],
                        ArrayD::from_shape_vec(IxDyn(&[n]), d_gamma).unwrap(),
                    );
                    send(
                        &mut grads,
                        node.parents[2],
                        ArrayD::from_shape_vec(IxDyn(&[n]), d_beta).unwrap(),
                    );
                }
                Op::Sum => {
                    let shape = self.nodes[node.parents[0]].value.raw_dim();
                    let g = grad.iter().next().copied().unwrap();
                    send(&mut grads, node.parents[0], ArrayD::from_elem(shape, g));
                }
                Op::Mean => {
                    let parent = &self.nodes[node.parents[0]].value;
                    let g = grad.iter().next().copied().unwrap() / parent.len() as f64;
                    send(
                        &mut grads,
                        node.parents[0],
                        ArrayD::from_elem(parent.raw_dim(), g),
                    );
                }
                Op::Reshape => {
                    let shape = self.nodes[node.parents[0]].value.raw_dim();
                    send(
                        &mut grads,
                        node.parents[0],
                        grad.into_shape_with_order(shape).unwrap(),
                    );
                }
            }
        }
        Gradients { grads }
    }
}

/// Numerically stable per-segment softmax on a slice.
pub fn segment_softmax_forward(x: &[f64], segments: &[usize], num_segments: usize) -> Vec<f64> {
    let mut max = vec![f64::NEG_INFINITY; num_segments];
    for (&v, &s) in x.iter().zip(segments) {
        if v > max[s] {
            max[s] = v;
        }
    }
    let mut out: Vec<f64> = x
        .iter()
        .zip(segments)
        .map(|(&v, &s)| (v - max[s]).exp())
        .collect();
    let mut denom = vec![0.0; num_segments];
    for (&e, &s) in out.iter().zip(segments) {
        denom[s] += e;
    }
    for (e, &s) in out.iter_mut().zip(segments) {
        *e /= denom[s];
    }
    out
}
