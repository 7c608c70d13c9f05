//! Minimal dense-array engine with reverse-mode differentiation, covering
//! exactly the operations the network needs, plus the Adam optimizer.

mod adam;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use tape::{
    all_finite, segment_softmax_forward, BatchStats, Gradients, Tape, Tensor, Var, BN_EPS,
};

/// Central finite-difference gradient of a scalar-valued function of one
/// tensor, used as the independent oracle for the reverse-mode engine.
pub fn finite_difference<F>(x: &Tensor, step: f64, mut f: F) -> Tensor
where
    F: FnMut(&Tensor) -> f64,
{
    let mut grad = ndarray::ArrayD::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe.as_slice().unwrap()[idx];
        probe.as_slice_mut().unwrap()[idx] = orig + step;
        let up = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig - step;
        let down = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig;
        grad.as_slice_mut().unwrap()[idx] = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest relative gradient error, with an absolute floor so near-zero
/// entries do not blow up the ratio.
pub fn max_rel_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}
