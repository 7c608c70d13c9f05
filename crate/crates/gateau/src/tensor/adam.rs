use ndarray::ArrayD;

use super::tape::Tensor;

/// Adam hyper-parameters. The defaults match the training configuration
/// used throughout: lr 0.001, beta1 0.9, beta2 0.999, epsilon 1e-8.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter tensor,
/// aligned by index with the parameter list they update.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> AdamState {
        AdamState {
            config,
            step: 0,
            first: params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect(),
            second: params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. A `None` gradient is treated as zero
    /// (the moments still decay).
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Option<Tensor>]) {
        assert_eq!(params.len(), self.first.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            if let Some(g) = &grads[i] {
                assert_eq!(
                    g.shape(),
                    params[i].shape(),
                    "gradient shape mismatch at parameter {i}"
                );
            }
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            match &grads[i] {
                Some(g) => {
                    m.zip_mut_with(g, |m, &g| *m = c.beta1 * *m + (1.0 - c.beta1) * g);
                    v.zip_mut_with(g, |v, &g| *v = c.beta2 * *v + (1.0 - c.beta2) * g * g);
                }
                None => {
                    m.mapv_inplace(|m| c.beta1 * m);
                    v.mapv_inplace(|v| c.beta2 * v);
                }
            }
            let p = &mut params[i];
            ndarray::Zip::from(p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    let m_hat = m / bc1;
                    let v_hat = v / bc2;
                    *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                });
        }
    }
}
