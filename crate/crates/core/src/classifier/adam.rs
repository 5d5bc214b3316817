/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Advances the step counter and applies one update.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) {
        self.t += 1;
        let t = self.t;
        adam_step(params, grad, self, t, cfg);
    }
}

/// One bias-corrected Adam update at step `t ≥ 1`:
/// `W ← W − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, t: u64, cfg: &AdamConfig) {
    assert!(t >= 1, "adam step counter starts at 1");
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    let t = t.min(i32::MAX as u64) as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((w, &g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}
