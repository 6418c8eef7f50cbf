use super::{Gradients, ParamStore, TensorError};

/// ADAM optimizer state with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .ids()
            .map(|id| if params.is_trainable(id) { vec![0.0; params.get(id).numel()] } else { Vec::new() })
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.first_moment[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.second_moment[index]
    }

    /// Restore moments and the step counter, e.g. from a checkpoint.
    pub fn restore(&mut self, step_count: u64, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) -> Result<(), TensorError> {
        if first.len() != self.first_moment.len()
            || second.len() != self.second_moment.len()
            || first.iter().zip(&self.first_moment).any(|(a, b)| a.len() != b.len())
            || second.iter().zip(&self.second_moment).any(|(a, b)| a.len() != b.len())
        {
            return Err(TensorError::Shape("optimizer moments do not match parameters".into()));
        }
        self.step_count = step_count;
        self.first_moment = first;
        self.second_moment = second;
        Ok(())
    }

    /// One update over every trainable parameter that has a gradient. The
    /// whole step is rejected if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<(), TensorError> {
        for id in params.trainable_ids() {
            if let Some(g) = grads.get(id) {
                if g.shape() != params.get(id).shape() {
                    return Err(TensorError::Shape(format!("gradient shape mismatch for `{}`", params.name(id))));
                }
                if !g.is_finite() {
                    return Err(TensorError::NonFinite(format!("gradient of `{}`", params.name(id))));
                }
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = params.trainable_ids().collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let m = &mut self.first_moment[id.index()];
            let v = &mut self.second_moment[id.index()];
            let p = params.get_mut(id).data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
