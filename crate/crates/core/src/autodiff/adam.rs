use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hyperparameters of the Adam update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<R = f64> {
    pub learning_rate: R,
    pub beta1: R,
    pub beta2: R,
    pub epsilon: R,
}

impl<R: Real> AdamConfig<R> {
    pub fn with_lr(learning_rate: R) -> Self {
        Self {
            learning_rate,
            beta1: R::lit(0.9),
            beta2: R::lit(0.999),
            epsilon: R::lit(1e-8),
        }
    }
}

/// Moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<R = f64> {
    pub config: AdamConfig<R>,
    first_moment: Vec<R>,
    second_moment: Vec<R>,
    step_count: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(len: usize, config: AdamConfig<R>) -> Self {
        Self {
            config,
            first_moment: vec![R::zero(); len],
            second_moment: vec![R::zero(); len],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [R], grads: &[R]) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::shape("adam_step", &[params.len(), grads.len()], &[self.len()]));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: "adam gradient".into(),
                index,
            });
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = R::one() - beta1.powi(t);
        let bc2 = R::one() - beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = beta1 * self.first_moment[i] + (R::one() - beta1) * g;
            let v = beta2 * self.second_moment[i] + (R::one() - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<R: Real>(params: &mut [R], grads: &[R], state: &mut AdamState<R>) -> Result<()> {
    state.step(params, grads)
}
