//! Lookahead wrapped around plain gradient descent.
//!
//! Fast weights take `k` gradient steps; then the slow weights move a
//! fraction `alpha` of the way toward them and the fast weights restart
//! from the new slow weights.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Lookahead<T> {
    slow: Vec<T>,
    fast: Vec<T>,
    steps: usize,
    learning_rate: T,
    sync_period: usize,
    alpha: T,
}

impl<T: Scalar> Lookahead<T> {
    pub fn new(
        initial: Vec<T>,
        learning_rate: f64,
        sync_period: usize,
        alpha: f64,
    ) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return invalid(format!("learning rate {learning_rate} must be positive"));
        }
        if sync_period == 0 {
            return invalid("lookahead sync period must be at least 1");
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("lookahead alpha {alpha} must lie in (0, 1]"));
        }
        Ok(Self {
            slow: initial.clone(),
            fast: initial,
            steps: 0,
            learning_rate: T::lit(learning_rate),
            sync_period,
            alpha: T::lit(alpha),
        })
    }

    pub fn slow(&self) -> &[T] {
        &self.slow
    }

    /// Current point, where the next gradient must be evaluated.
    pub fn fast(&self) -> &[T] {
        &self.fast
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One inner step; synchronises every `sync_period` calls.
    pub fn step(&mut self, gradient: &[T]) -> Result<()> {
        if gradient.len() != self.fast.len() {
            return invalid(format!(
                "gradient has {} entries, parameters have {}",
                gradient.len(),
                self.fast.len()
            ));
        }
        for (f, &g) in self.fast.iter_mut().zip(gradient) {
            *f = *f - self.learning_rate * g;
        }
        self.steps += 1;
        if self.steps.is_multiple_of(self.sync_period) {
            for (s, f) in self.slow.iter_mut().zip(self.fast.iter_mut()) {
                *s = *s + self.alpha * (*f - *s);
                *f = *s;
            }
        }
        Ok(())
    }
}
