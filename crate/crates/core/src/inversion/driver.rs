//! Gradient-descent inversion of a generator through an embedding.

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

use super::embedding::EmbeddingFunction;
use super::lookahead::Lookahead;
use super::loss::{multihead_weighted_loss, Embedding};
use super::saliency::SaliencyMap;
use super::sampling::truncated_normal;

/// Which space the weighted distance is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossSpace {
    /// `Σ_i ‖(D(G(z)) − D(x)) · S′_i‖²`.
    #[default]
    Discriminator,
    /// `Σ_i ‖(G(z) − x) · S″_i‖²`; kept for comparison, it inverts poorly.
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    /// In standard deviations.
    pub truncation_threshold: f64,
    pub lookahead_sync_period: usize,
    pub lookahead_alpha: f64,
    pub seed: u64,
    /// Stop once the loss is at or below this value.
    pub tolerance: f64,
    /// Keep only these heads' saliency maps; `None` keeps all.
    pub head_subset: Option<Vec<usize>>,
    pub loss_space: LossSpace,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_steps: 1500,
            truncation_threshold: 2.0,
            lookahead_sync_period: 5,
            lookahead_alpha: 0.5,
            seed: 0,
            tolerance: 0.0,
            head_subset: None,
            loss_space: LossSpace::Discriminator,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning rate must be positive and finite");
        }
        if self.truncation_threshold.is_nan() || self.truncation_threshold <= 0.0 {
            return invalid("truncation threshold must be positive");
        }
        if self.lookahead_sync_period == 0 {
            return invalid("lookahead sync period must be at least 1");
        }
        if !(self.lookahead_alpha > 0.0 && self.lookahead_alpha <= 1.0) {
            return invalid("lookahead alpha must lie in (0, 1]");
        }
        if self.tolerance.is_nan() {
            return invalid("tolerance must not be NaN");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult<T> {
    /// Lowest-loss latent seen during the run.
    pub latent: Vec<T>,
    pub initial_latent: Vec<T>,
    /// Loss at every evaluated point; entry 0 is the initial latent.
    pub loss_trace: Vec<T>,
    /// Running minimum of `loss_trace`.
    pub best_loss_trace: Vec<T>,
    /// Optimizer steps actually taken.
    pub steps: usize,
}

impl<T: Scalar> InversionResult<T> {
    pub fn best_loss(&self) -> T {
        *self
            .best_loss_trace
            .last()
            .expect("trace holds the initial loss")
    }
}

/// Everything needed to search for a latent that reproduces `target`.
pub struct InversionProblem<'a, T: Scalar> {
    pub generator: &'a dyn EmbeddingFunction<T>,
    pub discriminator_embed: &'a dyn EmbeddingFunction<T>,
    pub target: Vec<T>,
    pub saliencies: Vec<SaliencyMap<T>>,
    pub config: InversionConfig,
}

struct Objective<'a, T: Scalar> {
    generator: &'a dyn EmbeddingFunction<T>,
    discriminator: &'a dyn EmbeddingFunction<T>,
    reference: Embedding<T>,
    saliencies: Vec<SaliencyMap<T>>,
    space: LossSpace,
}

impl<T: Scalar> Objective<'_, T> {
    fn evaluate(&self, z: &[T]) -> Result<(T, Vec<T>)> {
        let generated = self.generator.forward(z)?;
        match self.space {
            LossSpace::Discriminator => {
                let embedded = Embedding::new(
                    self.discriminator.output_shape(),
                    self.discriminator.forward(&generated)?,
                )?;
                let l = multihead_weighted_loss(&embedded, &self.reference, &self.saliencies)?;
                let d_generated = self.discriminator.vjp(&generated, &l.gradient)?;
                Ok((l.loss, self.generator.vjp(z, &d_generated)?))
            }
            LossSpace::Generator => {
                let produced = Embedding::new(self.generator.output_shape(), generated)?;
                let l = multihead_weighted_loss(&produced, &self.reference, &self.saliencies)?;
                Ok((l.loss, self.generator.vjp(z, &l.gradient)?))
            }
        }
    }
}

impl<'a, T: Scalar> InversionProblem<'a, T> {
    fn objective(&self) -> Result<Objective<'a, T>> {
        let g_out = self.generator.output_shape();
        if g_out.len() != self.discriminator_embed.input_len() {
            return invalid(format!(
                "generator emits {} values, discriminator reads {}",
                g_out.len(),
                self.discriminator_embed.input_len()
            ));
        }
        if self.target.len() != g_out.len() {
            return invalid(format!(
                "target has {} values, generator emits {}",
                self.target.len(),
                g_out.len()
            ));
        }
        if self.saliencies.is_empty() {
            return invalid("at least one saliency map is required");
        }
        let saliencies = match &self.config.head_subset {
            None => self.saliencies.clone(),
            Some(heads) => {
                if heads.is_empty() {
                    return invalid("head subset is empty");
                }
                heads
                    .iter()
                    .map(|&h| {
                        self.saliencies.get(h).cloned().ok_or_else(|| {
                            Error::InvalidArgument(format!("no saliency map for head {h}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let reference = match self.config.loss_space {
            LossSpace::Discriminator => Embedding::new(
                self.discriminator_embed.output_shape(),
                self.discriminator_embed.forward(&self.target)?,
            )?,
            LossSpace::Generator => Embedding::new(g_out, self.target.clone())?,
        };
        Ok(Objective {
            generator: self.generator,
            discriminator: self.discriminator_embed,
            reference,
            saliencies,
            space: self.config.loss_space,
        })
    }

    pub fn solve(&self) -> Result<InversionResult<T>> {
        self.config.validate()?;
        let objective = self.objective()?;
        let initial: Vec<T> = truncated_normal(
            self.generator.input_len(),
            self.config.truncation_threshold,
            self.config.seed,
        )?
        .into_iter()
        .map(T::lit)
        .collect();

        let mut optimizer = Lookahead::new(
            initial.clone(),
            self.config.learning_rate,
            self.config.lookahead_sync_period,
            self.config.lookahead_alpha,
        )?;
        let tolerance = T::lit(self.config.tolerance);

        let (mut loss, mut gradient) = objective.evaluate(&initial)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step: 0 });
        }
        let mut best = loss;
        let mut latent = initial.clone();
        let mut loss_trace = vec![loss];
        let mut best_loss_trace = vec![best];
        let mut steps = 0;
        while steps < self.config.max_steps && best > tolerance {
            optimizer.step(&gradient)?;
            steps += 1;
            (loss, gradient) = objective.evaluate(optimizer.fast())?;
            if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { step: steps });
            }
            if loss < best {
                best = loss;
                latent.copy_from_slice(optimizer.fast());
            }
            loss_trace.push(loss);
            best_loss_trace.push(best);
        }
        Ok(InversionResult {
            latent,
            initial_latent: initial,
            loss_trace,
            best_loss_trace,
            steps,
        })
    }
}

/// Runs [`InversionProblem::solve`] on the given pieces.
pub fn invert<T: Scalar>(
    generator: &dyn EmbeddingFunction<T>,
    discriminator_embed: &dyn EmbeddingFunction<T>,
    target: &[T],
    saliencies: &[SaliencyMap<T>],
    config: &InversionConfig,
) -> Result<InversionResult<T>> {
    InversionProblem {
        generator,
        discriminator_embed,
        target: target.to_vec(),
        saliencies: saliencies.to_vec(),
        config: config.clone(),
    }
    .solve()
}
