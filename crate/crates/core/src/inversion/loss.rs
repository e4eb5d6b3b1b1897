//! Saliency-weighted squared embedding distance.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::saliency::{project_saliency, SaliencyMap};

/// Spatial grid with a channel axis; data is laid out `[row][col][channel]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl TensorShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    /// A single spatial position holding `len` channels.
    pub fn vector(len: usize) -> Self {
        Self::new(1, 1, len)
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }
}

/// A real tensor over a [`TensorShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub shape: TensorShape,
    pub data: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(shape: TensorShape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return invalid(format!(
                "embedding has {} values, shape {:?} needs {}",
                data.len(),
                shape,
                shape.len()
            ));
        }
        Ok(Self { shape, data })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLoss<T> {
    pub loss: T,
    /// Gradient with respect to the generated embedding.
    pub gradient: Vec<T>,
}

/// `Σ ((e_gen − e_real) · S′)²` with `S′` broadcast over channels.
pub fn weighted_embedding_loss<T: Scalar>(
    e_gen: &Embedding<T>,
    e_real: &Embedding<T>,
    s_proj: &SaliencyMap<T>,
) -> Result<WeightedLoss<T>> {
    if e_gen.shape != e_real.shape {
        return invalid("generated and real embeddings differ in shape");
    }
    let shape = e_gen.shape;
    if (s_proj.height(), s_proj.width()) != (shape.height, shape.width) {
        return invalid(format!(
            "saliency grid {}x{} does not match embedding grid {}x{}",
            s_proj.height(),
            s_proj.width(),
            shape.height,
            shape.width
        ));
    }
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut gradient = Vec::with_capacity(shape.len());
    for (pos, &s) in s_proj.weights().iter().enumerate() {
        let base = pos * shape.channels;
        for c in base..base + shape.channels {
            let delta = e_gen.data[c] - e_real.data[c];
            let weighted = delta * s;
            loss = loss + weighted * weighted;
            gradient.push(two * weighted * s);
        }
    }
    Ok(WeightedLoss { loss, gradient })
}

/// Sum of [`weighted_embedding_loss`] over one projected saliency per head.
pub fn multihead_weighted_loss<T: Scalar>(
    e_gen: &Embedding<T>,
    e_real: &Embedding<T>,
    saliencies: &[SaliencyMap<T>],
) -> Result<WeightedLoss<T>> {
    if saliencies.is_empty() {
        return invalid("at least one saliency map is required");
    }
    let shape = e_gen.shape;
    let mut total = WeightedLoss {
        loss: T::zero(),
        gradient: vec![T::zero(); shape.len()],
    };
    for s in saliencies {
        let projected = project_saliency(s, shape.height, shape.width)?;
        let head = weighted_embedding_loss(e_gen, e_real, &projected)?;
        total.loss = total.loss + head.loss;
        for (g, h) in total.gradient.iter_mut().zip(head.gradient) {
            *g = *g + h;
        }
    }
    Ok(total)
}
