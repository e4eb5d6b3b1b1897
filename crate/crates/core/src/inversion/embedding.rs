//! Differentiable maps used as generator and discriminator embeddings.

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::loss::TensorShape;

/// A deterministic map from a flat input to a tensor of fixed shape, with a
/// vector-Jacobian product for back-propagating a scalar loss.
pub trait EmbeddingFunction<T: Scalar> {
    fn input_len(&self) -> usize;

    fn output_shape(&self) -> TensorShape;

    fn forward(&self, input: &[T]) -> Result<Vec<T>>;

    /// `Jᵀ · grad_output`, with `J` the Jacobian at `input`.
    fn vjp(&self, input: &[T], grad_output: &[T]) -> Result<Vec<T>>;
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return invalid(format!("{what} has {got} entries, expected {want}"));
    }
    Ok(())
}

/// Reinterprets the input as a tensor of the given shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    pub shape: TensorShape,
}

impl Identity {
    pub fn new(shape: TensorShape) -> Self {
        Self { shape }
    }
}

impl<T: Scalar> EmbeddingFunction<T> for Identity {
    fn input_len(&self) -> usize {
        self.shape.len()
    }

    fn output_shape(&self) -> TensorShape {
        self.shape
    }

    fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.shape.len())?;
        Ok(input.to_vec())
    }

    fn vjp(&self, input: &[T], grad_output: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.shape.len())?;
        check_len("output gradient", grad_output.len(), self.shape.len())?;
        Ok(grad_output.to_vec())
    }
}

/// `input ↦ A · input`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub matrix: Matrix<T>,
    pub shape: TensorShape,
}

impl<T: Scalar> Linear<T> {
    pub fn new(matrix: Matrix<T>, shape: TensorShape) -> Result<Self> {
        check_len("linear output", matrix.rows(), shape.len())?;
        Ok(Self { matrix, shape })
    }
}

impl<T: Scalar> EmbeddingFunction<T> for Linear<T> {
    fn input_len(&self) -> usize {
        self.matrix.cols()
    }

    fn output_shape(&self) -> TensorShape {
        self.shape
    }

    fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.matrix.cols())?;
        let column = Matrix::from_vec(input.len(), 1, input.to_vec())?;
        Ok(self.matrix.matmul(&column)?.into_vec())
    }

    fn vjp(&self, input: &[T], grad_output: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.matrix.cols())?;
        check_len("output gradient", grad_output.len(), self.matrix.rows())?;
        let column = Matrix::from_vec(grad_output.len(), 1, grad_output.to_vec())?;
        Ok(self.matrix.transposed_matmul(&column)?.into_vec())
    }
}

/// Wraps a plain function and differentiates it by central differences.
pub struct FiniteDifference<F> {
    pub function: F,
    pub input_len: usize,
    pub shape: TensorShape,
    pub epsilon: f64,
}

impl<F> FiniteDifference<F> {
    pub fn new(function: F, input_len: usize, shape: TensorShape) -> Self {
        Self {
            function,
            input_len,
            shape,
            epsilon: 1e-6,
        }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> Vec<T>> EmbeddingFunction<T> for FiniteDifference<F> {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_shape(&self) -> TensorShape {
        self.shape
    }

    fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.input_len)?;
        let out = (self.function)(input);
        check_len("function output", out.len(), self.shape.len())?;
        Ok(out)
    }

    fn vjp(&self, input: &[T], grad_output: &[T]) -> Result<Vec<T>> {
        check_len("input", input.len(), self.input_len)?;
        check_len("output gradient", grad_output.len(), self.shape.len())?;
        let eps = T::lit(self.epsilon);
        let mut probe = input.to_vec();
        let mut grad = Vec::with_capacity(input.len());
        for i in 0..input.len() {
            probe[i] = input[i] + eps;
            let plus = self.forward(&probe)?;
            probe[i] = input[i] - eps;
            let minus = self.forward(&probe)?;
            probe[i] = input[i];
            let d: T = plus
                .iter()
                .zip(&minus)
                .zip(grad_output)
                .map(|((&p, &m), &g)| g * (p - m))
                .sum();
            grad.push(d / (T::lit(2.0) * eps));
        }
        Ok(grad)
    }
}
