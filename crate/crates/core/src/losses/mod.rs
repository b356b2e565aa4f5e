//! Per-agent differentiable objectives `f_i` and the empirical Lipschitz probe.

mod data;
mod idx;
mod lipschitz;
mod logistic;
mod mlp;
mod quadratic;

pub use data::{gaussian_blobs, BlobSpec, Dataset};
pub use idx::{load_idx_dataset, read_idx_images, read_idx_labels, IdxImages, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use lipschitz::{estimate_lipschitz, LipschitzEstimate, LipschitzProbe};
pub use logistic::Logistic;
pub use mlp::{Mlp, MlpShape};
pub use quadratic::Quadratic;

use crate::error::{check_dim, Result};
use crate::Scalar;

/// A differentiable local objective.
///
/// Implementations assume `x.len() == self.dim()`; the checked entry points
/// are [`eval_loss`] and [`eval_gradient`].
pub trait LocalLoss<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[S]) -> S;

    /// Writes `∇f(x)` into `grad`.
    fn gradient_into(&self, x: &[S], grad: &mut [S]);

    /// Value and gradient in one pass; losses with a shared forward pass override this.
    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        self.gradient_into(x, grad);
        self.value(x)
    }

    /// Predicted class of `features` under parameters `x`, for classification losses.
    fn predict(&self, _x: &[S], _features: &[S]) -> Option<usize> {
        None
    }
}

impl<S: Scalar, L: LocalLoss<S> + ?Sized> LocalLoss<S> for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[S]) -> S {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        (**self).gradient_into(x, grad)
    }
    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        (**self).value_and_gradient(x, grad)
    }
    fn predict(&self, x: &[S], features: &[S]) -> Option<usize> {
        (**self).predict(x, features)
    }
}

pub fn eval_loss<S: Scalar, L: LocalLoss<S> + ?Sized>(f: &L, x: &[S]) -> Result<S> {
    check_dim(f.dim(), x.len())?;
    Ok(f.value(x))
}

pub fn eval_gradient<S: Scalar, L: LocalLoss<S> + ?Sized>(f: &L, x: &[S]) -> Result<Vec<S>> {
    check_dim(f.dim(), x.len())?;
    let mut g = vec![S::zero(); x.len()];
    f.gradient_into(x, &mut g);
    Ok(g)
}

/// Fraction of `data` classified correctly by parameters `x`, or `None` for
/// non-classification losses.
pub fn accuracy<S: Scalar, L: LocalLoss<S> + ?Sized>(f: &L, x: &[S], data: &Dataset<S>) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut correct = 0usize;
    for (features, label) in data.samples() {
        if f.predict(x, features)? == label {
            correct += 1;
        }
    }
    Some(correct as f64 / data.len() as f64)
}
