use super::{Dataset, LocalLoss};
use crate::error::{CadenError, Result};
use crate::Scalar;

/// Binary logistic regression: mean cross-entropy over the shard plus
/// `(l2/2)‖x‖²`. Parameters are the feature weights followed by a bias.
#[derive(Debug, Clone)]
pub struct Logistic<S> {
    data: Dataset<S>,
    l2: S,
}

impl<S: Scalar> Logistic<S> {
    pub fn new(data: Dataset<S>, l2: S) -> Result<Self> {
        if data.num_classes() != 2 {
            return Err(CadenError::InvalidParameter(format!(
                "logistic regression needs 2 classes, got {}",
                data.num_classes()
            )));
        }
        if data.is_empty() {
            return Err(CadenError::InvalidParameter("empty shard".into()));
        }
        Ok(Logistic { data, l2 })
    }

    fn margin(&self, x: &[S], features: &[S]) -> S {
        crate::vec_ops::dot(&x[..features.len()], features) + x[features.len()]
    }
}

fn softplus<S: Scalar>(z: S) -> S {
    z.max(S::zero()) + (-z.abs()).exp().ln_1p()
}

fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> LocalLoss<S> for Logistic<S> {
    fn dim(&self) -> usize {
        self.data.num_features() + 1
    }

    fn value(&self, x: &[S]) -> S {
        let n = S::of(self.data.len() as f64);
        let ce: S = self
            .data
            .samples()
            .map(|(f, y)| {
                let z = self.margin(x, f);
                softplus(z) - if y == 1 { z } else { S::zero() }
            })
            .sum();
        ce / n + S::of(0.5) * self.l2 * crate::vec_ops::norm_sq(x)
    }

    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        grad.iter_mut().for_each(|g| *g = S::zero());
        let k = self.data.num_features();
        let inv_n = S::one() / S::of(self.data.len() as f64);
        for (f, y) in self.data.samples() {
            let r = (sigmoid(self.margin(x, f)) - if y == 1 { S::one() } else { S::zero() }) * inv_n;
            crate::vec_ops::axpy(r, f, &mut grad[..k]);
            grad[k] += r;
        }
        crate::vec_ops::axpy(self.l2, x, grad);
    }

    fn predict(&self, x: &[S], features: &[S]) -> Option<usize> {
        Some(usize::from(self.margin(x, features) > S::zero()))
    }
}
