use super::LocalLoss;
use crate::error::{check_dim, CadenError, Result};
use crate::Scalar;

/// `½ (x − a)ᵀ Q (x − a)` with symmetric positive semidefinite `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<S> {
    q: Vec<S>,
    center: Vec<S>,
}

impl<S: Scalar> Quadratic<S> {
    /// `q` is row-major `d × d`. Symmetry is checked; semidefiniteness is the caller's contract.
    pub fn new(q: Vec<S>, center: Vec<S>) -> Result<Self> {
        let d = center.len();
        check_dim(d * d, q.len())?;
        for r in 0..d {
            for c in (r + 1)..d {
                let (a, b) = (q[r * d + c], q[c * d + r]);
                if (a - b).abs() > S::of(1e-12) * (S::one() + a.abs().max(b.abs())) {
                    return Err(CadenError::InvalidParameter(format!("Q is not symmetric at ({r}, {c})")));
                }
            }
        }
        Ok(Quadratic { q, center })
    }

    pub fn diagonal(diag: &[S], center: Vec<S>) -> Result<Self> {
        let d = diag.len();
        check_dim(d, center.len())?;
        let mut q = vec![S::zero(); d * d];
        for (k, &v) in diag.iter().enumerate() {
            q[k * d + k] = v;
        }
        Self::new(q, center)
    }

    /// `½ ‖x − a‖²`
    pub fn isotropic(center: Vec<S>) -> Self {
        let ones = vec![S::one(); center.len()];
        Self::diagonal(&ones, center).expect("identity is symmetric")
    }

    pub fn matrix(&self) -> &[S] {
        &self.q
    }

    pub fn center(&self) -> &[S] {
        &self.center
    }

    /// `Q v`
    pub fn apply(&self, v: &[S]) -> Vec<S> {
        let d = self.center.len();
        (0..d).map(|r| crate::vec_ops::dot(&self.q[r * d..(r + 1) * d], v)).collect()
    }
}

impl<S: Scalar> LocalLoss<S> for Quadratic<S> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[S]) -> S {
        let diff = crate::vec_ops::sub(x, &self.center);
        S::of(0.5) * crate::vec_ops::dot(&diff, &self.apply(&diff))
    }

    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        let diff = crate::vec_ops::sub(x, &self.center);
        grad.copy_from_slice(&self.apply(&diff));
    }
}
