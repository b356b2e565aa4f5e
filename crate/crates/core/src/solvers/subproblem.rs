use super::Objective;
use crate::error::{check_dim, Result};
use crate::losses::LocalLoss;
use crate::vec_ops::{dist_sq, dot};
use crate::Scalar;

/// `f(x) + φᵀx + (μ_z/2) Σ_j ‖x − anchor_j‖²` where each anchor is the
/// midpoint of the agent's and a neighbor's round-`t` models.
pub struct LocalSubproblem<'a, S: Scalar, L: LocalLoss<S> + ?Sized> {
    loss: &'a L,
    phi: Vec<S>,
    anchors: Vec<Vec<S>>,
    anchor_sum: Vec<S>,
    mu_z: S,
}

impl<'a, S: Scalar, L: LocalLoss<S> + ?Sized> LocalSubproblem<'a, S, L> {
    pub fn new(loss: &'a L, phi: Vec<S>, anchors: Vec<Vec<S>>, mu_z: S) -> Result<Self> {
        let d = loss.dim();
        check_dim(d, phi.len())?;
        let mut anchor_sum = vec![S::zero(); d];
        for a in &anchors {
            check_dim(d, a.len())?;
            for (s, &v) in anchor_sum.iter_mut().zip(a) {
                *s += v;
            }
        }
        Ok(LocalSubproblem { loss, phi, anchors, anchor_sum, mu_z })
    }

    pub fn degree(&self) -> usize {
        self.anchors.len()
    }

    pub fn mu_z(&self) -> S {
        self.mu_z
    }

    pub fn phi(&self) -> &[S] {
        &self.phi
    }

    pub fn anchors(&self) -> &[Vec<S>] {
        &self.anchors
    }

    fn add_penalty_gradient(&self, x: &[S], grad: &mut [S]) {
        let deg = S::of(self.anchors.len() as f64);
        for (((g, &xk), &pk), &ak) in grad.iter_mut().zip(x).zip(&self.phi).zip(&self.anchor_sum) {
            *g += pk + self.mu_z * (deg * xk - ak);
        }
    }

    fn penalty_value(&self, x: &[S]) -> S {
        let quad: S = self.anchors.iter().map(|a| dist_sq(x, a)).sum();
        dot(&self.phi, x) + S::of(0.5) * self.mu_z * quad
    }
}

impl<S: Scalar, L: LocalLoss<S> + ?Sized> Objective<S> for LocalSubproblem<'_, S, L> {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value(&self, x: &[S]) -> S {
        self.loss.value(x) + self.penalty_value(x)
    }

    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        self.loss.gradient_into(x, grad);
        self.add_penalty_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        let f = self.loss.value_and_gradient(x, grad);
        self.add_penalty_gradient(x, grad);
        f + self.penalty_value(x)
    }

    fn curvature_shift(&self) -> S {
        self.mu_z * S::of(self.anchors.len() as f64)
    }
}

/// `∇f(x) + φ + μ_z (d_i x − Σ_j anchor_j)`
pub fn subproblem_gradient<S: Scalar, L: LocalLoss<S> + ?Sized>(p: &LocalSubproblem<'_, S, L>, x: &[S]) -> Result<Vec<S>> {
    check_dim(p.dim(), x.len())?;
    let mut g = vec![S::zero(); x.len()];
    p.gradient_into(x, &mut g);
    Ok(g)
}
