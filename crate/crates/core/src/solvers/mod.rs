//! Inexact minimization of the per-round local augmented objective.

mod gd;
mod lbfgs;
mod subproblem;

pub use gd::solve_gd;
pub use lbfgs::{solve_lbfgs, LbfgsConfig, LineSearch};
pub use subproblem::{subproblem_gradient, LocalSubproblem};

use crate::error::{check_dim, CadenError, Result};
use crate::Scalar;

/// Smooth objective minimized by the local solvers.
pub trait Objective<S: Scalar> {
    fn dim(&self) -> usize;

    fn value(&self, x: &[S]) -> S;

    fn gradient_into(&self, x: &[S], grad: &mut [S]);

    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        self.gradient_into(x, grad);
        self.value(x)
    }

    /// Curvature the objective adds on top of the loss (`μ_z · d_i` for the
    /// augmented subproblem). Used by the `1/(L + shift)` gradient step.
    fn curvature_shift(&self) -> S {
        S::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport<S> {
    pub x_out: Vec<S>,
    pub iterations: usize,
    pub grad_norm_in: S,
    pub grad_norm_out: S,
    /// Geometric mean of the per-iteration gradient-norm ratios.
    pub rate_estimate: S,
    /// Gradient norm before the first and after every iteration.
    pub grad_norms: Vec<S>,
    /// Iterations whose line search found no acceptable step (zero step taken).
    pub failed_line_searches: usize,
    /// Curvature pairs rejected by the `sᵀy` test.
    pub skipped_pairs: usize,
}

impl<S: Scalar> SolverReport<S> {
    pub(crate) fn finish(x_out: Vec<S>, iterations: usize, grad_norms: Vec<S>, failed: usize, skipped: usize) -> Self {
        let grad_norm_in = grad_norms[0];
        let grad_norm_out = *grad_norms.last().expect("at least the initial norm");
        let rate_estimate = if grad_norm_in == S::zero() || iterations == 0 {
            S::zero()
        } else {
            (grad_norm_out / grad_norm_in).powf(S::one() / S::of(iterations as f64))
        };
        SolverReport {
            x_out,
            iterations,
            grad_norm_in,
            grad_norm_out,
            rate_estimate,
            grad_norms,
            failed_line_searches: failed,
            skipped_pairs: skipped,
        }
    }
}

/// Step rule for the gradient-descent local solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GdStep<S> {
    Fixed(S),
    /// `1 / (L + μ_z d_i)` from a Lipschitz estimate of the loss.
    InverseSmoothness { lipschitz: S },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalSolver<S> {
    Lbfgs(LbfgsConfig<S>),
    GradientDescent(GdStep<S>),
}

impl<S: Scalar> Default for LocalSolver<S> {
    fn default() -> Self {
        LocalSolver::Lbfgs(LbfgsConfig::default())
    }
}

impl<S: Scalar> LocalSolver<S> {
    pub fn solve<O: Objective<S> + ?Sized>(&self, obj: &O, x_start: &[S], tau: usize) -> Result<SolverReport<S>> {
        match *self {
            LocalSolver::Lbfgs(cfg) => solve_lbfgs(obj, x_start, tau, &cfg),
            LocalSolver::GradientDescent(GdStep::Fixed(step)) => solve_gd(obj, x_start, tau, step),
            LocalSolver::GradientDescent(GdStep::InverseSmoothness { lipschitz }) => {
                solve_gd(obj, x_start, tau, S::one() / (lipschitz + obj.curvature_shift()))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocalSolver::Lbfgs(_) => "lbfgs",
            LocalSolver::GradientDescent(_) => "gd",
        }
    }
}

/// Empirical per-iteration contraction `r` of the squared gradient norm: the
/// geometric mean of successive ratios `‖∇⁺‖² / ‖∇‖²` over `probe_iters`
/// iterations of `solver`. Returns 0 when `x_start` is already stationary and
/// clamps to `(0, 1]` otherwise, warning if any single ratio exceeded 1.
pub fn estimate_contraction<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    x_start: &[S],
    probe_iters: usize,
    solver: &LocalSolver<S>,
) -> Result<S> {
    check_dim(obj.dim(), x_start.len())?;
    if probe_iters == 0 {
        return Err(CadenError::InvalidParameter("probe_iters must be at least 1".into()));
    }
    let report = solver.solve(obj, x_start, probe_iters)?;
    let norms = &report.grad_norms;
    if norms[0] == S::zero() {
        return Ok(S::zero());
    }
    if norms.windows(2).any(|w| w[1] > w[0]) {
        log::warn!("gradient norm increased during contraction probe; clamping r to 1");
    }
    let ratio = (report.grad_norm_out / report.grad_norm_in).powi(2);
    let r = ratio.powf(S::one() / S::of(probe_iters as f64));
    Ok(r.min(S::one()).max(S::min_positive_value()))
}

pub(crate) fn check_start<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x_start: &[S]) -> Result<()> {
    check_dim(obj.dim(), x_start.len())
}
