use super::{check_start, Objective, SolverReport};
use crate::error::{CadenError, Result};
use crate::vec_ops::{axpy, norm};
use crate::Scalar;

/// `tau` fixed-step gradient iterations.
pub fn solve_gd<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x_start: &[S], tau: usize, step: S) -> Result<SolverReport<S>> {
    check_start(obj, x_start)?;
    if !(step > S::zero()) {
        return Err(CadenError::InvalidParameter(format!("gradient step must be positive, got {step}")));
    }
    let mut x = x_start.to_vec();
    let mut g = vec![S::zero(); x.len()];
    obj.gradient_into(&x, &mut g);
    let mut norms = vec![norm(&g)];
    for _ in 0..tau {
        axpy(-step, &g, &mut x);
        obj.gradient_into(&x, &mut g);
        norms.push(norm(&g));
    }
    Ok(SolverReport::finish(x, tau, norms, 0, 0))
}
