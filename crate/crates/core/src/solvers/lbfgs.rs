use std::collections::VecDeque;

use super::{check_start, Objective, SolverReport};
use crate::error::{CadenError, Result};
use crate::vec_ops::{axpy, dot, norm, sub};
use crate::Scalar;

/// Pairs with `sᵀy ≤ CURVATURE_EPS · ‖s‖‖y‖` are not stored.
const CURVATURE_EPS: f64 = 1e-10;

/// Relative objective band inside which the approximate Wolfe test applies.
const APPROX_WOLFE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineSearch<S> {
    /// Backtracking from a unit step until `f(x + αp) ≤ f(x) + c1 α gᵀp`.
    ///
    /// A step is also accepted when `f(x + αp) ≤ f(x) + ε|f(x)|` and
    /// `∇f(x + αp)ᵀp ≤ (1 − 2c1)|gᵀp|`, which stays decidable once the
    /// decrease is below the rounding level of `f`.
    Armijo { c1: S, shrink: S, max_backtracks: usize },
    /// Secant step `α = −gᵀp / pᵀ(∇f(x+p) − ∇f(x))`, exact on quadratics.
    /// Falls back to Armijo when the curvature is non-positive or the step
    /// does not decrease the objective.
    Secant,
}

impl<S: Scalar> LineSearch<S> {
    pub fn armijo() -> Self {
        LineSearch::Armijo { c1: S::of(1e-4), shrink: S::of(0.5), max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig<S> {
    pub memory: usize,
    pub line_search: LineSearch<S>,
}

impl<S: Scalar> Default for LbfgsConfig<S> {
    fn default() -> Self {
        LbfgsConfig { memory: 10, line_search: LineSearch::armijo() }
    }
}

struct CurvaturePair<S> {
    s: Vec<S>,
    y: Vec<S>,
    rho: S,
}

/// Limited-memory inverse Hessian approximation built from the most recent
/// `memory` accepted pairs.
struct History<S> {
    pairs: VecDeque<CurvaturePair<S>>,
    memory: usize,
}

impl<S: Scalar> History<S> {
    fn new(memory: usize) -> Self {
        History { pairs: VecDeque::with_capacity(memory), memory }
    }

    /// Returns `false` if the pair fails the curvature test.
    fn push(&mut self, s: Vec<S>, y: Vec<S>) -> bool {
        let sy = dot(&s, &y);
        if sy <= S::of(CURVATURE_EPS) * norm(&s) * norm(&y) {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { rho: S::one() / sy, s, y });
        true
    }

    /// Two-loop recursion: returns `−H g`.
    fn direction(&self, g: &[S]) -> Vec<S> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let a = p.rho * dot(&p.s, &q);
            axpy(-a, &p.y, &mut q);
            alphas.push(a);
        }
        if let Some(last) = self.pairs.back() {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            crate::vec_ops::scale(gamma, &mut q);
        }
        for (p, &a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * dot(&p.y, &q);
            axpy(a - b, &p.s, &mut q);
        }
        crate::vec_ops::scale(-S::one(), &mut q);
        q
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

struct Trial<S> {
    x: Vec<S>,
    f: S,
    g: Vec<S>,
}

fn trial_point<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x: &[S], p: &[S], alpha: S) -> Trial<S> {
    let mut xt = x.to_vec();
    axpy(alpha, p, &mut xt);
    let mut g = vec![S::zero(); xt.len()];
    let f = obj.value_and_gradient(&xt, &mut g);
    Trial { x: xt, f, g }
}

fn sufficient_decrease<S: Scalar>(f: S, slope: S, c1: S, alpha: S, t: &Trial<S>, p: &[S]) -> bool {
    if !t.f.is_finite() {
        return false;
    }
    t.f <= f + c1 * alpha * slope
        || (t.f <= f + S::of(APPROX_WOLFE_EPS) * f.abs() && dot(&t.g, p) <= (S::one() - S::of(2.0) * c1) * slope.abs())
}

fn armijo<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    x: &[S],
    f: S,
    slope: S,
    p: &[S],
    (c1, shrink, max_backtracks): (S, S, usize),
) -> Option<Trial<S>> {
    let mut alpha = S::one();
    for _ in 0..=max_backtracks {
        let t = trial_point(obj, x, p, alpha);
        if sufficient_decrease(f, slope, c1, alpha, &t, p) {
            return Some(t);
        }
        alpha *= shrink;
    }
    None
}

fn line_search<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    ls: &LineSearch<S>,
    x: &[S],
    f: S,
    g: &[S],
    p: &[S],
) -> Option<Trial<S>> {
    let slope = dot(g, p);
    let default_armijo = (S::of(1e-4), S::of(0.5), 30);
    match *ls {
        LineSearch::Armijo { c1, shrink, max_backtracks } => armijo(obj, x, f, slope, p, (c1, shrink, max_backtracks)),
        LineSearch::Secant => {
            let unit = trial_point(obj, x, p, S::one());
            let curvature = dot(p, &sub(&unit.g, g));
            if curvature > S::zero() {
                let t = trial_point(obj, x, p, -slope / curvature);
                if t.f.is_finite() && t.f <= f {
                    return Some(t);
                }
            }
            armijo(obj, x, f, slope, p, default_armijo)
        }
    }
}

/// Runs `tau` L-BFGS iterations from `x_start` with fresh curvature memory.
///
/// An iteration whose line search finds no acceptable step takes a zero step;
/// the memory is then cleared so the next iteration tries steepest descent.
/// Once steepest descent also fails (or the gradient is exactly zero) the
/// remaining iterations are zero steps and are not evaluated.
pub fn solve_lbfgs<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    x_start: &[S],
    tau: usize,
    cfg: &LbfgsConfig<S>,
) -> Result<SolverReport<S>> {
    check_start(obj, x_start)?;
    if cfg.memory == 0 {
        return Err(CadenError::InvalidParameter("L-BFGS memory must be at least 1".into()));
    }
    let mut x = x_start.to_vec();
    let mut g = vec![S::zero(); x.len()];
    let mut f = obj.value_and_gradient(&x, &mut g);
    let mut norms = Vec::with_capacity(tau + 1);
    norms.push(norm(&g));
    let mut history = History::new(cfg.memory);
    let (mut failed, mut skipped) = (0, 0);
    let mut stalled = false;

    for _ in 0..tau {
        let gn = *norms.last().expect("non-empty");
        if stalled || gn == S::zero() {
            norms.push(gn);
            continue;
        }
        let mut p = history.direction(&g);
        if !(dot(&g, &p) < S::zero()) {
            history.clear();
            p = g.iter().map(|&v| -v).collect();
        }
        match line_search(obj, &cfg.line_search, &x, f, &g, &p) {
            Some(t) => {
                let s = sub(&t.x, &x);
                let y = sub(&t.g, &g);
                if !history.push(s, y) {
                    skipped += 1;
                }
                x = t.x;
                g = t.g;
                f = t.f;
            }
            None => {
                failed += 1;
                if history.is_empty() {
                    stalled = true;
                }
                history.clear();
            }
        }
        norms.push(norm(&g));
    }
    Ok(SolverReport::finish(x, tau, norms, failed, skipped))
}

#[cfg(test)]
mod tests {
    use super::super::{solve_gd, LocalSubproblem};
    use super::*;
    use crate::losses::Quadratic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `(Q + μ d I)⁻¹ (Q a − φ + μ Σ anchors)` for diagonal `Q`.
    fn diag_minimizer(q: &[f64], a: &[f64], phi: &[f64], anchors: &[Vec<f64>], mu: f64) -> Vec<f64> {
        let deg = anchors.len() as f64;
        (0..q.len())
            .map(|k| {
                let s: f64 = anchors.iter().map(|v| v[k]).sum();
                (q[k] * a[k] - phi[k] + mu * s) / (q[k] + mu * deg)
            })
            .collect()
    }

    #[test]
    fn converges_to_closed_form_minimizer() {
        let q = [1.0, 4.0, 9.0, 0.5];
        let a = vec![1.0, -1.0, 0.5, 2.0];
        let f = Quadratic::diagonal(&q, a.clone()).unwrap();
        let phi = vec![0.2, -0.1, 0.4, 0.0];
        let anchors = vec![vec![0.0, 1.0, 2.0, -1.0], vec![1.0, 1.0, 0.0, 0.0]];
        let p = LocalSubproblem::new(&f, phi.clone(), anchors.clone(), 2.0).unwrap();
        let rep = solve_lbfgs(&p, &[0.0; 4], 60, &LbfgsConfig::default()).unwrap();
        assert!(rep.grad_norm_out <= 1e-10 * rep.grad_norm_in);
        let xs = diag_minimizer(&q, &a, &phi, &anchors, 2.0);
        assert!(crate::vec_ops::max_abs_diff(&rep.x_out, &xs) < 1e-9);
        assert_eq!(rep.iterations, 60);
    }

    #[test]
    fn stationary_start_is_kept() {
        let f = Quadratic::isotropic(vec![0.0]);
        let p = LocalSubproblem::new(&f, vec![0.0], vec![vec![1.0]], 3.0).unwrap();
        let rep = solve_lbfgs(&p, &[0.75], 5, &LbfgsConfig::default()).unwrap();
        assert_eq!(rep.x_out, vec![0.75]);
        assert_eq!(rep.grad_norm_out, 0.0);
        assert_eq!(rep.rate_estimate, 0.0);
    }

    #[test]
    fn exact_line_search_terminates_on_quadratic() {
        let f = Quadratic::<f64>::diagonal(&[1.0, 10.0], vec![0.0, 0.0]).unwrap();
        let p = LocalSubproblem::new(&f, vec![0.0, 0.0], vec![], 0.0).unwrap();
        let cfg = LbfgsConfig { memory: 2, line_search: LineSearch::Secant };
        let rep = solve_lbfgs(&p, &[1.0, 1.0], 3, &cfg).unwrap();
        assert!(rep.x_out.iter().all(|v| v.abs() < 1e-8), "{:?}", rep.x_out);
    }

    #[test]
    fn directions_descend_and_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let d = 6;
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..50.0)).collect();
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = Quadratic::diagonal(&q, a).unwrap();
            let anchors = vec![(0..d).map(|_| rng.random_range(-1.0..1.0)).collect()];
            let p = LocalSubproblem::new(&f, vec![0.1; d], anchors, 0.5).unwrap();
            let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut hist = History::new(3);
            let mut g = vec![0.0; d];
            let mut fx = p.value_and_gradient(&x, &mut g);
            for _ in 0..15 {
                let dir = hist.direction(&g);
                if crate::vec_ops::norm(&g) < 1e-12 {
                    break;
                }
                assert!(dot(&g, &dir) < 0.0);
                let t = line_search(&p, &LineSearch::armijo(), &x, fx, &g, &dir).unwrap();
                assert!(t.f <= fx + 1e-12);
                hist.push(sub(&t.x, &x), sub(&t.g, &g));
                x = t.x;
                g = t.g;
                fx = t.f;
            }
        }
    }

    #[test]
    fn rejects_non_positive_curvature_pairs() {
        let mut h = History::new(2);
        assert!(!h.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!h.push(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(h.push(vec![1.0, 0.0], vec![2.0, 0.0]));
        let g = [1.0, 1.0];
        assert!(dot(&g, &h.direction(&g)) < 0.0);
    }

    #[test]
    fn beats_gradient_descent_when_ill_conditioned() {
        let f = Quadratic::diagonal(&[1.0, 100.0], vec![0.0, 0.0]).unwrap();
        let p = LocalSubproblem::new(&f, vec![0.0; 2], vec![], 0.0).unwrap();
        let lb = solve_lbfgs(&p, &[1.0, 1.0], 10, &LbfgsConfig::default()).unwrap();
        let gd = solve_gd(&p, &[1.0, 1.0], 10, 1.0 / 100.0).unwrap();
        assert!(lb.rate_estimate < gd.rate_estimate);
        assert!(lb.grad_norm_out < gd.grad_norm_out);
    }

    #[test]
    fn zero_memory_is_rejected() {
        let f = Quadratic::isotropic(vec![0.0]);
        let p = LocalSubproblem::new(&f, vec![0.0], vec![], 1.0).unwrap();
        let cfg = LbfgsConfig { memory: 0, ..LbfgsConfig::default() };
        assert!(solve_lbfgs(&p, &[1.0], 1, &cfg).is_err());
    }
}
