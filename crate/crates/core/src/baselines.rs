//! Gradient-tracking baseline over Metropolis-Hastings mixing weights.

use nalgebra::DMatrix;

use crate::error::{check_dim, CadenError, Result};
use crate::losses::LocalLoss;
use crate::topology::Topology;
use crate::vec_ops::{all_finite, norm_sq};
use crate::Scalar;

/// Step sizes searched by [`tune_gt_step`].
pub const GT_STEP_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// `W_ij = 1/(1 + max(d_i, d_j))` on edges, rows completed to sum one.
pub fn metropolis_weights(topology: &Topology) -> DMatrix<f64> {
    let m = topology.num_agents();
    let mut w = DMatrix::zeros(m, m);
    for &(i, j) in topology.edges() {
        let v = 1.0 / (1.0 + topology.degree(i).max(topology.degree(j)) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    w
}

/// `‖W − 11ᵀ/m‖₂`; below one on connected graphs.
pub fn mixing_contraction(w: &DMatrix<f64>) -> f64 {
    let m = w.nrows();
    let centered = w - DMatrix::from_element(m, m, 1.0 / m as f64);
    centered.symmetric_eigenvalues().iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtState<S> {
    pub x: Vec<Vec<S>>,
    /// Tracker of the network-average gradient.
    pub g: Vec<Vec<S>>,
    /// `∇f_i(x_i)` at the current iterate.
    pub grad: Vec<Vec<S>>,
}

impl<S: Scalar> GtState<S> {
    /// `g_i⁰ = ∇f_i(x_i⁰)`.
    pub fn new<L: LocalLoss<S>>(losses: &[L], x0: &[Vec<S>]) -> Result<Self> {
        check_dim(losses.len(), x0.len())?;
        let grad: Vec<Vec<S>> = losses
            .iter()
            .zip(x0)
            .map(|(f, x)| crate::losses::eval_gradient(f, x))
            .collect::<Result<_>>()?;
        Ok(GtState { x: x0.to_vec(), g: grad.clone(), grad })
    }

    /// `Σ_i g_i − Σ_i ∇f_i(x_i)`; zero up to rounding.
    pub fn tracking_gap(&self) -> Vec<S> {
        let d = self.x.first().map_or(0, Vec::len);
        let mut gap = vec![S::zero(); d];
        for (g, h) in self.g.iter().zip(&self.grad) {
            for ((a, &u), &v) in gap.iter_mut().zip(g).zip(h) {
                *a += u - v;
            }
        }
        gap
    }
}

fn mix<S: Scalar>(w: &DMatrix<f64>, topology: &Topology, v: &[Vec<S>], i: usize) -> Vec<S> {
    let mut out: Vec<S> = v[i].iter().map(|&e| S::of(w[(i, i)]) * e).collect();
    for &j in topology.neighbors(i) {
        let wij = S::of(w[(i, j)]);
        for (o, &e) in out.iter_mut().zip(&v[j]) {
            *o += wij * e;
        }
    }
    out
}

/// `x⁺ = W x − step·g`, `g⁺ = W g + ∇F(x⁺) − ∇F(x)`. Adds `2m` communications.
pub fn gt_round<S: Scalar, L: LocalLoss<S>>(
    state: &mut GtState<S>,
    topology: &Topology,
    w: &DMatrix<f64>,
    losses: &[L],
    step: S,
    communications: &mut u64,
) -> Result<()> {
    let m = topology.num_agents();
    check_dim(m, state.x.len())?;
    let x_new: Vec<Vec<S>> = (0..m)
        .map(|i| {
            let mut xi = mix(w, topology, &state.x, i);
            for (a, &gk) in xi.iter_mut().zip(&state.g[i]) {
                *a -= step * gk;
            }
            xi
        })
        .collect();
    let grad_new: Vec<Vec<S>> = losses
        .iter()
        .zip(&x_new)
        .map(|(f, x)| crate::losses::eval_gradient(f, x))
        .collect::<Result<_>>()?;
    let g_new: Vec<Vec<S>> = (0..m)
        .map(|i| {
            let mut gi = mix(w, topology, &state.g, i);
            for ((a, &u), &v) in gi.iter_mut().zip(&grad_new[i]).zip(&state.grad[i]) {
                *a += u - v;
            }
            gi
        })
        .collect();
    state.x = x_new;
    state.g = g_new;
    state.grad = grad_new;
    *communications += 2 * m as u64;
    Ok(())
}

/// Runs `rounds` of gradient tracking per grid step and returns the step with the
/// smallest final `score`; diverged runs are discarded.
pub fn tune_gt_step<S: Scalar, L: LocalLoss<S>>(
    topology: &Topology,
    losses: &[L],
    x0: &[Vec<S>],
    rounds: usize,
    grid: &[f64],
    score: impl Fn(&[Vec<S>]) -> f64,
) -> Result<f64> {
    let w = metropolis_weights(topology);
    let mut best: Option<(f64, f64)> = None;
    for &step in grid {
        let mut st = GtState::new(losses, x0)?;
        let mut comms = 0;
        let mut ok = true;
        for _ in 0..rounds {
            gt_round(&mut st, topology, &w, losses, S::of(step), &mut comms)?;
            if !st.x.iter().all(|x| all_finite(x)) {
                ok = false;
                break;
            }
        }
        let s = score(&st.x);
        if ok && s.is_finite() && best.is_none_or(|(_, b)| s < b) {
            best = Some((step, s));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| CadenError::InvalidParameter("every gradient-tracking step diverged".into()))
}

/// `‖Σ_i ∇f_i(x̄)‖²` at the average model; a step-size score for [`tune_gt_step`].
pub fn average_gradient_score<S: Scalar, L: LocalLoss<S>>(losses: &[L], x: &[Vec<S>]) -> f64 {
    let d = x.first().map_or(0, Vec::len);
    let mut mean = vec![S::zero(); d];
    for xi in x {
        for (a, &v) in mean.iter_mut().zip(xi) {
            *a += v;
        }
    }
    let inv = S::of(1.0 / x.len().max(1) as f64);
    mean.iter_mut().for_each(|v| *v *= inv);
    let mut total = vec![S::zero(); d];
    let mut g = vec![S::zero(); d];
    for f in losses {
        f.gradient_into(&mean, &mut g);
        for (a, &v) in total.iter_mut().zip(&g) {
            *a += v;
        }
    }
    norm_sq(&total).as_f64()
}
