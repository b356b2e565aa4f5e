//! Edge-variable ADMM with explicit `z_ij` and per-endpoint duals `y_ij,i`.
//!
//! Reference path only: synchronous, full participation, single-threaded.
//! With zero dual initialization it produces the same model trajectory as
//! [`crate::engine`], which is how the agent-only elimination is validated.

use crate::engine::TauSchedule;
use crate::error::{check_dim, Result};
use crate::losses::LocalLoss;
use crate::solvers::{LocalSolver, Objective};
use crate::topology::{edge_midpoints, Topology};
use crate::vec_ops::{dist_sq, dot, max_abs_diff};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState<S> {
    pub x: Vec<Vec<S>>,
    /// `z_ij` in edge order.
    pub z: Vec<Vec<S>>,
    /// `[y_ij,i, y_ij,j]` for edge `k = (i, j)`, `i < j`.
    pub y: Vec<[Vec<S>; 2]>,
}

impl<S: Scalar> EdgeState<S> {
    /// `z` at the edge midpoints of `x0`, all duals zero.
    pub fn new(topology: &Topology, x0: &[Vec<S>]) -> Result<Self> {
        check_dim(topology.num_agents(), x0.len())?;
        let d = x0.first().map_or(0, Vec::len);
        for x in x0 {
            check_dim(d, x.len())?;
        }
        Ok(EdgeState {
            x: x0.to_vec(),
            z: edge_midpoints(topology, x0),
            y: vec![[vec![S::zero(); d], vec![S::zero(); d]]; topology.num_edges()],
        })
    }

    /// `y_ij,i` seen from agent `i` on edge `k`.
    pub fn dual(&self, topology: &Topology, k: usize, agent: usize) -> &[S] {
        let side = usize::from(topology.edges()[k].0 != agent);
        &self.y[k][side]
    }

    /// `φ_i = Σ_{j∈N_i} y_ij,i`
    pub fn phi(&self, topology: &Topology, i: usize) -> Vec<S> {
        let d = self.x[i].len();
        let mut phi = vec![S::zero(); d];
        for &k in topology.incident_edges(i) {
            for (p, &v) in phi.iter_mut().zip(self.dual(topology, k, i)) {
                *p += v;
            }
        }
        phi
    }

    /// `max_k max_c |y_ij,i + y_ij,j|`
    pub fn antisymmetry_error(&self) -> S {
        self.y
            .iter()
            .map(|[a, b]| a.iter().zip(b).map(|(&u, &v)| (u + v).abs()).fold(S::zero(), S::max))
            .fold(S::zero(), S::max)
    }
}

/// `f_i(x) + Σ_{j∈N_i} [y_ij,iᵀ(x − z_ij) + (μ_z/2)‖x − z_ij‖²]`
pub struct EdgeSubproblem<'a, S: Scalar, L: LocalLoss<S> + ?Sized> {
    loss: &'a L,
    terms: Vec<(&'a [S], &'a [S])>,
    mu_z: S,
}

impl<'a, S: Scalar, L: LocalLoss<S> + ?Sized> EdgeSubproblem<'a, S, L> {
    pub fn new(state: &'a EdgeState<S>, topology: &Topology, i: usize, loss: &'a L, mu_z: S) -> Self {
        let terms = topology
            .incident_edges(i)
            .iter()
            .map(|&k| (state.dual(topology, k, i), state.z[k].as_slice()))
            .collect();
        EdgeSubproblem { loss, terms, mu_z }
    }

    fn add_edge_gradient(&self, x: &[S], grad: &mut [S]) {
        for &(y, z) in &self.terms {
            for (((g, &xk), &yk), &zk) in grad.iter_mut().zip(x).zip(y).zip(z) {
                *g += yk + self.mu_z * (xk - zk);
            }
        }
    }

    fn edge_value(&self, x: &[S]) -> S {
        self.terms
            .iter()
            .map(|&(y, z)| {
                let lin: S = y.iter().zip(x).zip(z).map(|((&yk, &xk), &zk)| yk * (xk - zk)).sum();
                lin + S::of(0.5) * self.mu_z * dist_sq(x, z)
            })
            .sum()
    }
}

impl<S: Scalar, L: LocalLoss<S> + ?Sized> Objective<S> for EdgeSubproblem<'_, S, L> {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value(&self, x: &[S]) -> S {
        self.loss.value(x) + self.edge_value(x)
    }

    fn gradient_into(&self, x: &[S], grad: &mut [S]) {
        self.loss.gradient_into(x, grad);
        self.add_edge_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        let f = self.loss.value_and_gradient(x, grad);
        self.add_edge_gradient(x, grad);
        f + self.edge_value(x)
    }

    fn curvature_shift(&self) -> S {
        self.mu_z * S::of(self.terms.len() as f64)
    }
}

/// Inexact x-minimization for every agent, warm-started at `x_i^t`.
pub fn edge_x_step<S: Scalar, L: LocalLoss<S>>(
    state: &EdgeState<S>,
    topology: &Topology,
    losses: &[L],
    mu_z: S,
    solver: &LocalSolver<S>,
    tau: &TauSchedule,
    round: usize,
) -> Result<Vec<Vec<S>>> {
    check_dim(topology.num_agents(), losses.len())?;
    (0..topology.num_agents())
        .map(|i| {
            let sub = EdgeSubproblem::new(state, topology, i, &losses[i], mu_z);
            solver.solve(&sub, &state.x[i], tau.tau(round, i)).map(|r| r.x_out)
        })
        .collect()
}

/// `z_ij = ½ (x_i + x_j + (y_ij,i + y_ij,j)/μ_z)` using the current `x` and `y`.
pub fn edge_z_step<S: Scalar>(state: &EdgeState<S>, topology: &Topology, mu_z: S) -> Vec<Vec<S>> {
    let half = S::of(0.5);
    topology
        .edges()
        .iter()
        .zip(&state.y)
        .map(|(&(i, j), [yi, yj])| {
            (0..state.x[i].len())
                .map(|c| half * (state.x[i][c] + state.x[j][c] + (yi[c] + yj[c]) / mu_z))
                .collect()
        })
        .collect()
}

/// `y_ij,i += μ_y (x_i − z_ij)` using the current `x` and `z`.
pub fn edge_y_step<S: Scalar>(state: &EdgeState<S>, topology: &Topology, mu_y: S) -> Vec<[Vec<S>; 2]> {
    let ascend = |y: &[S], x: &[S], z: &[S]| -> Vec<S> {
        y.iter().zip(x).zip(z).map(|((&yk, &xk), &zk)| yk + mu_y * (xk - zk)).collect()
    };
    topology
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let [yi, yj] = &state.y[k];
            [ascend(yi, &state.x[i], &state.z[k]), ascend(yj, &state.x[j], &state.z[k])]
        })
        .collect()
}

/// `F(x) + yᵀ(Ax − Bz) + (μ_z/2)‖Ax − Bz‖²`, edge-wise.
pub fn augmented_lagrangian_value<S: Scalar, L: LocalLoss<S>>(
    state: &EdgeState<S>,
    topology: &Topology,
    losses: &[L],
    mu_z: S,
) -> S {
    let loss: S = losses.iter().zip(&state.x).map(|(f, x)| f.value(x)).sum();
    let coupling: S = topology
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let z = &state.z[k];
            let [yi, yj] = &state.y[k];
            let ri: Vec<S> = crate::vec_ops::sub(&state.x[i], z);
            let rj: Vec<S> = crate::vec_ops::sub(&state.x[j], z);
            dot(yi, &ri) + dot(yj, &rj) + S::of(0.5) * mu_z * (dot(&ri, &ri) + dot(&rj, &rj))
        })
        .sum();
    loss + coupling
}

/// Edge-form run driver mirroring [`crate::engine::Caden`] under full participation.
pub struct EdgeAdmm<'a, S: Scalar, L: LocalLoss<S>> {
    topology: &'a Topology,
    losses: &'a [L],
    pub mu_z: S,
    pub mu_y: S,
    pub tau: TauSchedule,
    pub solver: LocalSolver<S>,
    state: EdgeState<S>,
    round: usize,
}

impl<'a, S: Scalar, L: LocalLoss<S>> EdgeAdmm<'a, S, L> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        topology: &'a Topology,
        losses: &'a [L],
        mu_z: S,
        mu_y: S,
        tau: TauSchedule,
        solver: LocalSolver<S>,
        x0: &[Vec<S>],
    ) -> Result<Self> {
        check_dim(topology.num_agents(), losses.len())?;
        Ok(EdgeAdmm { topology, losses, mu_z, mu_y, tau, solver, state: EdgeState::new(topology, x0)?, round: 0 })
    }

    pub fn step(&mut self) -> Result<()> {
        let x = edge_x_step(&self.state, self.topology, self.losses, self.mu_z, &self.solver, &self.tau, self.round)?;
        self.state.x = x;
        self.state.z = edge_z_step(&self.state, self.topology, self.mu_z);
        self.state.y = edge_y_step(&self.state, self.topology, self.mu_y);
        self.round += 1;
        Ok(())
    }

    pub fn state(&self) -> &EdgeState<S> {
        &self.state
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn lagrangian(&self) -> S {
        augmented_lagrangian_value(&self.state, self.topology, self.losses, self.mu_z)
    }

    /// Largest deviation of `z` from the edge midpoints of `x`.
    pub fn midpoint_error(&self) -> S {
        edge_midpoints(self.topology, &self.state.x)
            .iter()
            .zip(&self.state.z)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(S::zero(), S::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{init_states, local_subproblem};
    use crate::losses::Quadratic;
    use crate::solvers::LbfgsConfig;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Zero(usize);
    impl LocalLoss<f64> for Zero {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn gradient_into(&self, _: &[f64], g: &mut [f64]) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn rand_blocks(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn edge_gradient_equals_agent_gradient_at_midpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..10 {
            let t = Topology::random(6, 0.5, seed).unwrap();
            let d = 3;
            let f: Vec<_> = (0..6).map(|i| Quadratic::diagonal(&[1.0, 2.0, 3.0], vec![i as f64; 3]).unwrap()).collect();
            let x = rand_blocks(&mut rng, 6, d);
            let mut es = EdgeState::new(&t, &x).unwrap();
            // Antisymmetric random duals.
            for yk in es.y.iter_mut() {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                *yk = [v.clone(), v.iter().map(|e| -e).collect()];
            }
            let mut st = init_states(&f, &t, &x).unwrap();
            for i in 0..6 {
                st[i].phi = es.phi(&t, i);
            }
            let probe = rand_blocks(&mut rng, 1, d).remove(0);
            for i in 0..6 {
                let edge = EdgeSubproblem::new(&es, &t, i, &f[i], 1.7);
                let agent = local_subproblem(i, &st, &f[i], 1.7).unwrap();
                let (mut ge, mut ga) = (vec![0.0; d], vec![0.0; d]);
                edge.gradient_into(&probe, &mut ge);
                agent.gradient_into(&probe, &mut ga);
                assert!(max_abs_diff(&ge, &ga) < 1e-12);
            }
        }
    }

    #[test]
    fn zero_problem_minimizer_is_zero() {
        let t = Topology::complete(3).unwrap();
        let f: Vec<_> = (0..3).map(|_| Zero(2)).collect();
        let es = EdgeState::new(&t, &vec![vec![0.0, 0.0]; 3]).unwrap();
        let x = edge_x_step(&es, &t, &f, 1.0, &LocalSolver::default(), &TauSchedule::Constant(5), 0).unwrap();
        assert!(x.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn k2_first_step_matches_closed_form() {
        let t = Topology::complete(2).unwrap();
        let f: Vec<Quadratic<f64>> = vec![Quadratic::isotropic(vec![0.0]), Quadratic::isotropic(vec![2.0])];
        let es = EdgeState::new(&t, &[vec![0.0], vec![2.0]]).unwrap();
        let x = edge_x_step(&es, &t, &f, 3.0, &LocalSolver::default(), &TauSchedule::Constant(30), 0).unwrap();
        assert!((x[0][0] - 0.75).abs() < 1e-12);
        assert!((x[1][0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn z_step_examples() {
        let t = Topology::complete(2).unwrap();
        let mut es = EdgeState::new(&t, &[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(edge_z_step(&es, &t, 3.0), vec![vec![1.0]]);
        es.y[0] = [vec![0.5], vec![-0.5]];
        assert_eq!(edge_z_step(&es, &t, 3.0), vec![vec![1.0]]);
        es.y[0] = [vec![3.0], vec![3.0]];
        assert_eq!(edge_z_step(&es, &t, 3.0), vec![vec![2.0]]);
        let es = EdgeState::new(&t, &[vec![4.0], vec![4.0]]).unwrap();
        assert_eq!(edge_z_step(&es, &t, 3.0), vec![vec![4.0]]);
    }

    #[test]
    fn y_step_examples() {
        let t = Topology::complete(2).unwrap();
        let mut es = EdgeState::new(&t, &[vec![1.0], vec![1.0]]).unwrap();
        es.y[0] = [vec![0.3], vec![-0.3]];
        assert_eq!(edge_y_step(&es, &t, 2.0)[0], [vec![0.3], vec![-0.3]]);
        let mut es = EdgeState::new(&t, &[vec![0.0], vec![2.0]]).unwrap();
        es.y[0] = [vec![0.25], vec![-0.25]];
        let y = edge_y_step(&es, &t, 2.0);
        assert_eq!(y[0][0][0] + y[0][1][0], 0.0);
    }

    #[test]
    fn lagrangian_hand_example() {
        let t = Topology::complete(2).unwrap();
        let mut es = EdgeState::new(&t, &[vec![0.0], vec![2.0]]).unwrap();
        es.y[0] = [vec![1.0], vec![-1.0]];
        let f = vec![Zero(1), Zero(1)];
        assert_eq!(augmented_lagrangian_value(&es, &t, &f, 2.0), 0.0);

        let q = vec![Quadratic::isotropic(vec![0.0]), Quadratic::isotropic(vec![2.0])];
        let es = EdgeState::new(&t, &[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(augmented_lagrangian_value(&es, &t, &q, 2.0), 1.0);
    }

    /// Dense oracle: materialized `A = [Â_s; Â_d] ⊗ I_d` and `B = [I; I]`.
    fn dense_lagrangian(t: &Topology, es: &EdgeState<f64>, f: &[Quadratic<f64>], mu_z: f64) -> f64 {
        let (m, n, d) = (t.num_agents(), t.num_edges(), es.x[0].len());
        let cm = t.constraint_matrices();
        let mut a = DMatrix::zeros(2 * n * d, m * d);
        let mut b = DMatrix::zeros(2 * n * d, n * d);
        for k in 0..n {
            for i in 0..m {
                for c in 0..d {
                    a[(k * d + c, i * d + c)] = cm.a_s[(k, i)];
                    a[((n + k) * d + c, i * d + c)] = cm.a_d[(k, i)];
                }
            }
            for c in 0..d {
                b[(k * d + c, k * d + c)] = 1.0;
                b[((n + k) * d + c, k * d + c)] = 1.0;
            }
        }
        let x = DVector::from_iterator(m * d, es.x.iter().flatten().copied());
        let z = DVector::from_iterator(n * d, es.z.iter().flatten().copied());
        let y = DVector::from_iterator(
            2 * n * d,
            es.y.iter().flat_map(|p| p[0].iter().copied()).chain(es.y.iter().flat_map(|p| p[1].iter().copied())),
        );
        let r = &a * &x - &b * &z;
        let loss: f64 = f.iter().zip(&es.x).map(|(q, xi)| q.value(xi)).sum();
        loss + y.dot(&r) + 0.5 * mu_z * r.norm_squared()
    }

    #[test]
    fn lagrangian_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let m = rng.random_range(2..=5);
            let d = rng.random_range(1..=3);
            let t = Topology::random(m, 0.7, trial).unwrap();
            let f: Vec<_> = (0..m).map(|_| Quadratic::isotropic((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
            let mut es = EdgeState::new(&t, &rand_blocks(&mut rng, m, d)).unwrap();
            es.z = rand_blocks(&mut rng, t.num_edges(), d);
            for yk in es.y.iter_mut() {
                *yk = [rand_blocks(&mut rng, 1, d).remove(0), rand_blocks(&mut rng, 1, d).remove(0)];
            }
            let fast = augmented_lagrangian_value(&es, &t, &f, 1.3);
            let dense = dense_lagrangian(&t, &es, &f, 1.3);
            assert!((fast - dense).abs() < 1e-10 * (1.0 + dense.abs()));
        }
    }

    #[test]
    fn antisymmetry_and_midpoints_hold_along_run() {
        let t = Topology::random(6, 0.5, 1).unwrap();
        let f: Vec<_> = (0..6).map(|i| Quadratic::diagonal(&[1.0, 3.0], vec![i as f64, 0.5]).unwrap()).collect();
        let x0 = vec![vec![0.0, 0.0]; 6];
        let mut run =
            EdgeAdmm::new(&t, &f, 2.0, 2.0, TauSchedule::Constant(5), LocalSolver::Lbfgs(LbfgsConfig::default()), &x0)
                .unwrap();
        for _ in 0..40 {
            run.step().unwrap();
            assert!(run.state().antisymmetry_error() <= 1e-12);
            assert!(run.midpoint_error() <= 1e-12);
            assert!(run.lagrangian().is_finite());
        }
    }
}
