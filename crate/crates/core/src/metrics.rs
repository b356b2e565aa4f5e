//! Stationarity and consensus measures recorded by the harness.

use crate::edge_oracle::EdgeState;
use crate::engine::AgentState;
use crate::losses::{accuracy, Dataset, LocalLoss};
use crate::topology::Topology;
use crate::vec_ops::{dist_sq, norm, norm_sq};
use crate::Scalar;

fn gradient_plus<S: Scalar, L: LocalLoss<S>>(f: &L, x: &[S], shift: &[S]) -> S {
    let mut g = vec![S::zero(); x.len()];
    f.gradient_into(x, &mut g);
    g.iter().zip(shift).map(|(&a, &b)| (a + b) * (a + b)).sum()
}

/// `Σ_i ‖∇f_i(x_i) + φ_i‖² + ¼ Σ_i Σ_{j∈N_i} ‖x_i − x_j‖²`
pub fn lyapunov_v<S: Scalar, L: LocalLoss<S>>(states: &[AgentState<S>], losses: &[L], topology: &Topology) -> S {
    let stationarity: S = states.iter().zip(losses).map(|(st, f)| gradient_plus(f, &st.x, &st.phi)).sum();
    // Each edge appears twice in the double sum.
    let consensus: S = topology.edges().iter().map(|&(i, j)| dist_sq(&states[i].x, &states[j].x)).sum();
    stationarity + S::of(0.5) * consensus
}

/// `Σ_i ‖∇f_i(x_i) + Σ_j y_ij,i‖² + Σ_i Σ_{j∈N_i} ‖x_i − z_ij‖²`
pub fn lyapunov_v_edge_form<S: Scalar, L: LocalLoss<S>>(state: &EdgeState<S>, losses: &[L], topology: &Topology) -> S {
    let stationarity: S = (0..topology.num_agents())
        .map(|i| gradient_plus(&losses[i], &state.x[i], &state.phi(topology, i)))
        .sum();
    let residual: S = topology
        .edges()
        .iter()
        .zip(&state.z)
        .map(|(&(i, j), z)| dist_sq(&state.x[i], z) + dist_sq(&state.x[j], z))
        .sum();
    stationarity + residual
}

fn summed_gradient_sq<S: Scalar, L: LocalLoss<S>>(models: &[Vec<S>], losses: &[L]) -> S {
    let d = models.first().map_or(0, Vec::len);
    let mut total = vec![S::zero(); d];
    let mut g = vec![S::zero(); d];
    for (f, x) in losses.iter().zip(models) {
        f.gradient_into(x, &mut g);
        for (t, &v) in total.iter_mut().zip(&g) {
            *t += v;
        }
    }
    norm_sq(&total)
}

/// `‖Σ_i ∇f_i(x_i)‖² + Σ_{i<m} ‖x_i − x_{i+1}‖²`, consensus along agent order.
pub fn relative_error<S: Scalar, L: LocalLoss<S>>(models: &[Vec<S>], losses: &[L]) -> S {
    let chain: S = models.windows(2).map(|w| dist_sq(&w[0], &w[1])).sum();
    summed_gradient_sq(models, losses) + chain
}

/// As [`relative_error`] with the consensus term summed over graph edges.
pub fn relative_error_graph<S: Scalar, L: LocalLoss<S>>(models: &[Vec<S>], losses: &[L], topology: &Topology) -> S {
    let edges: S = topology.edges().iter().map(|&(i, j)| dist_sq(&models[i], &models[j])).sum();
    summed_gradient_sq(models, losses) + edges
}

/// Mean accuracy of the local models on one held-out set; `None` for non-classifiers.
pub fn test_accuracy<S: Scalar, L: LocalLoss<S>>(classifier: &L, models: &[Vec<S>], data: &Dataset<S>) -> Option<f64> {
    if models.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for x in models {
        sum += accuracy(classifier, x, data)?;
    }
    Some(sum / models.len() as f64)
}

/// `‖Σ_i φ_i‖`
pub fn phi_drift<S: Scalar>(states: &[AgentState<S>]) -> S {
    norm(&crate::engine::dual_sum(states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::init_states;
    use crate::losses::Quadratic;

    fn k2() -> (Topology, Vec<Quadratic<f64>>) {
        (Topology::complete(2).unwrap(), vec![Quadratic::isotropic(vec![0.0]), Quadratic::isotropic(vec![2.0])])
    }

    #[test]
    fn relative_error_k2_example() {
        let (_, f) = k2();
        assert_eq!(relative_error(&[vec![0.0], vec![2.0]], &f), 4.0);
        assert_eq!(relative_error(&[vec![1.0], vec![1.0]], &f), 0.0);
    }

    #[test]
    fn chain_and_graph_differ_off_path() {
        let t = Topology::complete(3).unwrap();
        let f: Vec<_> = (0..3).map(|_| Quadratic::isotropic(vec![0.0])).collect();
        let x = [vec![0.0], vec![1.0], vec![2.0]];
        // Chain sees 1 + 1, graph adds the (0,2) edge.
        assert_eq!(relative_error(&x, &f) - 9.0, 2.0);
        assert_eq!(relative_error_graph(&x, &f, &t) - 9.0, 6.0);
    }

    #[test]
    fn lyapunov_vanishes_at_stationary_consensus() {
        let (t, f) = k2();
        let mut st = init_states(&f, &t, &[vec![1.0], vec![1.0]]).unwrap();
        st[0].phi = vec![-1.0];
        st[1].phi = vec![1.0];
        assert_eq!(lyapunov_v(&st, &f, &t), 0.0);
        assert_eq!(phi_drift(&st), 0.0);
        st[0].x = vec![1.001];
        assert!(lyapunov_v(&st, &f, &t) > 0.0);
    }

    #[test]
    fn accuracy_absent_for_regression() {
        let (_, f) = k2();
        let data = Dataset::new(vec![0.0], vec![0], 1, 1).unwrap();
        assert_eq!(test_accuracy(&f[0], &[vec![0.0]], &data), None);
    }
}
