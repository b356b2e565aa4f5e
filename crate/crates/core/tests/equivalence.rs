use caden::engine::{Caden, CadenConfig, Participation, TauSchedule};
use caden::vec_ops::max_abs_diff;
use caden::{EdgeAdmm, LbfgsConfig, LocalSolver, Quadratic, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_quadratics(m: usize, d: usize, seed: u64) -> Vec<Quadratic<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            // Q = BᵀB + I, center uniform in [-1, 1].
            let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut q = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    q[r * d + c] = (0..d).map(|k| b[k * d + r] * b[k * d + c]).sum::<f64>() + if r == c { 1.0 } else { 0.0 };
                }
            }
            Quadratic::new(q, (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        })
        .collect()
}

fn compare(graph_seed: u64, loss_seed: u64) -> f64 {
    let t = Topology::random(5, 0.5, graph_seed).unwrap();
    let f = random_quadratics(5, 4, loss_seed);
    let x0 = vec![vec![0.0; 4]; 5];
    let solver = LocalSolver::Lbfgs(LbfgsConfig::default());
    let config = CadenConfig {
        mu_z: 2.0,
        mu_y: 1.0,
        tau: TauSchedule::Constant(5),
        participation: Participation::Full,
        solver: solver.clone(),
        seed: 5,
    };
    let mut agent = Caden::new(&t, &f, config, &x0).unwrap();
    let mut edge = EdgeAdmm::new(&t, &f, 2.0, 1.0, TauSchedule::Constant(5), solver, &x0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        agent.step().unwrap();
        edge.step().unwrap();
        for (a, e) in agent.models().iter().zip(&edge.state().x) {
            worst = worst.max(max_abs_diff(a, e));
        }
        assert!(edge.state().antisymmetry_error() <= 1e-12);
        for i in 0..5 {
            let dphi = max_abs_diff(&agent.states()[i].phi, &edge.state().phi(&t, i));
            assert!(dphi <= 1e-9);
        }
    }
    worst
}

#[test]
fn edge_and_agent_forms_share_trajectory() {
    for seed in 0..20 {
        let worst = compare(seed, seed + 100);
        assert!(worst <= 1e-10, "seed {seed}: max deviation {worst:e}");
    }
}
