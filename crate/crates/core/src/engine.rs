//! Agent-form CADEN: per-round partial participation, inexact local primal
//! solves, one broadcast per active agent, and the local dual update.
//!
//! Rounds are synchronous. Every primal solve reads only the round-`t`
//! snapshot (own model, own dual, inbox), so solves run in parallel and the
//! result does not depend on the schedule. Broadcasts land in neighbors'
//! inboxes whether or not the neighbor is active; the dual update then sees
//! round-`t+1` models for active neighbors and buffered ones for the rest.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, CadenError, Result};
use crate::losses::LocalLoss;
use crate::solvers::{LocalSolver, LocalSubproblem, SolverReport};
use crate::topology::Topology;
use crate::vec_ops::{all_finite, midpoint};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<S> {
    /// Local model `x_i`.
    pub x: Vec<S>,
    /// Local dual `φ_i`.
    pub phi: Vec<S>,
    /// Last model received from each neighbor.
    pub inbox: BTreeMap<usize, Vec<S>>,
    /// Whether the agent took part in the most recent round.
    pub active: bool,
}

/// Local iteration budget per (round, agent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TauSchedule {
    Constant(usize),
    /// `initial` iterations for rounds `< switch_round`, `after` from then on.
    Reduced { initial: usize, switch_round: usize, after: usize },
    PerAgent(Vec<usize>),
}

impl TauSchedule {
    pub fn tau(&self, round: usize, agent: usize) -> usize {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Reduced { initial, switch_round, after } => {
                if round < *switch_round {
                    *initial
                } else {
                    *after
                }
            }
            TauSchedule::PerAgent(v) => v[agent],
        }
    }

    /// Smallest budget any agent receives in `round`.
    pub fn min_tau(&self, round: usize, m: usize) -> usize {
        (0..m).map(|i| self.tau(round, i)).min().unwrap_or(0)
    }

    fn validate(&self, m: usize) -> Result<()> {
        let ok = match self {
            TauSchedule::Constant(t) => *t >= 1,
            TauSchedule::Reduced { initial, after, .. } => *initial >= 1 && *after >= 1,
            TauSchedule::PerAgent(v) => v.len() == m && v.iter().all(|&t| t >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(CadenError::InvalidParameter(format!("tau schedule {self:?} invalid for {m} agents")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Participation {
    Full,
    Uniform(f64),
    PerAgent(Vec<f64>),
}

impl Participation {
    pub fn probability(&self, agent: usize) -> f64 {
        match self {
            Participation::Full => 1.0,
            Participation::Uniform(p) => *p,
            Participation::PerAgent(v) => v[agent],
        }
    }

    pub fn p_min(&self, m: usize) -> f64 {
        (0..m).map(|i| self.probability(i)).fold(1.0, f64::min)
    }

    pub fn is_full(&self, m: usize) -> bool {
        (0..m).all(|i| self.probability(i) >= 1.0)
    }

    fn validate(&self, m: usize) -> Result<()> {
        if let Participation::PerAgent(v) = self {
            check_dim(m, v.len())?;
        }
        for i in 0..m {
            let p = self.probability(i);
            if !(p > 0.0 && p <= 1.0) {
                return Err(CadenError::InvalidParameter(format!("participation p_{i} = {p} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadenConfig<S> {
    pub mu_z: S,
    pub mu_y: S,
    pub tau: TauSchedule,
    pub participation: Participation,
    pub solver: LocalSolver<S>,
    pub seed: u64,
}

impl<S: Scalar> CadenConfig<S> {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.mu_z > S::zero()) || !(self.mu_y > S::zero()) {
            return Err(CadenError::InvalidParameter(format!(
                "mu_z = {} and mu_y = {} must be positive",
                self.mu_z, self.mu_y
            )));
        }
        self.tau.validate(m)?;
        self.participation.validate(m)
    }
}

/// Per-agent solver statistics for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats<S> {
    pub agent: usize,
    pub tau: usize,
    pub grad_norm_in: S,
    pub grad_norm_out: S,
    pub rate_estimate: S,
    pub failed_line_searches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary<S> {
    /// Index of the round just completed (`t` in `t → t+1`).
    pub round: usize,
    pub active: Vec<bool>,
    /// Broadcasts sent this round.
    pub communications: u64,
    pub solves: Vec<SolveStats<S>>,
}

impl<S> RoundSummary<S> {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one (agent, round) pair of a master seed.
pub fn agent_round_rng(seed: u64, round: usize, agent: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ mix(round as u64)) ^ (agent as u64)))
}

/// Zero duals, each inbox seeded with the neighbors' initial models.
pub fn init_states<S: Scalar, L: LocalLoss<S>>(
    losses: &[L],
    topology: &Topology,
    x_init: &[Vec<S>],
) -> Result<Vec<AgentState<S>>> {
    let m = topology.num_agents();
    check_dim(m, losses.len())?;
    check_dim(m, x_init.len())?;
    for (f, x) in losses.iter().zip(x_init) {
        check_dim(f.dim(), x.len())?;
    }
    Ok((0..m)
        .map(|i| AgentState {
            x: x_init[i].clone(),
            phi: vec![S::zero(); x_init[i].len()],
            inbox: topology.neighbors(i).iter().map(|&j| (j, x_init[j].clone())).collect(),
            active: false,
        })
        .collect())
}

/// Independent Bernoulli(p_i) activity flags for `round`.
pub fn sample_participation(participation: &Participation, seed: u64, round: usize, m: usize) -> Vec<bool> {
    (0..m)
        .map(|i| {
            let p = participation.probability(i);
            p >= 1.0 || agent_round_rng(seed, round, i).random_bool(p)
        })
        .collect()
}

/// Local subproblem of agent `i` built from the round-`t` snapshot.
pub fn local_subproblem<'a, S: Scalar, L: LocalLoss<S>>(
    i: usize,
    states: &[AgentState<S>],
    loss: &'a L,
    mu_z: S,
) -> Result<LocalSubproblem<'a, S, L>> {
    let st = &states[i];
    let anchors = st.inbox.values().map(|xj| midpoint(&st.x, xj)).collect();
    LocalSubproblem::new(loss, st.phi.clone(), anchors, mu_z)
}

/// New model for active agent `i`, warm-started from `x_i^t`.
pub fn primal_update<S: Scalar, L: LocalLoss<S>>(
    i: usize,
    states: &[AgentState<S>],
    losses: &[L],
    config: &CadenConfig<S>,
    round: usize,
) -> Result<SolverReport<S>> {
    let sub = local_subproblem(i, states, &losses[i], config.mu_z)?;
    config.solver.solve(&sub, &states[i].x, config.tau.tau(round, i))
}

/// Delivers `x_i` to every neighbor's inbox; one communication unit.
pub fn broadcast<S: Scalar>(i: usize, states: &mut [AgentState<S>], topology: &Topology, communications: &mut u64) {
    if !states[i].active {
        return;
    }
    let x = states[i].x.clone();
    for &j in topology.neighbors(i) {
        states[j].inbox.insert(i, x.clone());
    }
    *communications += 1;
}

/// `φ_i + (μ_y/2) Σ_{j∈N_i} (x_i − x_j)` using the inbox for `x_j`; inactive agents keep `φ_i`.
pub fn dual_update<S: Scalar>(i: usize, states: &[AgentState<S>], mu_y: S) -> Vec<S> {
    let st = &states[i];
    let mut phi = st.phi.clone();
    if !st.active {
        return phi;
    }
    let half = S::of(0.5) * mu_y;
    for xj in st.inbox.values() {
        for ((p, &xi), &xjk) in phi.iter_mut().zip(&st.x).zip(xj) {
            *p += half * (xi - xjk);
        }
    }
    phi
}

/// One synchronous round on `states`, updating the communication counter.
pub fn run_round<S: Scalar, L: LocalLoss<S>>(
    states: &mut [AgentState<S>],
    topology: &Topology,
    losses: &[L],
    config: &CadenConfig<S>,
    round: usize,
    communications: &mut u64,
) -> Result<RoundSummary<S>> {
    let m = topology.num_agents();
    let active = sample_participation(&config.participation, config.seed, round, m);
    for (st, &a) in states.iter_mut().zip(&active) {
        st.active = a;
    }

    let snapshot: &[AgentState<S>] = states;
    let reports: Vec<(usize, SolverReport<S>)> = (0..m)
        .into_par_iter()
        .filter(|&i| active[i])
        .map(|i| primal_update(i, snapshot, losses, config, round).map(|r| (i, r)))
        .collect::<Result<_>>()?;

    if let Some((i, _)) = reports.iter().find(|(_, r)| !all_finite(&r.x_out)) {
        return Err(CadenError::Diverged { agent: *i, round });
    }
    let mut solves = Vec::with_capacity(reports.len());
    for (i, rep) in reports {
        solves.push(SolveStats {
            agent: i,
            tau: rep.iterations,
            grad_norm_in: rep.grad_norm_in,
            grad_norm_out: rep.grad_norm_out,
            rate_estimate: rep.rate_estimate,
            failed_line_searches: rep.failed_line_searches,
        });
        states[i].x = rep.x_out;
    }

    let before = *communications;
    for i in 0..m {
        broadcast(i, states, topology, communications);
    }

    let new_phi: Vec<Vec<S>> = (0..m).map(|i| dual_update(i, states, config.mu_y)).collect();
    for (st, phi) in states.iter_mut().zip(new_phi) {
        st.phi = phi;
    }

    Ok(RoundSummary { round, active, communications: *communications - before, solves })
}

/// `Σ_i φ_i`, zero under full participation from zero initialization.
pub fn dual_sum<S: Scalar>(states: &[AgentState<S>]) -> Vec<S> {
    let d = states.first().map_or(0, |s| s.phi.len());
    let mut sum = vec![S::zero(); d];
    for st in states {
        for (s, &p) in sum.iter_mut().zip(&st.phi) {
            *s += p;
        }
    }
    sum
}

/// Owns the agent states of one simulated run.
pub struct Caden<'a, S: Scalar, L: LocalLoss<S>> {
    topology: &'a Topology,
    losses: &'a [L],
    config: CadenConfig<S>,
    states: Vec<AgentState<S>>,
    round: usize,
    communications: u64,
}

impl<'a, S: Scalar, L: LocalLoss<S>> Caden<'a, S, L> {
    pub fn new(topology: &'a Topology, losses: &'a [L], config: CadenConfig<S>, x_init: &[Vec<S>]) -> Result<Self> {
        config.validate(topology.num_agents())?;
        let states = init_states(losses, topology, x_init)?;
        Ok(Caden { topology, losses, config, states, round: 0, communications: 0 })
    }

    /// Resumes from a checkpoint; inboxes are rebuilt from the neighbors' models.
    pub fn from_checkpoint(
        topology: &'a Topology,
        losses: &'a [L],
        config: CadenConfig<S>,
        ckpt: &crate::checkpoint::Checkpoint,
    ) -> Result<Self> {
        check_dim(topology.num_agents(), ckpt.m)?;
        let x: Vec<Vec<S>> = ckpt.x.iter().map(|v| v.iter().map(|&e| S::of(e)).collect()).collect();
        let mut engine = Self::new(topology, losses, config, &x)?;
        for (st, phi) in engine.states.iter_mut().zip(&ckpt.phi) {
            st.phi = phi.iter().map(|&e| S::of(e)).collect();
        }
        engine.round = ckpt.round;
        Ok(engine)
    }

    pub fn step(&mut self) -> Result<RoundSummary<S>> {
        let summary = run_round(
            &mut self.states,
            self.topology,
            self.losses,
            &self.config,
            self.round,
            &mut self.communications,
        )?;
        self.round += 1;
        Ok(summary)
    }

    pub fn states(&self) -> &[AgentState<S>] {
        &self.states
    }

    pub fn models(&self) -> Vec<Vec<S>> {
        self.states.iter().map(|s| s.x.clone()).collect()
    }

    pub fn topology(&self) -> &Topology {
        self.topology
    }

    pub fn losses(&self) -> &[L] {
        self.losses
    }

    pub fn config(&self) -> &CadenConfig<S> {
        &self.config
    }

    /// Number of completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn communications(&self) -> u64 {
        self.communications
    }

    pub fn checkpoint(&self) -> crate::checkpoint::Checkpoint {
        crate::checkpoint::Checkpoint::from_states(&self.states, self.round)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Quadratic;
    use crate::solvers::{GdStep, LbfgsConfig};

    fn k2() -> (Topology, Vec<Quadratic<f64>>) {
        (Topology::complete(2).unwrap(), vec![Quadratic::isotropic(vec![0.0]), Quadratic::isotropic(vec![2.0])])
    }

    fn cfg(mu_z: f64, mu_y: f64, tau: usize) -> CadenConfig<f64> {
        CadenConfig {
            mu_z,
            mu_y,
            tau: TauSchedule::Constant(tau),
            participation: Participation::Full,
            solver: LocalSolver::Lbfgs(LbfgsConfig::default()),
            seed: 1,
        }
    }

    #[test]
    fn init_examples() {
        let (t, f) = k2();
        let st = init_states(&f, &t, &[vec![1.0], vec![5.0]]).unwrap();
        assert_eq!(st[0].inbox.get(&1), Some(&vec![5.0]));
        assert_eq!(st[1].inbox.keys().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(dual_sum(&st), vec![0.0]);
        assert!(init_states(&f, &t, &[vec![1.0]]).is_err());

        let t = Topology::random(8, 0.4, 2).unwrap();
        let f: Vec<_> = (0..8).map(|_| Quadratic::isotropic(vec![0.0; 2])).collect();
        let st = init_states(&f, &t, &vec![vec![0.0; 2]; 8]).unwrap();
        for (i, s) in st.iter().enumerate() {
            assert_eq!(s.inbox.keys().copied().collect::<Vec<_>>(), t.neighbors(i));
        }
    }

    #[test]
    fn participation_sampling() {
        assert!(sample_participation(&Participation::Full, 3, 17, 10).into_iter().all(|a| a));
        let p = Participation::Uniform(0.5);
        assert_eq!(sample_participation(&p, 3, 17, 10), sample_participation(&p, 3, 17, 10));
        let mut active = 0usize;
        for round in 0..10_000 {
            active += sample_participation(&p, 99, round, 10).into_iter().filter(|&a| a).count();
        }
        let rate = active as f64 / 100_000.0;
        assert!((rate - 0.5).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn primal_update_on_k2() {
        let (t, f) = k2();
        let st = init_states(&f, &t, &[vec![0.0], vec![2.0]]).unwrap();
        let c = CadenConfig { tau: TauSchedule::Constant(30), ..cfg(3.0, 3.0, 30) };
        let mut st = st;
        st[0].active = true;
        let rep = primal_update(0, &st, &f, &c, 0).unwrap();
        assert!((rep.x_out[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn stationary_consensus_is_a_fixed_point() {
        let t = Topology::complete(3).unwrap();
        let f: Vec<_> = [0.0, 1.0, 5.0].iter().map(|&a| Quadratic::isotropic(vec![a])).collect();
        let mut st = init_states(&f, &t, &vec![vec![2.0]; 3]).unwrap();
        for (s, a) in st.iter_mut().zip([0.0, 1.0, 5.0]) {
            s.phi = vec![-(2.0 - a)];
        }
        let mut comms = 0;
        run_round(&mut st, &t, &f, &cfg(3.0, 3.0, 5), 0, &mut comms).unwrap();
        for s in &st {
            assert!((s.x[0] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn broadcast_and_dual_examples() {
        let t = Topology::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let f: Vec<_> = (0..4).map(|_| Quadratic::isotropic(vec![0.0])).collect();
        let mut st = init_states(&f, &t, &vec![vec![0.0]; 4]).unwrap();
        let mut comms = 0;
        st[0].x = vec![7.0];
        broadcast(0, &mut st, &t, &mut comms);
        assert_eq!(comms, 0);
        assert_eq!(st[1].inbox[&0], vec![0.0]);
        st[0].active = true;
        broadcast(0, &mut st, &t, &mut comms);
        assert_eq!(comms, 1);
        for j in 1..4 {
            assert_eq!(st[j].inbox[&0], vec![7.0]);
        }

        let (t, f) = k2();
        let mut st = init_states(&f, &t, &[vec![1.0], vec![0.0]]).unwrap();
        st[0].active = true;
        st[1].active = true;
        let p0 = dual_update(0, &st, 2.0);
        let p1 = dual_update(1, &st, 2.0);
        assert_eq!((p0[0], p1[0]), (1.0, -1.0));
        st[1].active = false;
        assert_eq!(dual_update(1, &st, 2.0), vec![0.0]);
        let mut st = init_states(&f, &t, &[vec![4.0], vec![4.0]]).unwrap();
        st[0].active = true;
        assert_eq!(dual_update(0, &st, 2.0), vec![0.0]);
    }

    #[test]
    fn k2_full_participation_converges() {
        let (t, f) = k2();
        let mut eng = Caden::new(&t, &f, cfg(3.0, 3.0, 5), &[vec![0.0], vec![2.0]]).unwrap();
        for _ in 0..300 {
            eng.step().unwrap();
            assert!(dual_sum(eng.states())[0].abs() < 1e-9);
        }
        for s in eng.states() {
            assert!((s.x[0] - 1.0).abs() <= 1e-6);
        }
        assert_eq!(eng.communications(), 2 * 300);
    }

    #[test]
    fn inactive_agents_are_frozen() {
        let t = Topology::random(6, 0.5, 4).unwrap();
        let f: Vec<_> = (0..6).map(|i| Quadratic::isotropic(vec![i as f64, -(i as f64)])).collect();
        let c = CadenConfig { participation: Participation::Uniform(0.4), ..cfg(2.0, 2.0, 3) };
        let x0: Vec<Vec<f64>> = (0..6).map(|i| vec![0.1 * i as f64, 1.0]).collect();
        let mut eng = Caden::new(&t, &f, c, &x0).unwrap();
        for _ in 0..30 {
            let before = eng.states().to_vec();
            let sum = eng.step().unwrap();
            assert_eq!(sum.communications as usize, sum.active_count());
            for (i, (b, a)) in before.iter().zip(eng.states()).enumerate() {
                if !sum.active[i] {
                    assert_eq!(b.x, a.x);
                    assert_eq!(b.phi, a.phi);
                }
            }
        }
    }

    #[test]
    fn all_inactive_round_changes_nothing() {
        let (t, f) = k2();
        let mut st = init_states(&f, &t, &[vec![0.0], vec![2.0]]).unwrap();
        let before = st.clone();
        let mut comms = 0;
        // Probability just above zero: with this seed and round neither agent wakes up.
        let c = CadenConfig { participation: Participation::Uniform(1e-12), ..cfg(3.0, 3.0, 5) };
        let sum = run_round(&mut st, &t, &f, &c, 0, &mut comms).unwrap();
        assert_eq!(sum.active_count(), 0);
        assert_eq!(comms, 0);
        for (b, a) in before.iter().zip(&st) {
            assert_eq!((&b.x, &b.phi, &b.inbox), (&a.x, &a.phi, &a.inbox));
        }
    }

    #[test]
    fn primal_updates_commute() {
        let t = Topology::random(7, 0.5, 9).unwrap();
        let f: Vec<_> = (0..7)
            .map(|i| Quadratic::diagonal(&[1.0 + i as f64, 0.5], vec![i as f64, 1.0]).unwrap())
            .collect();
        let x0: Vec<Vec<f64>> = (0..7).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let c = cfg(2.5, 2.5, 4);
        let mut st = init_states(&f, &t, &x0).unwrap();
        st.iter_mut().for_each(|s| s.active = true);
        let forward: Vec<_> = (0..7).map(|i| primal_update(i, &st, &f, &c, 0).unwrap().x_out).collect();
        let mut backward: Vec<_> = (0..7).rev().map(|i| primal_update(i, &st, &f, &c, 0).unwrap().x_out).collect();
        backward.reverse();
        assert_eq!(forward, backward);

        let mut comms = 0;
        run_round(&mut st, &t, &f, &c, 0, &mut comms).unwrap();
        let after: Vec<_> = st.iter().map(|s| s.x.clone()).collect();
        assert_eq!(after, forward);
    }

    #[test]
    fn reduced_schedule_and_gd_variant() {
        let s = TauSchedule::Reduced { initial: 5, switch_round: 100, after: 1 };
        assert_eq!((s.tau(0, 0), s.tau(99, 3), s.tau(100, 0)), (5, 5, 1));
        assert!(TauSchedule::Constant(0).validate(2).is_err());

        let (t, f) = k2();
        let c = CadenConfig {
            solver: LocalSolver::GradientDescent(GdStep::InverseSmoothness { lipschitz: 1.0 }),
            ..cfg(3.0, 3.0, 5)
        };
        let mut eng = Caden::new(&t, &f, c, &[vec![0.0], vec![2.0]]).unwrap();
        for _ in 0..400 {
            eng.step().unwrap();
        }
        assert!(eng.states().iter().all(|s| (s.x[0] - 1.0).abs() < 1e-6));
    }

    #[test]
    fn non_finite_models_abort_the_round() {
        let (t, f) = k2();
        let mut c = cfg(3.0, 3.0, 3);
        c.solver = LocalSolver::GradientDescent(GdStep::Fixed(1e300));
        let mut run = Caden::new(&t, &f, c, &[vec![5.0], vec![-5.0]]).unwrap();
        let before = run.states().to_vec();
        match run.step() {
            Err(CadenError::Diverged { round: 0, .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
        for (a, b) in run.states().iter().zip(&before) {
            assert_eq!((&a.x, &a.phi), (&b.x, &b.phi));
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let (t, f) = k2();
        let bad = CadenConfig { mu_y: 0.0, ..cfg(3.0, 3.0, 5) };
        assert!(Caden::new(&t, &f, bad, &[vec![0.0], vec![2.0]]).is_err());
        let bad = CadenConfig { participation: Participation::Uniform(1.5), ..cfg(3.0, 3.0, 5) };
        assert!(Caden::new(&t, &f, bad, &[vec![0.0], vec![2.0]]).is_err());
    }
}
