//! Communication graph, edge-constraint structure and Laplacian spectrum.
//!
//! Agents are 0-indexed internally; the plain-text edge-list format is
//! 1-indexed. Edges are stored canonically as `(i, j)` with `i < j`, sorted
//! lexicographically, so that edge indices are stable across runs.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, CadenError, Result};
use crate::vec_ops::{dist_sq, midpoint};
use crate::Scalar;

/// Eigenvalues at or below this are treated as zero by the connectivity test.
pub const CONNECTIVITY_TOL: f64 = 1e-10;

/// Default number of resamples [`Topology::random`] attempts before giving up.
pub const DEFAULT_MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    m: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    /// For each agent, the indices of its incident edges in the same order as `neighbors`.
    incident: Vec<Vec<usize>>,
    resamples: usize,
}

/// Largest and second-smallest Laplacian eigenvalues, plus the maximum degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub d_max: usize,
}

/// Source/destination incidence matrices of the edge-consensus constraint.
///
/// Row `k` of `a_s` has a single 1 at the source of edge `k`, row `k` of `a_d`
/// a single 1 at its destination. The stacked-identity `B` is never built.
#[derive(Debug, Clone)]
pub struct ConstraintMatrices {
    pub a_s: DMatrix<f64>,
    pub a_d: DMatrix<f64>,
}

impl ConstraintMatrices {
    /// `(A_s - A_d)ᵀ(A_s - A_d)`, which equals the graph Laplacian.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let diff = &self.a_s - &self.a_d;
        diff.transpose() * diff
    }
}

impl Topology {
    /// Build a topology from an arbitrary edge list. Pairs are canonicalized to
    /// `i < j`; self-loops, duplicates, out-of-range agents and disconnected
    /// graphs are rejected.
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if m < 2 {
            return Err(CadenError::InvalidGraph(format!("need at least 2 agents, got {m}")));
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(CadenError::InvalidGraph(format!("self-loop at agent {a}")));
            }
            if a >= m || b >= m {
                return Err(CadenError::InvalidGraph(format!("edge ({a}, {b}) out of range for m = {m}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(CadenError::InvalidGraph(format!("duplicate edge {:?}", w[0])));
        }

        let mut neighbors = vec![Vec::new(); m];
        let mut incident = vec![Vec::new(); m];
        for (k, &(i, j)) in canon.iter().enumerate() {
            neighbors[i].push(j);
            incident[i].push(k);
            neighbors[j].push(i);
            incident[j].push(k);
        }
        for i in 0..m {
            let mut pairs: Vec<_> = neighbors[i].iter().copied().zip(incident[i].iter().copied()).collect();
            pairs.sort_unstable();
            neighbors[i] = pairs.iter().map(|p| p.0).collect();
            incident[i] = pairs.iter().map(|p| p.1).collect();
        }

        let topo = Topology { m, edges: canon, neighbors, incident, resamples: 0 };
        if !topo.is_connected() {
            return Err(CadenError::InvalidGraph("graph is not connected".into()));
        }
        Ok(topo)
    }

    /// Erdos-Renyi graph conditioned on connectivity, with the default retry limit.
    pub fn random(m: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        Self::random_with_limit(m, edge_prob, seed, DEFAULT_MAX_RESAMPLES)
    }

    /// Each pair `i < j` is an edge independently with probability `edge_prob`.
    /// Disconnected samples are discarded and redrawn from the next RNG stream
    /// of the same seed; the number of discarded samples is kept in
    /// [`Topology::resamples`].
    pub fn random_with_limit(m: usize, edge_prob: f64, seed: u64, max_resamples: usize) -> Result<Self> {
        if m < 2 {
            return Err(CadenError::InvalidParameter(format!("m must be at least 2, got {m}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(CadenError::InvalidParameter(format!("edge_prob must lie in (0, 1], got {edge_prob}")));
        }
        for attempt in 0..=max_resamples {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt as u64);
            let mut edges = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    if rng.random_bool(edge_prob) {
                        edges.push((i, j));
                    }
                }
            }
            match Topology::new(m, edges) {
                Ok(mut t) => {
                    t.resamples = attempt;
                    return Ok(t);
                }
                Err(CadenError::InvalidGraph(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(CadenError::GraphSamplingFailed { attempts: max_resamples + 1 })
    }

    pub fn complete(m: usize) -> Result<Self> {
        Self::new(m, (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))))
    }

    pub fn path(m: usize) -> Result<Self> {
        Self::new(m, (0..m.saturating_sub(1)).map(|i| (i, i + 1)))
    }

    pub fn ring(m: usize) -> Result<Self> {
        if m < 3 {
            return Self::path(m);
        }
        Self::new(m, (0..m).map(|i| (i, (i + 1) % m)))
    }

    pub fn num_agents(&self) -> usize {
        self.m
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor set `N_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Edge indices incident to agent `i`, aligned with [`Topology::neighbors`].
    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// How many disconnected samples were rejected while generating this graph.
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    /// Index of the edge joining `i` and `j`, if any.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.m
    }

    pub fn constraint_matrices(&self) -> ConstraintMatrices {
        let n = self.edges.len();
        let mut a_s = DMatrix::zeros(n, self.m);
        let mut a_d = DMatrix::zeros(n, self.m);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            a_s[(k, i)] = 1.0;
            a_d[(k, j)] = 1.0;
        }
        ConstraintMatrices { a_s, a_d }
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.m, self.m);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// Sorted Laplacian eigenvalues.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn laplacian_spectrum(&self) -> Result<SpectralSummary> {
        let ev = self.laplacian_eigenvalues();
        let lambda2 = ev[1];
        if lambda2 <= CONNECTIVITY_TOL {
            return Err(CadenError::Disconnected { lambda2 });
        }
        Ok(SpectralSummary { lambda_max: ev[ev.len() - 1], lambda_min: lambda2, d_max: self.max_degree() })
    }

    /// First line `m n`, then one 1-indexed `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.m, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| CadenError::Format("empty edge list".into()))?;
        let (m, n) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(n);
        for line in lines {
            let (i, j) = parse_pair(line)?;
            if i == 0 || j == 0 {
                return Err(CadenError::Format(format!("edge list is 1-indexed, found `{line}`")));
            }
            edges.push((i - 1, j - 1));
        }
        if edges.len() != n {
            return Err(CadenError::Format(format!("header declares {n} edges, found {}", edges.len())));
        }
        Topology::new(m, edges)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(CadenError::Format(format!("expected two integers, found `{line}`"))),
    }
}

fn check_blocks<S: Scalar>(blocks: &[Vec<S>], count: usize, d: usize) -> Result<()> {
    check_dim(count, blocks.len())?;
    for b in blocks {
        check_dim(d, b.len())?;
    }
    Ok(())
}

/// `‖Ax − Bz‖² = Σ_k ‖x_i − z_k‖² + ‖x_j − z_k‖²` over edges `k = (i, j)`.
pub fn constraint_residual<S: Scalar>(topo: &Topology, x: &[Vec<S>], z: &[Vec<S>]) -> Result<S> {
    let d = x.first().map_or(0, Vec::len);
    check_blocks(x, topo.num_agents(), d)?;
    check_blocks(z, topo.num_edges(), d)?;
    Ok(topo
        .edges()
        .iter()
        .zip(z)
        .map(|(&(i, j), zk)| dist_sq(&x[i], zk) + dist_sq(&x[j], zk))
        .sum())
}

/// Edge midpoints `z_ij = (x_i + x_j)/2` in edge order.
pub fn edge_midpoints<S: Scalar>(topo: &Topology, x: &[Vec<S>]) -> Vec<Vec<S>> {
    topo.edges().iter().map(|&(i, j)| midpoint(&x[i], &x[j])).collect()
}

/// The three sides of the neighbor-average consensus sandwich.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusSandwich<S> {
    /// `λ‖Ax − Bz‖²` with `λ = λ_min² / (2 λ_max)`.
    pub lhs: S,
    /// `Σ_i ‖Σ_{j∈N_i} (x_i − z_ij)‖²`
    pub mid: S,
    /// `d_max ‖Ax − Bz‖²`
    pub rhs: S,
}

impl<S: Scalar> ConsensusSandwich<S> {
    /// Smallest of `mid − lhs` and `rhs − mid`.
    pub fn slack(&self) -> S {
        (self.mid - self.lhs).min(self.rhs - self.mid)
    }
}

/// Evaluates the sandwich with `z` at the edge midpoints of `x`.
pub fn check_consensus_sandwich<S: Scalar>(topo: &Topology, spectral: &SpectralSummary, x: &[Vec<S>]) -> Result<ConsensusSandwich<S>> {
    let d = x.first().map_or(0, Vec::len);
    check_blocks(x, topo.num_agents(), d)?;
    let z = edge_midpoints(topo, x);
    let residual = constraint_residual(topo, x, &z)?;
    let lambda = S::of(spectral.lambda_min * spectral.lambda_min / (2.0 * spectral.lambda_max));

    let mut mid = S::zero();
    let mut acc = vec![S::zero(); d];
    for i in 0..topo.num_agents() {
        acc.iter_mut().for_each(|a| *a = S::zero());
        for &k in topo.incident_edges(i) {
            for ((a, &xi), &zk) in acc.iter_mut().zip(&x[i]).zip(&z[k]) {
                *a += xi - zk;
            }
        }
        mid += crate::vec_ops::norm_sq(&acc);
    }
    Ok(ConsensusSandwich { lhs: lambda * residual, mid, rhs: S::of(spectral.d_max as f64) * residual })
}
