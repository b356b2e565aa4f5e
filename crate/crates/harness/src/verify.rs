//! Self-contained invariant suites run by `caden verify`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use caden::engine::{Caden, CadenConfig, Participation, TauSchedule};
use caden::theory::{compute_constants, inputs_from_selection, TheoryInputs};
use caden::topology::check_consensus_sandwich;
use caden::vec_ops::max_abs_diff;
use caden::{EdgeAdmm, LbfgsConfig, LocalSolver, Quadratic, SpectralSummary, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sandwich,
    Equivalence,
    Constants,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Sandwich, Suite::Equivalence, Suite::Constants];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sandwich => "lemma1",
            Suite::Equivalence => "equivalence",
            Suite::Constants => "constants",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| HarnessError::Invalid(format!("unknown suite {s:?}")))
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Check { name: name.into(), passed: measured <= tolerance, measured, tolerance, detail }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: measured {:e} (limit {:e}) {}", self.name, self.measured, self.tolerance, self.detail)
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
    /// Per-instance data for the JSON report.
    pub details: Value,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::line).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "suite": self.suite.name(),
            "passed": self.passed(),
            "elapsed_s": self.elapsed_s,
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "details": self.details,
        })
    }
}

/// Consensus sandwich on `instances` random connected graphs (`m ≤ 15`, `d ≤ 8`).
pub fn sandwich_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut rows = Vec::with_capacity(instances);
    for _ in 0..instances {
        let m = rng.random_range(2..=15);
        let p = rng.random_range(0.15..0.9);
        let d = rng.random_range(1..=8);
        let topo = Topology::random(m, p, rng.random())?;
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let spectral = topo.laplacian_spectrum()?;
        let s = check_consensus_sandwich(&topo, &spectral, &x)?;
        worst = worst.min(s.slack());
        rows.push(json!({ "m": m, "edges": topo.num_edges(), "d": d, "lhs": s.lhs, "mid": s.mid, "rhs": s.rhs }));
    }
    let check = Check {
        name: "consensus sandwich".into(),
        passed: worst >= -1e-9,
        measured: worst,
        tolerance: -1e-9,
        detail: format!("min slack over {instances} instances (must be >= limit)"),
    };
    Ok(SuiteReport { suite: Suite::Sandwich, checks: vec![check], elapsed_s: start.elapsed().as_secs_f64(), details: json!(rows) })
}

/// `Q = BᵀB + I`, entries of `B` and the center uniform in `[-1, 1]`.
pub fn random_quadratics(m: usize, d: usize, seed: u64) -> Result<Vec<Quadratic<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut q = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    let bb: f64 = (0..d).map(|k| b[k * d + r] * b[k * d + c]).sum();
                    q[r * d + c] = bb + if r == c { 1.0 } else { 0.0 };
                }
            }
            let center = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            Quadratic::new(q, center).map_err(HarnessError::from)
        })
        .collect()
}

/// Agent-form engine against the explicit edge-variable reference on a
/// random 5-agent graph, `d = 4`, `τ = 5` L-BFGS, for `rounds` rounds.
pub fn equivalence_suite(seed: u64, rounds: usize) -> Result<SuiteReport> {
    let start = Instant::now();
    let (m, d, tau, mu_z, mu_y) = (5, 4, 5, 2.0, 1.0);
    let topo = Topology::random(m, 0.5, seed)?;
    let losses = random_quadratics(m, d, seed.wrapping_add(1))?;
    let x0 = vec![vec![0.0; d]; m];
    let solver = LocalSolver::Lbfgs(LbfgsConfig::default());
    let config = CadenConfig {
        mu_z,
        mu_y,
        tau: TauSchedule::Constant(tau),
        participation: Participation::Full,
        solver,
        seed,
    };
    let mut agent = Caden::new(&topo, &losses, config, &x0)?;
    let mut edge = EdgeAdmm::new(&topo, &losses, mu_z, mu_y, TauSchedule::Constant(tau), solver, &x0)?;
    let (mut x_gap, mut anti) = (0.0f64, 0.0f64);
    let mut per_round = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        agent.step()?;
        edge.step()?;
        let gap = agent.models().iter().zip(&edge.state().x).map(|(a, e)| max_abs_diff(a, e)).fold(0.0, f64::max);
        x_gap = x_gap.max(gap);
        anti = anti.max(edge.state().antisymmetry_error());
        per_round.push(gap);
    }
    let checks = vec![
        Check::at_most("edge/agent trajectories", x_gap, 1e-10, format!("max |x_agent - x_edge| over {rounds} rounds")),
        Check::at_most("dual antisymmetry", anti, 1e-12, "max |y_ij,i + y_ij,j|".into()),
    ];
    Ok(SuiteReport {
        suite: Suite::Equivalence,
        checks,
        elapsed_s: start.elapsed().as_secs_f64(),
        details: json!({ "edges": topo.num_edges(), "max_abs_per_round": per_round }),
    })
}

/// Graphs of the constants grid: a ring, a complete graph and a random graph.
pub fn constants_grid_graphs(seed: u64) -> Result<Vec<(String, SpectralSummary)>> {
    let graphs = [
        ("ring6".to_string(), Topology::ring(6)?),
        ("complete5".to_string(), Topology::complete(5)?),
        (format!("random10_seed{seed}"), Topology::random(10, 0.4, seed)?),
    ];
    graphs.into_iter().map(|(n, t)| Ok((n, t.laplacian_spectrum()?))).collect()
}

pub const GRID_LIPSCHITZ: [f64; 3] = [0.5, 1.0, 5.0];
pub const GRID_P_MIN: [f64; 3] = [0.3, 0.6, 1.0];
/// Contraction factors for the monotonicity check, in decreasing order.
pub const GRID_R: [f64; 3] = [0.9, 0.5, 0.1];

/// Outcome at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub graph: String,
    pub lipschitz: f64,
    pub p_min: f64,
    /// Failed conditions at the parameters selected for `r = 0.5`.
    pub failures: Vec<&'static str>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    /// `(C₁, C₂)` at each of [`GRID_R`] with parameters selected at the first.
    pub c1_c2_by_r: Vec<Option<(f64, f64)>>,
}

impl GridPoint {
    /// `C₁` and `C₂` are finite and non-increasing along [`GRID_R`].
    pub fn monotone(&self) -> bool {
        let vals: Option<Vec<(f64, f64)>> = self.c1_c2_by_r.iter().copied().collect();
        vals.is_some_and(|v| {
            v.iter().all(|(a, b)| a.is_finite() && b.is_finite())
                && v.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 <= w[0].1)
        })
    }
}

pub fn evaluate_grid(seed: u64) -> Result<Vec<GridPoint>> {
    let mut points = Vec::new();
    for (graph, spectral) in constants_grid_graphs(seed)? {
        for &l in &GRID_LIPSCHITZ {
            for &p in &GRID_P_MIN {
                let report = compute_constants(&inputs_from_selection(l, spectral, p, 0.5)?)?;
                let (c3, c4) = match report.constants() {
                    Some(c) => (Some(c.c[2]), Some(c.c[3])),
                    None => (None, None),
                };
                let base = inputs_from_selection(l, spectral, p, GRID_R[0])?;
                let c1_c2_by_r = GRID_R
                    .iter()
                    .map(|&r| {
                        let at_r = TheoryInputs { r, ..base };
                        compute_constants(&at_r).map(|rep| rep.constants().map(|c| (c.c1(), c.c2())))
                    })
                    .collect::<caden::Result<_>>()?;
                points.push(GridPoint {
                    graph: graph.clone(),
                    lipschitz: l,
                    p_min: p,
                    failures: report.conditions().failures(),
                    c3,
                    c4,
                    c1_c2_by_r,
                });
            }
        }
    }
    Ok(points)
}

/// Rate-bound preconditions at the selected parameters on 27 grid points, and
/// monotonicity of `C₁, C₂` in `r`.
pub fn constants_suite(seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let points = evaluate_grid(seed)?;
    let n = points.len() as f64;
    let failing: Vec<&GridPoint> = points.iter().filter(|p| !p.failures.is_empty()).collect();
    let mut failed_names: Vec<&str> = failing.iter().flat_map(|p| p.failures.iter().copied()).collect();
    failed_names.sort_unstable();
    failed_names.dedup();
    let non_monotone = points.iter().filter(|p| !p.monotone()).count();
    let checks = vec![
        Check::at_most(
            "rate-bound preconditions",
            failing.len() as f64,
            0.0,
            format!("grid points failing out of {n}; failed conditions {failed_names:?}"),
        ),
        Check::at_most(
            "C1, C2 monotone in r",
            non_monotone as f64,
            0.0,
            format!("grid points not non-increasing over r = {GRID_R:?}"),
        ),
    ];
    let details: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "graph": p.graph,
                "lipschitz": p.lipschitz,
                "p_min": p.p_min,
                "failures": p.failures,
                "c3": p.c3,
                "c4": p.c4,
                "c1_c2_by_r": p.c1_c2_by_r,
            })
        })
        .collect();
    Ok(SuiteReport { suite: Suite::Constants, checks, elapsed_s: start.elapsed().as_secs_f64(), details: json!(details) })
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Sandwich => sandwich_suite(seed, 100),
        Suite::Equivalence => equivalence_suite(seed, 50),
        Suite::Constants => constants_suite(seed),
    }
}

/// Runs `suite` and writes `out_dir/verify_<suite>.json` when a directory is given.
pub fn run_and_write(suite: Suite, seed: u64, out_dir: Option<&Path>) -> Result<SuiteReport> {
    let report = run_suite(suite, seed)?;
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join(format!("verify_{}.json", suite.name())), serde_json::to_string_pretty(&report.to_json())?)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn sandwich_small() {
        let r = sandwich_suite(3, 10).unwrap();
        assert!(r.passed(), "{:?}", r.lines());
        assert_eq!(r.details.as_array().unwrap().len(), 10);
    }

    #[test]
    fn equivalence_short() {
        let r = equivalence_suite(1, 10).unwrap();
        assert!(r.passed(), "{:?}", r.lines());
    }

    #[test]
    fn grid_has_27_points() {
        let pts = evaluate_grid(0).unwrap();
        assert_eq!(pts.len(), 27);
        for p in &pts {
            assert!(p.failures.iter().all(|f| !["mu_z", "mu_y", "tau"].contains(f)), "{p:?}");
        }
    }

    #[test]
    fn report_json_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_and_write(Suite::Constants, 0, Some(dir.path())).unwrap();
        let text = std::fs::read_to_string(dir.path().join("verify_constants.json")).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["checks"].as_array().unwrap().len(), 2);
        assert_eq!(v["passed"], r.passed());
    }

    #[test]
    fn check_line_format() {
        let c = Check::at_most("x", 1.0, 2.0, "d".into());
        assert!(c.line().starts_with("PASS x:"));
        assert!(!Check::at_most("x", 3.0, 2.0, String::new()).passed);
    }

    #[test]
    fn failures_come_from_report() {
        let s = Topology::complete(2).unwrap().laplacian_spectrum().unwrap();
        let rep = compute_constants(&inputs_from_selection(1.0, s, 1.0, 0.5).unwrap()).unwrap();
        assert!(rep.conditions().failures().contains(&"c3"));
    }
}
