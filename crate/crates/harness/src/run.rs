//! Single-experiment driver: parameters, rounds, metrics and output files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use caden::baselines::{gt_round, metropolis_weights, tune_gt_step, GtState, GT_STEP_GRID};
use caden::engine::{init_states, local_subproblem};
use caden::metrics::{lyapunov_v, phi_drift, relative_error, relative_error_graph, test_accuracy};
use caden::solvers::estimate_contraction;
use caden::theory::{compute_constants, initial_error_e0, select_parameters, TheoryInputs, TheoryReport};
use caden::{
    Caden, CadenConfig, CadenError, GdStep, LbfgsConfig, LineSearch, LocalSolver, Participation, SpectralSummary,
    TauSchedule,
};
use serde_json::{json, Value};

use crate::config::{Algorithm, ExperimentConfig, ParamMode, TauPlan};
use crate::error::{HarnessError, Result};
use crate::problem::{build_problem, Problem};

pub const CSV_HEADER: &str = "round,V_t,rel_err,rel_err_graph,acc,comms,time_s,phi_drift,active";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Absent for algorithms without duals.
    pub v: Option<f64>,
    pub rel_err: f64,
    pub rel_err_graph: f64,
    pub acc: Option<f64>,
    /// Cumulative.
    pub comms: u64,
    /// Cumulative algorithm time, excluding metric evaluation.
    pub time_s: Option<f64>,
    pub phi_drift: Option<f64>,
    pub active: usize,
}

fn real(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl RoundRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            real(self.v),
            real(Some(self.rel_err)),
            real(Some(self.rel_err_graph)),
            real(self.acc),
            self.comms,
            real(self.time_s),
            real(self.phi_drift),
            self.active
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<RoundRecord>,
    /// Smallest local iteration count used in each executed round.
    pub tau_per_round: Vec<usize>,
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.records.last()
    }

    /// Mean of `V_t` over the records in the final `fraction` of rounds.
    pub fn mean_v_tail(&self, fraction: f64) -> Option<f64> {
        let last = self.last()?.round;
        let start = last as f64 * (1.0 - fraction);
        let tail: Vec<f64> = self.records.iter().filter(|r| r.round as f64 > start).filter_map(|r| r.v).collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// First record with `rel_err ≤ eps`.
    pub fn first_below(&self, eps: f64) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.rel_err <= eps)
    }

    /// First record with `acc ≥ target`.
    pub fn first_accuracy(&self, target: f64) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.acc.is_some_and(|a| a >= target))
    }
}

/// Parameters actually used by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub lipschitz: f64,
    pub mu_z: f64,
    pub mu_y: f64,
    pub tau: TauSchedule,
    pub contraction: Option<f64>,
    pub gt_step: Option<f64>,
    pub spectral: SpectralSummary,
}

pub struct RunOutput {
    pub trace: RunTrace,
    pub summary: Value,
    pub resolved: Resolved,
    pub theory: Option<std::result::Result<TheoryReport, String>>,
    pub final_models: Vec<Vec<f64>>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        self.trace.to_csv()
    }
}

fn local_solver(cfg: &ExperimentConfig, lipschitz: f64) -> LocalSolver<f64> {
    match cfg.algorithm {
        Algorithm::CadenGd => LocalSolver::GradientDescent(match cfg.gd_step {
            crate::config::Coef::Auto => GdStep::InverseSmoothness { lipschitz },
            crate::config::Coef::Value(v) => GdStep::Fixed(v),
        }),
        _ => LocalSolver::Lbfgs(LbfgsConfig {
            memory: cfg.memory,
            line_search: if cfg.secant_line_search { LineSearch::Secant } else { LineSearch::armijo() },
        }),
    }
}

/// Worst per-agent contraction of the initial local subproblems.
pub fn probe_contraction(problem: &Problem, mu_z: f64, probe_iters: usize, solver: &LocalSolver<f64>) -> Result<f64> {
    let states = init_states(&problem.losses, &problem.topology, &problem.x0)?;
    let mut worst = 0.0f64;
    for (i, f) in problem.losses.iter().enumerate() {
        let sub = local_subproblem(i, &states, f, mu_z)?;
        worst = worst.max(estimate_contraction(&sub, &problem.x0[i], probe_iters, solver)?);
    }
    Ok(worst)
}

fn tau_schedule(cfg: &ExperimentConfig) -> TauSchedule {
    match cfg.tau_plan {
        TauPlan::Constant => TauSchedule::Constant(cfg.tau),
        TauPlan::Reduced { switch_round, after } => TauSchedule::Reduced { initial: cfg.tau, switch_round, after },
    }
}

fn theory_json(report: &Option<std::result::Result<TheoryReport, String>>, inputs: Option<&TheoryInputs>, e0: f64) -> Value {
    let Some(report) = report else {
        return json!({ "status": "not_applicable" });
    };
    let mut v = match report {
        Err(msg) => json!({ "status": "error", "message": msg }),
        Ok(rep) => {
            let c = rep.conditions();
            let mut v = json!({
                "conditions": {
                    "mu_z_ok": c.mu_z_ok, "mu_y_ok": c.mu_y_ok, "tau_ok": c.tau_ok,
                    "chat1_ok": c.chat1_ok, "chat4_ok": c.chat4_ok,
                    "c3_positive": c.c3_positive, "c4_positive": c.c4_positive,
                },
                "failures": c.failures(),
            });
            match rep {
                TheoryReport::Constants(k) => {
                    v["status"] = json!("constants");
                    v["C"] = json!(k.c);
                    v["Chat"] = json!(k.chat);
                }
                TheoryReport::Violation(viol) => {
                    v["status"] = json!("violation");
                    v["Chat"] = json!(viol.chat);
                    v["chat4_d2"] = json!(viol.chat4_d2);
                }
            }
            v
        }
    };
    if let Some(i) = inputs {
        v["inputs"] = json!({
            "lipschitz": i.lipschitz, "p_min": i.p_min, "r": i.r, "tau": i.tau, "mu_z": i.mu_z, "mu_y": i.mu_y,
            "lambda_max": i.spectral.lambda_max, "lambda_min": i.spectral.lambda_min, "d_max": i.spectral.d_max,
            "r_tau_bound": i.r_tau_bound(),
        });
    }
    v["e0"] = json!(e0);
    v
}

fn threshold_json(trace: &RunTrace, cfg: &ExperimentConfig) -> Value {
    let entry = |r: Option<&RoundRecord>| match r {
        Some(r) => json!({ "round": r.round, "comms": r.comms, "time_s": r.time_s }),
        None => json!({ "round": null, "comms": null, "time_s": null }),
    };
    let rel: Vec<Value> = cfg
        .thresholds
        .iter()
        .map(|&e| {
            let mut v = entry(trace.first_below(e));
            v["rel_err_le"] = json!(e);
            v
        })
        .collect();
    let acc: Vec<Value> = cfg
        .acc_thresholds
        .iter()
        .map(|&a| {
            let mut v = entry(trace.first_accuracy(a));
            v["acc_ge"] = json!(a);
            v
        })
        .collect();
    json!({ "rel_err": rel, "accuracy": acc })
}

struct Recorder<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    trace: RunTrace,
    elapsed: f64,
}

impl Recorder<'_> {
    fn due(&self, round: usize) -> bool {
        round % self.cfg.metrics_every == 0 || round == self.cfg.rounds
    }

    fn record(&mut self, round: usize, models: &[Vec<f64>], v: Option<f64>, drift: Option<f64>, comms: u64, active: usize) {
        let p = self.problem;
        let acc = match (&p.classifier, &p.test_data) {
            (Some(c), Some(t)) => test_accuracy(c, models, t),
            _ => None,
        };
        self.trace.records.push(RoundRecord {
            round,
            v,
            rel_err: relative_error(models, &p.losses),
            rel_err_graph: relative_error_graph(models, &p.losses, &p.topology),
            acc,
            comms,
            time_s: self.cfg.wall_time.then_some(self.elapsed),
            phi_drift: drift,
            active,
        });
    }
}

fn write_outputs(out_dir: Option<&Path>, csv: &str, summary: &Value) -> Result<()> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), csv)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)? + "\n")?;
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    run_on_problem(cfg, &problem, out_dir)
}

/// Runs `cfg` on an already built problem.
pub fn run_on_problem(cfg: &ExperimentConfig, problem: &Problem, out_dir: Option<&Path>) -> Result<RunOutput> {
    let topo = &problem.topology;
    let m = topo.num_agents();
    let spectral = topo.laplacian_spectrum()?;
    let lipschitz = problem.lipschitz;
    let solver = local_solver(cfg, lipschitz);
    let mu_z0 = cfg.mu_z.or(2.0 * lipschitz + 1.0);

    let contraction = match cfg.algorithm {
        Algorithm::Gt => None,
        _ => match probe_contraction(problem, mu_z0, cfg.contraction_probe, &solver) {
            Ok(r) => Some(r),
            Err(e) if cfg.mode == ParamMode::Theory => return Err(e),
            Err(e) => {
                log::warn!("contraction probe failed: {e}");
                None
            }
        },
    };

    let (mu_z, mu_y, tau) = match (cfg.mode, cfg.algorithm) {
        (ParamMode::Theory, Algorithm::Caden | Algorithm::CadenGd) => {
            let r = contraction.unwrap_or(1.0);
            let choice = select_parameters(lipschitz, &spectral, cfg.participation, r)?;
            (choice.mu_z, choice.mu_y, TauSchedule::Constant(choice.tau))
        }
        _ => (mu_z0, cfg.mu_y.or(mu_z0), tau_schedule(cfg)),
    };

    let (theory, inputs, e0) = if cfg.algorithm == Algorithm::Gt {
        (None, None, 0.0)
    } else {
        let e0 = initial_error_e0(topo, &problem.losses, &problem.x0, mu_z)?;
        let tau_min = tau.min_tau(usize::MAX, m).min(tau.min_tau(0, m));
        let inputs = contraction.map(|r| TheoryInputs {
            lipschitz,
            spectral,
            p_min: cfg.participation,
            r,
            tau: tau_min,
            mu_z,
            mu_y,
        });
        let report = match &inputs {
            Some(i) => compute_constants(i).map_err(|e| e.to_string()),
            None => Err("no contraction estimate".to_string()),
        };
        (Some(report), inputs, e0)
    };

    let mut rec = Recorder { cfg, problem, trace: RunTrace::default(), elapsed: 0.0 };
    let mut gt_step = None;
    let mut failed_searches = 0usize;

    let outcome: std::result::Result<Vec<Vec<f64>>, (usize, CadenError)> = match cfg.algorithm {
        Algorithm::Caden | Algorithm::CadenGd => {
            let config = CadenConfig {
                mu_z,
                mu_y,
                tau: tau.clone(),
                participation: if cfg.participation >= 1.0 {
                    Participation::Full
                } else {
                    Participation::Uniform(cfg.participation)
                },
                solver,
                seed: cfg.seed,
            };
            let mut run = Caden::new(topo, &problem.losses, config, &problem.x0)?;
            rec.record(0, &run.models(), Some(lyapunov_v(run.states(), &problem.losses, topo)), Some(phi_drift(run.states())), 0, 0);
            let mut err = None;
            for t in 0..cfg.rounds {
                let start = Instant::now();
                let step = run.step();
                rec.elapsed += start.elapsed().as_secs_f64();
                match step {
                    Ok(summary) => {
                        failed_searches += summary.solves.iter().map(|s| s.failed_line_searches).sum::<usize>();
                        rec.trace.tau_per_round.push(tau.min_tau(t, m));
                        log::debug!("round {} tau {} active {}", t + 1, tau.min_tau(t, m), summary.active_count());
                        if rec.due(t + 1) {
                            let st = run.states();
                            rec.record(
                                t + 1,
                                &run.models(),
                                Some(lyapunov_v(st, &problem.losses, topo)),
                                Some(phi_drift(st)),
                                run.communications(),
                                summary.active_count(),
                            );
                        }
                    }
                    Err(e) => {
                        err = Some((t, e));
                        break;
                    }
                }
            }
            match err {
                Some(e) => Err(e),
                None => Ok(run.models()),
            }
        }
        Algorithm::Gt => {
            let step = match cfg.gt_step {
                crate::config::Coef::Value(v) => v,
                crate::config::Coef::Auto => tune_gt_step(topo, &problem.losses, &problem.x0, cfg.gt_tune_rounds, &GT_STEP_GRID, |x| {
                    relative_error(x, &problem.losses)
                })?,
            };
            gt_step = Some(step);
            let w = metropolis_weights(topo);
            let mut st = GtState::new(&problem.losses, &problem.x0)?;
            let mut comms = 0u64;
            rec.record(0, &st.x, None, None, 0, 0);
            let mut err = None;
            for t in 0..cfg.rounds {
                let start = Instant::now();
                let r = gt_round(&mut st, topo, &w, &problem.losses, step, &mut comms);
                rec.elapsed += start.elapsed().as_secs_f64();
                if let Err(e) = r {
                    err = Some((t, e));
                    break;
                }
                rec.trace.tau_per_round.push(1);
                if rec.due(t + 1) {
                    rec.record(t + 1, &st.x, None, None, comms, m);
                }
            }
            match err {
                Some(e) => Err(e),
                None => Ok(st.x),
            }
        }
    };

    let resolved = Resolved { lipschitz, mu_z, mu_y, tau: tau.clone(), contraction, gt_step, spectral };
    let trace = rec.trace;
    let mut summary = json!({
        "config": cfg.to_map(),
        "algorithm": cfg.algorithm.name(),
        "topology": {
            "m": m, "edges": topo.num_edges(), "resamples": topo.resamples(),
            "lambda_max": spectral.lambda_max, "lambda_min": spectral.lambda_min, "d_max": spectral.d_max,
        },
        "lipschitz": lipschitz,
        "lipschitz_per_agent": problem.lipschitz_per_agent,
        "parameters": {
            "mode": match cfg.mode { ParamMode::Practice => "practice", ParamMode::Theory => "theory" },
            "mu_z": mu_z, "mu_y": mu_y, "tau": format!("{tau:?}"), "contraction": contraction, "gt_step": gt_step,
        },
        "theory": theory_json(&theory, inputs.as_ref(), e0),
        "thresholds": threshold_json(&trace, cfg),
        "tau_per_round": trace.tau_per_round,
        "failed_line_searches": failed_searches,
        "final": trace.last().map(|r| json!({
            "round": r.round, "V_t": r.v, "rel_err": r.rel_err, "rel_err_graph": r.rel_err_graph,
            "acc": r.acc, "comms": r.comms, "time_s": r.time_s, "phi_drift": r.phi_drift,
        })),
    });

    let csv = trace.to_csv();
    match outcome {
        Ok(final_models) => {
            write_outputs(out_dir, &csv, &summary)?;
            Ok(RunOutput { trace, summary, resolved, theory, final_models })
        }
        Err((rounds_completed, source)) => {
            summary["error"] = json!({ "rounds_completed": rounds_completed, "message": source.to_string() });
            write_outputs(out_dir, &csv, &summary)?;
            Err(HarnessError::Aborted { rounds_completed, source })
        }
    }
}

/// Human-readable one-line result.
pub fn describe(out: &RunOutput) -> String {
    let mut s = String::new();
    if let Some(r) = out.trace.last() {
        let _ = write!(s, "round {} rel_err {:e}", r.round, r.rel_err);
        if let Some(v) = r.v {
            let _ = write!(s, " V_t {v:e}");
        }
        if let Some(a) = r.acc {
            let _ = write!(s, " acc {a:.4}");
        }
        let _ = write!(s, " comms {}", r.comms);
    }
    s
}
