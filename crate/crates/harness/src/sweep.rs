//! Seed-averaged sweeps over one config key.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::run::{run_experiment, RunTrace};

/// Fraction of final rounds averaged for the tail statistic.
pub const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub seeds: Vec<u64>,
    pub traces: Vec<RunTrace>,
    /// Per-seed mean `V_t` over the final [`TAIL_FRACTION`] of rounds.
    pub tail_v: Vec<f64>,
    pub final_rel_err: Vec<f64>,
}

impl SweepPoint {
    pub fn mean_tail_v(&self) -> f64 {
        mean(&self.tail_v)
    }

    pub fn mean_final_rel_err(&self) -> f64 {
        mean(&self.final_rel_err)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub key: String,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// One row per swept value with seed-averaged statistics.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("value,seeds,mean_tail_V_t,mean_final_rel_err\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{:e},{:e}", p.value, p.seeds.len(), p.mean_tail_v(), p.mean_final_rel_err());
        }
        out
    }
}

/// Runs `base` with `key` set to each of `values`, once per seed; only `key`
/// and `seed` differ between runs. Per-run outputs go to `out_dir/<value>/seed<s>/`.
pub fn sweep(base: &ExperimentConfig, key: &str, values: &[String], seeds: &[u64], out_dir: Option<&Path>) -> Result<SweepReport> {
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let cfg = base.with(key, value)?;
        let mut point =
            SweepPoint { value: value.clone(), seeds: seeds.to_vec(), traces: vec![], tail_v: vec![], final_rel_err: vec![] };
        for &seed in seeds {
            let run_cfg = cfg.with("seed", &seed.to_string())?;
            let dir = out_dir.map(|d| d.join(format!("{key}={value}")).join(format!("seed{seed}")));
            let out = run_experiment(&run_cfg, dir.as_deref())?;
            point.tail_v.push(out.trace.mean_v_tail(TAIL_FRACTION).unwrap_or(f64::NAN));
            point.final_rel_err.push(out.trace.last().map_or(f64::NAN, |r| r.rel_err));
            point.traces.push(out.trace);
        }
        points.push(point);
    }
    let report = SweepReport { key: key.to_string(), points };
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join("sweep.csv"), report.summary_csv())?;
    }
    Ok(report)
}

/// [`sweep`] over `caden.participation`.
pub fn participation_sweep(base: &ExperimentConfig, p_list: &[f64], seeds: &[u64], out_dir: Option<&Path>) -> Result<SweepReport> {
    let values: Vec<String> = p_list.iter().map(f64::to_string).collect();
    sweep(base, "caden.participation", &values, seeds, out_dir)
}

/// Number of adjacent pairs where `values` increases, and the largest relative increase.
pub fn inversions(values: &[f64]) -> (usize, f64) {
    let mut count = 0;
    let mut worst = 0.0f64;
    for w in values.windows(2) {
        if w[1] > w[0] {
            count += 1;
            worst = worst.max((w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE));
        }
    }
    (count, worst)
}
