//! Builds the graph, local losses and starting point described by a config.

use caden::losses::{
    estimate_lipschitz, gaussian_blobs, load_idx_dataset, LipschitzEstimate, LipschitzProbe,
};
use caden::{CadenError, Dataset, LocalLoss, Logistic, Mlp, MlpShape, Quadratic, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DataSource, ExperimentConfig, LossSpec, TopologySpec};
use crate::error::{HarnessError, Result};

/// One agent's objective for any supported benchmark.
#[derive(Debug, Clone)]
pub enum BenchLoss {
    Quadratic(Quadratic<f64>),
    Logistic(Logistic<f64>),
    Mlp(Mlp<f64>),
}

impl LocalLoss<f64> for BenchLoss {
    fn dim(&self) -> usize {
        match self {
            BenchLoss::Quadratic(f) => f.dim(),
            BenchLoss::Logistic(f) => f.dim(),
            BenchLoss::Mlp(f) => f.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            BenchLoss::Quadratic(f) => f.value(x),
            BenchLoss::Logistic(f) => f.value(x),
            BenchLoss::Mlp(f) => f.value(x),
        }
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        match self {
            BenchLoss::Quadratic(f) => f.gradient_into(x, grad),
            BenchLoss::Logistic(f) => f.gradient_into(x, grad),
            BenchLoss::Mlp(f) => f.gradient_into(x, grad),
        }
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            BenchLoss::Quadratic(f) => f.value_and_gradient(x, grad),
            BenchLoss::Logistic(f) => f.value_and_gradient(x, grad),
            BenchLoss::Mlp(f) => f.value_and_gradient(x, grad),
        }
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> Option<usize> {
        match self {
            BenchLoss::Quadratic(f) => f.predict(x, features),
            BenchLoss::Logistic(f) => f.predict(x, features),
            BenchLoss::Mlp(f) => f.predict(x, features),
        }
    }
}

pub struct Problem {
    pub topology: Topology,
    pub losses: Vec<BenchLoss>,
    /// Loss over the held-out set, used only for its predictions.
    pub classifier: Option<BenchLoss>,
    pub test_data: Option<Dataset<f64>>,
    pub x0: Vec<Vec<f64>>,
    /// `max_i L̂_i`
    pub lipschitz: f64,
    pub lipschitz_per_agent: Vec<f64>,
}

pub fn build_topology(spec: &TopologySpec, seed: u64) -> Result<Topology> {
    Ok(match spec {
        TopologySpec::Random { m, edge_prob } => Topology::random(*m, *edge_prob, seed)?,
        TopologySpec::Complete { m } => Topology::complete(*m)?,
        TopologySpec::Ring { m } => Topology::ring(*m)?,
        TopologySpec::Path { m } => Topology::path(*m)?,
        TopologySpec::EdgeList { file } => Topology::from_edge_list(&std::fs::read_to_string(file)?)?,
    })
}

fn load_data(source: &DataSource, seed: u64) -> Result<Dataset<f64>> {
    match source {
        DataSource::Blobs(spec) => Ok(gaussian_blobs(*spec, seed)),
        DataSource::Idx { images, labels, limit } => {
            let data = load_idx_dataset(images, labels)?;
            Ok(if *limit > 0 && *limit < data.len() {
                data.subset(&(0..*limit).collect::<Vec<_>>())
            } else {
                data
            })
        }
    }
}

/// `½(x − a_i)ᵀ diag(q)(x − a_i)`, `q_k = κ^{k/(d−1)}`.
pub fn quadratic_losses(m: usize, dim: usize, kappa: f64, spread: f64, centers: Option<&[f64]>, seed: u64) -> Result<Vec<Quadratic<f64>>> {
    let q: Vec<f64> = (0..dim)
        .map(|k| if dim == 1 { 1.0 } else { kappa.powf(k as f64 / (dim - 1) as f64) })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|i| {
            let a = match centers {
                Some(c) => vec![c[i]; dim],
                None => (0..dim).map(|_| rng.random_range(-spread..=spread)).collect(),
            };
            Quadratic::diagonal(&q, a).map_err(HarnessError::from)
        })
        .collect()
}

fn classification(
    cfg: &ExperimentConfig,
    m: usize,
    data: &DataSource,
    make: impl Fn(Dataset<f64>) -> Result<BenchLoss>,
) -> Result<(Vec<BenchLoss>, BenchLoss, Dataset<f64>)> {
    let full = load_data(data, cfg.shard_seed())?;
    let (train, test) = full.train_test_split(cfg.test_fraction, cfg.shard_seed());
    let test = if test.is_empty() { train.clone() } else { test };
    let shards = train.partition(m, cfg.shard_seed())?;
    let losses = shards.into_iter().map(&make).collect::<Result<Vec<_>>>()?;
    Ok((losses, make(test.clone())?, test))
}

/// Scale of the perturbation used when the probe starts at a stationary point.
const RESTART_SCALE: f64 = 1e-2;

/// Probes from `init`; if every probe step vanishes (stationary start), probes
/// again from a seeded perturbation and keeps `init` as the starting model.
fn probe_agent(f: &BenchLoss, init: &[f64], probe: &LipschitzProbe<f64>, seed: u64) -> Result<LipschitzEstimate<f64>> {
    match estimate_lipschitz(f, init, probe) {
        Err(CadenError::LipschitzUndefined) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shifted: Vec<f64> = init.iter().map(|v| v + RESTART_SCALE * rng.random_range(-1.0..=1.0)).collect();
            let cold = LipschitzProbe { warm_epochs: 0, ..*probe };
            let est = estimate_lipschitz(f, &shifted, &cold)?;
            Ok(LipschitzEstimate { x_init: init.to_vec(), ..est })
        }
        other => other.map_err(HarnessError::from),
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let topology = build_topology(&cfg.topology, cfg.seed)?;
    let m = topology.num_agents();
    let (losses, classifier, test_data, init) = match &cfg.loss {
        LossSpec::Quadratic { dim, kappa, spread, centers } => {
            if centers.as_ref().is_some_and(|c| c.len() != m) {
                return Err(HarnessError::Invalid(format!("loss.centers needs {m} values")));
            }
            let qs = quadratic_losses(m, *dim, *kappa, *spread, centers.as_deref(), cfg.shard_seed())?;
            (qs.into_iter().map(BenchLoss::Quadratic).collect(), None, None, vec![0.0; *dim])
        }
        LossSpec::Logistic { data, l2 } => {
            let (losses, clf, test) =
                classification(cfg, m, data, |d| Ok(BenchLoss::Logistic(Logistic::new(d, *l2)?)))?;
            let dim = losses[0].dim();
            (losses, Some(clf), Some(test), vec![0.0; dim])
        }
        LossSpec::Mlp { data, hidden, l2 } => {
            let probe = load_data(data, cfg.shard_seed())?;
            let shape = MlpShape { inputs: probe.num_features(), hidden: *hidden, outputs: probe.num_classes() };
            let (losses, clf, test) = classification(cfg, m, data, |d| Ok(BenchLoss::Mlp(Mlp::new(shape, d, *l2)?)))?;
            let init = if cfg.zero_init { vec![0.0; shape.num_params()] } else { shape.init_params(cfg.seed) };
            (losses, Some(clf), Some(test), init)
        }
    };

    let probe = LipschitzProbe {
        warm_epochs: if cfg.warm_start { cfg.warm_epochs } else { 0 },
        warm_lr: cfg.warm_lr,
        probe_epochs: cfg.probe_epochs,
        probe_lr: cfg.probe_lr,
    };
    let estimates: Vec<LipschitzEstimate<f64>> = losses
        .iter()
        .enumerate()
        .map(|(i, f)| probe_agent(f, &init, &probe, cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        .collect::<Result<_>>()?;
    let lipschitz_per_agent: Vec<f64> = estimates.iter().map(|e| e.l_hat).collect();
    let lipschitz = lipschitz_per_agent.iter().copied().fold(0.0, f64::max);
    let x0 = if cfg.warm_start { estimates.into_iter().map(|e| e.x_init).collect() } else { vec![init; m] };
    Ok(Problem { topology, losses, classifier, test_data, x0, lipschitz, lipschitz_per_agent })
}
