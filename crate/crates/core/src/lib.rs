//! Decentralized consensus ADMM with inexact quasi-Newton local solves.
//!
//! Agents hold a model `x_i` and an aggregated dual `φ_i`; each round the
//! active agents approximately minimize a local augmented Lagrangian, broadcast
//! the result to their neighbors and take a dual ascent step. The crate also
//! provides the edge-variable reference form, a gradient-tracking baseline,
//! rate constants and the metrics used to compare them.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`); graph spectra and
//! rate constants are always `f64`.

pub mod baselines;
pub mod checkpoint;
pub mod edge_oracle;
pub mod engine;
pub mod error;
pub mod losses;
pub mod metrics;
mod scalar;
pub mod solvers;
pub mod theory;
pub mod topology;
pub mod vec_ops;

pub use checkpoint::Checkpoint;
pub use edge_oracle::{EdgeAdmm, EdgeState};
pub use engine::{AgentState, Caden, CadenConfig, Participation, RoundSummary, TauSchedule};
pub use error::{CadenError, Result};
pub use losses::{Dataset, LocalLoss, Logistic, Mlp, MlpShape, Quadratic};
pub use scalar::{ModelVector, Scalar};
pub use solvers::{GdStep, LbfgsConfig, LineSearch, LocalSolver, Objective, SolverReport};
pub use theory::{ParameterChoice, TheoryConstants, TheoryInputs, TheoryReport};
pub use topology::{SpectralSummary, Topology};

pub type CadenConfig64 = CadenConfig<f64>;
pub type CadenConfig32 = CadenConfig<f32>;
pub type AgentState64 = AgentState<f64>;
pub type Quadratic64 = Quadratic<f64>;
pub type Logistic64 = Logistic<f64>;
pub type Mlp64 = Mlp<f64>;
pub type Mlp32 = Mlp<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type LocalSolver64 = LocalSolver<f64>;
