//! Optimal trade execution in a limit order book with stochastic resilience
//! and stochastic depth, on finite scenario trees.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix `f64`, which is what the CLI and the file formats use.
//!
//! ```
//! use lobexec::{engine, model::PimiModel};
//!
//! let model = PimiModel::deterministic(1, 1.0, &[0.5], &[1.0]).unwrap();
//! let tree = model.to_tree().unwrap();
//! let y = engine::compute_y(&tree).unwrap();
//! assert_eq!(y.values[0], 0.375);
//! assert_eq!(engine::value_function(&tree, 0, &y, 1.0, 0.0), 0.375);
//! ```

// `!(a < b)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod execution;
pub mod model;
pub mod oracle;
pub mod report;
pub mod scalar;

pub use error::{AnalysisError, EngineError, ExecutionError, ModelError, OracleError};
pub use scalar::Scalar;

pub type Tree = model::ScenarioTree<f64>;
pub type Pimi = model::PimiModel<f64>;
pub type Field = engine::YField<f64>;
pub type Strategy = execution::StrategyField<f64>;
pub type Costs = execution::CostReport<f64>;
pub type Report = analysis::AnalysisReport<f64>;
pub type Limit = analysis::LimitResult<f64>;
