use thiserror::Error;

use crate::model::{NodeId, ValidationReport};

/// Errors raised while building or loading a market model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("start time {start} exceeds horizon {horizon}")]
    StartAfterHorizon { start: i64, horizon: i64 },
    #[error("model has no nodes")]
    Empty,
    #[error("node ids must be exactly 0..{count}; offending id {id}")]
    NonDenseIds { id: usize, count: usize },
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("expected exactly one root node, found {0}")]
    RootCount(usize),
    #[error("root node {node} has time {time}, expected start time {start}")]
    RootTime { node: NodeId, time: i64, start: i64 },
    #[error("node {node} references missing parent {parent}")]
    DanglingReference { node: NodeId, parent: NodeId },
    #[error("node {node} has time {time} but its parent is at time {parent_time}")]
    LevelMismatch { node: NodeId, time: i64, parent_time: i64 },
    #[error("node {node} has time {time} beyond horizon {horizon}")]
    BeyondHorizon { node: NodeId, time: i64, horizon: i64 },
    #[error("node {node} at time {time} < horizon has no children")]
    MissingChildren { node: NodeId, time: i64 },
    #[error("node {node}: transition probability {value} outside (0, 1]")]
    ProbabilityOutOfRange { node: NodeId, value: f64 },
    #[error("children of node {node} have probabilities summing to {sum}")]
    ProbabilitySum { node: NodeId, sum: f64 },
    #[error("node {node}: {field} = {value} must be strictly positive and finite")]
    NonPositive { node: NodeId, field: &'static str, value: f64 },
    #[error("step {step}: {reason}")]
    InvalidStep { step: i64, reason: String },
    #[error("expanded tree would have {count} nodes, above the cap of {cap}")]
    TooManyNodes { count: u128, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model violates the structural assumption: {0}")]
    Validation(ValidationReport),
}

/// Errors from the backward recursion and closed forms.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("recursion denominator {value:e} at node {node} is below the guard {guard:e}; model is marginal or unvalidated")]
    DenominatorTooSmall { node: NodeId, value: f64, guard: f64 },
    #[error("recursion produced Y = {value:e} outside (0, 1/2] at node {node}")]
    OutOfRange { node: NodeId, value: f64 },
    #[error("recursion denominator {value:e} at step {step} is below the guard")]
    StepDenominator { step: i64, value: f64 },
    #[error("step {step}: beta^2 = {beta_sq} must be below eta = {eta}")]
    ClosedFormDomain { step: usize, beta_sq: f64, eta: f64 },
    #[error("beta and eta sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("node {0} is terminal; the requested quantity is only defined before the horizon")]
    TerminalNode(NodeId),
    #[error("Y field does not match the tree ({0})")]
    FieldMismatch(String),
}

/// Errors from strategy generation and evaluation.
#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("trade map has {got} entries but the tree has {expected} nodes")]
    NonAdapted { got: usize, expected: usize },
    #[error("position {residual:e} left open at leaf {leaf}")]
    PositionNotClosed { leaf: NodeId, residual: f64 },
    #[error("deviation-position ratio at node {0} is 0/0")]
    IndeterminateRatio(NodeId),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Errors from classifications and long-time limits.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("internal consistency check failed at {location}: {detail}")]
    ConsistencyMismatch { location: String, detail: String },
    #[error("rejected parameters: {0}")]
    InvalidParameters(String),
    #[error("fixed-point iteration did not converge within {max_iter} iterations (residual {residual:e})")]
    NoConvergence { max_iter: u64, residual: f64 },
    #[error("alternating subsequence limits coincide ({0:e}); inputs do not produce an alternating regime")]
    LimitsCoincide(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Errors from the brute-force and Monte Carlo oracles.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle guard: {0}")]
    Guard(String),
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("strategy leaves position {residual:e} open at leaf {leaf}")]
    NonClosing { leaf: NodeId, residual: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}
