//! Classification of round trips and premature closure, cutoffs of independent-increment
//! models, and long-time limits of the homogeneous recursion.

use serde::{Deserialize, Serialize};

use crate::engine::{compute_y_pimi, local_moments, pimi_map, y_upper_bound, YField};
use crate::error::AnalysisError;
use crate::execution::{deviation_position_ratio, Ratio};
use crate::model::{Model, NodeId, PimiModel, ScenarioTree, StepMoments};
use crate::scalar::{approx_eq, Scalar};

/// Default tolerance for event equalities.
pub const EVENT_TOL: f64 = 1e-9;
/// Default tolerance and iteration cap for fixed-point iterations.
pub const LIMIT_TOL: f64 = 1e-12;
pub const LIMIT_MAX_ITER: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoundTrip {
    /// `Y < 1/2`: some round trip started from a non-zero deviation has negative expected cost.
    Profitable,
    None,
}

impl std::fmt::Display for RoundTrip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RoundTrip::Profitable => "PROFITABLE",
            RoundTrip::None => "NONE",
        })
    }
}

/// Labels every node by `|Y - 1/2| <= tol`, cross-checked against the
/// characterization `{Y = 1/2} = {E[Y'] = 1/2, E[beta'] = 1}` at non-terminal nodes.
pub fn classify_round_trips<T: Scalar>(
    tree: &ScenarioTree<T>,
    field: &YField<T>,
    tol: T,
) -> Result<Vec<RoundTrip>, AnalysisError> {
    field.check_against(tree)?;
    let mut labels = Vec::with_capacity(tree.len());
    for node in tree.nodes() {
        let y = field.get(tree, node.id);
        let none = approx_eq(y, T::half(), tol);
        if !tree.is_terminal(node.id) {
            let m = local_moments(tree, field, node.id);
            let characterized = approx_eq(m.e_y, T::half(), tol) && approx_eq(m.e_beta, T::one(), tol);
            if none != characterized {
                return Err(AnalysisError::ConsistencyMismatch {
                    location: format!("node {}", node.id),
                    detail: format!("Y = {y:e}, E[Y'] = {:e}, E[beta'] = {:e}", m.e_y, m.e_beta),
                });
            }
        }
        labels.push(if none { RoundTrip::None } else { RoundTrip::Profitable });
    }
    Ok(labels)
}

/// True where the optimal trade closes the position for every state. Always true at the horizon.
pub fn classify_premature_closure<T: Scalar>(
    tree: &ScenarioTree<T>,
    field: &YField<T>,
    tol: T,
) -> Result<Vec<bool>, AnalysisError> {
    field.check_against(tree)?;
    Ok(tree
        .nodes()
        .iter()
        .map(|n| tree.is_terminal(n.id) || approx_eq(local_moments(tree, field, n.id).one_go, T::zero(), tol))
        .collect())
}

/// Earliest time from which `Y` stays at `1/2` in an independent-increment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// `E[beta_N] != 1`: `Y < 1/2` at every time before the horizon.
    NoneBeforeHorizon,
    At(i64),
}

impl Cutoff {
    pub fn time(self, horizon: i64) -> i64 {
        match self {
            Cutoff::NoneBeforeHorizon => horizon,
            Cutoff::At(t) => t,
        }
    }
}

/// `n0 = min { n : E[beta_k] = 1 for all k in (n, N] }`, verified against the computed `Y`.
pub fn pimi_cutoff<T: Scalar>(model: &PimiModel<T>, tol: T) -> Result<Cutoff, AnalysisError> {
    let mut n0 = model.horizon();
    while n0 > model.start() && approx_eq(model.moments(n0).beta, T::one(), tol) {
        n0 -= 1;
    }
    let field = compute_y_pimi(model)?;
    for t in model.start()..=model.horizon() {
        let y = field.at_time(t).expect("field covers the model");
        let half = approx_eq(y, T::half(), tol);
        if half != (t >= n0) {
            return Err(AnalysisError::ConsistencyMismatch {
                location: format!("time {t}"),
                detail: format!("cutoff {n0} but Y = {y:e}"),
            });
        }
    }
    Ok(if n0 == model.horizon() { Cutoff::NoneBeforeHorizon } else { Cutoff::At(n0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LimitCase {
    ConstantHalf,
    Zero,
    Interior,
    Alternating,
    /// Step distributions follow no pattern with a computable limit.
    Undefined,
}

impl std::fmt::Display for LimitCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitCase::ConstantHalf => "CONSTANT_HALF",
            LimitCase::Zero => "ZERO",
            LimitCase::Interior => "INTERIOR",
            LimitCase::Alternating => "ALTERNATING",
            LimitCase::Undefined => "UNDEFINED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult<T> {
    pub case: LimitCase,
    /// One limit, or `[odd-time limit, even-time limit]` in the alternating case.
    pub values: Vec<T>,
    pub iterations: u64,
    pub residual: T,
    /// Whether the iteration reached the tolerance within the cap.
    pub converged: bool,
}

/// `g(y) = eta y - y^2 (beta - eta)^2 / (y (alpha - 2 beta + eta) + (1 - alpha)/2)`.
pub fn g<T: Scalar>(y: T, params: &StepMoments<T>) -> T {
    pimi_map(y, params)
}

/// Interior fixed point `(1 - alpha)(eta - 1) / (2 ((1 - alpha)(eta - 1) + (beta - 1)^2))`.
pub fn fixed_point<T: Scalar>(params: &StepMoments<T>) -> T {
    let s = (T::one() - params.alpha) * (params.eta - T::one());
    T::half() * s / (s + (params.beta - T::one()) * (params.beta - T::one()))
}

/// Rejects parameters no distribution can produce.
pub fn check_params<T: Scalar>(params: &StepMoments<T>) -> Result<(), AnalysisError> {
    let StepMoments { beta, eta, alpha } = *params;
    if !(beta > T::zero() && eta > T::zero() && alpha > T::zero()) || !(beta.is_finite() && eta.is_finite()) {
        return Err(AnalysisError::InvalidParameters(format!("({beta}, {eta}, {alpha}) must be positive")));
    }
    if !(alpha < T::one()) {
        return Err(AnalysisError::InvalidParameters(format!("alpha = {alpha} must be below 1")));
    }
    // Cauchy-Schwarz: E[beta]^2 <= E[beta^2/eta] E[eta]
    if beta * beta > alpha * eta * (T::one() + T::lit(1e-12)) {
        return Err(AnalysisError::InvalidParameters(format!(
            "beta^2/eta = {} exceeds alpha = {alpha}; no distribution has these moments",
            beta * beta / eta
        )));
    }
    Ok(())
}

/// Limit of `Y_n` as `n -> -infinity` when every step has moments `params`.
///
/// The case is read off the parameters; the value is confirmed by iterating `g`
/// from `1/2`, i.e. by running the recursion itself. In the zero case the
/// iteration may be too slow to reach `tol` (at `eta = 1` it decays sublinearly);
/// that is reported through `converged` rather than as an error.
pub fn long_time_limit<T: Scalar>(params: &StepMoments<T>, tol: T, max_iter: u64) -> Result<LimitResult<T>, AnalysisError> {
    check_params(params)?;
    let (case, limit) = if params.beta == T::one() {
        (LimitCase::ConstantHalf, T::half())
    } else if params.eta <= T::one() {
        (LimitCase::Zero, T::zero())
    } else {
        (LimitCase::Interior, fixed_point(params))
    };
    let mut y = T::half();
    let mut iterations = 0;
    while !((y - limit).abs() < tol) && iterations < max_iter {
        y = g(y, params);
        iterations += 1;
    }
    let residual = (y - limit).abs();
    let converged = residual < tol;
    if !converged && case != LimitCase::Zero {
        return Err(AnalysisError::NoConvergence { max_iter, residual: residual.as_f64() });
    }
    Ok(LimitResult { case, values: vec![limit], iterations, residual, converged })
}

/// Subsequence limits when the step moments alternate between `params_odd`
/// (steps ending at odd times) and `params_even`.
///
/// One parameter set must have `E[beta] = 1` and the other `E[beta] != 1`,
/// `E[eta] > 1`. Starting from `Y = 1/2` at an even horizon, odd-time values
/// are `g_even` of the following even-time value and vice versa.
pub fn alternating_limits<T: Scalar>(
    params_odd: &StepMoments<T>,
    params_even: &StepMoments<T>,
    tol: T,
    max_iter: u64,
) -> Result<LimitResult<T>, AnalysisError> {
    check_params(params_odd)?;
    check_params(params_even)?;
    let proper = |unit: &StepMoments<T>, other: &StepMoments<T>| {
        unit.beta == T::one() && other.beta != T::one() && other.eta > T::one()
    };
    if !(proper(params_odd, params_even) || proper(params_even, params_odd)) {
        return Err(AnalysisError::InvalidParameters(
            "one step must have E[beta] = 1 and the other E[beta] != 1 with E[eta] > 1".into(),
        ));
    }
    let mut even = T::half();
    let mut odd = g(even, params_even);
    let mut iterations = 0;
    let mut change = T::infinity();
    while !(change < tol) && iterations < max_iter {
        let next_even = g(odd, params_odd);
        let next_odd = g(next_even, params_even);
        change = (next_even - even).abs().max((next_odd - odd).abs());
        even = next_even;
        odd = next_odd;
        iterations += 1;
    }
    if !(change < tol) {
        return Err(AnalysisError::NoConvergence { max_iter, residual: change.as_f64() });
    }
    if (odd - even).abs() <= tol {
        return Err(AnalysisError::LimitsCoincide(odd.as_f64()));
    }
    let residual = (g(even, params_even) - odd).abs().max((g(odd, params_odd) - even).abs());
    Ok(LimitResult { case: LimitCase::Alternating, values: vec![odd, even], iterations, residual, converged: true })
}

/// `E[Y_t / gamma_t] - E[Y_t] E[1 / gamma_t]` over the nodes at time `t`.
pub fn covariance_y_inv_gamma<T: Scalar>(tree: &ScenarioTree<T>, field: &YField<T>, t: i64) -> T {
    let (mut e_yg, mut e_y, mut e_g) = (T::zero(), T::zero(), T::zero());
    for &id in tree.level(t) {
        let p = tree.path_probability(id);
        let y = field.get(tree, id);
        let inv = T::one() / tree.node(id).gamma;
        e_yg = e_yg + p * y * inv;
        e_y = e_y + p * y;
        e_g = e_g + p * inv;
    }
    e_yg - e_y * e_g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAnalysis<T> {
    pub node: NodeId,
    pub time: i64,
    pub gamma: T,
    pub y: T,
    pub round_trip: RoundTrip,
    pub one_go: bool,
    pub z: Ratio<T>,
    pub upper_bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport<T> {
    pub nodes: Vec<NodeAnalysis<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pimi_cutoff: Option<Cutoff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitResult<T>>,
}

/// Per-node classification of a tree.
pub fn analyze_tree<T: Scalar>(tree: &ScenarioTree<T>, field: &YField<T>, tol: T) -> Result<AnalysisReport<T>, AnalysisError> {
    let round_trips = classify_round_trips(tree, field, tol)?;
    let one_go = classify_premature_closure(tree, field, tol)?;
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| {
            let z = deviation_position_ratio(tree, n.id, field, tol).map_err(|e| AnalysisError::ConsistencyMismatch {
                location: format!("node {}", n.id),
                detail: e.to_string(),
            })?;
            Ok(NodeAnalysis {
                node: n.id,
                time: n.time,
                gamma: n.gamma,
                y: field.get(tree, n.id),
                round_trip: round_trips[n.id],
                one_go: one_go[n.id],
                z,
                upper_bound: y_upper_bound(tree, n.id),
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(AnalysisReport { nodes, pimi_cutoff: None, limit: None })
}

/// Limit of a homogeneous or two-periodic independent-increment model, if it has one.
pub fn pimi_limit<T: Scalar>(model: &PimiModel<T>, tol: T, max_iter: u64) -> Result<LimitResult<T>, AnalysisError> {
    let moments: Vec<StepMoments<T>> = (model.start() + 1..=model.horizon()).map(|t| model.moments(t)).collect();
    let undefined = LimitResult { case: LimitCase::Undefined, values: vec![], iterations: 0, residual: T::zero(), converged: false };
    let Some(first) = moments.first() else {
        return Ok(undefined);
    };
    if moments.iter().all(|m| m == first) {
        return long_time_limit(first, tol, max_iter);
    }
    let periodic = moments.len() >= 2 && moments.iter().enumerate().all(|(i, m)| m == &moments[i % 2]);
    if periodic {
        let (a, b) = (moments[0], moments[1]);
        let (odd, even) = if (model.start() + 1).rem_euclid(2) == 1 { (a, b) } else { (b, a) };
        if let Ok(result) = alternating_limits(&odd, &even, tol, max_iter) {
            return Ok(result);
        }
    }
    Ok(undefined)
}

/// Full report for a loaded model; independent-increment models also get cutoff and limit.
pub fn analyze_model<T: Scalar>(model: &Model<T>, field: &YField<T>, tol: T) -> Result<AnalysisReport<T>, AnalysisError> {
    let tree = model.tree().map_err(|e| AnalysisError::InvalidParameters(e.to_string()))?;
    let mut report = analyze_tree(&tree, field, tol)?;
    if let Some(pimi) = model.pimi() {
        report.pimi_cutoff = Some(pimi_cutoff(pimi, tol)?);
        report.limit = Some(pimi_limit(pimi, T::lit(LIMIT_TOL), LIMIT_MAX_ITER)?);
    }
    Ok(report)
}
