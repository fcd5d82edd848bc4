//! Constructive three-period models exhibiting premature closure and
//! profitable round trips despite unit mean resilience.
//!
//! All builders return trees on times `0, 1, 2` (horizon `N = 2`).

use crate::error::ModelError;
use crate::model::tree::{NodeSpec, ScenarioTree};
use crate::model::validate::validate;
use crate::scalar::Scalar;

const HORIZON: i64 = 2;

/// `Y_{N-1}` for a one-step continuation, `(E[eta] - E[beta]^2) / (2 E[eta - 2 beta + 1])`.
fn last_step_y<T: Scalar>(outcomes: &[(T, T, T)]) -> T {
    let (mut e_beta, mut e_eta) = (T::zero(), T::zero());
    for &(p, beta, eta) in outcomes {
        e_beta = e_beta + p * beta;
        e_eta = e_eta + p * eta;
    }
    (e_eta - e_beta * e_beta) / (T::two() * (e_eta - T::two() * e_beta + T::one()))
}

fn node<T: Scalar>(id: usize, time: i64, parent: Option<usize>, prob: T, beta: T, gamma: T) -> NodeSpec<T> {
    NodeSpec { id, time, parent, prob, beta, gamma }
}

fn checked<T: Scalar>(specs: Vec<NodeSpec<T>>) -> Result<ScenarioTree<T>, ModelError> {
    let tree = ScenarioTree::from_specs(HORIZON, 0, specs)?;
    let report = validate(&tree);
    if report.ok {
        Ok(tree)
    } else {
        Err(ModelError::Validation(report))
    }
}

/// Free parameter `a` of the deterministic premature-closure model.
pub fn premature_deterministic_a<T: Scalar>(y_last: T) -> T {
    T::half().min(T::half() * (T::half() - y_last) / y_last)
}

/// Deterministic chain where it is optimal to close the whole position at `N - 2`
/// and rebuild a position at `N - 1` whenever the deviation is non-zero.
///
/// Requires `gamma_last, gamma_prev > 0` and `beta_last` in `(0, sqrt(eta_N)) \ {1}`
/// with `eta_N = gamma_last / gamma_prev`.
pub fn build_example_premature_deterministic<T: Scalar>(
    gamma_last: T,
    gamma_prev: T,
    beta_last: T,
) -> Result<ScenarioTree<T>, ModelError> {
    if !(gamma_last > T::zero() && gamma_prev > T::zero()) {
        return Err(ModelError::InvalidParameter("impact values must be positive".into()));
    }
    let eta_last = gamma_last / gamma_prev;
    if !(beta_last > T::zero() && beta_last < eta_last.sqrt()) || beta_last == T::one() {
        return Err(ModelError::InvalidParameter(format!(
            "beta_N = {beta_last} must lie in (0, sqrt(eta_N) = {}) and differ from 1",
            eta_last.sqrt()
        )));
    }
    let y_last = last_step_y(&[(T::one(), beta_last, eta_last)]);
    let a = premature_deterministic_a(y_last);
    let ratio = a * y_last / (T::half() - y_last);
    let beta_prev = T::one() + a;
    // ratio = 1 - (1 + a)^2 / eta_{N-1}
    let eta_prev = beta_prev * beta_prev / (T::one() - ratio);
    let gamma_first = gamma_prev / eta_prev;
    checked(vec![
        node(0, 0, None, T::one(), T::one(), gamma_first),
        node(1, 1, Some(0), T::one(), beta_prev, gamma_prev),
        node(2, 2, Some(1), T::one(), beta_last, gamma_last),
    ])
}

/// Stochastic model with `(0, 1)`-valued resilience where closing in one go at
/// `N - 2` is optimal. `gamma_{N-1}` is `1/2` (probability `1 - p`, node 1) or `1`
/// (probability `p`, node 2); `gamma_N = gamma_{N-1}^2` and `beta_N = gamma_{N-1} / 2`.
pub fn build_example_premature_stochastic<T: Scalar>(p: T) -> Result<ScenarioTree<T>, ModelError> {
    if !(p > T::zero() && p < T::one()) {
        return Err(ModelError::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
    }
    let branches = [(T::one() - p, T::half()), (p, T::one())];

    let (mut e_y_over_g, mut e_y, mut e_inv_g) = (T::zero(), T::zero(), T::zero());
    let mut ys = [T::zero(); 2];
    for (i, &(prob, g)) in branches.iter().enumerate() {
        let y = last_step_y(&[(T::one(), g / T::two(), g * g / g)]);
        ys[i] = y;
        e_y_over_g = e_y_over_g + prob * y / g;
        e_y = e_y + prob * y;
        e_inv_g = e_inv_g + prob / g;
    }
    let lower = e_y_over_g / (e_y * e_inv_g);
    let beta_prev = (lower + T::one()) / T::two();

    let (mut num, mut den) = (T::zero(), T::zero());
    for (i, &(prob, g)) in branches.iter().enumerate() {
        num = num + prob * (T::half() - ys[i] * beta_prev);
        den = den + prob * (T::half() - ys[i]) * beta_prev * beta_prev / g;
    }
    let gamma_first = num / den;

    let mut specs = vec![node(0, 0, None, T::one(), T::one(), gamma_first)];
    for (i, &(prob, g)) in branches.iter().enumerate() {
        specs.push(node(1 + i, 1, Some(0), prob, beta_prev, g));
    }
    for (i, &(_, g)) in branches.iter().enumerate() {
        specs.push(node(3 + i, 2, Some(1 + i), T::one(), g / T::two(), g * g));
    }
    checked(specs)
}

/// Model with `E_{N-2}[beta_{N-1}] = 1` that still admits profitable round trips at `N - 2`.
///
/// `beta_{N-1}` takes `1 - a`, `1`, `1 + a` (probabilities `p/2`, `1 - p`, `p/2`, nodes 1, 2, 3)
/// and `beta_N = beta_{N-1}` on each branch. `gamma` is the deterministic impact at times 0, 1, 2.
pub fn build_example_roundtrip_on_unit_mean<T: Scalar>(a: T, p: T, gamma: [T; 3]) -> Result<ScenarioTree<T>, ModelError> {
    if !(a > T::zero() && a < T::one() && p > T::zero() && p < T::one()) {
        return Err(ModelError::InvalidParameter(format!("a = {a} and p = {p} must lie in (0, 1)")));
    }
    let outcomes = [(p / T::two(), T::one() - a), (T::one() - p, T::one()), (p / T::two(), T::one() + a)];
    let mut specs = vec![node(0, 0, None, T::one(), T::one(), gamma[0])];
    for (i, &(prob, beta)) in outcomes.iter().enumerate() {
        specs.push(node(1 + i, 1, Some(0), prob, beta, gamma[1]));
    }
    for (i, &(_, beta)) in outcomes.iter().enumerate() {
        specs.push(node(4 + i, 2, Some(1 + i), T::one(), beta, gamma[2]));
    }
    checked(specs)
}
