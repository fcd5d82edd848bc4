//! Optimal strategies, cost accounting along the tree and the deviation-position ratio.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{local_moments, YField};
use crate::error::{EngineError, ExecutionError};
use crate::model::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

/// Residual position tolerated at a leaf when closure is required rather than enforced.
pub const CLOSURE_TOL: f64 = 1e-12;

/// Optimal trade at `node` in state `(x, d)`: `K (x - d/gamma) - d/gamma`, and `-x` at the horizon.
pub fn optimal_trade<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId, field: &YField<T>, x: T, d: T) -> T {
    if tree.is_terminal(node) {
        return -x;
    }
    let gamma = tree.node(node).gamma;
    let k = local_moments(tree, field, node).feedback();
    k * (x - d / gamma) - d / gamma
}

/// Trades and resulting state at every node for a fixed start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyField<T> {
    pub root: NodeId,
    pub x: T,
    pub d: T,
    /// Indexed by node id.
    pub trade: Vec<T>,
    /// Position after the node's trade.
    pub position_after: Vec<T>,
    /// Deviation just before the node's trade.
    pub deviation_before: Vec<T>,
}

/// Forward sweep of the optimal feedback rule from the root state `(x, d)`.
pub fn generate_strategy<T: Scalar>(
    tree: &ScenarioTree<T>,
    field: &YField<T>,
    x: T,
    d: T,
) -> Result<StrategyField<T>, EngineError> {
    field.check_against(tree)?;
    let n = tree.len();
    let mut trade = vec![T::zero(); n];
    let mut position_after = vec![T::zero(); n];
    let mut deviation_before = vec![T::zero(); n];
    for t in tree.start()..=tree.horizon() {
        for &id in tree.level(t) {
            let node = tree.node(id);
            let (pos, dev) = match node.parent {
                None => (x, d),
                Some(p) => {
                    let parent_gamma = tree.node(p).gamma;
                    (position_after[p], (deviation_before[p] + parent_gamma * trade[p]) * node.beta)
                }
            };
            let xi = optimal_trade(tree, id, field, pos, dev);
            trade[id] = xi;
            position_after[id] = if tree.is_terminal(id) { T::zero() } else { pos + xi };
            deviation_before[id] = dev;
        }
    }
    Ok(StrategyField { root: tree.root(), x, d, trade, position_after, deviation_before })
}

/// How leaf trades of a user strategy are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafClosure {
    /// Replace the leaf trade with `-X` so the position is always closed.
    #[default]
    Override,
    /// Use the given leaf trades and reject the strategy if a position stays open.
    Require,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCost<T> {
    pub leaf: NodeId,
    pub probability: T,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport<T> {
    pub expected_cost: T,
    pub per_leaf: Vec<LeafCost<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_overlay_offset: Option<T>,
}

/// Exact expected execution cost of a per-node trade map started in `(x, d)`.
///
/// The realized cost along a path is `sum (D_- + gamma xi / 2) xi`; the expectation
/// sums leaves in ascending id order.
pub fn evaluate_strategy<T: Scalar>(
    tree: &ScenarioTree<T>,
    trades: &[T],
    x: T,
    d: T,
    closure: LeafClosure,
) -> Result<CostReport<T>, ExecutionError> {
    if trades.len() != tree.len() {
        return Err(ExecutionError::NonAdapted { got: trades.len(), expected: tree.len() });
    }
    let n = tree.len();
    let mut position = vec![T::zero(); n];
    let mut deviation = vec![T::zero(); n];
    let mut cost = vec![T::zero(); n];
    let mut probability = vec![T::one(); n];
    let mut per_leaf = Vec::new();
    for t in tree.start()..=tree.horizon() {
        for &id in tree.level(t) {
            let node = tree.node(id);
            let (pos, dev, acc, prob) = match node.parent {
                None => (x, d, T::zero(), T::one()),
                Some(p) => (position[p], deviation[p] * node.beta, cost[p], probability[p] * node.prob),
            };
            let mut xi = trades[id];
            if tree.is_terminal(id) {
                match closure {
                    LeafClosure::Override => xi = -pos,
                    LeafClosure::Require => {
                        let residual = pos + xi;
                        let scale = T::one().max(pos.abs()).max(xi.abs());
                        if residual.abs() > T::lit(CLOSURE_TOL) * scale {
                            return Err(ExecutionError::PositionNotClosed { leaf: id, residual: residual.as_f64() });
                        }
                    }
                }
            }
            let gamma = node.gamma;
            cost[id] = acc + (dev + gamma * xi * T::half()) * xi;
            position[id] = pos + xi;
            deviation[id] = dev + gamma * xi;
            probability[id] = prob;
            if tree.is_terminal(id) {
                per_leaf.push(LeafCost { leaf: id, probability: prob, cost: cost[id] });
            }
        }
    }
    let expected_cost = per_leaf.iter().map(|l| l.probability * l.cost).sum();
    Ok(CostReport { expected_cost, per_leaf, price_overlay_offset: None })
}

/// Cost of a strategy field produced by [`generate_strategy`].
pub fn evaluate_field<T: Scalar>(tree: &ScenarioTree<T>, field: &StrategyField<T>) -> Result<CostReport<T>, ExecutionError> {
    evaluate_strategy(tree, &field.trade, field.x, field.d, LeafClosure::Require)
}

/// Adds the expected contribution `-x S` of the unaffected price process.
pub fn overlay_unaffected_price<T: Scalar>(report: &CostReport<T>, s_root: T, x: T) -> CostReport<T> {
    CostReport { price_overlay_offset: Some(T::zero() - x * s_root), ..report.clone() }
}

/// Ratio of deviation to position right after an optimal trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio<T> {
    Finite(T),
    /// The optimal trade closes the position (always the case at the horizon).
    Infinite,
}

impl<T: Serialize> Serialize for Ratio<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(v) => v.serialize(serializer),
            Ratio::Infinite => serializer.serialize_str("INF"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Ratio<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Finite(T),
            Tag(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Finite(v) => Ok(Ratio::Finite(v)),
            Repr::Tag(s) if s == "INF" => Ok(Ratio::Infinite),
            Repr::Tag(s) => Err(serde::de::Error::custom(format!("expected a number or \"INF\", got {s:?}"))),
        }
    }
}

impl<T: std::fmt::Display> std::fmt::Display for Ratio<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v}"),
            Ratio::Infinite => f.write_str("INF"),
        }
    }
}

/// `z = gamma E[Y'(beta - eta)] / E[(Y' - 1/2) beta^2/eta - Y' beta + 1/2]`.
///
/// The denominator is treated as zero when its magnitude is at most `zero_tol`.
pub fn deviation_position_ratio<T: Scalar>(
    tree: &ScenarioTree<T>,
    node: NodeId,
    field: &YField<T>,
    zero_tol: T,
) -> Result<Ratio<T>, ExecutionError> {
    if tree.is_terminal(node) {
        return Ok(Ratio::Infinite);
    }
    let m = local_moments(tree, field, node);
    let num = tree.node(node).gamma * m.s_num;
    if m.one_go.abs() <= zero_tol {
        if num.abs() <= zero_tol {
            return Err(ExecutionError::IndeterminateRatio(node));
        }
        return Ok(Ratio::Infinite);
    }
    Ok(Ratio::Finite(num / m.one_go))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{compute_y, value_function};
    use crate::model::PimiModel;

    fn chain(beta: &[f64], eta: &[f64]) -> ScenarioTree<f64> {
        PimiModel::deterministic(beta.len() as i64, 1.0, beta, eta).unwrap().to_tree().unwrap()
    }

    #[test]
    fn zero_state_is_absorbing() {
        let tree = chain(&[0.5, 0.8], &[1.0, 1.3]);
        let y = compute_y(&tree).unwrap();
        let s = generate_strategy(&tree, &y, 0.0, 0.0).unwrap();
        assert!(s.trade.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beta_equal_eta_waits_until_the_end() {
        let tree = chain(&[0.8, 0.9, 0.7], &[0.8, 0.9, 0.7]);
        let y = compute_y(&tree).unwrap();
        let s = generate_strategy(&tree, &y, 1.0, 0.0).unwrap();
        assert_eq!(&s.trade[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(s.trade[3], -1.0);
        assert_eq!(deviation_position_ratio(&tree, 2, &y, 1e-12).unwrap(), Ratio::Finite(0.0));
    }

    #[test]
    fn immediate_close_cost() {
        let tree = chain(&[0.5], &[1.0]);
        let report = evaluate_strategy(&tree, &[-2.0, 0.0], 2.0, 0.0, LeafClosure::Require).unwrap();
        assert_eq!(report.expected_cost, 2.0);
        assert!(matches!(
            evaluate_strategy(&tree, &[-1.0, 0.0], 2.0, 0.0, LeafClosure::Require),
            Err(ExecutionError::PositionNotClosed { leaf: 1, .. })
        ));
        assert!(matches!(
            evaluate_strategy(&tree, &[0.0], 2.0, 0.0, LeafClosure::Override),
            Err(ExecutionError::NonAdapted { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn optimal_cost_matches_value() {
        let tree = chain(&[0.5, 0.6], &[1.0, 1.1]);
        let y = compute_y(&tree).unwrap();
        let s = generate_strategy(&tree, &y, 1.5, -0.3).unwrap();
        let report = evaluate_field(&tree, &s).unwrap();
        assert!((report.expected_cost - value_function(&tree, 0, &y, 1.5, -0.3)).abs() < 1e-12);
    }

    #[test]
    fn overlay_offset() {
        let report = CostReport { expected_cost: 1.0, per_leaf: vec![], price_overlay_offset: None };
        assert_eq!(overlay_unaffected_price(&report, 10.0, 2.0).price_overlay_offset, Some(-20.0));
        assert_eq!(overlay_unaffected_price(&report, 10.0, 0.0).price_overlay_offset, Some(-0.0));
    }

    #[test]
    fn ratio_serializes_inf_tag() {
        assert_eq!(serde_json::to_string(&Ratio::<f64>::Infinite).unwrap(), "\"INF\"");
        assert_eq!(serde_json::to_string(&Ratio::Finite(0.5f64)).unwrap(), "0.5");
        assert_eq!(serde_json::from_str::<Ratio<f64>>("\"INF\"").unwrap(), Ratio::Infinite);
        assert_eq!(serde_json::from_str::<Ratio<f64>>("0.25").unwrap(), Ratio::Finite(0.25));
    }
}
