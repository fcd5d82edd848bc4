use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::pimi::PimiModel;
use crate::model::tree::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

/// Strict margin below one required of `E_n[beta^2 / eta]`.
pub const STRUCTURAL_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Node(NodeId),
    Step(i64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Node(id) => write!(f, "node {id}"),
            Location::Step(t) => write!(f, "step {t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `E_n[beta^2 / eta] < 1`
    StructuralAssumption,
    PositiveBeta,
    PositiveGamma,
    PositiveEta,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::StructuralAssumption => "structural assumption E[beta^2/eta] < 1",
            Rule::PositiveBeta => "beta > 0",
            Rule::PositiveGamma => "gamma > 0",
            Rule::PositiveEta => "eta > 0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub location: Location,
    pub rule: Rule,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self { ok: violations.is_empty(), violations }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {} violated (value {})", v.location, v.rule, v.value)?;
        }
        Ok(())
    }
}

/// `E_n[beta_{n+1}^2 / eta_{n+1}]` at a non-terminal node, summed over children in ascending id order.
pub fn structural_moment<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId) -> T {
    let gamma = tree.node(node).gamma;
    tree.children(node).fold(T::zero(), |acc, c| acc + c.prob * c.beta * c.beta * gamma / c.gamma)
}

/// Checks positivity and the convexity assumption at every node. Failures are reported, not raised.
pub fn validate<T: Scalar>(tree: &ScenarioTree<T>) -> ValidationReport {
    let bound = T::one() - T::lit(STRUCTURAL_MARGIN);
    let mut violations = Vec::new();
    for node in tree.nodes() {
        if !(node.beta > T::zero()) {
            violations.push(Violation { location: Location::Node(node.id), rule: Rule::PositiveBeta, value: node.beta.as_f64() });
        }
        if !(node.gamma > T::zero()) {
            violations.push(Violation { location: Location::Node(node.id), rule: Rule::PositiveGamma, value: node.gamma.as_f64() });
        }
        if !tree.is_terminal(node.id) {
            let m = structural_moment(tree, node.id);
            if !(m < bound) {
                violations.push(Violation {
                    location: Location::Node(node.id),
                    rule: Rule::StructuralAssumption,
                    value: m.as_f64(),
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// Per-step version of [`validate`] for independent-increment models.
pub fn validate_pimi<T: Scalar>(model: &PimiModel<T>) -> ValidationReport {
    let bound = T::one() - T::lit(STRUCTURAL_MARGIN);
    let mut violations = Vec::new();
    for t in model.start() + 1..=model.horizon() {
        for a in model.step(t) {
            if !(a.beta > T::zero()) {
                violations.push(Violation { location: Location::Step(t), rule: Rule::PositiveBeta, value: a.beta.as_f64() });
            }
            if !(a.eta > T::zero()) {
                violations.push(Violation { location: Location::Step(t), rule: Rule::PositiveEta, value: a.eta.as_f64() });
            }
        }
        let alpha = model.moments(t).alpha;
        if !(alpha < bound) {
            violations.push(Violation { location: Location::Step(t), rule: Rule::StructuralAssumption, value: alpha.as_f64() });
        }
    }
    ValidationReport::from_violations(violations)
}
