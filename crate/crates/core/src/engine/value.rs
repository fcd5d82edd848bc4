use serde::{Deserialize, Serialize};

use crate::engine::recursion::YField;
use crate::error::EngineError;
use crate::model::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

/// Cost-to-go at a node as a quadratic in the trade: `a xi^2 + b xi + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> QuadCoeffs<T> {
    pub fn eval(&self, xi: T) -> T {
        (self.a * xi + self.b) * xi + self.c
    }

    pub fn minimizer(&self) -> T {
        -self.b / (T::two() * self.a)
    }

    pub fn minimum(&self) -> T {
        self.c - self.b * self.b / (T::lit(4.0) * self.a)
    }
}

/// Coefficients of the expected cost of trading `xi` at `node` in state `(x, d)`
/// and continuing optimally afterwards.
pub fn quad_coeffs<T: Scalar>(
    tree: &ScenarioTree<T>,
    node: NodeId,
    field: &YField<T>,
    x: T,
    d: T,
) -> Result<QuadCoeffs<T>, EngineError> {
    if tree.is_terminal(node) {
        return Err(EngineError::TerminalNode(node));
    }
    let half = T::half();
    let gamma = tree.node(node).gamma;
    let (mut a, mut b, mut c) = (T::zero(), T::zero(), T::zero());
    for child in tree.children(node) {
        let (p, beta, gc) = (child.prob, child.beta, child.gamma);
        let eta = gc / gamma;
        let y = field.get(tree, child.id);
        let r = beta * beta / eta;
        let shifted = beta * d - gc * x;
        a = a + p * (y / eta * (beta - eta) * (beta - eta) + (T::one() - r) * half);
        b = b + p * (d * (T::one() - r) + T::two() * y * (beta / eta - T::one()) * shifted);
        c = c + p * (y / gc * shifted * shifted - d * d * beta * beta / (T::two() * gc));
    }
    Ok(QuadCoeffs { a: gamma * a, b, c })
}

/// `V(x, d) = (Y/gamma)(d - gamma x)^2 - d^2/(2 gamma)`.
pub fn value_function<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId, field: &YField<T>, x: T, d: T) -> T {
    let gamma = tree.node(node).gamma;
    let y = field.get(tree, node);
    let dev = d - gamma * x;
    y / gamma * dev * dev - d * d / (T::two() * gamma)
}

/// `min_{k >= t(node)} E[gamma_k | node] / (2 gamma_node)`, from one pass over the subtree.
pub fn y_upper_bound<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId) -> T {
    let gamma = tree.node(node).gamma;
    let mut best = T::half();
    let mut frontier = vec![(node, T::one())];
    while !frontier.is_empty() {
        let expected: T = frontier.iter().map(|&(id, p)| p * tree.node(id).gamma).sum();
        best = best.min(expected / (T::two() * gamma));
        frontier = frontier
            .iter()
            .flat_map(|&(id, p)| tree.children(id).map(move |c| (c.id, p * c.prob)))
            .collect();
    }
    best
}
