use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::model::{NodeId, PimiModel, ScenarioTree, StepMoments};
use crate::scalar::Scalar;

/// Levels with at least this many nodes are swept in parallel.
const PAR_LEVEL_MIN: usize = 2048;

/// Relative guard on the recursion denominator.
pub const DENOMINATOR_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum YMode {
    /// One value per node, indexed by node id.
    Tree,
    /// One value per time index `start..=horizon`.
    Pimi { start: i64 },
}

/// The process `Y`, attached to every node or to every time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YField<T> {
    pub mode: YMode,
    pub values: Vec<T>,
}

impl<T: Scalar> YField<T> {
    /// `Y` at a node of `tree`. In PIMI mode the node's time selects the value.
    pub fn get(&self, tree: &ScenarioTree<T>, id: NodeId) -> T {
        match self.mode {
            YMode::Tree => self.values[id],
            YMode::Pimi { start } => self.values[(tree.node(id).time - start) as usize],
        }
    }

    /// `Y_t` of a PIMI field; `None` in tree mode or out of range.
    pub fn at_time(&self, t: i64) -> Option<T> {
        match self.mode {
            YMode::Pimi { start } if t >= start => self.values.get((t - start) as usize).copied(),
            _ => None,
        }
    }

    /// Checks that the field can be read against `tree`.
    pub fn check_against(&self, tree: &ScenarioTree<T>) -> Result<(), EngineError> {
        match self.mode {
            YMode::Tree if self.values.len() != tree.len() => Err(EngineError::FieldMismatch(format!(
                "{} values for {} nodes",
                self.values.len(),
                tree.len()
            ))),
            YMode::Pimi { start } if start > tree.start() || start + self.values.len() as i64 <= tree.horizon() => {
                Err(EngineError::FieldMismatch(format!(
                    "times {start}..{} do not cover {}..={}",
                    start + self.values.len() as i64,
                    tree.start(),
                    tree.horizon()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Conditional moments at a non-terminal node, accumulated over children in a fixed order.
///
/// With `r = beta^2/eta` and `Y'` the child value:
/// `s_num = E[Y'(beta - eta)]`, `s_den = E[(Y'/eta)(beta - eta)^2 + (1 - r)/2]`,
/// `one_go = E[(Y' - 1/2) r - Y' beta + 1/2] = s_den + s_num`, `centred = E[(1/2 - Y') r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMoments<T> {
    pub prob_sum: T,
    pub e_beta: T,
    pub e_eta: T,
    pub e_y: T,
    pub e_eta_y: T,
    pub alpha: T,
    pub s_num: T,
    pub s_den: T,
    pub one_go: T,
    pub centred: T,
}

impl<T: Scalar> LocalMoments<T> {
    /// Accumulates `(prob, beta, eta, Y')` outcomes in iteration order.
    pub fn accumulate(outcomes: impl IntoIterator<Item = (T, T, T, T)>) -> Self {
        let half = T::half();
        let z = T::zero();
        let mut m = Self {
            prob_sum: z,
            e_beta: z,
            e_eta: z,
            e_y: z,
            e_eta_y: z,
            alpha: z,
            s_num: z,
            s_den: z,
            one_go: z,
            centred: z,
        };
        for (p, beta, eta, y) in outcomes {
            let r = beta * beta / eta;
            let diff = beta - eta;
            m.prob_sum = m.prob_sum + p;
            m.e_beta = m.e_beta + p * beta;
            m.e_eta = m.e_eta + p * eta;
            m.e_y = m.e_y + p * y;
            m.e_eta_y = m.e_eta_y + p * eta * y;
            m.alpha = m.alpha + p * r;
            m.s_num = m.s_num + p * y * diff;
            m.s_den = m.s_den + p * (y / eta * diff * diff + (T::one() - r) * half);
            m.one_go = m.one_go + p * ((y - half) * r - y * beta + half);
            m.centred = m.centred + p * (half - y) * r;
        }
        m
    }

    /// Moments at `node` of `tree` given a child-value lookup.
    pub fn at_node(tree: &ScenarioTree<T>, node: NodeId, y: impl Fn(NodeId) -> T) -> Self {
        let gamma = tree.node(node).gamma;
        Self::accumulate(tree.children(node).map(|c| (c.prob, c.beta, c.gamma / gamma, y(c.id))))
    }

    /// `Y` from the recursion written around `1/2`: `1/2 - E[(1/2 - Y') r] - one_go^2 / s_den`.
    ///
    /// Algebraically equal to [`Self::y_direct`]; this form never exceeds `1/2` in
    /// floating point and returns exactly `1/2` when `Y' = 1/2` and `E[beta] = 1`.
    pub fn y_centred(&self) -> T {
        T::half() - self.centred - self.one_go * self.one_go / self.s_den
    }

    /// `Y` as `E[eta Y'] - E[Y'(beta - eta)]^2 / s_den`.
    pub fn y_direct(&self) -> T {
        self.e_eta_y - self.s_num * self.s_num / self.s_den
    }

    /// Feedback coefficient `K = s_num / s_den` of the optimal trade.
    pub fn feedback(&self) -> T {
        self.s_num / self.s_den
    }

    fn guard_scale(&self) -> T {
        T::one().max(self.e_eta_y.abs()).max(self.alpha)
    }

    pub(crate) fn checked_y(&self, node: NodeId) -> Result<T, EngineError> {
        let guard = T::lit(DENOMINATOR_GUARD) * self.guard_scale();
        if !(self.s_den >= guard) {
            return Err(EngineError::DenominatorTooSmall {
                node,
                value: self.s_den.as_f64(),
                guard: guard.as_f64(),
            });
        }
        let y = self.y_centred();
        if !(y > T::zero() && y <= T::half()) {
            return Err(EngineError::OutOfRange { node, value: y.as_f64() });
        }
        Ok(y)
    }
}

/// Moments at `node` using the values of a computed field.
pub fn local_moments<T: Scalar>(tree: &ScenarioTree<T>, field: &YField<T>, node: NodeId) -> LocalMoments<T> {
    LocalMoments::at_node(tree, node, |c| field.get(tree, c))
}

/// Backward recursion for `Y` over every node of the tree.
///
/// Levels are swept from the horizon down; within a level nodes are independent
/// and large levels run in parallel. Children are always summed in ascending id
/// order, so the result does not depend on the thread count.
pub fn compute_y<T: Scalar>(tree: &ScenarioTree<T>) -> Result<YField<T>, EngineError> {
    let mut values = vec![T::half(); tree.len()];
    for t in (tree.start()..tree.horizon()).rev() {
        let level = tree.level(t);
        let solve = |&id: &NodeId| LocalMoments::at_node(tree, id, |c| values[c]).checked_y(id);
        let computed: Vec<T> = if level.len() >= PAR_LEVEL_MIN {
            level.par_iter().map(solve).collect::<Result<_, _>>()?
        } else {
            level.iter().map(solve).collect::<Result<_, _>>()?
        };
        for (&id, y) in level.iter().zip(computed) {
            values[id] = y;
        }
    }
    Ok(YField { mode: YMode::Tree, values })
}

/// One step of the deterministic recursion under independent increments:
/// `Y_n` from `Y_{n+1} = y` and the step moments `(E[beta], E[eta], E[beta^2/eta])`.
pub fn pimi_map<T: Scalar>(y: T, m: &StepMoments<T>) -> T {
    let half = T::half();
    let one_go = (y - half) * m.alpha - y * m.beta + half;
    let den = y * (m.alpha - T::two() * m.beta + m.eta) + (T::one() - m.alpha) * half;
    half - (half - y) * m.alpha - one_go * one_go / den
}

/// Deterministic `Y` of an independent-increment model, one value per time index.
pub fn compute_y_pimi<T: Scalar>(model: &PimiModel<T>) -> Result<YField<T>, EngineError> {
    let len = (model.horizon() - model.start() + 1) as usize;
    let mut values = vec![T::half(); len];
    for t in (model.start()..model.horizon()).rev() {
        let next = values[(t + 1 - model.start()) as usize];
        let m = LocalMoments::accumulate(model.step(t + 1).iter().map(|a| (a.weight, a.beta, a.eta, next)));
        let guard = T::lit(DENOMINATOR_GUARD) * m.guard_scale();
        if !(m.s_den >= guard) {
            return Err(EngineError::StepDenominator { step: t + 1, value: m.s_den.as_f64() });
        }
        let y = m.y_centred();
        if !(y > T::zero() && y <= T::half()) {
            return Err(EngineError::OutOfRange { node: (t - model.start()) as usize, value: y.as_f64() });
        }
        values[(t - model.start()) as usize] = y;
    }
    Ok(YField { mode: YMode::Pimi { start: model.start() }, values })
}
