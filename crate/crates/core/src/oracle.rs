//! Independent checks of the analytic solution: exhaustive grid dynamic programming,
//! Monte Carlo path sampling and finite differences of the cost-to-go.
//!
//! The grid and Monte Carlo routines only use the tree data and the cost functional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{value_function, YField};
use crate::error::OracleError;
use crate::execution::{optimal_trade, CLOSURE_TOL};
use crate::model::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

pub const MAX_ORACLE_DEPTH: i64 = 4;
pub const MAX_ORACLE_BRANCHING: usize = 4;
/// Times a bracket may be moved when the best grid point sits on its edge.
const MAX_RECENTRE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Initial half-width of the trade bracket; derived from the state when absent.
    pub half_width: Option<f64>,
    pub points: usize,
    pub rounds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: None, points: 21, rounds: 4 }
    }
}

impl GridSpec {
    pub fn check(&self) -> Result<(), OracleError> {
        if self.points < 3 || self.points.is_multiple_of(2) {
            return Err(OracleError::Config(format!("grid points must be odd and >= 3, got {}", self.points)));
        }
        if self.rounds < 1 {
            return Err(OracleError::Config("at least one refinement round is required".into()));
        }
        if let Some(w) = self.half_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(OracleError::Config(format!("half-width {w} must be positive")));
            }
        }
        Ok(())
    }
}

fn check_size<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId) -> Result<(), OracleError> {
    let depth = tree.horizon() - tree.node(node).time;
    if depth > MAX_ORACLE_DEPTH {
        return Err(OracleError::Guard(format!("subtree depth {depth} exceeds {MAX_ORACLE_DEPTH}")));
    }
    let branching = tree.max_branching();
    if branching > MAX_ORACLE_BRANCHING {
        return Err(OracleError::Guard(format!("branching {branching} exceeds {MAX_ORACLE_BRANCHING}")));
    }
    Ok(())
}

/// Minimal expected cost from `node` in state `(x, d)`, found by nested grid
/// search over the trade at every node with the final trade forced to `-X`.
///
/// Each value found is the cost of an actual strategy, so the result never lies
/// below the true infimum.
pub fn brute_force_value<T: Scalar>(
    tree: &ScenarioTree<T>,
    node: NodeId,
    x: T,
    d: T,
    grid: &GridSpec,
) -> Result<T, OracleError> {
    grid.check()?;
    check_size(tree, node)?;
    Ok(search(tree, node, x, d, grid, true))
}

fn stage_cost<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId, x: T, d: T, xi: T, grid: &GridSpec) -> T {
    let gamma = tree.node(node).gamma;
    let now = (d + gamma * xi * T::half()) * xi;
    let after = d + gamma * xi;
    let later: T = tree
        .children(node)
        .map(|c| c.prob * search(tree, c.id, x + xi, c.beta * after, grid, false))
        .sum();
    now + later
}

fn search<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId, x: T, d: T, grid: &GridSpec, parallel: bool) -> T {
    let gamma = tree.node(node).gamma;
    if tree.is_terminal(node) {
        return (d - gamma * x * T::half()) * (-x);
    }
    let last = grid.points - 1;
    let mut centre = -x;
    let mut half_width = match grid.half_width {
        Some(w) => T::lit(w),
        None => T::two() * (x.abs() + d.abs() / gamma + T::one()),
    };
    let mut best = T::infinity();
    let mut round = 0;
    let mut recentred = 0;
    while round < grid.rounds {
        let spacing = T::two() * half_width / T::lit(last as f64);
        let point = |i: usize| centre - half_width + spacing * T::lit(i as f64);
        let costs: Vec<T> = if parallel {
            (0..grid.points).into_par_iter().map(|i| stage_cost(tree, node, x, d, point(i), grid)).collect()
        } else {
            (0..grid.points).map(|i| stage_cost(tree, node, x, d, point(i), grid)).collect()
        };
        let mut arg = 0;
        for (i, &c) in costs.iter().enumerate() {
            if c < costs[arg] {
                arg = i;
            }
        }
        best = best.min(costs[arg]);
        if (arg == 0 || arg == last) && recentred < MAX_RECENTRE {
            centre = point(arg);
            recentred += 1;
            continue;
        }
        centre = point(arg);
        half_width = T::lit(1.5) * spacing;
        round += 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCConfig {
    pub samples: u64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, antithetic: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate<T> {
    pub mean: T,
    pub stderr: T,
    /// Independent draws behind the estimate: paths, or path pairs when antithetic.
    pub draws: u64,
}

/// Uniforms for draw `index`: a ChaCha stream keyed by `(seed, index)`, so any draw
/// can be reproduced on its own and parallel sampling is order independent.
fn draw_uniforms(seed: u64, index: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..count).map(|_| rng.gen::<f64>()).collect()
}

/// Sample mean and standard error of the realized cost of a feedback rule
/// `(node, X_before, D_before) -> trade`, started in `(x, d)` at the root.
pub fn monte_carlo_cost<T: Scalar, F>(
    tree: &ScenarioTree<T>,
    x: T,
    d: T,
    rule: F,
    cfg: &MCConfig,
) -> Result<MCEstimate<T>, OracleError>
where
    F: Fn(NodeId, T, T) -> T + Sync,
{
    if cfg.samples < 1 {
        return Err(OracleError::Config("at least one sample is required".into()));
    }
    let steps = (tree.horizon() - tree.start()) as usize;
    let draws = if cfg.antithetic { cfg.samples.div_ceil(2) } else { cfg.samples };
    let values: Vec<T> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let u = draw_uniforms(cfg.seed, i, steps);
            let cost = path_cost(tree, &rule, x, d, u.iter().copied())?;
            if cfg.antithetic {
                let mirror = path_cost(tree, &rule, x, d, u.iter().map(|v| 1.0 - v))?;
                Ok((cost + mirror) * T::half())
            } else {
                Ok(cost)
            }
        })
        .collect::<Result<_, OracleError>>()?;
    let (mean, stderr) = mean_and_stderr(&values);
    Ok(MCEstimate { mean, stderr, draws })
}

fn path_cost<T: Scalar, F>(
    tree: &ScenarioTree<T>,
    rule: &F,
    x0: T,
    d0: T,
    mut uniforms: impl Iterator<Item = f64>,
) -> Result<T, OracleError>
where
    F: Fn(NodeId, T, T) -> T,
{
    let (mut node, mut x, mut d) = (tree.root(), x0, d0);
    let mut cost = T::zero();
    loop {
        let current = tree.node(node);
        let xi = rule(node, x, d);
        cost = cost + (d + current.gamma * xi * T::half()) * xi;
        let before = x;
        x = x + xi;
        d = d + current.gamma * xi;
        if tree.is_terminal(node) {
            let scale = T::one().max(before.abs()).max(xi.abs());
            if x.abs() > T::lit(CLOSURE_TOL) * scale {
                return Err(OracleError::NonClosing { leaf: node, residual: x.as_f64() });
            }
            return Ok(cost);
        }
        let u = T::lit(uniforms.next().expect("one uniform per step"));
        let mut cumulative = T::zero();
        let mut next = *current.children.last().expect("non-terminal node has children");
        for &c in &current.children {
            cumulative = cumulative + tree.node(c).prob;
            if u < cumulative {
                next = c;
                break;
            }
        }
        node = next;
        d = d * tree.node(node).beta;
    }
}

/// Mean and standard error, summed in index order around the first value so that
/// constant samples give exactly that value and a zero error.
fn mean_and_stderr<T: Scalar>(values: &[T]) -> (T, T) {
    let n = T::lit(values.len() as f64);
    let shift = values[0];
    let (mut s1, mut s2) = (T::zero(), T::zero());
    for &v in values {
        let e = v - shift;
        s1 = s1 + e;
        s2 = s2 + e * e;
    }
    let mean = shift + s1 / n;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let var = ((s2 - s1 * s1 / n) / (n - T::one())).max(T::zero());
    (mean, (var / n).sqrt())
}

/// Cost of trading `xi` at `node` in state `(x, d)` and following the optimal
/// strategy afterwards, from the children's value functions.
pub fn cost_to_go<T: Scalar>(tree: &ScenarioTree<T>, node: NodeId, field: &YField<T>, x: T, d: T, xi: T) -> T {
    let gamma = tree.node(node).gamma;
    let after = d + gamma * xi;
    let later: T = tree
        .children(node)
        .map(|c| c.prob * value_function(tree, c.id, field, x + xi, c.beta * after))
        .sum();
    (d + gamma * xi * T::half()) * xi + later
}

/// Central difference of [`cost_to_go`] in the trade at `xi`.
pub fn first_order_check_at<T: Scalar>(
    tree: &ScenarioTree<T>,
    node: NodeId,
    field: &YField<T>,
    x: T,
    d: T,
    xi: T,
    h: T,
) -> Result<T, OracleError> {
    if tree.is_terminal(node) {
        return Err(OracleError::Config(format!("node {node} is terminal")));
    }
    Ok((cost_to_go(tree, node, field, x, d, xi + h) - cost_to_go(tree, node, field, x, d, xi - h)) / (T::two() * h))
}

/// Central difference of the cost-to-go at the optimal trade; close to zero.
pub fn first_order_check<T: Scalar>(
    tree: &ScenarioTree<T>,
    node: NodeId,
    field: &YField<T>,
    x: T,
    d: T,
    h: T,
) -> Result<T, OracleError> {
    let xi = optimal_trade(tree, node, field, x, d);
    first_order_check_at(tree, node, field, x, d, xi, h)
}
