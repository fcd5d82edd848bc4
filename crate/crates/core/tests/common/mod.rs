#![allow(dead_code)]

use lobexec::model::{random_tree, NodeId, RandomTreeConfig, ScenarioTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Tree = ScenarioTree<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid trees with depth drawn from `0..=max_depth`.
pub fn trees(seed: u64, count: usize, max_depth: usize, max_branching: usize) -> Vec<Tree> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let cfg = RandomTreeConfig { depth: rng.gen_range(0..=max_depth), max_branching, ..Default::default() };
            random_tree(&mut rng, &cfg)
        })
        .collect()
}

/// Milder trees for grid searches: moderate impact ratios and feedback gains.
pub fn oracle_trees(seed: u64, count: usize, max_depth: usize, max_branching: usize) -> Vec<Tree> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let cfg = RandomTreeConfig {
                depth: rng.gen_range(1..=max_depth),
                max_branching,
                beta_range: (0.3, 1.5),
                eta_range: (0.7, 1.5),
                alpha_range: (0.2, 0.8),
                ..Default::default()
            };
            random_tree(&mut rng, &cfg)
        })
        .collect()
}

/// Reference `Y` straight from the recursion as stated, by depth-first recursion:
/// `Y = E[eta Y'] - E[Y'(beta - eta)]^2 / E[(Y'/eta)(beta - eta)^2 + (1 - beta^2/eta)/2]`.
pub fn reference_y(tree: &Tree) -> Vec<f64> {
    fn go(tree: &Tree, id: NodeId, out: &mut Vec<f64>) -> f64 {
        let node = tree.node(id);
        let y = if node.children.is_empty() {
            0.5
        } else {
            let (mut e_eta_y, mut num, mut den) = (0.0, 0.0, 0.0);
            for &c in &node.children {
                let child = tree.node(c);
                let yc = go(tree, c, out);
                let eta = child.gamma / node.gamma;
                let (p, b) = (child.prob, child.beta);
                e_eta_y += p * eta * yc;
                num += p * yc * (b - eta);
                den += p * (yc / eta * (b - eta).powi(2) + (1.0 - b * b / eta) / 2.0);
            }
            e_eta_y - num * num / den
        };
        out[id] = y;
        y
    }
    let mut out = vec![0.0; tree.len()];
    go(tree, tree.root(), &mut out);
    out
}

/// Child expectation `E[f(p, beta, eta, child)]` at a node.
pub fn expect(tree: &Tree, id: NodeId, f: impl Fn(f64, f64, NodeId) -> f64) -> f64 {
    let gamma = tree.node(id).gamma;
    tree.children(id).map(|c| c.prob * f(c.beta, c.gamma / gamma, c.id)).sum()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
