//! Random valid scenario trees for property tests, oracle comparisons and demos.

use rand::Rng;

use crate::model::tree::{NodeSpec, ScenarioTree};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTreeConfig {
    /// Number of periods: the tree spans times `0..=depth`.
    pub depth: usize,
    pub min_branching: usize,
    pub max_branching: usize,
    /// Probability that a node's children are rescaled so that `E_n[beta] = 1`.
    pub unit_mean_prob: f64,
    pub beta_range: (f64, f64),
    pub eta_range: (f64, f64),
    /// Range for `E_n[beta^2/eta]`; values above the drawn target are scaled down to it.
    pub alpha_range: (f64, f64),
    pub gamma_root_range: (f64, f64),
    /// Nodes whose `|E_n[beta] - 1|` falls in `(0, mean_gap)` are redrawn, keeping
    /// unit-mean events well separated from generic ones.
    pub mean_gap: f64,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            min_branching: 1,
            max_branching: 3,
            unit_mean_prob: 0.3,
            beta_range: (0.2, 1.8),
            eta_range: (0.5, 2.0),
            alpha_range: (0.2, 0.95),
            gamma_root_range: (0.5, 2.0),
            mean_gap: 0.02,
        }
    }
}

/// Draws a tree satisfying every structural invariant and the convexity assumption.
pub fn random_tree<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &RandomTreeConfig) -> ScenarioTree<T> {
    let depth = cfg.depth as i64;
    let mut specs: Vec<NodeSpec<f64>> = vec![NodeSpec {
        id: 0,
        time: 0,
        parent: None,
        prob: 1.0,
        beta: 1.0,
        gamma: rng.gen_range(cfg.gamma_root_range.0..=cfg.gamma_root_range.1),
    }];
    let mut frontier = vec![0usize];
    for time in 1..=depth {
        let mut next = Vec::new();
        for &parent in &frontier {
            let gamma_parent = specs[parent].gamma;
            for (prob, beta, eta) in draw_children(rng, cfg) {
                let id = specs.len();
                specs.push(NodeSpec { id, time, parent: Some(parent), prob, beta, gamma: gamma_parent * eta });
                next.push(id);
            }
        }
        frontier = next;
    }
    let specs = specs
        .into_iter()
        .map(|s| NodeSpec {
            id: s.id,
            time: s.time,
            parent: s.parent,
            prob: T::lit(s.prob),
            beta: T::lit(s.beta),
            gamma: T::lit(s.gamma),
        })
        .collect();
    ScenarioTree::from_specs(depth, 0, specs).expect("random tree is structurally valid")
}

fn draw_children<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomTreeConfig) -> Vec<(f64, f64, f64)> {
    let count = rng.gen_range(cfg.min_branching.max(1)..=cfg.max_branching.max(cfg.min_branching.max(1)));
    let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let unit_mean = rng.gen_bool(cfg.unit_mean_prob.clamp(0.0, 1.0));

    let betas = loop {
        let mut betas: Vec<f64> = (0..count).map(|_| rng.gen_range(cfg.beta_range.0..=cfg.beta_range.1)).collect();
        let mean: f64 = probs.iter().zip(&betas).map(|(p, b)| p * b).sum();
        if unit_mean {
            betas.iter_mut().for_each(|b| *b /= mean);
            break betas;
        }
        if (mean - 1.0).abs() >= cfg.mean_gap {
            break betas;
        }
    };

    let mut etas: Vec<f64> = (0..count).map(|_| rng.gen_range(cfg.eta_range.0..=cfg.eta_range.1)).collect();
    let alpha: f64 = probs.iter().zip(&betas).zip(&etas).map(|((p, b), e)| p * b * b / e).sum();
    let target = rng.gen_range(cfg.alpha_range.0..=cfg.alpha_range.1);
    if alpha > target {
        let scale = alpha / target;
        etas.iter_mut().for_each(|e| *e *= scale);
    }
    probs.into_iter().zip(betas).zip(etas).map(|((p, b), e)| (p, b, e)).collect()
}
