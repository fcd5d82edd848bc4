use crate::error::ModelError;
use crate::scalar::Scalar;

/// Index of a node inside a [`ScenarioTree`]. Ids are dense: `0..tree.len()`.
pub type NodeId = usize;

/// Default cap on the number of nodes a tree may hold.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Tolerance on the sum of child transition probabilities.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Flat description of one node, as it appears in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec<T> {
    pub id: NodeId,
    pub time: i64,
    pub parent: Option<NodeId>,
    /// Transition probability from the parent. Ignored at the root.
    pub prob: T,
    pub beta: T,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: NodeId,
    pub time: i64,
    pub parent: Option<NodeId>,
    pub prob: T,
    /// Resilience factor realized at this node's time.
    pub beta: T,
    /// Price impact (inverse order book depth).
    pub gamma: T,
    /// Children in ascending id order. All sums over children use this order.
    pub children: Vec<NodeId>,
}

/// Finite filtered probability space carrying adapted resilience and impact values.
///
/// A node at time `t` is an atom of the time-`t` sigma-algebra. The tree is
/// immutable once built; every operation in the crate borrows it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree<T> {
    horizon: i64,
    start: i64,
    root: NodeId,
    nodes: Vec<Node<T>>,
    levels: Vec<Vec<NodeId>>,
}

impl<T: Scalar> ScenarioTree<T> {
    /// Builds a tree from flat node records, enforcing every structural
    /// invariant except the convexity assumption (see [`crate::model::validate`]).
    pub fn from_specs(horizon: i64, start: i64, specs: Vec<NodeSpec<T>>) -> Result<Self, ModelError> {
        Self::from_specs_with_cap(horizon, start, specs, DEFAULT_NODE_CAP)
    }

    pub fn from_specs_with_cap(
        horizon: i64,
        start: i64,
        specs: Vec<NodeSpec<T>>,
        cap: usize,
    ) -> Result<Self, ModelError> {
        if start > horizon {
            return Err(ModelError::StartAfterHorizon { start, horizon });
        }
        let count = specs.len();
        if count == 0 {
            return Err(ModelError::Empty);
        }
        if count > cap {
            return Err(ModelError::TooManyNodes { count: count as u128, cap });
        }

        let mut slots: Vec<Option<NodeSpec<T>>> = vec![None; count];
        for spec in specs {
            if spec.id >= count {
                return Err(ModelError::NonDenseIds { id: spec.id, count });
            }
            if slots[spec.id].is_some() {
                return Err(ModelError::DuplicateId(spec.id));
            }
            let id = spec.id;
            slots[id] = Some(spec);
        }
        let specs: Vec<NodeSpec<T>> = slots.into_iter().map(|s| s.expect("dense ids")).collect();

        let roots: Vec<NodeId> = specs.iter().filter(|s| s.parent.is_none()).map(|s| s.id).collect();
        if roots.len() != 1 {
            return Err(ModelError::RootCount(roots.len()));
        }
        let root = roots[0];
        if specs[root].time != start {
            return Err(ModelError::RootTime { node: root, time: specs[root].time, start });
        }

        let mut nodes: Vec<Node<T>> = Vec::with_capacity(count);
        for s in &specs {
            for (field, value) in [("beta", s.beta), ("gamma", s.gamma)] {
                if !(value > T::zero()) || !value.is_finite() {
                    return Err(ModelError::NonPositive { node: s.id, field, value: value.as_f64() });
                }
            }
            if s.time > horizon {
                return Err(ModelError::BeyondHorizon { node: s.id, time: s.time, horizon });
            }
            let prob = match s.parent {
                None => T::one(),
                Some(parent) => {
                    let Some(p) = specs.get(parent) else {
                        return Err(ModelError::DanglingReference { node: s.id, parent });
                    };
                    if s.time != p.time + 1 {
                        return Err(ModelError::LevelMismatch { node: s.id, time: s.time, parent_time: p.time });
                    }
                    if !(s.prob > T::zero() && s.prob <= T::one()) {
                        return Err(ModelError::ProbabilityOutOfRange { node: s.id, value: s.prob.as_f64() });
                    }
                    s.prob
                }
            };
            nodes.push(Node {
                id: s.id,
                time: s.time,
                parent: s.parent,
                prob,
                beta: s.beta,
                gamma: s.gamma,
                children: Vec::new(),
            });
        }
        for id in 0..count {
            if let Some(parent) = nodes[id].parent {
                nodes[parent].children.push(id);
            }
        }

        // Times increase by one along every edge and there is a single root at
        // `start`, so every node is reachable and the graph is a tree.
        let mut levels: Vec<Vec<NodeId>> = vec![Vec::new(); (horizon - start + 1) as usize];
        for node in &nodes {
            levels[(node.time - start) as usize].push(node.id);
        }

        let sum_tol = T::lit(PROBABILITY_SUM_TOL);
        for node in &nodes {
            if node.time < horizon {
                if node.children.is_empty() {
                    return Err(ModelError::MissingChildren { node: node.id, time: node.time });
                }
                let sum: T = node.children.iter().map(|&c| nodes[c].prob).sum();
                if (sum - T::one()).abs() > sum_tol {
                    return Err(ModelError::ProbabilitySum { node: node.id, sum: sum.as_f64() });
                }
            }
        }

        Ok(Self { horizon, start, root, nodes, levels })
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    /// Node ids at time `t`, ascending.
    pub fn level(&self, t: i64) -> &[NodeId] {
        if t < self.start || t > self.horizon {
            return &[];
        }
        &self.levels[(t - self.start) as usize]
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].time == self.horizon
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = &Node<T>> + '_ {
        self.nodes[id].children.iter().map(move |&c| &self.nodes[c])
    }

    /// Multiplicative impact increment `gamma_child / gamma_parent` on the edge into `child`.
    pub fn eta(&self, child: NodeId) -> T {
        let node = &self.nodes[child];
        match node.parent {
            Some(p) => node.gamma / self.nodes[p].gamma,
            None => T::one(),
        }
    }

    /// Probability of reaching `id` from the root.
    pub fn path_probability(&self, id: NodeId) -> T {
        let mut p = T::one();
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            p = p * self.nodes[cur].prob;
            cur = parent;
        }
        p
    }

    /// Terminal nodes in ascending id order.
    pub fn leaves(&self) -> &[NodeId] {
        self.level(self.horizon)
    }

    /// Root-to-node path, root first.
    pub fn path(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            path.push(parent);
            cur = parent;
        }
        path.reverse();
        path
    }

    /// Flat records suitable for serialization; `from_specs(specs())` rebuilds the same tree.
    pub fn specs(&self) -> Vec<NodeSpec<T>> {
        self.nodes
            .iter()
            .map(|n| NodeSpec { id: n.id, time: n.time, parent: n.parent, prob: n.prob, beta: n.beta, gamma: n.gamma })
            .collect()
    }

    /// Maximum number of children over all nodes.
    pub fn max_branching(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: NodeId, time: i64, parent: Option<NodeId>, prob: f64, beta: f64, gamma: f64) -> NodeSpec<f64> {
        NodeSpec { id, time, parent, prob, beta, gamma }
    }

    #[test]
    fn single_node_tree() {
        let tree = ScenarioTree::from_specs(3, 3, vec![spec(0, 3, None, 1.0, 1.0, 1.0)]).unwrap();
        assert_eq!(tree.len(), 1);
        assert!(tree.is_terminal(0));
        assert!(tree.node(0).children.is_empty());
    }

    #[test]
    fn two_period_binomial() {
        let tree = ScenarioTree::from_specs(
            1,
            0,
            vec![
                spec(0, 0, None, 1.0, 1.0, 1.0),
                spec(2, 1, Some(0), 0.5, 0.5, 1.0),
                spec(1, 1, Some(0), 0.5, 0.5, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.node(0).children, vec![1, 2]);
        assert_eq!(tree.leaves(), &[1, 2]);
        assert_eq!(tree.path_probability(2), 0.5);
        assert_eq!(tree.path(2), vec![0, 2]);
    }

    #[test]
    fn rejects_dangling_parent() {
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(7), 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::DanglingReference { node: 1, parent: 7 })));
    }

    #[test]
    fn rejects_bad_probability_and_sum() {
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(0), 1.5, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::ProbabilityOutOfRange { .. })));
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(0), 0.7, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::ProbabilitySum { .. })));
    }

    #[test]
    fn rejects_non_positive_values() {
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(0), 1.0, 0.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::NonPositive { field: "beta", .. })));
        let err = ScenarioTree::from_specs(0, 0, vec![spec(0, 0, None, 1.0, 1.0, -1.0)]);
        assert!(matches!(err, Err(ModelError::NonPositive { field: "gamma", .. })));
    }

    #[test]
    fn rejects_level_inconsistency_and_missing_children() {
        let err = ScenarioTree::from_specs(2, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 2, Some(0), 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::LevelMismatch { .. })));
        let err = ScenarioTree::from_specs(2, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(0), 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::MissingChildren { node: 1, .. })));
    }

    #[test]
    fn rejects_id_problems() {
        let err = ScenarioTree::from_specs(0, 0, vec![spec(3, 0, None, 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::NonDenseIds { .. })));
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(0, 1, Some(0), 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::DuplicateId(0))));
        let err = ScenarioTree::from_specs(1, 0, vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 0, None, 1.0, 1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::RootCount(2))));
    }

    #[test]
    fn node_cap_is_enforced() {
        let specs = vec![spec(0, 0, None, 1.0, 1.0, 1.0), spec(1, 1, Some(0), 1.0, 1.0, 1.0)];
        let err = ScenarioTree::from_specs_with_cap(1, 0, specs, 1);
        assert!(matches!(err, Err(ModelError::TooManyNodes { .. })));
    }
}
