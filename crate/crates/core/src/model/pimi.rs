use crate::error::ModelError;
use crate::model::tree::{NodeSpec, ScenarioTree, DEFAULT_NODE_CAP, PROBABILITY_SUM_TOL};
use crate::scalar::Scalar;

/// One atom of a per-step joint distribution of resilience and impact increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub weight: T,
    pub beta: T,
    pub eta: T,
}

impl<T: Scalar> Atom<T> {
    pub fn new(weight: T, beta: T, eta: T) -> Self {
        Self { weight, beta, eta }
    }
}

/// Moments of one step distribution that drive the deterministic recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMoments<T> {
    /// `E[beta]`
    pub beta: T,
    /// `E[eta]`
    pub eta: T,
    /// `E[beta^2 / eta]`
    pub alpha: T,
}

/// Model whose increments `(beta_k, eta_k)` are independent of the past at every step.
///
/// `steps[i]` is the distribution of `(beta, eta)` at time `start + 1 + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PimiModel<T> {
    horizon: i64,
    start: i64,
    gamma_start: T,
    steps: Vec<Vec<Atom<T>>>,
}

impl<T: Scalar> PimiModel<T> {
    pub fn new(horizon: i64, start: i64, gamma_start: T, steps: Vec<Vec<Atom<T>>>) -> Result<Self, ModelError> {
        if start > horizon {
            return Err(ModelError::StartAfterHorizon { start, horizon });
        }
        if (horizon - start) as usize != steps.len() {
            return Err(ModelError::InvalidParameter(format!(
                "expected {} steps for times {}..={}, got {}",
                horizon - start,
                start + 1,
                horizon,
                steps.len()
            )));
        }
        if !(gamma_start > T::zero()) || !gamma_start.is_finite() {
            return Err(ModelError::InvalidParameter(format!("gamma_start = {gamma_start} must be positive")));
        }
        for (i, atoms) in steps.iter().enumerate() {
            let step = start + 1 + i as i64;
            if atoms.is_empty() {
                return Err(ModelError::InvalidStep { step, reason: "no atoms".into() });
            }
            for a in atoms {
                if !(a.weight > T::zero() && a.weight <= T::one()) {
                    return Err(ModelError::InvalidStep { step, reason: format!("weight {} outside (0, 1]", a.weight) });
                }
                if !(a.beta > T::zero()) || !a.beta.is_finite() || !(a.eta > T::zero()) || !a.eta.is_finite() {
                    return Err(ModelError::InvalidStep {
                        step,
                        reason: format!("beta = {}, eta = {} must be positive", a.beta, a.eta),
                    });
                }
            }
            let sum: T = atoms.iter().map(|a| a.weight).sum();
            if (sum - T::one()).abs() > T::lit(PROBABILITY_SUM_TOL) {
                return Err(ModelError::InvalidStep { step, reason: format!("weights sum to {sum}") });
            }
        }
        Ok(Self { horizon, start, gamma_start, steps })
    }

    /// Deterministic single-atom model: `beta[i]`, `eta[i]` at time `start + 1 + i`.
    pub fn deterministic(horizon: i64, gamma_start: T, beta: &[T], eta: &[T]) -> Result<Self, ModelError> {
        if beta.len() != eta.len() {
            return Err(ModelError::InvalidParameter("beta and eta lengths differ".into()));
        }
        let start = horizon - beta.len() as i64;
        let steps = beta.iter().zip(eta).map(|(&b, &e)| vec![Atom::new(T::one(), b, e)]).collect();
        Self::new(horizon, start, gamma_start, steps)
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn gamma_start(&self) -> T {
        self.gamma_start
    }

    pub fn steps(&self) -> &[Vec<Atom<T>>] {
        &self.steps
    }

    /// Atoms of the increment realized at time `t` (`start < t <= horizon`).
    pub fn step(&self, t: i64) -> &[Atom<T>] {
        &self.steps[(t - self.start - 1) as usize]
    }

    pub fn moments(&self, t: i64) -> StepMoments<T> {
        let atoms = self.step(t);
        let mut m = StepMoments { beta: T::zero(), eta: T::zero(), alpha: T::zero() };
        for a in atoms {
            m.beta = m.beta + a.weight * a.beta;
            m.eta = m.eta + a.weight * a.eta;
            m.alpha = m.alpha + a.weight * a.beta * a.beta / a.eta;
        }
        m
    }

    /// Number of nodes of the product tree, or `None` on overflow.
    pub fn tree_size(&self) -> Option<u128> {
        let mut total: u128 = 1;
        let mut level: u128 = 1;
        for atoms in &self.steps {
            level = level.checked_mul(atoms.len() as u128)?;
            total = total.checked_add(level)?;
        }
        Some(total)
    }

    /// Expands into the full product tree with the default node cap.
    pub fn to_tree(&self) -> Result<ScenarioTree<T>, ModelError> {
        self.to_tree_with_cap(DEFAULT_NODE_CAP)
    }

    /// Expands into the product tree. Node ids are assigned level by level and
    /// children follow atom order, so child `i` of every node carries atom `i`.
    /// The root carries `beta = 1`, which no computation reads.
    pub fn to_tree_with_cap(&self, cap: usize) -> Result<ScenarioTree<T>, ModelError> {
        match self.tree_size() {
            Some(n) if n <= cap as u128 => {}
            Some(n) => return Err(ModelError::TooManyNodes { count: n, cap }),
            None => return Err(ModelError::TooManyNodes { count: u128::MAX, cap }),
        }
        let mut specs = vec![NodeSpec {
            id: 0,
            time: self.start,
            parent: None,
            prob: T::one(),
            beta: T::one(),
            gamma: self.gamma_start,
        }];
        let mut frontier = vec![0usize];
        for (i, atoms) in self.steps.iter().enumerate() {
            let time = self.start + 1 + i as i64;
            let mut next = Vec::with_capacity(frontier.len() * atoms.len());
            for &parent in &frontier {
                let gamma = specs[parent].gamma;
                for a in atoms {
                    let id = specs.len();
                    specs.push(NodeSpec {
                        id,
                        time,
                        parent: Some(parent),
                        prob: a.weight,
                        beta: a.beta,
                        gamma: gamma * a.eta,
                    });
                    next.push(id);
                }
            }
            frontier = next;
        }
        ScenarioTree::from_specs_with_cap(self.horizon, self.start, specs, cap)
    }
}
