//! JSON model files.
//!
//! ```json
//! { "horizon": 2, "start": 0,
//!   "nodes": [ {"id": 0, "time": 0, "parent": null, "prob": 1.0, "beta": 1.0, "gamma": 1.0}, ... ] }
//! { "horizon": 2, "start": 0,
//!   "pimi": { "gamma_start": 1.0, "steps": [ [[0.5, 0.9, 1.1], [0.5, 1.1, 1.3]], ... ] } }
//! ```
//!
//! Each entry of `steps` is the atom list `[weight, beta, eta]` of one time step.
//! Reals are written with 17 significant digits so files round-trip bit-exactly.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::ModelError;
use crate::model::pimi::{Atom, PimiModel};
use crate::model::tree::{NodeId, NodeSpec, ScenarioTree};
use crate::scalar::{format_real, Scalar};

/// A real number serialized with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite real {}", self.0)));
        }
        let raw = RawValue::from_string(format_real(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Real)
    }
}

fn default_prob() -> Real {
    Real(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub time: i64,
    pub parent: Option<NodeId>,
    #[serde(default = "default_prob")]
    pub prob: Real,
    pub beta: Real,
    pub gamma: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PimiRecord {
    pub gamma_start: Real,
    pub steps: Vec<Vec<[Real; 3]>>,
}

/// On-disk model description: either an explicit tree or an independent-increment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub horizon: i64,
    pub start: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pimi: Option<PimiRecord>,
}

/// A loaded model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Tree(ScenarioTree<T>),
    Pimi(PimiModel<T>),
}

impl<T: Scalar> Model<T> {
    /// The scenario tree, expanding an independent-increment model if needed.
    pub fn tree(&self) -> Result<ScenarioTree<T>, ModelError> {
        match self {
            Model::Tree(t) => Ok(t.clone()),
            Model::Pimi(m) => m.to_tree(),
        }
    }

    pub fn pimi(&self) -> Option<&PimiModel<T>> {
        match self {
            Model::Pimi(m) => Some(m),
            Model::Tree(_) => None,
        }
    }
}

fn cast<T: Scalar>(v: Real) -> Result<T, ModelError> {
    T::from_f64(v.0).ok_or_else(|| ModelError::Parse(format!("value {} not representable", v.0)))
}

/// Builds a model from its parsed file description.
pub fn build_model<T: Scalar>(file: &ModelFile) -> Result<Model<T>, ModelError> {
    match (&file.nodes, &file.pimi) {
        (Some(nodes), None) => {
            let specs = nodes
                .iter()
                .map(|n| {
                    Ok(NodeSpec {
                        id: n.id,
                        time: n.time,
                        parent: n.parent,
                        prob: cast(n.prob)?,
                        beta: cast(n.beta)?,
                        gamma: cast(n.gamma)?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            Ok(Model::Tree(ScenarioTree::from_specs(file.horizon, file.start, specs)?))
        }
        (None, Some(p)) => {
            let steps = p
                .steps
                .iter()
                .map(|atoms| {
                    atoms
                        .iter()
                        .map(|[w, b, e]| Ok(Atom::new(cast(*w)?, cast(*b)?, cast(*e)?)))
                        .collect::<Result<Vec<_>, ModelError>>()
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            Ok(Model::Pimi(PimiModel::new(file.horizon, file.start, cast(p.gamma_start)?, steps)?))
        }
        (Some(_), Some(_)) => Err(ModelError::Parse("model has both `nodes` and `pimi`".into())),
        (None, None) => Err(ModelError::Parse("model needs either `nodes` or `pimi`".into())),
    }
}

/// Builds a tree from its parsed description; independent-increment models are expanded.
pub fn build_tree<T: Scalar>(file: &ModelFile) -> Result<ScenarioTree<T>, ModelError> {
    build_model(file)?.tree()
}

pub fn parse_model<T: Scalar>(json: &str) -> Result<Model<T>, ModelError> {
    let file: ModelFile = serde_json::from_str(json).map_err(|e| ModelError::Parse(e.to_string()))?;
    build_model(&file)
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>, ModelError> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn tree_to_file<T: Scalar>(tree: &ScenarioTree<T>) -> ModelFile {
    let nodes = tree
        .specs()
        .into_iter()
        .map(|s| NodeRecord {
            id: s.id,
            time: s.time,
            parent: s.parent,
            prob: Real(s.prob.as_f64()),
            beta: Real(s.beta.as_f64()),
            gamma: Real(s.gamma.as_f64()),
        })
        .collect();
    ModelFile { horizon: tree.horizon(), start: tree.start(), nodes: Some(nodes), pimi: None }
}

pub fn pimi_to_file<T: Scalar>(model: &PimiModel<T>) -> ModelFile {
    let steps = model
        .steps()
        .iter()
        .map(|atoms| {
            atoms
                .iter()
                .map(|a| [Real(a.weight.as_f64()), Real(a.beta.as_f64()), Real(a.eta.as_f64())])
                .collect()
        })
        .collect();
    ModelFile {
        horizon: model.horizon(),
        start: model.start(),
        nodes: None,
        pimi: Some(PimiRecord { gamma_start: Real(model.gamma_start().as_f64()), steps }),
    }
}

pub fn model_to_file<T: Scalar>(model: &Model<T>) -> ModelFile {
    match model {
        Model::Tree(t) => tree_to_file(t),
        Model::Pimi(m) => pimi_to_file(m),
    }
}

pub fn to_json(file: &ModelFile) -> String {
    serde_json::to_string_pretty(file).expect("model file serializes")
}
