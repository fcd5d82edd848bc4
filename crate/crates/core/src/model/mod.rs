//! Market models: scenario trees, independent-increment models, validation,
//! serialization and the constructive example builders.

pub mod examples;
pub mod io;
pub mod pimi;
pub mod random;
pub mod tree;
pub mod validate;

pub use examples::{
    build_example_premature_deterministic, build_example_premature_stochastic, build_example_roundtrip_on_unit_mean,
};
pub use io::{build_model, build_tree, load_model, model_to_file, parse_model, to_json, Model, ModelFile};
pub use pimi::{Atom, PimiModel, StepMoments};
pub use random::{random_tree, RandomTreeConfig};
pub use tree::{Node, NodeId, NodeSpec, ScenarioTree, DEFAULT_NODE_CAP, PROBABILITY_SUM_TOL};
pub use validate::{structural_moment, validate, validate_pimi, Location, Rule, ValidationReport, Violation};
