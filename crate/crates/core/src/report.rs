//! Row-oriented exports of computed fields (CSV and JSON).

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisReport;
use crate::engine::YField;
use crate::execution::StrategyField;
use crate::model::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YRow {
    pub node_id: NodeId,
    pub time: i64,
    pub gamma: f64,
    #[serde(rename = "Y")]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub node_id: NodeId,
    pub time: i64,
    pub trade: f64,
    pub position_after: f64,
    pub deviation_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub node_id: NodeId,
    pub time: i64,
    pub gamma: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub round_trip: String,
    pub one_go: bool,
    pub z: String,
    pub upper_bound: f64,
}

pub fn y_rows<T: Scalar>(tree: &ScenarioTree<T>, field: &YField<T>) -> Vec<YRow> {
    tree.nodes()
        .iter()
        .map(|n| YRow { node_id: n.id, time: n.time, gamma: n.gamma.as_f64(), y: field.get(tree, n.id).as_f64() })
        .collect()
}

pub fn strategy_rows<T: Scalar>(tree: &ScenarioTree<T>, strategy: &StrategyField<T>) -> Vec<StrategyRow> {
    tree.nodes()
        .iter()
        .map(|n| StrategyRow {
            node_id: n.id,
            time: n.time,
            trade: strategy.trade[n.id].as_f64(),
            position_after: strategy.position_after[n.id].as_f64(),
            deviation_before: strategy.deviation_before[n.id].as_f64(),
        })
        .collect()
}

pub fn analysis_rows<T: Scalar>(report: &AnalysisReport<T>) -> Vec<AnalysisRow> {
    report
        .nodes
        .iter()
        .map(|n| AnalysisRow {
            node_id: n.node,
            time: n.time,
            gamma: n.gamma.as_f64(),
            y: n.y.as_f64(),
            round_trip: n.round_trip.to_string(),
            one_go: n.one_go,
            z: n.z.to_string(),
            upper_bound: n.upper_bound.as_f64(),
        })
        .collect()
}

/// Serializes rows as CSV with a header line.
pub fn to_csv<R: Serialize>(rows: &[R]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize to csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Parses CSV produced by [`to_csv`].
pub fn from_csv<R: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<R>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}
