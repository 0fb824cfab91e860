//! Scenario documents: JSON encoding, validation and canonical serialization.
//!
//! ```json
//! {
//!   "meta":   {"name": "demo", "seed": 7},
//!   "nodes":  [{"id": "a", "x": 0.0, "y": 0.0}, ...],
//!   "edges":  [{"id": "e1", "from": "a", "to": "b", "length_m": 100.0, "base_time_s": 10.0}, ...],
//!   "heuristics": [{"node": "b", "h2": 0.0, "h3": 1.0}, ...],
//!   "events": [{"t_s": 30.0, "kind": "set_congestion", "target": "e1", "value": 2.0}, ...],
//!   "queries": [{"vehicle": "v0", "start": "a", "goal": "b", "depart_s": 0.0,
//!                "weights": {"wg": 1, "w1": 1, "w2": 1, "w3": 1},
//!                "context": {"passenger_prefers_comfort": false}}]
//! }
//! ```
//!
//! Event kinds: `set_congestion` (edge, factor ≥ 1), `set_comfort` (edge,
//! penalty ≥ 0), `set_node_comfort_h` (node, value ≥ 0), `block_edge` and
//! `unblock_edge` (edge, no value). An optional `"latent": true` marks a
//! congestion or comfort change that is only discoverable through vehicle
//! observations. Unknown keys are rejected.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{EdgeId, EdgeSpec, Event, EventKind, GraphError, NodeId, NodeRecord, RoadGraph};
use crate::heuristics::{adapt_weights, ContextFlags, HeuristicField, HeuristicWeights, DEFAULT_ALPHA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation {
        element: String,
        line: Option<usize>,
        message: String,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ScenarioError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Parse { line, .. } => Some(*line),
            ScenarioError::Validation { line, .. } => *line,
            ScenarioError::Io { .. } => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Parse { .. } => "parse",
            ScenarioError::Validation { .. } => "validation",
            ScenarioError::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub vehicle: String,
    pub start: NodeId,
    pub goal: NodeId,
    pub depart_s: f64,
    /// Base weight profile before context adaptation.
    pub weights: HeuristicWeights,
    pub context: ContextFlags,
}

impl Query {
    pub fn effective_weights(&self) -> HeuristicWeights {
        adapt_weights(&self.weights, &self.context)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub graph: RoadGraph,
    pub initial_field: HeuristicField,
    pub events: Vec<Event>,
    pub queries: Vec<Query>,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} nodes, {} edges, {} events, {} queries",
            self.name,
            self.graph.node_count(),
            self.graph.edge_count(),
            self.events.len(),
            self.queries.len()
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    meta: MetaDoc,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    heuristics: Vec<HeuristicDoc>,
    #[serde(default)]
    events: Vec<EventDoc>,
    queries: Vec<QueryDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaDoc {
    name: String,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: String,
    from: String,
    to: String,
    length_m: f64,
    base_time_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeuristicDoc {
    node: String,
    #[serde(default)]
    h2: f64,
    #[serde(default)]
    h3: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    t_s: f64,
    kind: String,
    target: String,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    latent: bool,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct QueryDoc {
    vehicle: String,
    start: String,
    goal: String,
    depart_s: f64,
    #[serde(default)]
    weights: HeuristicWeights,
    #[serde(default)]
    context: ContextFlags,
}

/// Locates the `nth` (0-based) line containing every needle.
fn find_line(text: &str, needles: &[&str], nth: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| needles.iter().all(|n| l.contains(n)))
        .nth(nth)
        .map(|(i, _)| i + 1)
}

/// Locates the line of the `nth` occurrence of `needle`, counting repeats
/// on one line.
fn find_occurrence(text: &str, needle: &str, nth: usize) -> Option<usize> {
    let mut seen = 0;
    for (i, line) in text.lines().enumerate() {
        let count = line.matches(needle).count();
        if seen + count > nth {
            return Some(i + 1);
        }
        seen += count;
    }
    None
}

fn quoted(s: &str) -> String {
    format!("\"{s}\"")
}

struct Validator<'a> {
    text: &'a str,
}

impl Validator<'_> {
    fn err(&self, element: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Validation {
            element: element.into(),
            line,
            message: message.into(),
        }
    }

    fn at_name(&self, name: &str, message: impl Into<String>) -> ScenarioError {
        self.err(name, find_line(self.text, &[&quoted(name)], 0), message)
    }

    fn graph_error(&self, e: GraphError) -> ScenarioError {
        match &e {
            GraphError::DanglingEndpoint { node, .. } => self.at_name(node, e.to_string()),
            GraphError::DuplicateNode(name) | GraphError::DuplicateEdge(name) => self.err(
                name.clone(),
                find_line(self.text, &["\"id\"", &quoted(name)], 1),
                e.to_string(),
            ),
            GraphError::NonFiniteCoordinate(name) => self.at_name(name, e.to_string()),
            GraphError::InvalidEdge { edge, .. } => self.at_name(edge, e.to_string()),
            other => self.err("graph", None, other.to_string()),
        }
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let v = Validator { text };

    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| NodeRecord {
            name: n.id,
            x: n.x,
            y: n.y,
        })
        .collect();
    let edges = doc
        .edges
        .into_iter()
        .map(|e| EdgeSpec {
            name: e.id,
            from: e.from,
            to: e.to,
            length_m: e.length_m,
            base_time_s: e.base_time_s,
        })
        .collect();
    let graph = RoadGraph::build(nodes, edges).map_err(|e| v.graph_error(e))?;
    let n = graph.node_count();

    let node_ref = |name: &str, what: &str| {
        graph
            .node_by_name(name)
            .ok_or_else(|| v.at_name(name, format!("{what} references unknown node `{name}`")))
    };
    let edge_ref = |name: &str, what: &str| {
        graph
            .edge_by_name(name)
            .ok_or_else(|| v.at_name(name, format!("{what} references unknown edge `{name}`")))
    };

    let mut h2 = vec![0.0; n];
    let mut h3 = vec![0.0; n];
    let mut seen = HashSet::new();
    for (i, h) in doc.heuristics.iter().enumerate() {
        let line = find_occurrence(text, "\"node\"", i);
        let node = node_ref(&h.node, "heuristic entry")?;
        if !seen.insert(node) {
            return Err(v.err(
                h.node.clone(),
                line,
                format!("duplicate heuristic entry for `{}`", h.node),
            ));
        }
        for (what, value) in [("h2", h.h2), ("h3", h.h3)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(v.err(
                    h.node.clone(),
                    line,
                    format!("{what} of `{}` must be finite and >= 0 (got {value})", h.node),
                ));
            }
        }
        h2[node.index()] = h.h2;
        h3[node.index()] = h.h3;
    }
    let initial_field =
        HeuristicField::new(n, h2, h3, DEFAULT_ALPHA).map_err(|e| v.err("heuristics", None, e.to_string()))?;

    let mut events = Vec::with_capacity(doc.events.len());
    let mut last_t = f64::NEG_INFINITY;
    for (i, ev) in doc.events.iter().enumerate() {
        let line = find_occurrence(text, "\"t_s\"", i);
        let element = format!("events[{i}]");
        if !(ev.t_s.is_finite() && ev.t_s >= 0.0) {
            return Err(v.err(
                element,
                line,
                format!("event time must be finite and >= 0 (got {})", ev.t_s),
            ));
        }
        if ev.t_s < last_t {
            return Err(v.err(
                element,
                line,
                format!(
                    "events not sorted by time: events[{i}] at t={} follows t={last_t}",
                    ev.t_s
                ),
            ));
        }
        last_t = ev.t_s;

        let need_value = |kind: &str| {
            ev.value
                .ok_or_else(|| v.err(format!("events[{i}]"), line, format!("`{kind}` requires a value")))
        };
        let no_value = |kind: &str| match ev.value {
            Some(_) => Err(v.err(format!("events[{i}]"), line, format!("`{kind}` takes no value"))),
            None => Ok(()),
        };
        let kind = match ev.kind.as_str() {
            "set_congestion" => EventKind::SetCongestion {
                edge: edge_ref(&ev.target, &element)?,
                factor: need_value("set_congestion")?,
            },
            "set_comfort" => EventKind::SetComfort {
                edge: edge_ref(&ev.target, &element)?,
                penalty: need_value("set_comfort")?,
            },
            "set_node_comfort_h" => EventKind::SetNodeComfortH {
                node: node_ref(&ev.target, &element)?,
                value: need_value("set_node_comfort_h")?,
            },
            "block_edge" => {
                no_value("block_edge")?;
                EventKind::BlockEdge {
                    edge: edge_ref(&ev.target, &element)?,
                }
            }
            "unblock_edge" => {
                no_value("unblock_edge")?;
                EventKind::UnblockEdge {
                    edge: edge_ref(&ev.target, &element)?,
                }
            }
            "set_safety" | "set_safety_h" | "set_node_safety_h" => {
                return Err(v.err(
                    element,
                    line,
                    "the safety heuristic h3 is constant and cannot be changed by events",
                ))
            }
            other => return Err(v.err(element, line, format!("unknown event kind `{other}`"))),
        };
        if ev.latent && matches!(kind, EventKind::BlockEdge { .. } | EventKind::UnblockEdge { .. }) {
            return Err(v.err(element, line, "blockage events cannot be latent"));
        }
        kind.check(&graph)
            .map_err(|e| v.err(format!("events[{i}]"), line, e.to_string()))?;
        events.push(Event {
            at_time_s: ev.t_s,
            kind,
            latent: ev.latent,
        });
    }

    let mut queries = Vec::with_capacity(doc.queries.len());
    let mut vehicles = HashSet::new();
    for (i, q) in doc.queries.iter().enumerate() {
        let line = find_occurrence(text, "\"vehicle\"", i);
        let element = format!("queries[{i}]");
        if q.vehicle.is_empty() || !vehicles.insert(q.vehicle.clone()) {
            return Err(v.err(
                element,
                line,
                format!("vehicle id `{}` is empty or duplicated", q.vehicle),
            ));
        }
        let start = node_ref(&q.start, &element)?;
        let goal = node_ref(&q.goal, &element)?;
        if !(q.depart_s.is_finite() && q.depart_s >= 0.0) {
            return Err(v.err(
                element,
                line,
                format!("depart_s must be finite and >= 0 (got {})", q.depart_s),
            ));
        }
        let weights = q
            .weights
            .validated()
            .map_err(|e| v.err(format!("queries[{i}]"), line, e.to_string()))?;
        if !reachable(&graph, start, goal) {
            return Err(v.err(
                element,
                line,
                format!(
                    "goal `{}` is unreachable from `{}` in the initial graph",
                    q.goal, q.start
                ),
            ));
        }
        queries.push(Query {
            vehicle: q.vehicle.clone(),
            start,
            goal,
            depart_s: q.depart_s,
            weights,
            context: q.context,
        });
    }

    Ok(Scenario {
        name: doc.meta.name,
        seed: doc.meta.seed,
        graph,
        initial_field,
        events,
        queries,
    })
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_scenario(&text)
}

fn reachable(graph: &RoadGraph, start: NodeId, goal: NodeId) -> bool {
    let topo = graph.topology();
    let mut seen = vec![false; graph.node_count()];
    let mut queue = VecDeque::from([start]);
    seen[start.index()] = true;
    while let Some(u) = queue.pop_front() {
        if u == goal {
            return true;
        }
        for &e in topo.outgoing(u) {
            if graph.edge_states()[e.index()].blocked {
                continue;
            }
            let v = topo.edge(e).to;
            if !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

fn event_json(graph: &RoadGraph, ev: &Event) -> Value {
    let edge = |e: EdgeId| graph.edge_name(e).to_string();
    let (target, value) = match ev.kind {
        EventKind::SetCongestion { edge: e, factor } => (edge(e), Some(factor)),
        EventKind::SetComfort { edge: e, penalty } => (edge(e), Some(penalty)),
        EventKind::SetNodeComfortH { node, value } => (graph.node_name(node).to_string(), Some(value)),
        EventKind::BlockEdge { edge: e } | EventKind::UnblockEdge { edge: e } => (edge(e), None),
    };
    let mut obj = json!({ "t_s": ev.at_time_s, "kind": ev.kind.name(), "target": target });
    if let Some(value) = value {
        obj["value"] = json!(value);
    }
    if ev.latent {
        obj["latent"] = json!(true);
    }
    obj
}

/// Canonical document: keys sorted, nodes and edges in id order, only
/// non-zero heuristic entries. `load_scenario(serialize_scenario(s)) == s`.
pub fn serialize_scenario(s: &Scenario) -> String {
    let topo = s.graph.topology();
    let nodes: Vec<Value> = topo
        .nodes()
        .iter()
        .map(|n| json!({ "id": n.name, "x": n.x, "y": n.y }))
        .collect();
    let edges: Vec<Value> = topo
        .edges()
        .iter()
        .map(|e| {
            json!({
                "id": e.name,
                "from": topo.node(e.from).name,
                "to": topo.node(e.to).name,
                "length_m": e.length_m,
                "base_time_s": e.base_time_s,
            })
        })
        .collect();
    let h2 = s.initial_field.h2_values();
    let h3 = s.initial_field.h3_values();
    let heuristics: Vec<Value> = (0..topo.node_count())
        .filter(|&i| h2[i] != 0.0 || h3[i] != 0.0)
        .map(|i| json!({ "node": topo.nodes()[i].name, "h2": h2[i], "h3": h3[i] }))
        .collect();
    let events: Vec<Value> = s.events.iter().map(|e| event_json(&s.graph, e)).collect();
    let queries: Vec<Value> = s
        .queries
        .iter()
        .map(|q| {
            serde_json::to_value(QueryDoc {
                vehicle: q.vehicle.clone(),
                start: s.graph.node_name(q.start).to_string(),
                goal: s.graph.node_name(q.goal).to_string(),
                depart_s: q.depart_s,
                weights: q.weights,
                context: q.context,
            })
            .expect("query serializes")
        })
        .collect();
    let doc = json!({
        "meta": { "name": s.name, "seed": s.seed },
        "nodes": nodes,
        "edges": edges,
        "heuristics": heuristics,
        "events": events,
        "queries": queries,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("document serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "meta": {"name": "minimal", "seed": 1},
  "nodes": [
    {"id": "a", "x": 0.0, "y": 0.0},
    {"id": "b", "x": 100.0, "y": 0.0}
  ],
  "edges": [
    {"id": "e1", "from": "a", "to": "b", "length_m": 100.0, "base_time_s": 10.0}
  ],
  "queries": [
    {"vehicle": "v0", "start": "a", "goal": "b", "depart_s": 0.0}
  ]
}"#;

    #[test]
    fn minimal_document_loads() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.queries.len(), 1);
        assert_eq!(s.graph.node_count(), 2);
        assert_eq!(s.queries[0].weights, HeuristicWeights::default());
    }

    #[test]
    fn dangling_node_reported_with_line() {
        let text = MINIMAL.replace(r#""to": "b""#, r#""to": "n99""#);
        let err = load_scenario(&text).unwrap_err();
        match &err {
            ScenarioError::Validation { element, line, .. } => {
                assert_eq!(element, "n99");
                assert_eq!(*line, Some(8));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("n99"));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace(r#""seed": 1"#, r#""seed": 1, "colour": "red""#);
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let err = load_scenario("{\"meta\": ").unwrap_err();
        assert_eq!(err.code(), "parse");
    }

    #[test]
    fn unsorted_events_name_first_offender() {
        let text = MINIMAL.replace(
            r#""queries""#,
            r#""events": [
    {"t_s": 30.0, "kind": "set_congestion", "target": "e1", "value": 2.0},
    {"t_s": 10.0, "kind": "set_congestion", "target": "e1", "value": 3.0}
  ],
  "queries""#,
        );
        match load_scenario(&text).unwrap_err() {
            ScenarioError::Validation { element, line, .. } => {
                assert_eq!(element, "events[1]");
                assert_eq!(line, Some(12));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn safety_events_rejected() {
        let text = MINIMAL.replace(
            r#""queries""#,
            r#""events": [{"t_s": 0.0, "kind": "set_node_safety_h", "target": "b", "value": 2.0}],
  "queries""#,
        );
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("safety"));
    }

    #[test]
    fn unreachable_goal_rejected() {
        let text = MINIMAL.replace(r#""start": "a", "goal": "b""#, r#""start": "b", "goal": "a""#);
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("unreachable"));
    }

    #[test]
    fn latent_block_rejected() {
        let text = MINIMAL.replace(
            r#""queries""#,
            r#""events": [{"t_s": 0.0, "kind": "block_edge", "target": "e1", "latent": true}],
  "queries""#,
        );
        assert!(load_scenario(&text).is_err());
    }

    #[test]
    fn serialization_round_trip_is_byte_stable() {
        let s = load_scenario(MINIMAL).unwrap();
        let text = serialize_scenario(&s);
        let back = load_scenario(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(serialize_scenario(&back), text);
    }
}
