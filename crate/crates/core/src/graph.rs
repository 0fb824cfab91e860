//! Road network, dynamic overlay, events and snapshots.
//!
//! A [`RoadGraph`] splits into an immutable [`Topology`] (nodes, edges,
//! adjacency) shared behind an `Arc`, and a per-edge [`EdgeState`] overlay
//! that events mutate. Nodes and edges are indexed in ascending order of
//! their string ids, so "lowest id" and "lowest index" coincide everywhere.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::heuristics::HeuristicField;

/// Index of a node; ordering follows the lexicographic order of node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Index of a directed edge; ordering follows the lexicographic order of edge ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    DanglingEndpoint { edge: String, node: String },
    #[error("node `{0}` has non-finite coordinates")]
    NonFiniteCoordinate(String),
    #[error("edge `{edge}`: {reason}")]
    InvalidEdge { edge: String, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("invalid value {value} for {what}")]
    InvalidValue { what: &'static str, value: f64 },
    #[error("grid dimensions must be at least 1x1 (got {rows}x{cols})")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("grid edge length and speed must be finite and positive")]
    InvalidGridScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

/// Static part of an edge. The dynamic part lives in [`EdgeState`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub base_time_s: f64,
}

/// Edge description with endpoints given by node id, as read from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub base_time_s: f64,
}

/// Mutable overlay of one edge.
///
/// A blocked edge keeps its congestion factor so that unblocking restores it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeState {
    pub congestion_factor: f64,
    pub comfort_penalty: f64,
    pub blocked: bool,
}

impl Default for EdgeState {
    fn default() -> Self {
        Self {
            congestion_factor: 1.0,
            comfort_penalty: 0.0,
            blocked: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    adj_offsets: Vec<u32>,
    adj: Vec<EdgeId>,
    node_index: HashMap<String, NodeId>,
    edge_index: HashMap<String, EdgeId>,
    v_max: f64,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeRecord {
        &self.edges[id.index()]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edge_index.get(name).copied()
    }

    /// Outgoing edges of `node` in ascending edge-id order.
    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        let i = node.index();
        &self.adj[self.adj_offsets[i] as usize..self.adj_offsets[i + 1] as usize]
    }

    /// Highest free-flow speed over all edges (m/s); `+inf` for an edgeless graph.
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        node.index() < self.nodes.len()
    }

    pub fn contains_edge(&self, edge: EdgeId) -> bool {
        edge.index() < self.edges.len()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (p, q) = (self.node(a), self.node(b));
        (p.x - q.x).hypot(p.y - q.y)
    }
}

/// Directed road network plus its dynamic overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    topo: Arc<Topology>,
    state: Vec<EdgeState>,
}

impl RoadGraph {
    /// Builds a graph, sorting nodes and edges by id and validating every record.
    pub fn build(mut nodes: Vec<NodeRecord>, mut edges: Vec<EdgeSpec>) -> Result<Self, GraphError> {
        nodes.sort_by(|a, b| a.name.cmp(&b.name));
        edges.sort_by(|a, b| a.name.cmp(&b.name));

        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(GraphError::NonFiniteCoordinate(n.name.clone()));
            }
            if node_index.insert(n.name.clone(), NodeId(i as u32)).is_some() {
                return Err(GraphError::DuplicateNode(n.name.clone()));
            }
        }

        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut records = Vec::with_capacity(edges.len());
        for (i, e) in edges.into_iter().enumerate() {
            let lookup = |name: &str| {
                node_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| GraphError::DanglingEndpoint {
                        edge: e.name.clone(),
                        node: name.to_string(),
                    })
            };
            let from = lookup(&e.from)?;
            let to = lookup(&e.to)?;
            let invalid = |reason: String| GraphError::InvalidEdge {
                edge: e.name.clone(),
                reason,
            };
            if from == to {
                return Err(invalid("self-loop".into()));
            }
            if !(e.length_m.is_finite() && e.length_m > 0.0) {
                return Err(invalid(format!("length_m must be finite and > 0 (got {})", e.length_m)));
            }
            if !(e.base_time_s.is_finite() && e.base_time_s > 0.0) {
                return Err(invalid(format!(
                    "base_time_s must be finite and > 0 (got {})",
                    e.base_time_s
                )));
            }
            let (p, q) = (&nodes[from.index()], &nodes[to.index()]);
            let span = (p.x - q.x).hypot(p.y - q.y);
            // h1 relies on every edge being at least as long as the straight line.
            if e.length_m < span * (1.0 - 1e-9) {
                return Err(invalid(format!(
                    "length_m {} is shorter than the straight-line span {span:.3}",
                    e.length_m
                )));
            }
            if edge_index.insert(e.name.clone(), EdgeId(i as u32)).is_some() {
                return Err(GraphError::DuplicateEdge(e.name.clone()));
            }
            records.push(EdgeRecord {
                name: e.name,
                from,
                to,
                length_m: e.length_m,
                base_time_s: e.base_time_s,
            });
        }

        let mut degree = vec![0u32; nodes.len() + 1];
        for e in &records {
            degree[e.from.index() + 1] += 1;
        }
        for i in 1..degree.len() {
            degree[i] += degree[i - 1];
        }
        let adj_offsets = degree.clone();
        let mut fill = degree;
        let mut adj = vec![EdgeId(0); records.len()];
        for (i, e) in records.iter().enumerate() {
            let slot = &mut fill[e.from.index()];
            adj[*slot as usize] = EdgeId(i as u32);
            *slot += 1;
        }

        let v_max = records
            .iter()
            .map(|e| e.length_m / e.base_time_s)
            .fold(f64::NEG_INFINITY, f64::max);
        let v_max = if records.is_empty() { f64::INFINITY } else { v_max };

        let state = vec![EdgeState::default(); records.len()];
        Ok(Self {
            topo: Arc::new(Topology {
                nodes,
                edges: records,
                adj_offsets,
                adj,
                node_index,
                edge_index,
                v_max,
            }),
            state,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn node_count(&self) -> usize {
        self.topo.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.topo.edge_count()
    }

    pub fn edge_state(&self, edge: EdgeId) -> Result<&EdgeState, GraphError> {
        self.state.get(edge.index()).ok_or(GraphError::UnknownEdge(edge))
    }

    pub fn edge_states(&self) -> &[EdgeState] {
        &self.state
    }

    pub(crate) fn edge_state_mut(&mut self, edge: EdgeId) -> Result<&mut EdgeState, GraphError> {
        self.state.get_mut(edge.index()).ok_or(GraphError::UnknownEdge(edge))
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.topo.node_by_name(name)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.topo.edge_by_name(name)
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.topo.node(node).name
    }

    pub fn edge_name(&self, edge: EdgeId) -> &str {
        &self.topo.edge(edge).name
    }

    /// Immutable view of the current overlay and heuristic field.
    pub fn snapshot(&self, field: &HeuristicField, time_s: f64) -> GraphSnapshot {
        snapshot(self, field, time_s)
    }
}

/// Timed change to the overlay.
///
/// A `latent` event changes physical conditions without being broadcast:
/// the shared store only learns of it through vehicle observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub at_time_s: f64,
    pub kind: EventKind,
    pub latent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    SetCongestion { edge: EdgeId, factor: f64 },
    SetComfort { edge: EdgeId, penalty: f64 },
    SetNodeComfortH { node: NodeId, value: f64 },
    BlockEdge { edge: EdgeId },
    UnblockEdge { edge: EdgeId },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SetCongestion { .. } => "set_congestion",
            EventKind::SetComfort { .. } => "set_comfort",
            EventKind::SetNodeComfortH { .. } => "set_node_comfort_h",
            EventKind::BlockEdge { .. } => "block_edge",
            EventKind::UnblockEdge { .. } => "unblock_edge",
        }
    }

    /// Checks ids and value bounds against `graph`.
    pub fn check(&self, graph: &RoadGraph) -> Result<(), GraphError> {
        let edge_ok = |e: EdgeId| {
            if graph.topo.contains_edge(e) {
                Ok(())
            } else {
                Err(GraphError::UnknownEdge(e))
            }
        };
        match *self {
            EventKind::SetCongestion { edge, factor } => {
                edge_ok(edge)?;
                if !(factor.is_finite() && factor >= 1.0) {
                    return Err(GraphError::InvalidValue {
                        what: "congestion factor",
                        value: factor,
                    });
                }
            }
            EventKind::SetComfort { edge, penalty } => {
                edge_ok(edge)?;
                if !(penalty.is_finite() && penalty >= 0.0) {
                    return Err(GraphError::InvalidValue {
                        what: "comfort penalty",
                        value: penalty,
                    });
                }
            }
            EventKind::SetNodeComfortH { node, value } => {
                if !graph.topo.contains_node(node) {
                    return Err(GraphError::UnknownNode(node));
                }
                if !(value.is_finite() && value >= 0.0) {
                    return Err(GraphError::InvalidValue {
                        what: "comfort heuristic",
                        value,
                    });
                }
            }
            EventKind::BlockEdge { edge } | EventKind::UnblockEdge { edge } => edge_ok(edge)?,
        }
        Ok(())
    }
}

/// Applies one event to the overlay. Safety values (h3) have no event kind
/// and are never touched here.
pub fn apply_event(graph: &mut RoadGraph, field: &mut HeuristicField, ev: &Event) -> Result<(), GraphError> {
    ev.kind.check(graph)?;
    match ev.kind {
        EventKind::SetCongestion { edge, factor } => {
            graph.edge_state_mut(edge)?.congestion_factor = factor;
        }
        EventKind::SetComfort { edge, penalty } => {
            graph.edge_state_mut(edge)?.comfort_penalty = penalty;
        }
        EventKind::SetNodeComfortH { node, value } => field.set_comfort(node, value),
        EventKind::BlockEdge { edge } => graph.edge_state_mut(edge)?.blocked = true,
        EventKind::UnblockEdge { edge } => graph.edge_state_mut(edge)?.blocked = false,
    }
    Ok(())
}

/// 4-connected `rows`×`cols` lattice with spacing `edge_length` metres and
/// free-flow speed `speed` m/s on every edge.
pub fn make_grid(rows: usize, cols: usize, edge_length: f64, speed: f64) -> Result<RoadGraph, GraphError> {
    if rows == 0 || cols == 0 {
        return Err(GraphError::ZeroDimension { rows, cols });
    }
    if !(edge_length.is_finite() && edge_length > 0.0 && speed.is_finite() && speed > 0.0) {
        return Err(GraphError::InvalidGridScale);
    }
    let n = rows * cols;
    let node_width = digits(n.saturating_sub(1));
    let node_name = |r: usize, c: usize| format!("n{:0w$}", r * cols + c, w = node_width);

    let nodes: Vec<NodeRecord> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| NodeRecord {
            name: node_name(r, c),
            x: c as f64 * edge_length,
            y: r as f64 * edge_length,
        })
        .collect();

    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.push(((r, c), (r, c + 1)));
            }
            if r + 1 < rows {
                pairs.push(((r, c), (r + 1, c)));
            }
            if c > 0 {
                pairs.push(((r, c), (r, c - 1)));
            }
            if r > 0 {
                pairs.push(((r, c), (r - 1, c)));
            }
        }
    }
    let edge_width = digits(pairs.len().saturating_sub(1));
    let base_time_s = edge_length / speed;
    let edges = pairs
        .into_iter()
        .enumerate()
        .map(|(i, ((r0, c0), (r1, c1)))| EdgeSpec {
            name: format!("e{:0w$}", i, w = edge_width),
            from: node_name(r0, c0),
            to: node_name(r1, c1),
            length_m: edge_length,
            base_time_s,
        })
        .collect();
    RoadGraph::build(nodes, edges)
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Immutable view of a graph overlay and heuristic field at one instant.
#[derive(Debug, Clone)]
pub struct GraphSnapshot {
    topo: Arc<Topology>,
    edges: Arc<[EdgeState]>,
    h2: Arc<[f64]>,
    h3: Arc<[f64]>,
    time_s: f64,
}

impl PartialEq for GraphSnapshot {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.topo, &other.topo) || self.topo == other.topo)
            && self.edges == other.edges
            && self.h2 == other.h2
            && self.h3 == other.h3
            && self.time_s.to_bits() == other.time_s.to_bits()
    }
}

pub fn snapshot(graph: &RoadGraph, field: &HeuristicField, time_s: f64) -> GraphSnapshot {
    let n = graph.node_count();
    let dense = |values: &[f64]| -> Arc<[f64]> { (0..n).map(|i| values.get(i).copied().unwrap_or(0.0)).collect() };
    GraphSnapshot {
        topo: Arc::clone(&graph.topo),
        edges: graph.state.as_slice().into(),
        h2: dense(field.h2_values()),
        h3: dense(field.h3_values()),
        time_s,
    }
}

/// One traversable successor of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: NodeId,
    pub edge: EdgeId,
    pub travel_time_s: f64,
}

/// Unblocked successors of `node` in ascending edge-id order.
pub fn neighbors(snap: &GraphSnapshot, node: NodeId) -> Result<Vec<Neighbor>, GraphError> {
    snap.check_node(node)?;
    Ok(snap.successors(node).collect())
}

impl GraphSnapshot {
    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn node_count(&self) -> usize {
        self.topo.node_count()
    }

    pub fn check_node(&self, node: NodeId) -> Result<(), GraphError> {
        if self.topo.contains_node(node) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(node))
        }
    }

    pub fn edge_state(&self, edge: EdgeId) -> &EdgeState {
        &self.edges[edge.index()]
    }

    /// `base_travel_time × congestion_factor`, or `None` when blocked.
    #[inline]
    pub fn effective_time(&self, edge: EdgeId) -> Option<f64> {
        let s = &self.edges[edge.index()];
        if s.blocked {
            None
        } else {
            Some(self.topo.edge(edge).base_time_s * s.congestion_factor)
        }
    }

    #[inline]
    pub fn successors(&self, node: NodeId) -> impl Iterator<Item = Neighbor> + '_ {
        self.topo.outgoing(node).iter().filter_map(move |&e| {
            self.effective_time(e).map(|t| Neighbor {
                node: self.topo.edge(e).to,
                edge: e,
                travel_time_s: t,
            })
        })
    }

    /// Cheapest unblocked edge `from → to`, ties to the lowest edge id.
    pub fn best_edge(&self, from: NodeId, to: NodeId) -> Option<Neighbor> {
        self.successors(from)
            .filter(|n| n.node == to)
            .fold(None, |best: Option<Neighbor>, n| match best {
                Some(b) if b.travel_time_s <= n.travel_time_s => Some(b),
                _ => Some(n),
            })
    }

    #[inline]
    pub fn comfort(&self, node: NodeId) -> f64 {
        self.h2.get(node.index()).copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn safety(&self, node: NodeId) -> f64 {
        self.h3.get(node.index()).copied().unwrap_or(0.0)
    }

    /// Straight-line distance to `goal` over the network's top speed.
    #[inline]
    pub fn h1(&self, node: NodeId, goal: NodeId) -> f64 {
        if node == goal {
            return 0.0;
        }
        self.topo.distance(node, goal) / self.topo.v_max()
    }

    /// Unweighted comfort + safety penalty charged on entering `node`.
    #[inline]
    pub fn node_penalty(&self, node: NodeId) -> f64 {
        self.comfort(node) + self.safety(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> RoadGraph {
        RoadGraph::build(
            vec![
                NodeRecord {
                    name: "a".into(),
                    x: 0.0,
                    y: 0.0,
                },
                NodeRecord {
                    name: "b".into(),
                    x: 100.0,
                    y: 0.0,
                },
            ],
            vec![EdgeSpec {
                name: "e1".into(),
                from: "a".into(),
                to: "b".into(),
                length_m: 100.0,
                base_time_s: 10.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn grid_counts() {
        let g = make_grid(1, 2, 100.0, 10.0).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
        for e in g.topology().edges() {
            assert_eq!(e.base_time_s, 10.0);
        }
        assert_eq!(make_grid(3, 3, 100.0, 10.0).unwrap().edge_count(), 24);
        assert_eq!(make_grid(100, 100, 100.0, 10.0).unwrap().node_count(), 10_000);
    }

    #[test]
    fn grid_rejects_zero_dimension() {
        assert_eq!(
            make_grid(0, 3, 1.0, 1.0).unwrap_err(),
            GraphError::ZeroDimension { rows: 0, cols: 3 }
        );
        assert!(make_grid(2, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn grid_lattice_positions() {
        let g = make_grid(2, 3, 50.0, 5.0).unwrap();
        let n = g.node_by_name("n5").unwrap();
        let rec = g.topology().node(n);
        assert_eq!((rec.x, rec.y), (100.0, 50.0));
    }

    #[test]
    fn dangling_endpoint_named() {
        let err = RoadGraph::build(
            vec![NodeRecord {
                name: "a".into(),
                x: 0.0,
                y: 0.0,
            }],
            vec![EdgeSpec {
                name: "e".into(),
                from: "a".into(),
                to: "n99".into(),
                length_m: 1.0,
                base_time_s: 1.0,
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("n99"));
    }

    #[test]
    fn edge_shorter_than_span_rejected() {
        let err = RoadGraph::build(
            vec![
                NodeRecord {
                    name: "a".into(),
                    x: 0.0,
                    y: 0.0,
                },
                NodeRecord {
                    name: "b".into(),
                    x: 100.0,
                    y: 0.0,
                },
            ],
            vec![EdgeSpec {
                name: "e".into(),
                from: "a".into(),
                to: "b".into(),
                length_m: 50.0,
                base_time_s: 1.0,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::InvalidEdge { .. }));
    }

    #[test]
    fn set_congestion_changes_only_target() {
        let mut g = make_grid(2, 2, 100.0, 10.0).unwrap();
        let mut field = HeuristicField::zeros(g.node_count());
        let before = g.clone();
        let ev = Event {
            at_time_s: 0.0,
            kind: EventKind::SetCongestion {
                edge: EdgeId(1),
                factor: 2.0,
            },
            latent: false,
        };
        apply_event(&mut g, &mut field, &ev).unwrap();
        for (i, (a, b)) in before.edge_states().iter().zip(g.edge_states()).enumerate() {
            if i == 1 {
                assert_eq!(b.congestion_factor, 2.0);
                assert_eq!(a.comfort_penalty, b.comfort_penalty);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unblock_restores_factor() {
        let mut g = two_node();
        let mut field = HeuristicField::zeros(2);
        let e = EdgeId(0);
        let ev = |kind| Event {
            at_time_s: 0.0,
            kind,
            latent: false,
        };
        apply_event(
            &mut g,
            &mut field,
            &ev(EventKind::SetCongestion { edge: e, factor: 1.7 }),
        )
        .unwrap();
        apply_event(&mut g, &mut field, &ev(EventKind::BlockEdge { edge: e })).unwrap();
        let snap = g.snapshot(&field, 0.0);
        assert!(neighbors(&snap, NodeId(0)).unwrap().is_empty());
        apply_event(&mut g, &mut field, &ev(EventKind::UnblockEdge { edge: e })).unwrap();
        assert_eq!(g.edge_state(e).unwrap().congestion_factor, 1.7);
        assert!(!g.edge_state(e).unwrap().blocked);
    }

    #[test]
    fn event_bounds_and_ids_checked() {
        let mut g = two_node();
        let mut field = HeuristicField::zeros(2);
        let bad = [
            EventKind::SetCongestion {
                edge: EdgeId(0),
                factor: 0.5,
            },
            EventKind::SetComfort {
                edge: EdgeId(0),
                penalty: -1.0,
            },
            EventKind::SetNodeComfortH {
                node: NodeId(7),
                value: 1.0,
            },
            EventKind::BlockEdge { edge: EdgeId(3) },
        ];
        for kind in bad {
            let ev = Event {
                at_time_s: 0.0,
                kind,
                latent: false,
            };
            assert!(apply_event(&mut g, &mut field, &ev).is_err(), "{kind:?}");
        }
        assert_eq!(g, two_node());
    }

    #[test]
    fn node_comfort_event_leaves_safety() {
        let mut g = two_node();
        let mut field = HeuristicField::new(2, vec![0.0, 0.0], vec![1.0, 2.0], 0.3).unwrap();
        let ev = Event {
            at_time_s: 0.0,
            kind: EventKind::SetNodeComfortH {
                node: NodeId(1),
                value: 4.0,
            },
            latent: false,
        };
        apply_event(&mut g, &mut field, &ev).unwrap();
        assert_eq!(field.h2_values()[1], 4.0);
        assert_eq!(field.h3_values(), &[1.0, 2.0]);
    }

    #[test]
    fn snapshot_is_isolated_from_later_events() {
        let mut g = two_node();
        let mut field = HeuristicField::zeros(2);
        let snap = g.snapshot(&field, 0.0);
        let again = g.snapshot(&field, 0.0);
        assert_eq!(snap, again);
        let ev = Event {
            at_time_s: 0.0,
            kind: EventKind::SetCongestion {
                edge: EdgeId(0),
                factor: 3.0,
            },
            latent: false,
        };
        apply_event(&mut g, &mut field, &ev).unwrap();
        assert_eq!(snap.effective_time(EdgeId(0)), Some(10.0));
        assert_eq!(g.snapshot(&field, 0.0).effective_time(EdgeId(0)), Some(30.0));
    }

    #[test]
    fn neighbors_on_grid() {
        let g = make_grid(3, 3, 100.0, 10.0).unwrap();
        let snap = g.snapshot(&HeuristicField::zeros(9), 0.0);
        let centre = g.node_by_name("n4").unwrap();
        let ns = neighbors(&snap, centre).unwrap();
        assert_eq!(ns.len(), 4);
        assert!(ns.windows(2).all(|w| w[0].edge < w[1].edge));
        assert_eq!(neighbors(&snap, centre).unwrap(), ns);
        assert_eq!(neighbors(&snap, NodeId(42)), Err(GraphError::UnknownNode(NodeId(42))));
    }

    #[test]
    fn effective_time_scales_with_congestion() {
        let mut g = two_node();
        let mut field = HeuristicField::zeros(2);
        let ev = Event {
            at_time_s: 0.0,
            kind: EventKind::SetCongestion {
                edge: EdgeId(0),
                factor: 1.5,
            },
            latent: false,
        };
        apply_event(&mut g, &mut field, &ev).unwrap();
        let snap = g.snapshot(&field, 0.0);
        assert_eq!(neighbors(&snap, NodeId(0)).unwrap()[0].travel_time_s, 15.0);
    }
}
