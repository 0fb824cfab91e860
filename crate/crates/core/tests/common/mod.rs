#![allow(dead_code)]

use dynroute::graph::{EdgeSpec, GraphSnapshot, NodeId, NodeRecord, RoadGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random directed graph on `n` nodes scattered over a 1 km square. Edge
/// lengths are at least the straight-line span.
pub fn random_graph(seed: u64, n: usize) -> RoadGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeRecord> = (0..n)
        .map(|i| NodeRecord {
            name: format!("n{i:02}"),
            x: rng.random_range(0.0..1000.0),
            y: rng.random_range(0.0..1000.0),
        })
        .collect();
    let mut edges = Vec::new();
    let m = rng.random_range(n..=3 * n);
    for k in 0..m {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n);
        while b == a {
            b = rng.random_range(0..n);
        }
        let span = ((nodes[a].x - nodes[b].x).powi(2) + (nodes[a].y - nodes[b].y).powi(2)).sqrt();
        let length = span * rng.random_range(1.0..1.6) + 1.0;
        edges.push(EdgeSpec {
            name: format!("e{k:03}"),
            from: nodes[a].name.clone(),
            to: nodes[b].name.clone(),
            length_m: length,
            base_time_s: length / rng.random_range(5.0..20.0),
        });
    }
    RoadGraph::build(nodes, edges).unwrap()
}

/// Rows × cols lattice with per-road random speeds.
pub fn random_grid(seed: u64, rows: usize, cols: usize) -> RoadGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |r: usize, c: usize| format!("r{r:02}c{c:02}");
    let mut nodes = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(NodeRecord {
                name: name(r, c),
                x: c as f64 * 100.0,
                y: r as f64 * 100.0,
            });
        }
    }
    let mut edges = Vec::new();
    let mut link = |a: String, b: String, t: f64| {
        edges.push(EdgeSpec {
            name: format!("{a}_{b}"),
            from: a.clone(),
            to: b.clone(),
            length_m: 100.0,
            base_time_s: t,
        });
        edges.push(EdgeSpec {
            name: format!("{b}_{a}"),
            from: b,
            to: a,
            length_m: 100.0,
            base_time_s: t,
        });
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                link(name(r, c), name(r, c + 1), rng.random_range(5.0..15.0));
            }
            if r + 1 < rows {
                link(name(r, c), name(r + 1, c), rng.random_range(5.0..15.0));
            }
        }
    }
    RoadGraph::build(nodes, edges).unwrap()
}

/// Cheapest simple path cost by exhaustive depth-first enumeration, summing
/// travel time plus entered-node penalty hop by hop.
pub fn enumerate_best(snap: &GraphSnapshot, start: NodeId, goal: NodeId) -> Option<f64> {
    fn go(snap: &GraphSnapshot, v: NodeId, goal: NodeId, cost: f64, seen: &mut Vec<bool>, best: &mut Option<f64>) {
        if v == goal {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        for nb in snap.successors(v) {
            if seen[nb.node.index()] {
                continue;
            }
            seen[nb.node.index()] = true;
            go(
                snap,
                nb.node,
                goal,
                cost + (nb.travel_time_s + snap.node_penalty(nb.node)),
                seen,
                best,
            );
            seen[nb.node.index()] = false;
        }
    }
    let mut seen = vec![false; snap.node_count()];
    seen[start.index()] = true;
    let mut best = None;
    go(snap, start, goal, 0.0, &mut seen, &mut best);
    best
}
