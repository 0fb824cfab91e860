//! Seeded scenario generators for the bundled benchmark suites.
//!
//! The dynamic suite mixes five categories of 20 scenarios each:
//! congestion onset, blockage with later reopening, comfort degradation,
//! deceptive geometry and multi-vehicle crowd sensing. Events are placed on
//! the edges the static planners would commit to at departure, since an
//! event nobody drives into tests nothing.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeId, EdgeSpec, Event, EventKind, NodeId, NodeRecord, RoadGraph};
use crate::heuristics::{ContextFlags, HeuristicField, HeuristicWeights};
use crate::planners::{greedy_best_first, static_a_star};
use crate::scenario::{load_scenario_file, serialize_scenario, Query, Scenario, ScenarioError};

pub const SUITE_SEED: u64 = 20_240_501;
pub const PER_CATEGORY: usize = 20;
const EDGE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    CongestionOnset,
    BlockageReopen,
    ComfortDegradation,
    DeceptiveGeometry,
    CrowdSensing,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::CongestionOnset,
        Category::BlockageReopen,
        Category::ComfortDegradation,
        Category::DeceptiveGeometry,
        Category::CrowdSensing,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Category::CongestionOnset => "congestion",
            Category::BlockageReopen => "blockage",
            Category::ComfortDegradation => "comfort",
            Category::DeceptiveGeometry => "deceptive",
            Category::CrowdSensing => "crowd",
        }
    }
}

fn node_name(r: usize, c: usize) -> String {
    format!("r{r:02}c{c:02}")
}

/// Bidirectional lattice, 100 m blocks, per-road speed drawn from `speed`.
fn lattice(rng: &mut ChaCha8Rng, rows: usize, cols: usize, speed: (f64, f64)) -> RoadGraph {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(NodeRecord {
                name: node_name(r, c),
                x: c as f64 * EDGE_M,
                y: r as f64 * EDGE_M,
            });
        }
    }
    let mut road = |a: String, b: String, rng: &mut ChaCha8Rng| {
        let v = if speed.0 == speed.1 {
            speed.0
        } else {
            rng.random_range(speed.0..speed.1)
        };
        let t = (EDGE_M / v * 10.0).round() / 10.0;
        for (f, to) in [(&a, &b), (&b, &a)] {
            edges.push(EdgeSpec {
                name: format!("{f}_{to}"),
                from: f.clone(),
                to: to.clone(),
                length_m: EDGE_M,
                base_time_s: t,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                road(node_name(r, c), node_name(r, c + 1), rng);
            }
            if r + 1 < rows {
                road(node_name(r, c), node_name(r + 1, c), rng);
            }
        }
    }
    RoadGraph::build(nodes, edges).expect("lattice is well formed")
}

fn query(graph: &RoadGraph, vehicle: &str, start: (usize, usize), goal: (usize, usize), depart_s: f64) -> Query {
    Query {
        vehicle: vehicle.into(),
        start: graph.node_by_name(&node_name(start.0, start.1)).expect("lattice node"),
        goal: graph.node_by_name(&node_name(goal.0, goal.1)).expect("lattice node"),
        depart_s,
        weights: HeuristicWeights::default(),
        context: ContextFlags::default(),
    }
}

/// Edges of a path with the time each is entered.
fn timed_edges(graph: &RoadGraph, path: &[NodeId], depart_s: f64) -> Vec<(EdgeId, f64)> {
    let snap = graph.snapshot(&HeuristicField::zeros(graph.node_count()), 0.0);
    let mut t = depart_s;
    path.windows(2)
        .map(|w| {
            let nb = snap.best_edge(w[0], w[1]).expect("path edge");
            let entry = (nb.edge, t);
            t += nb.travel_time_s;
            entry
        })
        .collect()
}

/// The routes a static A* and a greedy planner pick at departure.
fn static_routes(graph: &RoadGraph, q: &Query) -> [Vec<NodeId>; 2] {
    let snap = graph.snapshot(&HeuristicField::zeros(graph.node_count()), q.depart_s);
    let a = static_a_star(&snap, q.start, q.goal).expect("valid query").path;
    let g = greedy_best_first(&snap, q.start, q.goal).expect("valid query").path;
    [a, g]
}

/// A run of up to `len` consecutive edges entered no earlier than `after`.
fn pick_run(rng: &mut ChaCha8Rng, edges: &[(EdgeId, f64)], after: f64, len: usize) -> Vec<EdgeId> {
    let eligible: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].1 >= after).collect();
    if eligible.is_empty() {
        return Vec::new();
    }
    let first = eligible[rng.random_range(0..eligible.len())];
    edges[first..].iter().take(len).map(|e| e.0).collect()
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

fn event(at_time_s: f64, kind: EventKind) -> Event {
    Event {
        at_time_s,
        kind,
        latent: false,
    }
}

fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| a.at_time_s.total_cmp(&b.at_time_s));
}

struct Base {
    graph: RoadGraph,
    q: Query,
    routes: [Vec<(EdgeId, f64)>; 2],
}

fn single_vehicle_base(rng: &mut ChaCha8Rng) -> Base {
    let rows = rng.random_range(4..=6);
    let cols = rng.random_range(6..=8);
    let graph = lattice(rng, rows, cols, (8.0, 14.0));
    let q = query(
        &graph,
        "v0",
        (rng.random_range(0..rows), 0),
        (rng.random_range(0..rows), cols - 1),
        0.0,
    );
    let [a, g] = static_routes(&graph, &q);
    let routes = [timed_edges(&graph, &a, q.depart_s), timed_edges(&graph, &g, q.depart_s)];
    Base { graph, q, routes }
}

fn finish(name: String, seed: u64, graph: RoadGraph, mut events: Vec<Event>, queries: Vec<Query>) -> Scenario {
    sort_events(&mut events);
    let n = graph.node_count();
    Scenario {
        name,
        seed,
        graph,
        initial_field: HeuristicField::zeros(n),
        events,
        queries,
    }
}

fn congestion_onset(rng: &mut ChaCha8Rng, name: String, seed: u64) -> Scenario {
    let b = single_vehicle_base(rng);
    let onset = rng.random_range(15.0f64..50.0).round();
    let fires = (onset / 30.0).ceil() * 30.0;
    let mut hit = Vec::new();
    for route in &b.routes {
        let len = rng.random_range(2..=4);
        for e in pick_run(rng, route, fires + 10.0, len) {
            push_unique(&mut hit, e);
        }
    }
    let mut events: Vec<Event> = hit
        .iter()
        .copied()
        .map(|edge| {
            let factor = (rng.random_range(2.0f64..6.0) * 10.0).round() / 10.0;
            event(onset, EventKind::SetCongestion { edge, factor })
        })
        .collect();
    // A distraction away from the route.
    let edge = loop {
        let e = EdgeId(rng.random_range(0..b.graph.edge_count() as u32));
        if !hit.contains(&e) {
            break e;
        }
    };
    events.push(event(onset, EventKind::SetCongestion { edge, factor: 1.5 }));
    finish(name, seed, b.graph, events, vec![b.q])
}

fn blockage_reopen(rng: &mut ChaCha8Rng, name: String, seed: u64) -> Scenario {
    let b = single_vehicle_base(rng);
    let at = rng.random_range(15.0f64..45.0).round();
    let fires = (at / 30.0).ceil() * 30.0;
    let reopen = at + rng.random_range(60.0f64..240.0).round();
    let mut hit = Vec::new();
    for route in &b.routes {
        let len = rng.random_range(1..=2);
        for e in pick_run(rng, route, fires + 10.0, len) {
            // Closing the last approach to the goal would make it unreachable.
            if b.graph.topology().edge(e).to != b.q.goal {
                push_unique(&mut hit, e);
            }
        }
    }
    let mut events = Vec::new();
    for &edge in &hit {
        events.push(event(at, EventKind::BlockEdge { edge }));
        events.push(event(reopen, EventKind::UnblockEdge { edge }));
    }
    finish(name, seed, b.graph, events, vec![b.q])
}

fn comfort_degradation(rng: &mut ChaCha8Rng, name: String, seed: u64) -> Scenario {
    let b = single_vehicle_base(rng);
    let at = rng.random_range(10.0f64..45.0).round();
    let fires = (at / 30.0).ceil() * 30.0;
    let mut nodes = Vec::new();
    for route in &b.routes {
        let len = rng.random_range(2..=3);
        for e in pick_run(rng, route, fires + 5.0, len) {
            let head = b.graph.topology().edge(e).to;
            if head != b.q.goal {
                push_unique(&mut nodes, head);
            }
        }
    }
    let events = nodes
        .into_iter()
        .map(|node| {
            let value = rng.random_range(10.0f64..40.0).round();
            event(at, EventKind::SetNodeComfortH { node, value })
        })
        .collect();
    finish(name, seed, b.graph, events, vec![b.q])
}

fn deceptive_geometry(rng: &mut ChaCha8Rng, name: String, seed: u64) -> Scenario {
    let b = single_vehicle_base(rng);
    // The geometrically direct corridor is jammed before anyone departs.
    let greedy = &b.routes[1];
    let mid = greedy.len() / 2;
    let from = mid.saturating_sub(rng.random_range(1..=2));
    let to = (mid + rng.random_range(1..=3)).min(greedy.len());
    let events = greedy[from..to]
        .iter()
        .map(|&(edge, _)| {
            let factor = (rng.random_range(3.0f64..7.0) * 10.0).round() / 10.0;
            event(0.0, EventKind::SetCongestion { edge, factor })
        })
        .collect();
    finish(name, seed, b.graph, events, vec![b.q])
}

/// A leader drives a single latently congested edge; followers heading the
/// same way reach it only after the leader's report has been shared.
fn crowd_sensing(rng: &mut ChaCha8Rng, name: String, seed: u64) -> Scenario {
    loop {
        let rows = rng.random_range(4..=5);
        let cols = rng.random_range(6..=7);
        let graph = lattice(rng, rows, cols, (10.0, 10.0));
        let r1 = rng.random_range(0..rows);
        let mut r2 = rng.random_range(0..rows);
        while r2 == r1 {
            r2 = rng.random_range(0..rows);
        }
        let follower = query(&graph, "v1", (r1, 0), (r2, cols - 1), 0.0);
        let [a, _] = static_routes(&graph, &follower);
        let timed = timed_edges(&graph, &a, 0.0);
        // Entered at least 40 s after departure, and not the last edge.
        let eligible: Vec<usize> = (4..timed.len().saturating_sub(1)).collect();
        if eligible.is_empty() {
            continue;
        }
        let i = eligible[rng.random_range(0..eligible.len())];
        let x = timed[i].0;
        let rec = graph.topology().edge(x).clone();
        // The follower must have an equally short way around from the node it
        // holds at the 30 s boundary; a boundary row or column has none.
        let (fx, fy) = (graph.topology().node(rec.from).x, graph.topology().node(rec.from).y);
        let (tx, ty) = (graph.topology().node(rec.to).x, graph.topology().node(rec.to).y);
        let goal_xy = (
            graph.topology().node(follower.goal).x,
            graph.topology().node(follower.goal).y,
        );
        let horizontal = fy == ty;
        let has_slack = if horizontal { fy != goal_xy.1 } else { fx != goal_xy.0 };
        if !has_slack || (horizontal && tx < fx) {
            continue;
        }
        let mut leader = follower.clone();
        leader.vehicle = "v0".into();
        leader.start = rec.from;
        leader.goal = rec.to;
        let mut queries = vec![leader, follower];
        if rng.random_bool(0.5) {
            let mut second = queries[1].clone();
            second.vehicle = "v2".into();
            second.depart_s = 5.0;
            queries.push(second);
        }
        let events = vec![Event {
            at_time_s: 0.0,
            kind: EventKind::SetCongestion { edge: x, factor: 2.8 },
            latent: true,
        }];
        return finish(name, seed, graph, events, queries);
    }
}

/// Scenario `index` of the dynamic suite.
pub fn dynamic_scenario(seed: u64, category: Category, index: usize) -> Scenario {
    let s = seed ^ ((category as u64 + 1) << 32) ^ index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let name = format!("{}_{index:02}", category.slug());
    match category {
        Category::CongestionOnset => congestion_onset(&mut rng, name, s),
        Category::BlockageReopen => blockage_reopen(&mut rng, name, s),
        Category::ComfortDegradation => comfort_degradation(&mut rng, name, s),
        Category::DeceptiveGeometry => deceptive_geometry(&mut rng, name, s),
        Category::CrowdSensing => crowd_sensing(&mut rng, name, s),
    }
}

pub fn dynamic_suite(seed: u64) -> Vec<Scenario> {
    Category::ALL
        .iter()
        .flat_map(|&c| (0..PER_CATEGORY).map(move |i| dynamic_scenario(seed, c, i)))
        .collect()
}

/// Event-free scenarios with zero comfort and safety terms.
pub fn static_suite(seed: u64) -> Vec<Scenario> {
    (0..20)
        .map(|i| {
            let s = seed ^ (0xABu64 << 40) ^ i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let rows = rng.random_range(3..=8);
            let cols = rng.random_range(3..=8);
            let graph = lattice(&mut rng, rows, cols, (6.0, 16.0));
            let vehicles = rng.random_range(1..=3);
            let queries = (0..vehicles)
                .map(|v| {
                    let start = (rng.random_range(0..rows), rng.random_range(0..cols));
                    let mut goal = (rng.random_range(0..rows), rng.random_range(0..cols));
                    while goal == start {
                        goal = (rng.random_range(0..rows), rng.random_range(0..cols));
                    }
                    let depart = (rng.random_range(0.0f64..90.0)).round();
                    query(&graph, &format!("v{v}"), start, goal, depart)
                })
                .collect();
            finish(format!("static_{i:02}"), s, graph, Vec::new(), queries)
        })
        .collect()
}

/// 10×10 uniform grid with a wave of congestion rolling across the middle.
pub fn grid10_congestion() -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let graph = lattice(&mut rng, 10, 10, (12.0, 12.0));
    let e = |a: (usize, usize), b: (usize, usize)| {
        graph
            .edge_by_name(&format!("{}_{}", node_name(a.0, a.1), node_name(b.0, b.1)))
            .expect("lattice edge")
    };
    let mut events = Vec::new();
    for (i, c) in (2..8).enumerate() {
        let t = 20.0 + 25.0 * i as f64;
        events.push(event(
            t,
            EventKind::SetCongestion {
                edge: e((4, c), (4, c + 1)),
                factor: 4.0,
            },
        ));
        events.push(event(
            t,
            EventKind::SetCongestion {
                edge: e((5, c), (5, c + 1)),
                factor: 3.0,
            },
        ));
    }
    let queries = vec![
        query(&graph, "v0", (4, 0), (5, 9), 0.0),
        query(&graph, "v1", (0, 0), (9, 9), 0.0),
        query(&graph, "v2", (9, 0), (4, 9), 30.0),
    ];
    finish("grid10_congestion".into(), SUITE_SEED, graph, events, queries)
}

/// Two vehicles: `a` is forced through a latently slow edge, `b` departs
/// later and can take a slightly longer detour once `a` has reported.
pub fn crowd_fixture() -> Scenario {
    let nodes = vec![
        NodeRecord {
            name: "g".into(),
            x: 200.0,
            y: 0.0,
        },
        NodeRecord {
            name: "m".into(),
            x: 100.0,
            y: 0.0,
        },
        NodeRecord {
            name: "s".into(),
            x: 0.0,
            y: 0.0,
        },
        NodeRecord {
            name: "u".into(),
            x: 100.0,
            y: 100.0,
        },
    ];
    let edge = |name: &str, from: &str, to: &str, length_m: f64, base_time_s: f64| EdgeSpec {
        name: name.into(),
        from: from.into(),
        to: to.into(),
        length_m,
        base_time_s,
    };
    let edges = vec![
        edge("mg", "m", "g", 100.0, 10.0),
        edge("sm", "s", "m", 100.0, 10.0),
        edge("su", "s", "u", 150.0, 15.0),
        edge("ug", "u", "g", 150.0, 15.0),
    ];
    let graph = RoadGraph::build(nodes, edges).expect("fixture is well formed");
    let id = |n: &str| graph.node_by_name(n).expect("fixture node");
    let q = |vehicle: &str, start: &str, depart_s: f64| Query {
        vehicle: vehicle.into(),
        start: id(start),
        goal: id("g"),
        depart_s,
        weights: HeuristicWeights::default(),
        context: ContextFlags::default(),
    };
    let mg = graph.edge_by_name("mg").expect("fixture edge");
    let events = vec![Event {
        at_time_s: 0.0,
        kind: EventKind::SetCongestion { edge: mg, factor: 5.0 },
        latent: true,
    }];
    let queries = vec![q("a", "m", 0.0), q("b", "s", 60.0)];
    finish("crowd_fixture".into(), SUITE_SEED, graph, events, queries)
}

/// Every bundled file, as (path relative to the suites root, scenario).
pub fn bundled(seed: u64) -> Vec<(PathBuf, Scenario)> {
    let mut out = Vec::new();
    for (i, s) in dynamic_suite(seed).into_iter().enumerate() {
        out.push((PathBuf::from(format!("dynamic/{i:03}_{}.scn", s.name)), s));
    }
    for s in static_suite(seed) {
        out.push((PathBuf::from(format!("static/{}.scn", s.name)), s));
    }
    out.push((PathBuf::from("grid10_congestion.scn"), grid10_congestion()));
    out.push((PathBuf::from("crowd_fixture.scn"), crowd_fixture()));
    out
}

pub fn write_suites(root: &Path, seed: u64) -> io::Result<()> {
    for (rel, s) in bundled(seed) {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serialize_scenario(&s))?;
    }
    Ok(())
}

/// `*.scn` files directly inside `dir`, sorted by file name.
pub fn suite_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_suite_dir(dir: &Path) -> Result<Vec<(PathBuf, Scenario)>, ScenarioError> {
    let files = suite_files(dir).map_err(|e| ScenarioError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    files
        .into_iter()
        .map(|p| load_scenario_file(&p).map(|s| (p, s)))
        .collect()
}

/// Directory holding the committed suites.
pub fn bundled_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("suites")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario;

    #[test]
    fn suite_sizes() {
        assert_eq!(dynamic_suite(SUITE_SEED).len(), 100);
        let st = static_suite(SUITE_SEED);
        assert_eq!(st.len(), 20);
        assert!(st.iter().all(|s| s.events.is_empty()));
        let g = grid10_congestion();
        assert_eq!(g.graph.node_count(), 100);
        assert_eq!(g.events.len(), 12);
    }

    #[test]
    fn generated_scenarios_round_trip() {
        for s in dynamic_suite(SUITE_SEED).iter().step_by(7) {
            let text = serialize_scenario(s);
            let back = load_scenario(&text).unwrap();
            assert_eq!(serialize_scenario(&back), text);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            dynamic_scenario(5, Category::CrowdSensing, 3),
            dynamic_scenario(5, Category::CrowdSensing, 3)
        );
    }
}
