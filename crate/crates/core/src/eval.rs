//! Offline-optimal oracle and suite scoring.
//!
//! The oracle sees the true event timeline in advance and searches over
//! (node, time) states with the simulator's cost model: an edge costs its
//! effective time plus the head node's penalty, both frozen at the epoch in
//! which the edge is entered, and vehicles never wait. Once no further event
//! can fire, the remaining cost is a plain shortest path on the final state.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{apply_event, EdgeId, GraphSnapshot, NodeId, Topology};
use crate::scenario::Scenario;
use crate::sim::{epoch_of, run_simulation, Algorithm, SimConfig, SimulationTrace, VehicleStatus};

pub const MAX_ORACLE_NODES: usize = 400;
pub const MAX_ORACLE_EVENTS: usize = 64;
pub const DEFAULT_RHO: f64 = 1.15;
const MAX_ORACLE_STATES: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("scenario `{scenario}` has {count} {what}, above the oracle limit of {limit}")]
    TooLarge {
        scenario: String,
        what: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("scenario `{0}`: oracle state budget exhausted")]
    StateBudget(String),
    #[error("scenario `{scenario}` has no query {query}")]
    NoSuchQuery { scenario: String, query: usize },
    #[error("scenario `{scenario}`, vehicle {vehicle}: goal unreachable even with foreknowledge")]
    Unreachable { scenario: String, vehicle: String },
    #[error("rho must be finite and >= 1 (got {0})")]
    InvalidRho(f64),
    #[error("epoch_s must be finite and > 0 (got {0})")]
    InvalidEpoch(f64),
    #[error("empty suite")]
    EmptySuite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub query: usize,
    pub vehicle: String,
    pub optimal_realized_cost: f64,
    pub optimal_path: Vec<NodeId>,
}

/// First epoch k with k·epoch_s ≥ t, using the same comparison the
/// simulator applies at each boundary.
fn fire_epoch(t: f64, epoch_s: f64) -> u32 {
    let mut k = (t / epoch_s).ceil().max(0.0) as u32;
    while k > 0 && ((k - 1) as f64) * epoch_s >= t {
        k -= 1;
    }
    while (k as f64) * epoch_s < t {
        k += 1;
    }
    k
}

/// True network state per epoch, as the simulator applies events.
#[derive(Debug, Clone)]
pub struct TruthTimeline {
    epoch_s: f64,
    /// (first epoch, state) pairs in increasing epoch order.
    states: Vec<(u32, GraphSnapshot)>,
}

impl TruthTimeline {
    pub fn new(scenario: &Scenario, epoch_s: f64) -> Self {
        let mut graph = scenario.graph.clone();
        let mut field = scenario.initial_field.clone();
        let mut states = Vec::new();
        let mut i = 0;
        let events = &scenario.events;
        if events.first().is_none_or(|e| fire_epoch(e.at_time_s, epoch_s) > 0) {
            states.push((0, graph.snapshot(&field, 0.0)));
        }
        while i < events.len() {
            let k = fire_epoch(events[i].at_time_s, epoch_s);
            while i < events.len() && events[i].at_time_s <= k as f64 * epoch_s {
                apply_event(&mut graph, &mut field, &events[i]).expect("scenario events were validated");
                i += 1;
            }
            let snap = graph.snapshot(&field, k as f64 * epoch_s);
            match states.last_mut() {
                Some((last, s)) if *last == k => *s = snap,
                _ => states.push((k, snap)),
            }
        }
        Self { epoch_s, states }
    }

    pub fn epoch_s(&self) -> f64 {
        self.epoch_s
    }

    /// First epoch from which the state never changes again.
    pub fn static_from(&self) -> u32 {
        self.states.last().map(|s| s.0).unwrap_or(0)
    }

    pub fn at_epoch(&self, k: u32) -> &GraphSnapshot {
        let i = self.states.partition_point(|(first, _)| *first <= k);
        &self.states[i.saturating_sub(1)].1
    }

    pub fn at_time(&self, t: f64) -> &GraphSnapshot {
        self.at_epoch(epoch_of(t, self.epoch_s))
    }

    pub fn final_state(&self) -> &GraphSnapshot {
        &self.states.last().expect("timeline is never empty").1
    }

    /// Realized cost of driving `path` from `depart_s` without waiting, summed
    /// in the simulator's order. `None` if some hop is closed when entered.
    pub fn walk_cost(&self, path: &[NodeId], depart_s: f64) -> Option<f64> {
        let mut t = depart_s;
        let mut cost = 0.0;
        for w in path.windows(2) {
            let snap = self.at_time(t);
            let nb = snap.best_edge(w[0], w[1])?;
            cost += nb.travel_time_s + snap.node_penalty(nb.node);
            t += nb.travel_time_s;
        }
        Some(cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    priority: f64,
    g: f64,
    terminal: bool,
    state: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| self.terminal.cmp(&other.terminal))
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reverse Dijkstra: cost-to-goal and successor toward it, with `cost`
/// giving each edge's step cost (`None` if closed).
fn cost_to_goal(
    topo: &Topology,
    goal: NodeId,
    cost: impl Fn(EdgeId) -> Option<f64>,
) -> (Vec<f64>, Vec<Option<NodeId>>) {
    let n = topo.node_count();
    let mut rev: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for (i, e) in topo.edges().iter().enumerate() {
        if let Some(c) = cost(EdgeId(i as u32)) {
            rev[e.to.index()].push((e.from, c));
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut next = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[goal.index()] = 0.0;
    heap.push(Entry {
        priority: 0.0,
        g: 0.0,
        terminal: false,
        state: goal.index(),
    });
    while let Some(Entry { g, state, .. }) = heap.pop() {
        if g > dist[state] {
            continue;
        }
        for &(u, c) in &rev[state] {
            let nd = g + c;
            if nd < dist[u.index()] {
                dist[u.index()] = nd;
                next[u.index()] = Some(NodeId(state as u32));
                heap.push(Entry {
                    priority: nd,
                    g: nd,
                    terminal: false,
                    state: u.index(),
                });
            }
        }
    }
    (dist, next)
}

fn step_cost(snap: &GraphSnapshot, e: EdgeId) -> Option<f64> {
    let head = snap.topology().edge(e).to;
    snap.effective_time(e).map(|t| t + snap.node_penalty(head))
}

fn check_bounds(scenario: &Scenario) -> Result<(), EvalError> {
    let nodes = scenario.graph.node_count();
    if nodes > MAX_ORACLE_NODES {
        return Err(EvalError::TooLarge {
            scenario: scenario.name.clone(),
            what: "nodes",
            count: nodes,
            limit: MAX_ORACLE_NODES,
        });
    }
    if scenario.events.len() > MAX_ORACLE_EVENTS {
        return Err(EvalError::TooLarge {
            scenario: scenario.name.clone(),
            what: "events",
            count: scenario.events.len(),
            limit: MAX_ORACLE_EVENTS,
        });
    }
    Ok(())
}

/// Cheapest realized cost for query `query` given every event in advance.
pub fn offline_optimal(scenario: &Scenario, query: usize, epoch_s: f64) -> Result<OracleResult, EvalError> {
    check_bounds(scenario)?;
    if !(epoch_s.is_finite() && epoch_s > 0.0) {
        return Err(EvalError::InvalidEpoch(epoch_s));
    }
    let timeline = TruthTimeline::new(scenario, epoch_s);
    offline_optimal_on(scenario, &timeline, query)
}

fn offline_optimal_on(scenario: &Scenario, timeline: &TruthTimeline, query: usize) -> Result<OracleResult, EvalError> {
    let q = scenario.queries.get(query).ok_or_else(|| EvalError::NoSuchQuery {
        scenario: scenario.name.clone(),
        query,
    })?;
    let unreachable = || EvalError::Unreachable {
        scenario: scenario.name.clone(),
        vehicle: q.vehicle.clone(),
    };
    let topo = timeline.final_state().topology();
    let (dist_final, next_final) = cost_to_goal(topo, q.goal, |e| step_cost(timeline.final_state(), e));
    // Admissible bound: every edge at its cheapest over the whole timeline.
    let (lower, _) = cost_to_goal(topo, q.goal, |e| {
        timeline
            .states
            .iter()
            .filter_map(|(_, s)| step_cost(s, e))
            .min_by(f64::total_cmp)
    });
    let k_static = timeline.static_from();
    if !lower[q.start.index()].is_finite() {
        return Err(unreachable());
    }

    // states: (node, time, cost, parent)
    let mut states: Vec<(NodeId, f64, f64, Option<usize>)> = vec![(q.start, q.depart_s, 0.0, None)];
    let mut index: HashMap<(NodeId, u64), usize> = HashMap::new();
    index.insert((q.start, q.depart_s.to_bits()), 0);
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        priority: lower[q.start.index()],
        g: 0.0,
        terminal: false,
        state: 0,
    });

    let mut end = None;
    while let Some(Entry { g, terminal, state, .. }) = heap.pop() {
        if terminal {
            end = Some(state);
            break;
        }
        let (v, t, c, _) = states[state];
        if g > c {
            continue;
        }
        if v == q.goal {
            heap.push(Entry {
                priority: g,
                g,
                terminal: true,
                state,
            });
            continue;
        }
        let k = epoch_of(t, timeline.epoch_s);
        if k >= k_static {
            let rest = dist_final[v.index()];
            if rest.is_finite() {
                heap.push(Entry {
                    priority: g + rest,
                    g: g + rest,
                    terminal: true,
                    state,
                });
            }
            continue;
        }
        let snap = timeline.at_epoch(k);
        let mut seen: Vec<NodeId> = Vec::new();
        for nb in snap.successors(v) {
            if seen.contains(&nb.node) || !lower[nb.node.index()].is_finite() {
                continue;
            }
            seen.push(nb.node);
            let best = snap.best_edge(v, nb.node).expect("successor exists");
            let nc = g + best.travel_time_s + snap.node_penalty(best.node);
            let nt = t + best.travel_time_s;
            let key = (best.node, nt.to_bits());
            let id = match index.get(&key) {
                Some(&id) => {
                    if nc >= states[id].2 {
                        continue;
                    }
                    states[id].2 = nc;
                    states[id].3 = Some(state);
                    id
                }
                None => {
                    if states.len() >= MAX_ORACLE_STATES {
                        return Err(EvalError::StateBudget(scenario.name.clone()));
                    }
                    states.push((best.node, nt, nc, Some(state)));
                    index.insert(key, states.len() - 1);
                    states.len() - 1
                }
            };
            heap.push(Entry {
                priority: nc + lower[best.node.index()],
                g: nc,
                terminal: false,
                state: id,
            });
        }
    }

    let end = end.ok_or_else(unreachable)?;
    let mut path = Vec::new();
    let mut cur = Some(end);
    while let Some(s) = cur {
        path.push(states[s].0);
        cur = states[s].3;
    }
    path.reverse();
    let mut tail = *path.last().expect("non-empty");
    while tail != q.goal {
        tail = next_final[tail.index()].expect("finite distance has a successor");
        path.push(tail);
    }
    let cost = timeline
        .walk_cost(&path, q.depart_s)
        .expect("oracle path is traversable");
    Ok(OracleResult {
        query,
        vehicle: q.vehicle.clone(),
        optimal_realized_cost: cost,
        optimal_path: path,
    })
}

/// Oracle results for every query of a scenario, in query order.
pub fn offline_optimal_all(scenario: &Scenario, epoch_s: f64) -> Result<Vec<OracleResult>, EvalError> {
    check_bounds(scenario)?;
    if !(epoch_s.is_finite() && epoch_s > 0.0) {
        return Err(EvalError::InvalidEpoch(epoch_s));
    }
    let timeline = TruthTimeline::new(scenario, epoch_s);
    (0..scenario.queries.len())
        .map(|q| offline_optimal_on(scenario, &timeline, q))
        .collect()
}

/// Re-drives every recorded path through the truth timeline.
pub fn replay_realized_costs(scenario: &Scenario, trace: &SimulationTrace) -> Vec<Option<f64>> {
    let timeline = TruthTimeline::new(scenario, trace.config.epoch_s);
    trace
        .vehicles
        .iter()
        .map(|v| {
            let path: Option<Vec<NodeId>> = v.path.iter().map(|n| scenario.graph.node_by_name(n)).collect();
            timeline.walk_cost(&path?, v.depart_s)
        })
        .collect()
}

/// Result of one algorithm on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub scenario: String,
    pub algorithm: String,
    pub passed: bool,
    /// Sum of realized costs over sum of oracle costs, when every vehicle arrived.
    pub ratio: Option<f64>,
    pub stranded: usize,
    pub expanded: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmRow {
    pub algorithm: String,
    pub label: String,
    pub replans: bool,
    pub passes: usize,
    pub total: usize,
    pub score: f64,
    pub mean_ratio: f64,
    pub strandings: usize,
    pub mean_expanded: f64,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub suite: String,
    pub rho: f64,
    pub epoch_s: f64,
    pub scenarios: usize,
    pub rows: Vec<AlgorithmRow>,
    pub cells: Vec<Cell>,
}

/// Scenarios plus their oracle results, computed once per suite.
pub struct PreparedSuite<'a> {
    pub name: String,
    pub scenarios: &'a [Scenario],
    pub oracles: Vec<Vec<OracleResult>>,
    pub epoch_s: f64,
}

pub fn prepare_suite<'a>(name: &str, scenarios: &'a [Scenario], epoch_s: f64) -> Result<PreparedSuite<'a>, EvalError> {
    if scenarios.is_empty() {
        return Err(EvalError::EmptySuite);
    }
    let oracles = scenarios
        .par_iter()
        .map(|s| offline_optimal_all(s, epoch_s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PreparedSuite {
        name: name.to_string(),
        scenarios,
        oracles,
        epoch_s,
    })
}

/// Judges one finished run against the oracle.
pub fn judge(trace: &SimulationTrace, oracles: &[OracleResult], rho: f64) -> (bool, Option<f64>, usize) {
    let stranded = trace
        .vehicles
        .iter()
        .filter(|v| v.status != VehicleStatus::Arrived)
        .count();
    let mut all_within = stranded == 0;
    let (mut realized, mut optimal) = (0.0, 0.0);
    for o in oracles {
        let Some(v) = trace.vehicle(&o.vehicle) else {
            all_within = false;
            continue;
        };
        realized += v.realized_cost_s;
        optimal += o.optimal_realized_cost;
        if v.realized_cost_s > rho * o.optimal_realized_cost {
            all_within = false;
        }
    }
    let ratio = (stranded == 0).then(|| if optimal > 0.0 { realized / optimal } else { 1.0 });
    (all_within, ratio, stranded)
}

fn run_cell(scenario: &Scenario, oracles: &[OracleResult], algorithm: Algorithm, config: SimConfig, rho: f64) -> Cell {
    let config = SimConfig { algorithm, ..config };
    match run_simulation(scenario, config) {
        Ok(trace) => {
            let (passed, ratio, stranded) = judge(&trace, oracles, rho);
            Cell {
                scenario: scenario.name.clone(),
                algorithm: algorithm.name().into(),
                passed,
                ratio,
                stranded,
                expanded: trace.vehicles.iter().map(|v| v.expanded).sum(),
                error: None,
            }
        }
        Err(e) => Cell {
            scenario: scenario.name.clone(),
            algorithm: algorithm.name().into(),
            passed: false,
            ratio: None,
            stranded: 0,
            expanded: 0,
            error: Some(e.to_string()),
        },
    }
}

fn summarize(algorithm: Algorithm, cells: &[Cell]) -> AlgorithmRow {
    let total = cells.len();
    let passes = cells.iter().filter(|c| c.passed).count();
    let ratios: Vec<f64> = cells.iter().filter_map(|c| c.ratio).collect();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let expanded: Vec<f64> = cells.iter().map(|c| c.expanded as f64).collect();
    AlgorithmRow {
        algorithm: algorithm.name().into(),
        label: algorithm.label().into(),
        replans: algorithm.replans_each_epoch(),
        passes,
        total,
        score: if total == 0 { 0.0 } else { passes as f64 / total as f64 },
        mean_ratio: mean(&ratios),
        strandings: cells.iter().map(|c| c.stranded).sum(),
        mean_expanded: mean(&expanded),
        errors: cells.iter().filter(|c| c.error.is_some()).count(),
    }
}

fn check_rho(rho: f64) -> Result<(), EvalError> {
    if rho.is_finite() && rho >= 1.0 {
        Ok(())
    } else {
        Err(EvalError::InvalidRho(rho))
    }
}

/// Scores one algorithm over a prepared suite. `jobs` bounds parallelism
/// (0 = all cores); results do not depend on it.
pub fn score_suite(
    suite: &PreparedSuite<'_>,
    algorithm: Algorithm,
    config: SimConfig,
    rho: f64,
) -> Result<(AlgorithmRow, Vec<Cell>), EvalError> {
    check_rho(rho)?;
    let config = SimConfig {
        epoch_s: suite.epoch_s,
        ..config
    };
    let cells: Vec<Cell> = suite
        .scenarios
        .par_iter()
        .zip(suite.oracles.par_iter())
        .map(|(s, o)| run_cell(s, o, algorithm, config, rho))
        .collect();
    Ok((summarize(algorithm, &cells), cells))
}

pub fn compare_algorithms(suite: &PreparedSuite<'_>, config: SimConfig, rho: f64) -> Result<ScoreReport, EvalError> {
    check_rho(rho)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for algorithm in Algorithm::BENCHMARKED {
        let (row, mut c) = score_suite(suite, algorithm, config, rho)?;
        rows.push(row);
        cells.append(&mut c);
    }
    Ok(ScoreReport {
        suite: suite.name.clone(),
        rho,
        epoch_s: suite.epoch_s,
        scenarios: suite.scenarios.len(),
        rows,
        cells,
    })
}

/// Runs `f` on a rayon pool with `jobs` threads (0 = default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

impl ScoreReport {
    pub fn row(&self, algorithm: Algorithm) -> Option<&AlgorithmRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm.name())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algorithm", "score", "mean_ratio", "strandings", "mean_expanded"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.algorithm.clone(),
                format!("{:.4}", r.score),
                format!("{:.4}", r.mean_ratio),
                r.strandings.to_string(),
                format!("{:.1}", r.mean_expanded),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Per-scenario pass/fail matrix.
    pub fn cells_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "algorithm",
            "passed",
            "ratio",
            "stranded",
            "expanded",
            "error",
        ])
        .expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.scenario.clone(),
                c.algorithm.clone(),
                c.passed.to_string(),
                c.ratio.map(|r| format!("{r:.6}")).unwrap_or_default(),
                c.stranded.to_string(),
                c.expanded.to_string(),
                c.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "suite: {}  scenarios: {}  rho: {}  epoch_s: {}",
            self.suite, self.scenarios, self.rho, self.epoch_s
        );
        let _ = writeln!(
            out,
            "{:<32} {:^8} {:^8} {:>7} {:>10} {:>10} {:>13}",
            "Algorithm", "Static", "Dynamic", "Score", "MeanRatio", "Stranded", "MeanExpanded"
        );
        let _ = writeln!(out, "{}", "-".repeat(94));
        for r in &self.rows {
            let (s, d) = if r.replans { ("", "x") } else { ("x", "") };
            let _ = writeln!(
                out,
                "{:<32} {:^8} {:^8} {:>7.2} {:>10.4} {:>10} {:>13.1}",
                r.label, s, d, r.score, r.mean_ratio, r.strandings, r.mean_expanded
            );
        }
        out
    }
}
