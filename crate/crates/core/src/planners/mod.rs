//! Route planners over immutable snapshots.
//!
//! Every best-first planner shares one search loop and differs only in the
//! priority it assigns a node:
//!
//! | planner            | priority                                  |
//! |--------------------|-------------------------------------------|
//! | `dyn_a_star`       | `w_g·g + w1·h1 + w2·h2 + w3·h3`           |
//! | `dijkstra_ucs`     | `g`                                       |
//! | `static_a_star`    | `g + h1`                                  |
//! | `greedy_best_first`| `h1`                                      |
//!
//! Ties are broken by lower h1, then lower node id, so every planner is a
//! deterministic function of its inputs. `g` accumulates effective travel
//! time only. The reported [`PlanResult::g_cost`] also includes the comfort
//! and safety penalty of every node entered after the start.

mod rrt;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::{GraphError, GraphSnapshot, NodeId};
use crate::heuristics::{HeuristicError, HeuristicWeights};

pub use rrt::rrt_plan;

/// Minimum relative improvement before a replan replaces the current route.
pub const DEFAULT_HYSTERESIS: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid weights: {0}")]
    InvalidWeights(#[from] HeuristicError),
    #[error("invalid RRT parameters: {0}")]
    InvalidRrt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Found,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub path: Vec<NodeId>,
    /// Travel time plus unweighted node penalties along `path`.
    pub g_cost: f64,
    pub f_cost_at_goal: f64,
    /// Closed-set insertions (tree insertions for RRT).
    pub expanded: usize,
    pub status: PlanStatus,
}

impl PlanResult {
    pub fn unreachable(expanded: usize) -> Self {
        Self {
            path: Vec::new(),
            g_cost: f64::INFINITY,
            f_cost_at_goal: f64::INFINITY,
            expanded,
            status: PlanStatus::Unreachable,
        }
    }

    pub fn is_found(&self) -> bool {
        self.status == PlanStatus::Found
    }
}

/// The only tie-break policy: lowest f, then lowest h1, then lowest node id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    LowestFThenH1ThenNode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    pub max_iterations: u32,
    pub step_edges: u32,
    pub goal_bias: f64,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            step_edges: 3,
            goal_bias: 0.1,
        }
    }
}

impl RrtParams {
    pub fn validated(self) -> Result<Self, PlanError> {
        if self.max_iterations == 0 {
            return Err(PlanError::InvalidRrt("max_iterations must be > 0".into()));
        }
        if self.step_edges == 0 {
            return Err(PlanError::InvalidRrt("step_edges must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(PlanError::InvalidRrt(format!(
                "goal_bias must lie in [0, 1] (got {})",
                self.goal_bias
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchParams {
    pub weights: HeuristicWeights,
    pub tie_break: TieBreak,
    pub rng_seed: u64,
    pub rrt: RrtParams,
}

impl SearchParams {
    pub fn with_weights(weights: HeuristicWeights) -> Self {
        Self {
            weights,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h1: f64,
    node: NodeId,
    g: f64,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // Reversed so that `BinaryHeap` pops the smallest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h1.total_cmp(&self.h1))
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.g.total_cmp(&self.g))
    }
}

/// Shared best-first loop. Duplicates in the open set are handled by
/// reinsertion; stale entries are skipped when popped.
fn best_first(
    snap: &GraphSnapshot,
    start: NodeId,
    goal: NodeId,
    priority: impl Fn(f64, f64, NodeId) -> f64,
    mut order: Option<&mut Vec<NodeId>>,
) -> PlanResult {
    let n = snap.node_count();
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut expanded = 0usize;

    let h_start = snap.h1(start, goal);
    g[start.index()] = 0.0;
    open.push(OpenEntry {
        f: priority(0.0, h_start, start),
        h1: h_start,
        node: start,
        g: 0.0,
    });

    while let Some(cur) = open.pop() {
        let u = cur.node;
        if closed[u.index()] || cur.g > g[u.index()] {
            continue;
        }
        closed[u.index()] = true;
        expanded += 1;
        if let Some(order) = order.as_deref_mut() {
            order.push(u);
        }
        if u == goal {
            let path = reconstruct(&parent, start, goal);
            return PlanResult {
                g_cost: path_cost(snap, &path).expect("search path is traversable"),
                path,
                f_cost_at_goal: cur.f,
                expanded,
                status: PlanStatus::Found,
            };
        }
        let g_u = g[u.index()];
        for nb in snap.successors(u) {
            let v = nb.node;
            if closed[v.index()] {
                continue;
            }
            let tentative = g_u + nb.travel_time_s;
            if tentative < g[v.index()] {
                g[v.index()] = tentative;
                parent[v.index()] = Some(u);
                let h1 = snap.h1(v, goal);
                open.push(OpenEntry {
                    f: priority(tentative, h1, v),
                    h1,
                    node: v,
                    g: tentative,
                });
            }
        }
    }
    PlanResult::unreachable(expanded)
}

fn reconstruct(parent: &[Option<NodeId>], start: NodeId, goal: NodeId) -> Vec<NodeId> {
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[cur.index()].expect("parent chain reaches start");
        path.push(cur);
    }
    path.reverse();
    path
}

fn check_query(snap: &GraphSnapshot, start: NodeId, goal: NodeId) -> Result<(), PlanError> {
    snap.check_node(start)?;
    snap.check_node(goal)?;
    Ok(())
}

/// Weighted multi-heuristic A*: priority `w_g·g + w1·h1 + w2·h2 + w3·h3`.
pub fn dyn_a_star(
    snap: &GraphSnapshot,
    start: NodeId,
    goal: NodeId,
    params: &SearchParams,
) -> Result<PlanResult, PlanError> {
    dyn_a_star_traced(snap, start, goal, params, None)
}

fn dyn_a_star_traced(
    snap: &GraphSnapshot,
    start: NodeId,
    goal: NodeId,
    params: &SearchParams,
    order: Option<&mut Vec<NodeId>>,
) -> Result<PlanResult, PlanError> {
    check_query(snap, start, goal)?;
    let w = params.weights.validated()?;
    Ok(best_first(
        snap,
        start,
        goal,
        |g, h1, v| w.combine(g, h1, snap.comfort(v), snap.safety(v)),
        order,
    ))
}

pub fn dijkstra_ucs(snap: &GraphSnapshot, start: NodeId, goal: NodeId) -> Result<PlanResult, PlanError> {
    check_query(snap, start, goal)?;
    Ok(best_first(snap, start, goal, |g, _, _| g, None))
}

/// Expands by h1 alone; complete but not optimal.
pub fn greedy_best_first(snap: &GraphSnapshot, start: NodeId, goal: NodeId) -> Result<PlanResult, PlanError> {
    check_query(snap, start, goal)?;
    Ok(best_first(snap, start, goal, |_, h1, _| h1, None))
}

/// Classical A* with `f = g + h1`.
pub fn static_a_star(snap: &GraphSnapshot, start: NodeId, goal: NodeId) -> Result<PlanResult, PlanError> {
    check_query(snap, start, goal)?;
    Ok(best_first(snap, start, goal, |g, h1, _| g + h1, None))
}

/// Closed-set insertion order of a planner run, for reduction tests.
pub fn expansion_order(
    snap: &GraphSnapshot,
    start: NodeId,
    goal: NodeId,
    planner: ExpansionPlanner,
) -> Result<Vec<NodeId>, PlanError> {
    check_query(snap, start, goal)?;
    let mut order = Vec::new();
    match planner {
        ExpansionPlanner::Dyn(params) => {
            dyn_a_star_traced(snap, start, goal, &params, Some(&mut order))?;
        }
        ExpansionPlanner::Ucs => {
            best_first(snap, start, goal, |g, _, _| g, Some(&mut order));
        }
    }
    Ok(order)
}

#[derive(Debug, Clone, Copy)]
pub enum ExpansionPlanner {
    Dyn(SearchParams),
    Ucs,
}

/// Travel time plus node penalties along `path`, summed hop by hop the way
/// the simulator accrues them, or `None` if some hop has no unblocked edge.
/// Parallel edges resolve to the cheapest.
pub fn path_cost(snap: &GraphSnapshot, path: &[NodeId]) -> Option<f64> {
    let mut cost = 0.0;
    for w in path.windows(2) {
        cost += snap.best_edge(w[0], w[1])?.travel_time_s + snap.node_penalty(w[1]);
    }
    Some(cost)
}

/// Weighted re-costing used to compare routes during replanning:
/// `Σ w_g·travel + Σ (w2·h2 + w3·h3)` over entered nodes.
pub fn path_score(snap: &GraphSnapshot, path: &[NodeId], w: &HeuristicWeights) -> Option<f64> {
    let mut score = 0.0;
    for pair in path.windows(2) {
        let t = snap.best_edge(pair[0], pair[1])?.travel_time_s;
        score += w.w_g * t + w.w2 * snap.comfort(pair[1]) + w.w3 * snap.safety(pair[1]);
    }
    Some(score)
}

/// Outcome of a replan: the chosen route and whether it replaced the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Replanned {
    pub plan: PlanResult,
    pub switched: bool,
}

/// Replans from `current` with dynamic A* and the default 1% hysteresis.
pub fn replan(
    prior: &PlanResult,
    snap: &GraphSnapshot,
    current: NodeId,
    goal: NodeId,
    params: &SearchParams,
) -> Result<PlanResult, PlanError> {
    replan_with(prior, snap, current, goal, params, DEFAULT_HYSTERESIS, |s, a, b, p| {
        dyn_a_star(s, a, b, p)
    })
    .map(|r| r.plan)
}

/// Replans with an arbitrary planner. The fresh route replaces the prior
/// suffix only if its weighted score improves by at least `hysteresis`
/// (relative); otherwise the prior suffix is kept, re-costed on `snap`.
pub fn replan_with<F>(
    prior: &PlanResult,
    snap: &GraphSnapshot,
    current: NodeId,
    goal: NodeId,
    params: &SearchParams,
    hysteresis: f64,
    planner: F,
) -> Result<Replanned, PlanError>
where
    F: FnOnce(&GraphSnapshot, NodeId, NodeId, &SearchParams) -> Result<PlanResult, PlanError>,
{
    check_query(snap, current, goal)?;
    let w = params.weights.validated()?;
    if current == goal {
        return Ok(Replanned {
            plan: PlanResult {
                path: vec![goal],
                g_cost: 0.0,
                f_cost_at_goal: w.combine(0.0, 0.0, snap.comfort(goal), snap.safety(goal)),
                expanded: 0,
                status: PlanStatus::Found,
            },
            switched: false,
        });
    }

    let suffix: Option<Vec<NodeId>> = prior
        .is_found()
        .then(|| prior.path.iter().position(|&n| n == current))
        .flatten()
        .map(|i| prior.path[i..].to_vec())
        .filter(|p| p.last() == Some(&goal));
    let kept = suffix.and_then(|p| {
        let score = path_score(snap, &p, &w)?;
        Some((p, score))
    });

    let fresh = planner(snap, current, goal, params)?;
    let Some((path, prior_score)) = kept else {
        let switched = fresh.is_found();
        return Ok(Replanned { plan: fresh, switched });
    };
    if fresh.is_found() && fresh.path != path {
        let fresh_score = path_score(snap, &fresh.path, &w).expect("fresh path is traversable");
        if fresh_score < prior_score * (1.0 - hysteresis) {
            return Ok(Replanned {
                plan: fresh,
                switched: true,
            });
        }
    }
    Ok(Replanned {
        plan: PlanResult {
            g_cost: path_cost(snap, &path).expect("kept suffix is traversable"),
            f_cost_at_goal: prior_score,
            path,
            expanded: fresh.expanded,
            status: PlanStatus::Found,
        },
        switched: false,
    })
}
