//! Dynamic weighted multi-heuristic routing for a connected vehicle fleet.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`graph`] and [`scenario`] own the road network, the dynamic overlay
//!   (congestion, comfort, blockages), timed events and immutable snapshots.
//! * [`heuristics`] computes the time / comfort / safety terms and folds them
//!   into the weighted cost `w_g·g + w1·h1 + w2·h2 + w3·h3`.
//! * [`planners`] holds the dynamic A* search, the baseline planners and
//!   epoch replanning.
//! * [`sim`] runs the epoch-synchronous fleet simulation with crowd-sensed
//!   observations flowing through a shared store.
//! * [`eval`] computes the time-expanded offline optimum and the
//!   optimality/adaptability score table.
//! * [`suite`] generates the bundled scenario suites; [`cli`] is the
//!   command-line front end.

pub mod cli;
pub mod eval;
pub mod graph;
pub mod heuristics;
pub mod planners;
pub mod scenario;
pub mod sim;
pub mod suite;

pub use graph::{
    apply_event, make_grid, neighbors, snapshot, EdgeId, EdgeRecord, EdgeState, Event, EventKind, GraphError,
    GraphSnapshot, Neighbor, NodeId, NodeRecord, RoadGraph,
};
pub use heuristics::{
    adapt_weights, combined_f, comfort_heuristic, ingest_observations, safety_heuristic, time_heuristic, ContextFlags,
    HeuristicError, HeuristicField, HeuristicWeights, Observation,
};
pub use planners::{
    dijkstra_ucs, dyn_a_star, greedy_best_first, replan, rrt_plan, static_a_star, PlanError, PlanResult, PlanStatus,
    RrtParams, SearchParams,
};
pub use scenario::{load_scenario, serialize_scenario, Query, Scenario, ScenarioError};
pub use sim::{run_simulation, step_epoch, Algorithm, SimConfig, SimulationTrace, World};
