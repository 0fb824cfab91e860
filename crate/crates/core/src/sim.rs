//! Epoch-synchronous fleet simulation with crowd-sensed observations.
//!
//! Two copies of the world are kept. The *truth* overlay receives every
//! scenario event and determines what vehicles actually experience. The
//! [`SharedStore`] is what planners see: it receives broadcast (non-latent)
//! events plus the observations vehicles report after completing an edge.
//!
//! At each epoch boundary `k·epoch_s`:
//! 1. due events are applied (at_time ≤ boundary),
//! 2. queued observations are drained into the store (or discarded when
//!    sharing is off),
//! 3. one snapshot of the store is taken,
//! 4. every active vehicle (re)plans against it and then moves along its
//!    plan for one epoch of simulated time.
//!
//! An edge's travel time and the penalty of its head node are fixed from the
//! truth state of the epoch in which the edge is entered. Vehicles never
//! wait once they have departed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{apply_event, EdgeId, GraphError, GraphSnapshot, NodeId, RoadGraph};
use crate::heuristics::{
    adapt_weights, ingest_observations, HeuristicField, HeuristicWeights, Observation, DEFAULT_ALPHA,
};
use crate::planners::{
    dijkstra_ucs, dyn_a_star, greedy_best_first, replan_with, rrt_plan, static_a_star, PlanError, PlanResult,
    PlanStatus, RrtParams, SearchParams, DEFAULT_HYSTERESIS,
};
use crate::scenario::Scenario;

pub const DEFAULT_EPOCH_S: f64 = 30.0;
const MAX_REROUTES_PER_EPOCH: usize = 8;

/// Index of the epoch containing time `t`.
#[inline]
pub fn epoch_of(t: f64, epoch_s: f64) -> u32 {
    (t / epoch_s).floor() as u32
}

#[inline]
pub fn boundary(k: u32, epoch_s: f64) -> f64 {
    k as f64 * epoch_s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ucs,
    Greedy,
    AStar,
    Rrt,
    DynAStar,
    /// Follows the offline-optimal path computed with full foreknowledge.
    OracleReplay,
}

impl Algorithm {
    pub const BENCHMARKED: [Algorithm; 5] = [
        Algorithm::Ucs,
        Algorithm::Greedy,
        Algorithm::AStar,
        Algorithm::Rrt,
        Algorithm::DynAStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ucs => "ucs",
            Algorithm::Greedy => "greedy",
            Algorithm::AStar => "astar",
            Algorithm::Rrt => "rrt",
            Algorithm::DynAStar => "dyn_astar",
            Algorithm::OracleReplay => "oracle",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ucs => "Dijkstra/UCS",
            Algorithm::Greedy => "Greedy best-first",
            Algorithm::AStar => "A*",
            Algorithm::Rrt => "Rapidly-exploring random tree",
            Algorithm::DynAStar => "A* with dynamic heuristics",
            Algorithm::OracleReplay => "Offline optimum",
        }
    }

    /// Whether the vehicle re-searches at every epoch boundary. The others
    /// plan once at departure and only reroute when their next edge is closed.
    pub fn replans_each_epoch(self) -> bool {
        matches!(self, Algorithm::Rrt | Algorithm::DynAStar)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ucs" | "dijkstra" => Algorithm::Ucs,
            "greedy" => Algorithm::Greedy,
            "astar" => Algorithm::AStar,
            "rrt" => Algorithm::Rrt,
            "dyn_astar" => Algorithm::DynAStar,
            "oracle" => Algorithm::OracleReplay,
            other => {
                return Err(format!(
                    "unknown algorithm `{other}` (expected ucs, greedy, astar, rrt, dyn_astar)"
                ))
            }
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("query {vehicle}: {source}")]
    Plan { vehicle: String, source: PlanError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("offline optimum unavailable: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub epoch_s: f64,
    pub alpha: f64,
    pub hysteresis: f64,
    /// When false, observations are collected but never reach the store.
    pub sharing: bool,
    /// Relative σ of multiplicative Gaussian noise on reported travel times.
    pub noise_sigma: f64,
    pub seed: u64,
    pub max_epochs: u32,
    #[serde(serialize_with = "ser_algorithm")]
    pub algorithm: Algorithm,
    #[serde(skip)]
    pub rrt: RrtParams,
    #[serde(skip)]
    pub weights_override: Option<HeuristicWeights>,
}

fn ser_algorithm<S: serde::Serializer>(a: &Algorithm, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(a.name())
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epoch_s: DEFAULT_EPOCH_S,
            alpha: DEFAULT_ALPHA,
            hysteresis: DEFAULT_HYSTERESIS,
            sharing: true,
            noise_sigma: 0.0,
            seed: 0,
            max_epochs: 10_000,
            algorithm: Algorithm::DynAStar,
            rrt: RrtParams::default(),
            weights_override: None,
        }
    }
}

impl SimConfig {
    pub fn validated(self) -> Result<Self, SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.epoch_s.is_finite() && self.epoch_s > 0.0) {
            return bad(format!("epoch_s must be finite and > 0 (got {})", self.epoch_s));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1] (got {})", self.alpha));
        }
        if !(self.hysteresis.is_finite() && (0.0..1.0).contains(&self.hysteresis)) {
            return bad(format!("hysteresis must lie in [0, 1) (got {})", self.hysteresis));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma must be finite and >= 0 (got {})",
                self.noise_sigma
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be > 0".into());
        }
        if let Some(w) = self.weights_override {
            w.validated().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        }
        self.rrt
            .validated()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    EnRoute,
    Arrived,
    Stranded,
}

impl fmt::Display for VehicleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleStatus::EnRoute => "en_route",
            VehicleStatus::Arrived => "arrived",
            VehicleStatus::Stranded => "stranded",
        })
    }
}

/// An edge a vehicle is currently driving along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transit {
    pub edge: EdgeId,
    pub to: NodeId,
    pub enter_s: f64,
    pub arrive_s: f64,
    pub travel_time_s: f64,
    pub comfort_penalty: f64,
}

/// What a vehicle experienced on one completed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traversal {
    pub travel_time_s: f64,
    pub comfort_penalty: f64,
    pub completed_at_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: String,
    pub query: usize,
    pub goal: NodeId,
    pub depart_s: f64,
    pub weights: HeuristicWeights,
    pub current_node: NodeId,
    pub plan: PlanResult,
    /// Index in `plan.path` of the node the vehicle is at or driving toward.
    pub plan_pos: usize,
    pub transit: Option<Transit>,
    pub position_on_edge: f64,
    /// Time at which the vehicle reached `current_node` (or departs from it).
    pub clock: f64,
    pub realized_cost: f64,
    pub status: VehicleStatus,
    pub arrival_s: Option<f64>,
    pub traveled: Vec<NodeId>,
    pub planned: bool,
    pub replans: u32,
    pub route_changes: u32,
    pub reroutes: u32,
    pub expanded: u64,
    pub error: Option<String>,
}

impl VehicleState {
    pub fn is_done(&self) -> bool {
        self.status != VehicleStatus::EnRoute
    }

    fn decision_node(&self) -> NodeId {
        self.transit.map(|t| t.to).unwrap_or(self.current_node)
    }
}

/// Observation for the shared store built from a completed traversal.
pub fn collect_observation(vehicle: &str, edge: EdgeId, outcome: &Traversal) -> Observation {
    Observation {
        edge,
        observed_travel_time_s: outcome.travel_time_s,
        observed_comfort: outcome.comfort_penalty,
        reporter: vehicle.to_string(),
        at_time_s: outcome.completed_at_s,
    }
}

/// The planners' view of the network plus the pending V2N observation queue.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedStore {
    pub graph: RoadGraph,
    pub field: HeuristicField,
    pub pending: Vec<Observation>,
    pub clock_s: f64,
}

impl SharedStore {
    pub fn snapshot(&self) -> GraphSnapshot {
        self.graph.snapshot(&self.field, self.clock_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub index: u32,
    pub time_s: f64,
    /// Indices into the scenario's event list.
    pub events_applied: Vec<usize>,
    pub observations_ingested: usize,
    pub observations_discarded: usize,
    pub plans: usize,
    pub route_changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleTrace {
    pub vehicle: String,
    pub status: VehicleStatus,
    pub realized_cost_s: f64,
    pub depart_s: f64,
    pub arrival_s: Option<f64>,
    pub replans: u32,
    pub route_changes: u32,
    pub reroutes: u32,
    pub expanded: u64,
    pub path: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub scenario: String,
    pub seed: u64,
    pub config: SimConfig,
    pub vehicles: Vec<VehicleTrace>,
    pub epochs: Vec<EpochRecord>,
}

impl SimulationTrace {
    /// Canonical JSON (sorted keys).
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("trace serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("trace serializes");
        out.push('\n');
        out
    }

    /// One row per vehicle: vehicle, status, realized_cost_s, arrival_s, replans, path.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["vehicle", "status", "realized_cost_s", "arrival_s", "replans", "path"])
            .expect("in-memory write");
        for v in &self.vehicles {
            w.write_record([
                v.vehicle.clone(),
                v.status.to_string(),
                v.realized_cost_s.to_string(),
                v.arrival_s.map(|a| a.to_string()).unwrap_or_default(),
                v.replans.to_string(),
                v.path.join(" "),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn vehicle(&self, id: &str) -> Option<&VehicleTrace> {
        self.vehicles.iter().find(|v| v.vehicle == id)
    }
}

/// Complete simulation state between epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    scenario: Arc<Scenario>,
    config: SimConfig,
    store: SharedStore,
    truth_graph: RoadGraph,
    truth_field: HeuristicField,
    next_event: usize,
    epoch: u32,
    vehicles: Vec<VehicleState>,
    epochs: Vec<EpochRecord>,
    noise_rng: ChaCha8Rng,
    fixed_paths: Option<Vec<Vec<NodeId>>>,
}

impl World {
    pub fn new(scenario: &Scenario, config: SimConfig) -> Result<Self, SimError> {
        let config = config.validated()?;
        let fixed_paths = if config.algorithm == Algorithm::OracleReplay {
            let paths = (0..scenario.queries.len())
                .map(|qi| {
                    crate::eval::offline_optimal(scenario, qi, config.epoch_s)
                        .map(|o| o.optimal_path)
                        .map_err(|e| SimError::Oracle(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(paths)
        } else {
            None
        };

        let mut vehicles: Vec<VehicleState> = scenario
            .queries
            .iter()
            .enumerate()
            .map(|(qi, q)| {
                let base = config.weights_override.unwrap_or(q.weights);
                let weights = adapt_weights(&base, &q.context)
                    .validated()
                    .map_err(|e| SimError::Plan {
                        vehicle: q.vehicle.clone(),
                        source: PlanError::InvalidWeights(e),
                    })?;
                Ok(VehicleState {
                    id: q.vehicle.clone(),
                    query: qi,
                    goal: q.goal,
                    depart_s: q.depart_s,
                    weights,
                    current_node: q.start,
                    plan: PlanResult::unreachable(0),
                    plan_pos: 0,
                    transit: None,
                    position_on_edge: 0.0,
                    clock: q.depart_s,
                    realized_cost: 0.0,
                    status: VehicleStatus::EnRoute,
                    arrival_s: None,
                    traveled: vec![q.start],
                    planned: false,
                    replans: 0,
                    route_changes: 0,
                    reroutes: 0,
                    expanded: 0,
                    error: None,
                })
            })
            .collect::<Result<_, SimError>>()?;
        vehicles.sort_by(|a, b| a.id.cmp(&b.id));

        let field = scenario
            .initial_field
            .clone()
            .with_alpha(config.alpha)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            scenario: Arc::new(scenario.clone()),
            config,
            store: SharedStore {
                graph: scenario.graph.clone(),
                field: field.clone(),
                pending: Vec::new(),
                clock_s: 0.0,
            },
            truth_graph: scenario.graph.clone(),
            truth_field: field,
            next_event: 0,
            epoch: 0,
            vehicles,
            epochs: Vec::new(),
            noise_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x6e6f_6973_6521),
            fixed_paths,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn is_quiescent(&self) -> bool {
        self.vehicles.iter().all(VehicleState::is_done)
    }

    pub fn trace(&self) -> SimulationTrace {
        let names = |path: &[NodeId]| {
            path.iter()
                .map(|&n| self.scenario.graph.node_name(n).to_string())
                .collect()
        };
        SimulationTrace {
            scenario: self.scenario.name.clone(),
            seed: self.config.seed,
            config: self.config,
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleTrace {
                    vehicle: v.id.clone(),
                    status: v.status,
                    realized_cost_s: v.realized_cost,
                    depart_s: v.depart_s,
                    arrival_s: v.arrival_s,
                    replans: v.replans,
                    route_changes: v.route_changes,
                    reroutes: v.reroutes,
                    expanded: v.expanded,
                    path: names(&v.traveled),
                    error: v.error.clone(),
                })
                .collect(),
            epochs: self.epochs.clone(),
        }
    }

    fn search_params(&self, vi: usize, salt: u64) -> SearchParams {
        let v = &self.vehicles[vi];
        SearchParams {
            weights: v.weights,
            rng_seed: mix_seed(self.config.seed, v.query as u64, self.epoch as u64, salt),
            rrt: self.config.rrt,
            ..SearchParams::default()
        }
    }

    fn plan_from(&self, vi: usize, snap: &GraphSnapshot, from: NodeId, salt: u64) -> Result<PlanResult, PlanError> {
        let v = &self.vehicles[vi];
        let params = self.search_params(vi, salt);
        match self.config.algorithm {
            Algorithm::Ucs => dijkstra_ucs(snap, from, v.goal),
            Algorithm::Greedy => greedy_best_first(snap, from, v.goal),
            Algorithm::AStar => static_a_star(snap, from, v.goal),
            Algorithm::Rrt => rrt_plan(snap, from, v.goal, &params),
            Algorithm::DynAStar => dyn_a_star(snap, from, v.goal, &params),
            Algorithm::OracleReplay => {
                // The fixed path is only valid from the departure node.
                let path = &self.fixed_paths.as_ref().expect("oracle paths computed")[v.query];
                if v.planned || path.first() != Some(&from) {
                    return Ok(PlanResult::unreachable(0));
                }
                Ok(PlanResult {
                    path: path.clone(),
                    g_cost: 0.0,
                    f_cost_at_goal: 0.0,
                    expanded: 0,
                    status: PlanStatus::Found,
                })
            }
        }
    }

    fn strand(&mut self, vi: usize, error: Option<String>) {
        let v = &mut self.vehicles[vi];
        v.status = VehicleStatus::Stranded;
        if error.is_some() {
            v.error = error;
        }
    }

    /// Moves vehicle `vi` through epoch `k`, appending observations for every
    /// completed edge.
    fn advance(&mut self, vi: usize, snap: &GraphSnapshot, truth: &GraphSnapshot, out: &mut Vec<Observation>) {
        let k = self.epoch;
        let epoch_s = self.config.epoch_s;
        let t_end = boundary(k + 1, epoch_s);
        let mut reroutes = 0;
        loop {
            let v = &mut self.vehicles[vi];
            if let Some(tr) = v.transit {
                if tr.arrive_s > t_end {
                    v.position_on_edge = ((t_end - tr.enter_s) / tr.travel_time_s).clamp(0.0, 1.0);
                    return;
                }
                v.transit = None;
                v.position_on_edge = 0.0;
                v.current_node = tr.to;
                v.clock = tr.arrive_s;
                v.traveled.push(tr.to);
                let mut outcome = Traversal {
                    travel_time_s: tr.travel_time_s,
                    comfort_penalty: tr.comfort_penalty,
                    completed_at_s: tr.arrive_s,
                };
                if self.config.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut self.noise_rng);
                    outcome.travel_time_s *= (1.0 + self.config.noise_sigma * z).max(0.05);
                }
                out.push(collect_observation(&v.id, tr.edge, &outcome));
            }
            let v = &mut self.vehicles[vi];
            if v.current_node == v.goal {
                v.status = VehicleStatus::Arrived;
                v.arrival_s = Some(v.clock);
                return;
            }
            if epoch_of(v.clock, epoch_s) != k {
                return;
            }
            let here = v.current_node;
            let next = v.plan.path.get(v.plan_pos + 1).copied();
            match next.and_then(|n| truth.best_edge(here, n)) {
                Some(nb) => {
                    let travel = nb.travel_time_s;
                    v.realized_cost += travel + truth.node_penalty(nb.node);
                    v.transit = Some(Transit {
                        edge: nb.edge,
                        to: nb.node,
                        enter_s: v.clock,
                        arrive_s: v.clock + travel,
                        travel_time_s: travel,
                        comfort_penalty: truth.edge_state(nb.edge).comfort_penalty,
                    });
                    v.plan_pos += 1;
                }
                None => {
                    // The next edge on the plan is closed: reroute on the spot.
                    reroutes += 1;
                    v.reroutes += 1;
                    if reroutes > MAX_REROUTES_PER_EPOCH {
                        self.strand(vi, Some("reroute limit reached".into()));
                        return;
                    }
                    match self.plan_from(vi, snap, here, 1000 + reroutes as u64) {
                        Ok(plan) if plan.is_found() && plan.path.len() >= 2 => {
                            let v = &mut self.vehicles[vi];
                            v.expanded += plan.expanded as u64;
                            v.plan = plan;
                            v.plan_pos = 0;
                        }
                        Ok(_) => {
                            self.strand(vi, None);
                            return;
                        }
                        Err(e) => {
                            self.strand(vi, Some(e.to_string()));
                            return;
                        }
                    }
                }
            }
        }
    }
}

fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut x = seed;
    for v in [a, b, c] {
        x = splitmix(x ^ splitmix(v));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs exactly one epoch. A quiescent world is returned unchanged.
pub fn step_epoch(world: &mut World) {
    if world.is_quiescent() {
        return;
    }
    let k = world.epoch;
    if k >= world.config.max_epochs {
        for vi in 0..world.vehicles.len() {
            if !world.vehicles[vi].is_done() {
                world.strand(vi, Some("simulation horizon reached".into()));
            }
        }
        return;
    }
    let epoch_s = world.config.epoch_s;
    let now = boundary(k, epoch_s);
    let mut record = EpochRecord {
        index: k,
        time_s: now,
        events_applied: Vec::new(),
        observations_ingested: 0,
        observations_discarded: 0,
        plans: 0,
        route_changes: 0,
    };

    let scenario = Arc::clone(&world.scenario);
    while let Some(ev) = scenario.events.get(world.next_event) {
        if ev.at_time_s > now {
            break;
        }
        apply_event(&mut world.truth_graph, &mut world.truth_field, ev).expect("scenario events were validated");
        if !ev.latent {
            apply_event(&mut world.store.graph, &mut world.store.field, ev).expect("scenario events were validated");
        }
        record.events_applied.push(world.next_event);
        world.next_event += 1;
    }

    let pending = std::mem::take(&mut world.store.pending);
    if world.config.sharing {
        ingest_observations(&mut world.store.graph, &mut world.store.field, &pending)
            .expect("observations reference known edges");
        record.observations_ingested = pending.len();
    } else {
        record.observations_discarded = pending.len();
    }

    world.store.clock_s = now;
    let snap = world.store.snapshot();
    let truth = world.truth_graph.snapshot(&world.truth_field, now);

    let mut observations = Vec::new();
    for vi in 0..world.vehicles.len() {
        let v = &world.vehicles[vi];
        if v.is_done() || epoch_of(v.depart_s, epoch_s) > k {
            continue;
        }
        let from = v.decision_node();
        if !v.planned {
            match world.plan_from(vi, &snap, from, 0) {
                Ok(plan) => {
                    record.plans += 1;
                    let v = &mut world.vehicles[vi];
                    v.planned = true;
                    v.expanded += plan.expanded as u64;
                    v.plan_pos = 0;
                    let found = plan.is_found();
                    v.plan = plan;
                    if !found {
                        world.strand(vi, None);
                        continue;
                    }
                }
                Err(e) => {
                    world.strand(vi, Some(e.to_string()));
                    continue;
                }
            }
        } else if world.config.algorithm.replans_each_epoch() {
            let params = world.search_params(vi, 0);
            let v = &world.vehicles[vi];
            let algorithm = world.config.algorithm;
            let outcome = replan_with(
                &v.plan,
                &snap,
                from,
                v.goal,
                &params,
                world.config.hysteresis,
                |s, a, b, p| match algorithm {
                    Algorithm::Rrt => rrt_plan(s, a, b, p),
                    _ => dyn_a_star(s, a, b, p),
                },
            );
            record.plans += 1;
            match outcome {
                Ok(r) if r.plan.is_found() => {
                    let v = &mut world.vehicles[vi];
                    v.replans += 1;
                    v.expanded += r.plan.expanded as u64;
                    if r.switched {
                        v.route_changes += 1;
                        record.route_changes += 1;
                    }
                    v.plan = r.plan;
                    v.plan_pos = 0;
                }
                Ok(_) => {
                    world.vehicles[vi].replans += 1;
                    world.strand(vi, None);
                    continue;
                }
                Err(e) => {
                    world.strand(vi, Some(e.to_string()));
                    continue;
                }
            }
        }
        world.advance(vi, &snap, &truth, &mut observations);
    }
    world.store.pending.extend(observations);
    world.epochs.push(record);
    world.epoch += 1;
}

pub fn run_simulation(scenario: &Scenario, config: SimConfig) -> Result<SimulationTrace, SimError> {
    let mut world = World::new(scenario, config)?;
    while !world.is_quiescent() {
        step_epoch(&mut world);
    }
    Ok(world.trace())
}
