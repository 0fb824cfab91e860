//! Time, comfort and safety heuristics and the weighted cost they feed.
//!
//! h1 is the straight-line time bound, h2 the per-node comfort value that
//! events and crowd-sensed observations move, and h3 the per-node safety
//! value fixed when the field is constructed. All three are expressed in
//! seconds-equivalent so the weighted sum is dimensionally coherent.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeId, GraphError, GraphSnapshot, NodeId, RoadGraph};

pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("{what} must be finite and non-negative (got {value})")]
    InvalidInput { what: &'static str, value: f64 },
    #[error("path-cost weight w_g must be strictly positive (got {0})")]
    ZeroPathWeight(f64),
    #[error("smoothing alpha must lie in (0, 1] (got {0})")]
    InvalidAlpha(f64),
    #[error("heuristic field has {got} entries, graph has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
}

fn non_negative(what: &'static str, value: f64) -> Result<f64, HeuristicError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(HeuristicError::InvalidInput { what, value })
    }
}

/// Per-node comfort (h2) and safety (h3) values.
///
/// `h3` sits behind an `Arc<[f64]>` with no mutating accessor.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicField {
    h2: Vec<f64>,
    h3: Arc<[f64]>,
    smoothing_alpha: f64,
}

impl HeuristicField {
    pub fn new(node_count: usize, h2: Vec<f64>, h3: Vec<f64>, alpha: f64) -> Result<Self, HeuristicError> {
        for values in [&h2, &h3] {
            if values.len() != node_count {
                return Err(HeuristicError::SizeMismatch {
                    expected: node_count,
                    got: values.len(),
                });
            }
        }
        for &v in &h2 {
            non_negative("h2", v)?;
        }
        for &v in &h3 {
            non_negative("h3", v)?;
        }
        check_alpha(alpha)?;
        Ok(Self {
            h2,
            h3: h3.into(),
            smoothing_alpha: alpha,
        })
    }

    pub fn zeros(node_count: usize) -> Self {
        Self {
            h2: vec![0.0; node_count],
            h3: vec![0.0; node_count].into(),
            smoothing_alpha: DEFAULT_ALPHA,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, HeuristicError> {
        self.smoothing_alpha = check_alpha(alpha)?;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn h2_values(&self) -> &[f64] {
        &self.h2
    }

    pub fn h3_values(&self) -> &[f64] {
        &self.h3
    }

    pub(crate) fn set_comfort(&mut self, node: NodeId, value: f64) {
        if let Some(slot) = self.h2.get_mut(node.index()) {
            *slot = value;
        }
    }
}

fn check_alpha(alpha: f64) -> Result<f64, HeuristicError> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(HeuristicError::InvalidAlpha(alpha))
    }
}

/// Coefficients of `w_g·g + w1·h1 + w2·h2 + w3·h3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicWeights {
    #[serde(rename = "wg")]
    pub w_g: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }
}

impl HeuristicWeights {
    pub fn new(w_g: f64, w1: f64, w2: f64, w3: f64) -> Result<Self, HeuristicError> {
        Self { w_g, w1, w2, w3 }.validated()
    }

    pub fn validated(self) -> Result<Self, HeuristicError> {
        non_negative("w_g", self.w_g)?;
        non_negative("w1", self.w1)?;
        non_negative("w2", self.w2)?;
        non_negative("w3", self.w3)?;
        if self.w_g == 0.0 {
            return Err(HeuristicError::ZeroPathWeight(self.w_g));
        }
        Ok(self)
    }

    /// Weighted sum with no input checks; the search hot path uses this.
    #[inline]
    pub fn combine(&self, g: f64, h1: f64, h2: f64, h3: f64) -> f64 {
        self.w_g * g + self.w1 * h1 + self.w2 * h2 + self.w3 * h3
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            w_g: self.w_g * a,
            w1: self.w1 * a,
            w2: self.w2 * a,
            w3: self.w3 * a,
        }
    }
}

/// Context reported by passengers and sensors that drives weight adaptation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextFlags {
    pub passenger_prefers_comfort: bool,
    pub rough_road_reported: bool,
    pub heavy_traffic_reported: bool,
}

impl ContextFlags {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// One crowd-sensed report of an edge traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub edge: EdgeId,
    pub observed_travel_time_s: f64,
    pub observed_comfort: f64,
    pub reporter: String,
    pub at_time_s: f64,
}

pub fn time_heuristic(snap: &GraphSnapshot, node: NodeId, goal: NodeId) -> Result<f64, GraphError> {
    snap.check_node(node)?;
    snap.check_node(goal)?;
    Ok(snap.h1(node, goal))
}

/// Comfort value of `node`; nodes without a value read as 0.
pub fn comfort_heuristic(field: &HeuristicField, node: NodeId) -> f64 {
    field.h2.get(node.index()).copied().unwrap_or(0.0)
}

/// Safety value of `node`; nodes without a value read as 0.
pub fn safety_heuristic(field: &HeuristicField, node: NodeId) -> f64 {
    field.h3.get(node.index()).copied().unwrap_or(0.0)
}

pub fn combined_f(g: f64, h1: f64, h2: f64, h3: f64, w: &HeuristicWeights) -> Result<f64, HeuristicError> {
    non_negative("g", g)?;
    non_negative("h1", h1)?;
    non_negative("h2", h2)?;
    non_negative("h3", h3)?;
    let w = w.validated()?;
    Ok(w.combine(g, h1, h2, h3))
}

/// Folds a batch of observations into the overlay by exponential smoothing.
///
/// The batch is validated as a whole before anything is written, then
/// applied in `(at_time, edge, reporter)` order.
pub fn ingest_observations(
    graph: &mut RoadGraph,
    field: &mut HeuristicField,
    batch: &[Observation],
) -> Result<(), GraphError> {
    for obs in batch {
        graph.edge_state(obs.edge)?;
        if !(obs.observed_travel_time_s.is_finite() && obs.observed_travel_time_s > 0.0) {
            return Err(GraphError::InvalidValue {
                what: "observed travel time",
                value: obs.observed_travel_time_s,
            });
        }
        if !(obs.observed_comfort.is_finite() && obs.observed_comfort >= 0.0) {
            return Err(GraphError::InvalidValue {
                what: "observed comfort",
                value: obs.observed_comfort,
            });
        }
        if !obs.at_time_s.is_finite() {
            return Err(GraphError::InvalidValue {
                what: "observation time",
                value: obs.at_time_s,
            });
        }
    }

    let mut ordered: Vec<&Observation> = batch.iter().collect();
    ordered.sort_by(|a, b| {
        a.at_time_s
            .total_cmp(&b.at_time_s)
            .then(a.edge.cmp(&b.edge))
            .then_with(|| a.reporter.cmp(&b.reporter))
    });

    let alpha = field.alpha();
    let topo = graph.topology().clone();
    for obs in ordered {
        let rec = topo.edge(obs.edge);
        let ratio = obs.observed_travel_time_s / rec.base_time_s;
        let state = graph.edge_state_mut(obs.edge)?;
        state.congestion_factor = ((1.0 - alpha) * state.congestion_factor + alpha * ratio).max(1.0);
        state.comfort_penalty = (1.0 - alpha) * state.comfort_penalty + alpha * obs.observed_comfort;
        let head = rec.to;
        let old = comfort_heuristic(field, head);
        field.set_comfort(head, (1.0 - alpha) * old + alpha * obs.observed_comfort);
    }
    Ok(())
}

/// Fixed multiplier table: comfort preference doubles w2, a rough-road
/// report scales w2 by 1.5, heavy traffic scales w1 by 1.5. `w_g` and `w3`
/// pass through unchanged.
pub fn adapt_weights(base: &HeuristicWeights, ctx: &ContextFlags) -> HeuristicWeights {
    let mut w = *base;
    if ctx.passenger_prefers_comfort {
        w.w2 *= 2.0;
    }
    if ctx.rough_road_reported {
        w.w2 *= 1.5;
    }
    if ctx.heavy_traffic_reported {
        w.w1 *= 1.5;
    }
    w
}
