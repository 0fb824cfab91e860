mod common;

use common::random_grid;
use dynroute::eval::{offline_optimal, prepare_suite, score_suite, EvalError, MAX_ORACLE_EVENTS};
use dynroute::graph::{EdgeId, Event, EventKind, NodeId};
use dynroute::heuristics::{ContextFlags, HeuristicField, HeuristicWeights};
use dynroute::scenario::{Query, Scenario};
use dynroute::sim::{run_simulation, Algorithm, SimConfig, VehicleStatus};
use dynroute::suite::{dynamic_scenario, dynamic_suite, Category, SUITE_SEED};
use proptest::prelude::*;

const EPOCH: f64 = 30.0;

fn grid_scenario(seed: u64, edge: u32, at: f64, factor: f64, depart: f64) -> Scenario {
    let graph = random_grid(seed, 3, 3);
    let n = graph.node_count();
    let edge = EdgeId(edge % graph.edge_count() as u32);
    Scenario {
        name: "brute".into(),
        seed,
        events: vec![Event {
            at_time_s: at,
            kind: EventKind::SetCongestion { edge, factor },
            latent: false,
        }],
        queries: vec![Query {
            vehicle: "v".into(),
            start: NodeId(0),
            goal: NodeId(n as u32 - 1),
            depart_s: depart,
            weights: HeuristicWeights::default(),
            context: ContextFlags::default(),
        }],
        initial_field: HeuristicField::zeros(n),
        graph,
    }
}

/// Every walk of up to `max_hops` edges, driven without waiting, costed
/// from first principles: the event's factor applies to edges entered in
/// an epoch whose boundary is at or after the event time.
fn brute_force(s: &Scenario, max_hops: usize) -> f64 {
    let topo = s.graph.topology();
    let Event { at_time_s, kind, .. } = s.events[0];
    let EventKind::SetCongestion { edge: hot, factor } = kind else {
        unreachable!()
    };
    let q = &s.queries[0];
    let mut best = f64::INFINITY;
    let mut stack = vec![(q.start, q.depart_s, 0.0, 0usize)];
    while let Some((v, t, cost, hops)) = stack.pop() {
        if v == q.goal {
            best = best.min(cost);
            continue;
        }
        if hops == max_hops || cost >= best {
            continue;
        }
        for &e in topo.outgoing(v) {
            let rec = topo.edge(e);
            let boundary = (t / EPOCH).floor() * EPOCH;
            let f = if e == hot && at_time_s <= boundary { factor } else { 1.0 };
            let tau = rec.base_time_s * f;
            stack.push((rec.to, t + tau, cost + tau, hops + 1));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_matches_brute_force_on_3x3(
        seed in any::<u64>(),
        edge in any::<u32>(),
        at in 0.0f64..60.0,
        factor in 1.0f64..8.0,
        depart in 0.0f64..40.0,
    ) {
        let s = grid_scenario(seed, edge, at.round(), factor, depart.round());
        let o = offline_optimal(&s, 0, EPOCH).unwrap();
        let b = brute_force(&s, 12);
        prop_assert!((o.optimal_realized_cost - b).abs() <= 1e-9 * b, "oracle {} brute {}", o.optimal_realized_cost, b);
    }
}

#[test]
fn no_algorithm_beats_the_oracle() {
    let suite = dynamic_suite(SUITE_SEED);
    let prepared = prepare_suite("dynamic", &suite, EPOCH).unwrap();
    for (s, oracles) in suite.iter().zip(&prepared.oracles) {
        for a in Algorithm::BENCHMARKED {
            let trace = run_simulation(
                s,
                SimConfig {
                    algorithm: a,
                    ..SimConfig::default()
                },
            )
            .unwrap();
            for o in oracles {
                let v = trace.vehicle(&o.vehicle).unwrap();
                if v.status == VehicleStatus::Arrived {
                    assert!(
                        v.realized_cost_s >= o.optimal_realized_cost,
                        "{} {} {}: {} < {}",
                        s.name,
                        a,
                        o.vehicle,
                        v.realized_cost_s,
                        o.optimal_realized_cost
                    );
                }
            }
        }
    }
}

#[test]
fn replaying_the_oracle_is_exact() {
    let suite = dynamic_suite(SUITE_SEED);
    let prepared = prepare_suite("dynamic", &suite, EPOCH).unwrap();
    let (row, cells) = score_suite(&prepared, Algorithm::OracleReplay, SimConfig::default(), 1.0).unwrap();
    assert_eq!(row.score, 1.0, "{:?}", cells.iter().find(|c| !c.passed));
    assert_eq!(row.mean_ratio, 1.0);
}

#[test]
fn score_grows_with_rho() {
    let suite = dynamic_suite(SUITE_SEED);
    let prepared = prepare_suite("dynamic", &suite, EPOCH).unwrap();
    for a in Algorithm::BENCHMARKED {
        let mut last = 0.0;
        for rho in [1.0, 1.05, 1.15, 1.5, 3.0, 10.0] {
            let (row, _) = score_suite(&prepared, a, SimConfig::default(), rho).unwrap();
            assert!(row.score >= last, "{a} at rho {rho}");
            assert_eq!(row.score, row.passes as f64 / row.total as f64);
            assert_eq!((row.score * row.total as f64).round() as usize, row.passes);
            last = row.score;
        }
    }
}

#[test]
fn greedy_is_worst_on_deceptive_geometry() {
    let suite: Vec<Scenario> = (0..20)
        .map(|i| dynamic_scenario(SUITE_SEED, Category::DeceptiveGeometry, i))
        .collect();
    let prepared = prepare_suite("deceptive", &suite, EPOCH).unwrap();
    let score = |a| score_suite(&prepared, a, SimConfig::default(), 1.15).unwrap().0.score;
    let greedy = score(Algorithm::Greedy);
    for a in [Algorithm::Ucs, Algorithm::AStar, Algorithm::Rrt, Algorithm::DynAStar] {
        assert!(score(a) > greedy, "{a}");
    }
}

#[test]
fn oracle_refuses_oversized_inputs() {
    let mut s = grid_scenario(1, 0, 10.0, 2.0, 0.0);
    let e = s.events[0].clone();
    s.events = vec![e; MAX_ORACLE_EVENTS + 1];
    assert!(matches!(
        offline_optimal(&s, 0, EPOCH),
        Err(EvalError::TooLarge { what: "events", .. })
    ));
}

#[test]
fn oracle_sees_latent_events() {
    let s = dynroute::suite::crowd_fixture();
    let b = offline_optimal(&s, 1, EPOCH).unwrap();
    assert_eq!(b.optimal_realized_cost, 30.0);
    let a = offline_optimal(&s, 0, EPOCH).unwrap();
    assert_eq!(a.optimal_realized_cost, 50.0);
}
