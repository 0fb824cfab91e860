//! End-to-end acceptance run. Prints one PASS/FAIL line per check and exits
//! non-zero if any check fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{enumerate_best, random_graph, random_grid};
use dynroute::eval::{compare_algorithms, prepare_suite};
use dynroute::graph::{apply_event, make_grid, EdgeId, Event, EventKind, NodeId};
use dynroute::heuristics::{ingest_observations, HeuristicField, HeuristicWeights, Observation};
use dynroute::planners::{
    dijkstra_ucs, dyn_a_star, expansion_order, static_a_star, ExpansionPlanner, PlanStatus, SearchParams,
};
use dynroute::scenario::{Query, Scenario};
use dynroute::sim::{run_simulation, step_epoch, Algorithm, SimConfig, World};
use dynroute::suite::{bundled_root, load_suite_dir};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAPHS: u64 = 200;

fn weights(wg: f64, w1: f64, w2: f64, w3: f64) -> SearchParams {
    SearchParams::with_weights(HeuristicWeights::new(wg, w1, w2, w3).unwrap())
}

fn small_graph(i: u64) -> (dynroute::graph::RoadGraph, usize) {
    let n = 2 + (i % 9) as usize;
    (random_graph(0x5eed_0000 + i, n), n)
}

fn oracle_equivalence() -> String {
    let mut reachable = 0;
    for i in 0..GRAPHS {
        let (g, n) = small_graph(i);
        let snap = g.snapshot(&HeuristicField::zeros(n), 0.0);
        let (s, t) = (NodeId(0), NodeId(n as u32 - 1));
        let best = enumerate_best(&snap, s, t);
        for (name, r) in [
            ("ucs", dijkstra_ucs(&snap, s, t).unwrap()),
            ("astar", static_a_star(&snap, s, t).unwrap()),
            (
                "dyn_astar",
                dyn_a_star(&snap, s, t, &weights(1.0, 1.0, 0.0, 0.0)).unwrap(),
            ),
        ] {
            match best {
                Some(b) => assert_eq!(r.g_cost, b, "graph {i} {name}"),
                None => assert_eq!(r.status, PlanStatus::Unreachable, "graph {i} {name}"),
            }
        }
        reachable += best.is_some() as usize;
    }
    format!("{GRAPHS} graphs, {reachable} with a route, all exact")
}

fn weighted_bound() -> String {
    let mut worst: f64 = 1.0;
    for w in [1.5, 2.0, 5.0] {
        for i in 0..GRAPHS {
            let (g, n) = small_graph(i);
            let snap = g.snapshot(&HeuristicField::zeros(n), 0.0);
            let (s, t) = (NodeId(0), NodeId(n as u32 - 1));
            if let Some(best) = enumerate_best(&snap, s, t) {
                let r = dyn_a_star(&snap, s, t, &weights(1.0, w, 0.0, 0.0)).unwrap();
                assert!(r.g_cost <= w * best, "graph {i} W={w}: {} > {}", r.g_cost, w * best);
                worst = worst.max(r.g_cost / best);
            }
        }
    }
    format!("worst observed ratio {worst:.4}")
}

fn reduction_identity() -> String {
    for i in 0..100u64 {
        let (rows, cols) = (2 + (i % 9) as usize, 2 + ((i / 9) % 9) as usize);
        let g = random_grid(0x6a1d_0000 + i, rows, cols);
        let n = rows * cols;
        let snap = g.snapshot(&HeuristicField::zeros(n), 0.0);
        let (s, t) = (
            NodeId((i as usize % n) as u32),
            NodeId(n as u32 - 1 - (i as usize * 7 % n) as u32),
        );
        let p = weights(1.0, 0.0, 0.0, 0.0);
        let a = dyn_a_star(&snap, s, t, &p).unwrap();
        let b = dijkstra_ucs(&snap, s, t).unwrap();
        assert_eq!(a.g_cost, b.g_cost, "grid {i}");
        assert_eq!(
            expansion_order(&snap, s, t, ExpansionPlanner::Dyn(p)).unwrap(),
            expansion_order(&snap, s, t, ExpansionPlanner::Ucs).unwrap(),
            "grid {i}"
        );
    }
    "100 grids, identical cost and expansion order".into()
}

fn score_ordering() -> String {
    let loaded = load_suite_dir(&bundled_root().join("dynamic")).unwrap();
    assert!(loaded.len() >= 100);
    let scenarios: Vec<Scenario> = loaded.into_iter().map(|(_, s)| s).collect();
    let suite = prepare_suite("dynamic", &scenarios, 30.0).unwrap();
    let report = compare_algorithms(&suite, SimConfig::default(), 1.15).unwrap();
    let score = |a: Algorithm| report.row(a).unwrap().score;
    let (d, a, g) = (
        score(Algorithm::DynAStar),
        score(Algorithm::AStar),
        score(Algorithm::Greedy),
    );
    let line = format!(
        "dyn_astar {d:.2}, astar {a:.2}, greedy {g:.2}, ucs {:.2}, rrt {:.2} over {} scenarios",
        score(Algorithm::Ucs),
        score(Algorithm::Rrt),
        scenarios.len()
    );
    assert!(d > a && a > g, "{line}");
    assert!(d - a >= 0.05, "{line}");
    line
}

fn zero_event_collapse() -> String {
    let scenarios: Vec<Scenario> = load_suite_dir(&bundled_root().join("static"))
        .unwrap()
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    assert_eq!(scenarios.len(), 20);
    let suite = prepare_suite("static", &scenarios, 30.0).unwrap();
    let report = compare_algorithms(&suite, SimConfig::default(), 1.15).unwrap();
    for a in [Algorithm::Ucs, Algorithm::AStar, Algorithm::DynAStar] {
        assert_eq!(report.row(a).unwrap().score, 1.0, "{a}");
    }
    "ucs, astar, dyn_astar all 1.00 on 20 scenarios".into()
}

fn crowd_benefit() -> String {
    let (_, s) = load_suite_dir(&bundled_root())
        .unwrap()
        .into_iter()
        .find(|(p, _)| p.file_name().unwrap() == "crowd_fixture.scn")
        .unwrap();
    let on = run_simulation(&s, SimConfig::default()).unwrap();
    let off = run_simulation(
        &s,
        SimConfig {
            sharing: false,
            ..SimConfig::default()
        },
    )
    .unwrap();
    let follower = &s.queries[1];
    let (c_on, c_off) = (
        on.vehicle(&follower.vehicle).unwrap().realized_cost_s,
        off.vehicle(&follower.vehicle).unwrap().realized_cost_s,
    );
    assert!(c_on < c_off, "{c_on} vs {c_off}");

    // Enumerate the follower's candidate routes under the true conditions.
    let mut truth = s.graph.clone();
    let mut field = s.initial_field.clone();
    for ev in &s.events {
        apply_event(&mut truth, &mut field, ev).unwrap();
    }
    let snap = truth.snapshot(&field, follower.depart_s);
    let topo = snap.topology();
    let mut routes = Vec::new();
    for &e1 in topo.outgoing(follower.start) {
        let mid = topo.edge(e1).to;
        for &e2 in topo.outgoing(mid) {
            if topo.edge(e2).to == follower.goal {
                routes.push(snap.effective_time(e1).unwrap() + snap.effective_time(e2).unwrap());
            }
        }
    }
    assert_eq!(routes.len(), 2);
    let delta = (routes[0] - routes[1]).abs();
    assert_eq!(c_off - c_on, delta);
    format!("follower {c_off} s without sharing, {c_on} s with; delta {delta} s")
}

fn determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_dynroute");
    let root = bundled_root();
    let mut checked = 0;
    for (args, files) in [
        (
            vec![
                "simulate",
                "--scenario",
                root.join("grid10_congestion.scn").to_str().unwrap(),
                "--algo",
                "rrt",
                "--seed",
                "42",
            ]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>(),
            vec!["trace.json", "vehicles.csv"],
        ),
        (
            vec![
                "bench",
                "--suite",
                root.join("dynamic").to_str().unwrap(),
                "--seed",
                "42",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec!["scores.csv", "scores.txt", "cells.csv"],
        ),
    ] {
        let outs: Vec<_> = (0..2)
            .map(|k| {
                let out = dir.path().join(format!("{}{k}", args[0]));
                let status = Command::new(bin)
                    .args(&args)
                    .arg("--out")
                    .arg(&out)
                    .output()
                    .unwrap()
                    .status;
                assert!(status.success(), "{args:?}");
                out
            })
            .collect();
        for f in files {
            assert_eq!(
                fs::read(outs[0].join(f)).unwrap(),
                fs::read(outs[1].join(f)).unwrap(),
                "{f}"
            );
            checked += 1;
        }
    }
    format!("{checked} output files byte-identical across two runs")
}

fn random_event(rng: &mut ChaCha8Rng, t: f64, nodes: u32, edges: u32) -> Event {
    let edge = EdgeId(rng.random_range(0..edges));
    let kind = match rng.random_range(0..5) {
        0 => EventKind::SetCongestion {
            edge,
            factor: rng.random_range(1.0..10.0),
        },
        1 => EventKind::SetComfort {
            edge,
            penalty: rng.random_range(0.0..30.0),
        },
        2 => EventKind::SetNodeComfortH {
            node: NodeId(rng.random_range(0..nodes)),
            value: rng.random_range(0.0..30.0),
        },
        3 => EventKind::BlockEdge { edge },
        _ => EventKind::UnblockEdge { edge },
    };
    let latent = !matches!(kind, EventKind::BlockEdge { .. } | EventKind::UnblockEdge { .. }) && rng.random_bool(0.3);
    Event {
        at_time_s: t,
        kind,
        latent,
    }
}

fn safety_immutable() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    let base = make_grid(5, 5, 100.0, 10.0).unwrap();
    let (nodes, edges) = (base.node_count() as u32, base.edge_count() as u32);
    let h3: Vec<f64> = (0..nodes).map(|i| (i % 7) as f64 * 1.25).collect();
    let field0 = HeuristicField::new(nodes as usize, vec![0.0; nodes as usize], h3.clone(), 0.3).unwrap();
    let mut simulated = 0;
    for seq in 0..1000 {
        let len = rng.random_range(1..40);
        let mut t = 0.0;
        let events: Vec<Event> = (0..len)
            .map(|_| {
                t += rng.random_range(0.0f64..20.0).round();
                random_event(&mut rng, t, nodes, edges)
            })
            .collect();
        let mut g = base.clone();
        let mut field = field0.clone();
        for ev in &events {
            apply_event(&mut g, &mut field, ev).unwrap();
            let obs = Observation {
                edge: EdgeId(rng.random_range(0..edges)),
                observed_travel_time_s: rng.random_range(1.0..100.0),
                observed_comfort: rng.random_range(0.0..20.0),
                reporter: "fuzz".into(),
                at_time_s: ev.at_time_s,
            };
            ingest_observations(&mut g, &mut field, &[obs]).unwrap();
            assert_eq!(field.h3_values(), &h3[..], "sequence {seq}");
        }
        if seq % 50 == 0 {
            // The same sequence driven through a whole fleet run.
            let s = Scenario {
                name: format!("fuzz{seq}"),
                seed: seq,
                graph: base.clone(),
                initial_field: field0.clone(),
                events: events.clone(),
                queries: (0..3)
                    .map(|v| Query {
                        vehicle: format!("v{v}"),
                        start: NodeId(v),
                        goal: NodeId(nodes - 1 - v),
                        depart_s: v as f64 * 10.0,
                        weights: HeuristicWeights::default(),
                        context: Default::default(),
                    })
                    .collect(),
            };
            let mut world = World::new(&s, SimConfig::default()).unwrap();
            while !world.is_quiescent() {
                step_epoch(&mut world);
                assert_eq!(world.store().field.h3_values(), &h3[..], "fleet run {seq}");
            }
            simulated += 1;
        }
    }
    format!("1000 event sequences ({simulated} also simulated), h3 unchanged")
}

fn scale_sanity() -> String {
    let g = random_grid(0x100, 100, 100);
    let n = g.node_count();
    assert_eq!(n, 10_000);
    let snap = g.snapshot(&HeuristicField::zeros(n), 0.0);
    let start = Instant::now();
    let r = dyn_a_star(&snap, NodeId(0), NodeId(n as u32 - 1), &SearchParams::default()).unwrap();
    let took = start.elapsed();
    assert!(r.is_found());
    assert!(took < Duration::from_secs(1), "{took:?}");
    format!(
        "10000-node plan in {:.1} ms, {} expansions",
        took.as_secs_f64() * 1e3,
        r.expanded
    )
}

type Check = (&'static str, fn() -> String, u64);

fn main() {
    let checks: [Check; 9] = [
        ("oracle_equivalence", oracle_equivalence, 30),
        ("weighted_bound", weighted_bound, 60),
        ("reduction_identity", reduction_identity, 30),
        ("score_ordering", score_ordering, 300),
        ("zero_event_collapse", zero_event_collapse, 300),
        ("crowd_sensing_benefit", crowd_benefit, 60),
        ("determinism", determinism, 300),
        ("safety_heuristic_immutable", safety_immutable, 300),
        ("scale_sanity", scale_sanity, 60),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed();
        match outcome {
            Ok(detail) if took.as_secs() < budget => {
                println!("PASS {name}: {detail} [{:.2} s]", took.as_secs_f64());
            }
            Ok(detail) => {
                failed += 1;
                println!(
                    "FAIL {name}: {detail} but took {:.2} s (limit {budget} s)",
                    took.as_secs_f64()
                );
            }
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
