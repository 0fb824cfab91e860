//! Rapidly-exploring random tree restricted to the road graph.
//!
//! Each iteration samples a node position (the goal with probability
//! `goal_bias`), picks the tree node nearest to it in the plane and grows
//! the tree up to `step_edges` hops toward the sample. The first hop takes
//! the best unvisited successor unconditionally; later hops must strictly
//! reduce the distance to the sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_query, path_cost, reconstruct, PlanError, PlanResult, PlanStatus, SearchParams};
use crate::graph::{GraphSnapshot, NodeId};

pub fn rrt_plan(
    snap: &GraphSnapshot,
    start: NodeId,
    goal: NodeId,
    params: &SearchParams,
) -> Result<PlanResult, PlanError> {
    check_query(snap, start, goal)?;
    let rrt = params.rrt.validated()?;
    let topo = snap.topology();
    let n = topo.node_count();

    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut in_tree = vec![false; n];
    let mut tree = vec![start];
    in_tree[start.index()] = true;

    let found = |path: Vec<NodeId>, expanded: usize| {
        let cost = path_cost(snap, &path).expect("tree edges are traversable");
        PlanResult {
            g_cost: cost,
            f_cost_at_goal: cost,
            path,
            expanded,
            status: PlanStatus::Found,
        }
    };
    if start == goal {
        return Ok(found(vec![start], 1));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    for _ in 0..rrt.max_iterations {
        let target = if rng.random::<f64>() < rrt.goal_bias {
            goal
        } else {
            NodeId(rng.random_range(0..n as u32))
        };
        let dist = |a: NodeId| topo.distance(a, target);

        let mut cur = *tree
            .iter()
            .min_by(|a, b| dist(**a).total_cmp(&dist(**b)).then(a.cmp(b)))
            .expect("tree holds the start");

        for hop in 0..rrt.step_edges {
            if cur == target {
                break;
            }
            let here = dist(cur);
            let next = snap
                .successors(cur)
                .filter(|nb| !in_tree[nb.node.index()])
                .filter(|nb| hop == 0 || dist(nb.node) < here)
                .min_by(|a, b| dist(a.node).total_cmp(&dist(b.node)).then(a.edge.cmp(&b.edge)));
            let Some(next) = next else { break };
            in_tree[next.node.index()] = true;
            parent[next.node.index()] = Some(cur);
            tree.push(next.node);
            cur = next.node;
            if cur == goal {
                return Ok(found(reconstruct(&parent, start, goal), tree.len()));
            }
        }
    }
    Ok(PlanResult::unreachable(tree.len()))
}
