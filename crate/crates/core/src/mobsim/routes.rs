//! Link-expiration-time prediction and least-hop route discovery.

use serde::Serialize;

use super::world::{NodeState, WorldState};
use super::SimError;

/// Hard cap on the number of least-hop paths enumerated per discovery;
/// geometric graphs at the densities simulated here stay far below it.
const PATH_ENUM_CAP: usize = 4096;

/// A candidate route bid: the node sequence source..destination, the summed
/// cost of its intermediate nodes, and its predicted duration (minimum link
/// expiration time over consecutive pairs; `+inf` for relatively static
/// links).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteCandidate {
    pub nodes: Vec<usize>,
    pub cost: u32,
    pub predicted_duration: f64,
}

impl RouteCandidate {
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn intermediates(&self) -> &[usize] {
        &self.nodes[1..self.nodes.len() - 1]
    }
}

/// Predicted time until nodes `i` and `j` leave transmission range `r`,
/// assuming both keep their current velocities. Returns `+inf` when the
/// relative velocity is zero.
pub fn predict_link_duration(i: &NodeState, j: &NodeState, r: f64) -> Result<f64, SimError> {
    if i.distance_to(j) > r {
        return Err(SimError::LinkAbsent(i.id, j.id));
    }
    let (vxi, vyi) = i.velocity();
    let (vxj, vyj) = j.velocity();
    let a = vxi - vxj;
    let b = i.x - j.x;
    let c = vyi - vyj;
    let d = i.y - j.y;
    let v2 = a * a + c * c;
    if v2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let cross = a * d - b * c;
    // The radicand is nonnegative while the nodes are within range; clamp
    // the tiny negative excursions floating point can produce at the rim.
    let radicand = (v2 * r * r - cross * cross).max(0.0);
    Ok((-(a * b + c * d) + radicand.sqrt()) / v2)
}

/// Enumerates least-hop routes between `s` and `t` on the current world.
///
/// All minimum-hop paths are generated from the BFS layering; when more than
/// `max_routes` exist, a node-disjoint subset is preferred greedily in
/// ascending cost order and the remaining slots are filled with the cheapest
/// leftover routes. Returns an empty list when no path exists. The output
/// order is deterministic for a fixed world.
pub fn discover_routes(
    world: &WorldState,
    s: usize,
    t: usize,
    max_routes: usize,
) -> Result<Vec<RouteCandidate>, SimError> {
    let n = world.num_nodes();
    if s >= n {
        return Err(SimError::UnknownNode(s));
    }
    if t >= n {
        return Err(SimError::UnknownNode(t));
    }
    if s == t || max_routes == 0 {
        return Ok(Vec::new());
    }

    // BFS layerings from both endpoints; a node lies on some least-hop path
    // exactly when its two distances sum to the s-t distance.
    let bfs = |root: usize| {
        let mut dist = vec![usize::MAX; n];
        dist[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in world.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    };
    let dist_s = bfs(s);
    let dist_t = bfs(t);
    if dist_s[t] == usize::MAX {
        return Ok(Vec::new());
    }
    let hops = dist_s[t];

    // Depth-first enumeration over the layered DAG (edges that advance one
    // BFS layer toward t), in ascending neighbor order for determinism.
    let mut paths: Vec<Vec<usize>> = Vec::new();
    let mut stack = vec![s];
    fn dfs(
        world: &WorldState,
        dist_s: &[usize],
        dist_t: &[usize],
        hops: usize,
        t: usize,
        stack: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
    ) {
        if paths.len() >= PATH_ENUM_CAP {
            return;
        }
        let u = *stack.last().expect("stack nonempty");
        if u == t {
            paths.push(stack.clone());
            return;
        }
        for v in world.neighbors(u) {
            if dist_s[v] == dist_s[u] + 1
                && dist_t[v] != usize::MAX
                && dist_s[v] + dist_t[v] == hops
            {
                stack.push(v);
                dfs(world, dist_s, dist_t, hops, t, stack, paths);
                stack.pop();
            }
        }
    }
    dfs(world, &dist_s, &dist_t, hops, t, &mut stack, &mut paths);

    let mut candidates: Vec<RouteCandidate> = paths
        .into_iter()
        .map(|nodes| {
            let cost = nodes[1..nodes.len() - 1]
                .iter()
                .map(|&v| world.nodes[v].cost)
                .sum();
            let mut duration = f64::INFINITY;
            for pair in nodes.windows(2) {
                let let_ij =
                    predict_link_duration(&world.nodes[pair[0]], &world.nodes[pair[1]], world.range)?;
                duration = duration.min(let_ij);
            }
            Ok(RouteCandidate {
                nodes,
                cost,
                predicted_duration: duration,
            })
        })
        .collect::<Result<_, SimError>>()?;

    candidates.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.nodes.cmp(&b.nodes)));
    if candidates.len() <= max_routes {
        return Ok(candidates);
    }

    // Prefer a node-disjoint subset (over intermediates), then fill.
    let mut used = std::collections::HashSet::new();
    let mut picked: Vec<RouteCandidate> = Vec::new();
    let mut rest: Vec<RouteCandidate> = Vec::new();
    for cand in candidates {
        if picked.len() == max_routes {
            break;
        }
        if cand.intermediates().iter().all(|v| !used.contains(v)) {
            used.extend(cand.intermediates().iter().copied());
            picked.push(cand);
        } else {
            rest.push(cand);
        }
    }
    for cand in rest {
        if picked.len() == max_routes {
            break;
        }
        picked.push(cand);
    }
    picked.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.nodes.cmp(&b.nodes)));
    Ok(picked)
}

/// Whether every consecutive pair of `nodes` is currently within range.
pub fn route_intact(world: &WorldState, nodes: &[usize]) -> bool {
    nodes.windows(2).all(|pair| world.linked(pair[0], pair[1]))
}
