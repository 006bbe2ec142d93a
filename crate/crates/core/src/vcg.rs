//! VCG baseline: node-level payments over a node-weighted graph and a
//! path-level second-price auction.
//!
//! The node-level mechanism pays every intermediate node of the cheapest
//! route its own cost plus its marginal contribution (the cost increase of
//! the best route avoiding it). It needs the graph to stay connected after
//! removing any single winning node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobsim::Snapshot;

#[derive(Debug, Error)]
pub enum VcgError {
    #[error("node {0} not present in the graph")]
    UnknownNode(usize),
    #[error("source and destination must differ")]
    SourceIsDestination,
    #[error("disconnected: no path from source to destination")]
    Disconnected,
    #[error("not two-connected: removing node {pivotal} disconnects the pair")]
    NotTwoConnected { pivotal: usize },
    #[error("no competition: at least two paths required")]
    NoCompetition,
}

/// Undirected graph with per-node forwarding costs. The designated source
/// and destination carry zero cost and receive no payments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostGraph {
    costs: Vec<u32>,
    adjacency: Vec<Vec<usize>>,
    source: usize,
    destination: usize,
}

impl CostGraph {
    /// Builds a graph from per-node costs and undirected edges. Costs of the
    /// source and destination are forced to zero.
    pub fn new(
        mut costs: Vec<u32>,
        edges: &[(usize, usize)],
        source: usize,
        destination: usize,
    ) -> Result<Self, VcgError> {
        let n = costs.len();
        if source >= n {
            return Err(VcgError::UnknownNode(source));
        }
        if destination >= n {
            return Err(VcgError::UnknownNode(destination));
        }
        if source == destination {
            return Err(VcgError::SourceIsDestination);
        }
        costs[source] = 0;
        costs[destination] = 0;
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(VcgError::UnknownNode(u));
            }
            if v >= n {
                return Err(VcgError::UnknownNode(v));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for neigh in &mut adjacency {
            neigh.sort_unstable();
            neigh.dedup();
        }
        Ok(Self {
            costs,
            adjacency,
            source,
            destination,
        })
    }

    /// Builds the graph from a simulator snapshot: links exist between nodes
    /// within transmission range.
    pub fn from_snapshot(snap: &Snapshot, source: usize, destination: usize) -> Result<Self, VcgError> {
        let n = snap.nodes.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let dx = snap.nodes[i].x - snap.nodes[j].x;
                let dy = snap.nodes[i].y - snap.nodes[j].y;
                if (dx * dx + dy * dy).sqrt() <= snap.range {
                    edges.push((i, j));
                }
            }
        }
        let costs = snap.nodes.iter().map(|node| node.cost).collect();
        Self::new(costs, &edges, source, destination)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn destination(&self) -> usize {
        self.destination
    }

    pub fn node_cost(&self, v: usize) -> u32 {
        self.costs[v]
    }

    /// Cheapest s-t path by total intermediate-node cost; equal-cost ties go
    /// to the lexicographically smaller node sequence. `skip` hides a node.
    fn cheapest_path_skipping(
        &self,
        s: usize,
        t: usize,
        skip: Option<usize>,
    ) -> Result<(Vec<usize>, u64), VcgError> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        // Labels are (cost, full path); lexicographic path comparison makes
        // the tie-break deterministic. Graphs here are small.
        let n = self.costs.len();
        let mut best: Vec<Option<(u64, Vec<usize>)>> = vec![None; n];
        let mut heap: BinaryHeap<Reverse<(u64, Vec<usize>)>> = BinaryHeap::new();
        heap.push(Reverse((0, vec![s])));
        while let Some(Reverse((cost, path))) = heap.pop() {
            let at = *path.last().expect("path nonempty");
            if let Some((bc, bp)) = &best[at] {
                if (*bc, bp) < (cost, &path) {
                    continue;
                }
            }
            if at == t {
                return Ok((path, cost));
            }
            for &next in &self.adjacency[at] {
                if Some(next) == skip || path.contains(&next) {
                    continue;
                }
                let step = if next == t { 0 } else { self.costs[next] as u64 };
                let cand_cost = cost + step;
                let mut cand_path = path.clone();
                cand_path.push(next);
                let better = match &best[next] {
                    None => true,
                    Some((bc, bp)) => (cand_cost, &cand_path) < (*bc, bp),
                };
                if better {
                    best[next] = Some((cand_cost, cand_path.clone()));
                    heap.push(Reverse((cand_cost, cand_path)));
                }
            }
        }
        Err(VcgError::Disconnected)
    }
}

/// Cheapest path between source and destination, minimizing the sum of
/// intermediate-node costs.
pub fn cheapest_path(g: &CostGraph, s: usize, t: usize) -> Result<Vec<usize>, VcgError> {
    if s >= g.costs.len() {
        return Err(VcgError::UnknownNode(s));
    }
    if t >= g.costs.len() {
        return Err(VcgError::UnknownNode(t));
    }
    Ok(g.cheapest_path_skipping(s, t, None)?.0)
}

/// Outcome of the node-level VCG payment computation.
#[derive(Debug, Clone, Serialize)]
pub struct VcgResult {
    pub winning_path: Vec<usize>,
    /// (node, payment) for every intermediate node of the winning path.
    pub payments: Vec<(usize, f64)>,
    pub total_payment: f64,
    pub total_cost: f64,
    pub overpayment: f64,
}

/// Ad Hoc-VCG payments: each intermediate node of the cheapest path is paid
/// its cost plus the replacement-path cost difference when it is removed.
pub fn adhoc_vcg_payments(g: &CostGraph, s: usize, t: usize) -> Result<VcgResult, VcgError> {
    let (path, winner_cost) = g.cheapest_path_skipping(s, t, None)?;
    let mut payments = Vec::new();
    let mut total_payment = 0.0;
    for &node in &path[1..path.len() - 1] {
        let (_, alt_cost) = g
            .cheapest_path_skipping(s, t, Some(node))
            .map_err(|_| VcgError::NotTwoConnected { pivotal: node })?;
        let pay = g.costs[node] as f64 + (alt_cost as f64 - winner_cost as f64);
        total_payment += pay;
        payments.push((node, pay));
    }
    let total_cost = winner_cost as f64;
    Ok(VcgResult {
        winning_path: path,
        payments,
        total_payment,
        total_cost,
        overpayment: total_payment - total_cost,
    })
}

/// Path-level second-price auction: the cheapest path wins and is paid the
/// second-lowest cost. Ties resolve to the smaller path id.
pub fn path_level_second_price(path_costs: &[(usize, f64)]) -> Result<(usize, f64), VcgError> {
    if path_costs.len() < 2 {
        return Err(VcgError::NoCompetition);
    }
    let mut sorted = path_costs.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok((sorted[0].0, sorted[1].1))
}

/// The worked two-path family: `n_per_path` intermediates on each of two
/// node-disjoint routes, the cheap one costing `cheap` per node and the
/// alternative `dear` per node.
pub fn two_path_graph(n_per_path: usize, cheap: u32, dear: u32) -> CostGraph {
    // Node 0 is the source, node 1 the destination; 2..2+n is the cheap
    // path, then the dear path.
    let mut costs = vec![0, 0];
    costs.extend(std::iter::repeat(cheap).take(n_per_path));
    costs.extend(std::iter::repeat(dear).take(n_per_path));
    let mut edges = Vec::new();
    for offset in [2, 2 + n_per_path] {
        edges.push((0, offset));
        for k in 0..n_per_path - 1 {
            edges.push((offset + k, offset + k + 1));
        }
        edges.push((offset + n_per_path - 1, 1));
    }
    CostGraph::new(costs, &edges, 0, 1).expect("valid construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheapest_path_prefers_zero_cost_route() {
        let g = two_path_graph(2, 0, 1);
        let path = cheapest_path(&g, 0, 1).unwrap();
        assert_eq!(path, vec![0, 2, 3, 1]);
    }

    #[test]
    fn cheapest_path_single_edge() {
        let g = CostGraph::new(vec![0, 0], &[(0, 1)], 0, 1).unwrap();
        let (path, cost) = g.cheapest_path_skipping(0, 1, None).unwrap();
        assert_eq!(path, vec![0, 1]);
        assert_eq!(cost, 0);
    }

    #[test]
    fn cheapest_path_breaks_ties_lexicographically() {
        // Two equal-cost 2-hop routes via nodes 2 and 3.
        let g = CostGraph::new(vec![0, 0, 1, 1], &[(0, 2), (2, 1), (0, 3), (3, 1)], 0, 1).unwrap();
        assert_eq!(cheapest_path(&g, 0, 1).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn cheapest_path_disconnected_errors() {
        let g = CostGraph::new(vec![0, 0, 1], &[(0, 2)], 0, 1).unwrap();
        assert!(matches!(cheapest_path(&g, 0, 1), Err(VcgError::Disconnected)));
    }

    #[test]
    fn paper_two_path_overpayment_is_n_squared() {
        for n in 1..=10 {
            let g = two_path_graph(n, 0, 1);
            let res = adhoc_vcg_payments(&g, 0, 1).unwrap();
            assert_eq!(res.total_cost, 0.0);
            // Every winning node is paid the full alternative cost n.
            for &(_, pay) in &res.payments {
                assert_eq!(pay, n as f64);
            }
            assert_eq!(res.overpayment, (n * n) as f64);
        }
    }

    #[test]
    fn zero_cost_bypass_means_no_overpayment() {
        // Diamond where each winning node has a zero-cost substitute.
        let g = CostGraph::new(
            vec![0, 0, 0, 0],
            &[(0, 2), (2, 1), (0, 3), (3, 1)],
            0,
            1,
        )
        .unwrap();
        let res = adhoc_vcg_payments(&g, 0, 1).unwrap();
        assert_eq!(res.total_payment, 0.0);
        assert_eq!(res.overpayment, 0.0);
    }

    #[test]
    fn pivotal_node_reported_when_not_two_connected() {
        // Single chain: removing node 2 disconnects.
        let g = CostGraph::new(vec![0, 0, 3], &[(0, 2), (2, 1)], 0, 1).unwrap();
        assert!(matches!(
            adhoc_vcg_payments(&g, 0, 1),
            Err(VcgError::NotTwoConnected { pivotal: 2 })
        ));
    }

    #[test]
    fn vcg_payments_cover_node_costs() {
        let g = two_path_graph(3, 1, 2);
        let res = adhoc_vcg_payments(&g, 0, 1).unwrap();
        assert_eq!(res.total_cost, 3.0);
        for &(node, pay) in &res.payments {
            assert!(pay >= g.node_cost(node) as f64);
        }
        // Each node paid 1 + (6 - 3) = 4; ratio 12 / 3 = 4.
        assert_eq!(res.total_payment, 12.0);
    }

    #[test]
    fn path_level_second_price_examples() {
        // Worked example at N = 3: costs {0, 3} -> winner pays 3.
        let (winner, pay) = path_level_second_price(&[(0, 0.0), (1, 3.0)]).unwrap();
        assert_eq!((winner, pay), (0, 3.0));

        let (winner, pay) = path_level_second_price(&[(0, 5.0), (1, 5.0)]).unwrap();
        assert_eq!((winner, pay), (0, 5.0));

        let (winner, pay) = path_level_second_price(&[(0, 2.0), (1, 7.0), (2, 4.0)]).unwrap();
        assert_eq!((winner, pay), (0, 4.0));

        assert!(matches!(
            path_level_second_price(&[(0, 1.0)]),
            Err(VcgError::NoCompetition)
        ));
    }

    #[test]
    fn removing_unused_node_keeps_payments() {
        // Two-path family plus a stray expensive node connected to both ends.
        let mut costs = vec![0, 0, 1, 1, 2, 2];
        costs.push(9); // node 6, unused
        let edges = vec![
            (0, 2),
            (2, 3),
            (3, 1),
            (0, 4),
            (4, 5),
            (5, 1),
            (0, 6),
            (6, 1),
        ];
        let with = CostGraph::new(costs.clone(), &edges, 0, 1).unwrap();
        let res_with = adhoc_vcg_payments(&with, 0, 1).unwrap();
        assert!(!res_with.winning_path.contains(&6));

        let edges_without: Vec<_> = edges
            .iter()
            .copied()
            .filter(|&(u, v)| u != 6 && v != 6)
            .collect();
        let without = CostGraph::new(costs, &edges_without, 0, 1).unwrap();
        let res_without = adhoc_vcg_payments(&without, 0, 1).unwrap();
        // Node 6 sits on replacement paths (cost 9 > detour), so payments
        // must be unchanged by dropping it.
        assert_eq!(res_with.winning_path, res_without.winning_path);
        assert_eq!(res_with.payments, res_without.payments);
    }
}
