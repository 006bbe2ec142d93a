//! Random-walk world state: node kinematics, links, snapshots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

const TAU: f64 = std::f64::consts::TAU;

/// One mobile node: position in meters, speed in m/s, heading in radians,
/// and its private forwarding cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    pub cost: u32,
}

impl NodeState {
    pub fn velocity(&self) -> (f64, f64) {
        (
            self.speed * self.heading.cos(),
            self.speed * self.heading.sin(),
        )
    }

    pub fn distance_to(&self, other: &NodeState) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// The arena and everything in it. Stepping is deterministic under the seed:
/// the internal RNG only drives the per-epoch heading redraws.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub width: f64,
    pub height: f64,
    pub range: f64,
    /// Seconds between random-walk direction changes; `f64::INFINITY`
    /// disables redraws.
    pub epoch: f64,
    pub clock: f64,
    pub nodes: Vec<NodeState>,
    rng: ChaCha8Rng,
}

/// Exportable scene description consumed by the VCG baseline and tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub width: f64,
    pub height: f64,
    pub range: f64,
    pub clock: f64,
    pub nodes: Vec<SnapshotNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    pub cost: u32,
}

impl WorldState {
    pub fn new(
        width: f64,
        height: f64,
        range: f64,
        epoch: f64,
        nodes: Vec<NodeState>,
        seed: u64,
    ) -> Self {
        Self {
            width,
            height,
            range,
            epoch,
            clock: 0.0,
            nodes,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Populates the arena with uniformly placed nodes moving at a fixed
    /// speed with uniform headings and per-node costs drawn uniformly from
    /// `[cost_min, cost_max]`.
    pub fn random(
        width: f64,
        height: f64,
        range: f64,
        epoch: f64,
        node_count: usize,
        speed: f64,
        cost_min: u32,
        cost_max: u32,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..node_count)
            .map(|id| NodeState {
                id,
                x: rng.random::<f64>() * width,
                y: rng.random::<f64>() * height,
                speed,
                heading: rng.random::<f64>() * TAU,
                cost: rng.random_range(cost_min..=cost_max),
            })
            .collect();
        Self {
            width,
            height,
            range,
            epoch,
            clock: 0.0,
            nodes,
            rng,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Whether nodes `i` and `j` are currently within transmission range.
    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.nodes[i].distance_to(&self.nodes[j]) <= self.range
    }

    /// Neighbor ids of node `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&j| j != i && self.linked(i, j))
            .collect()
    }

    /// Advances the world by `dt` seconds: every node moves along its
    /// heading with specular reflection at the arena walls, and all headings
    /// are redrawn when the clock crosses an epoch boundary.
    pub fn step(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0) {
            return Err(SimError::NonPositiveStep(dt));
        }
        let before = (self.clock / self.epoch).floor();
        for node in &mut self.nodes {
            let (vx, vy) = node.velocity();
            let (x, flip_x) = reflect(node.x + vx * dt, self.width);
            let (y, flip_y) = reflect(node.y + vy * dt, self.height);
            node.x = x;
            node.y = y;
            if flip_x || flip_y {
                let (mut vx, mut vy) = (vx, vy);
                if flip_x {
                    vx = -vx;
                }
                if flip_y {
                    vy = -vy;
                }
                node.heading = vy.atan2(vx).rem_euclid(TAU);
            }
        }
        self.clock += dt;
        if (self.clock / self.epoch).floor() > before {
            for node in &mut self.nodes {
                node.heading = self.rng.random::<f64>() * TAU;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            width: self.width,
            height: self.height,
            range: self.range,
            clock: self.clock,
            nodes: self
                .nodes
                .iter()
                .map(|n| SnapshotNode {
                    id: n.id,
                    x: n.x,
                    y: n.y,
                    speed: n.speed,
                    heading: n.heading,
                    cost: n.cost,
                })
                .collect(),
        }
    }
}

/// Folds a coordinate back into [0, limit] by mirror reflection, reporting
/// whether the velocity component flips sign an odd number of times.
fn reflect(mut value: f64, limit: f64) -> (f64, bool) {
    let mut flipped = false;
    // A single step never travels more than a couple of arena lengths, but
    // loop for safety.
    for _ in 0..64 {
        if value < 0.0 {
            value = -value;
            flipped = !flipped;
        } else if value > limit {
            value = 2.0 * limit - value;
            flipped = !flipped;
        } else {
            return (value, flipped);
        }
    }
    (value.clamp(0.0, limit), flipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still_node(id: usize, x: f64, y: f64) -> NodeState {
        NodeState {
            id,
            x,
            y,
            speed: 0.0,
            heading: 0.0,
            cost: 1,
        }
    }

    #[test]
    fn straight_line_motion() {
        let node = NodeState {
            id: 0,
            x: 0.0,
            y: 0.0,
            speed: 10.0,
            heading: 0.0,
            cost: 1,
        };
        let mut w = WorldState::new(1000.0, 1000.0, 150.0, f64::INFINITY, vec![node], 0);
        w.step(1.0).unwrap();
        assert!((w.nodes[0].x - 10.0).abs() < 1e-12);
        assert!(w.nodes[0].y.abs() < 1e-12);
    }

    #[test]
    fn wall_reflection_mirrors_position_and_heading() {
        let node = NodeState {
            id: 0,
            x: 995.0,
            y: 500.0,
            speed: 10.0,
            heading: 0.0,
            cost: 1,
        };
        let mut w = WorldState::new(1000.0, 1000.0, 150.0, f64::INFINITY, vec![node], 0);
        w.step(1.0).unwrap();
        assert!((w.nodes[0].x - 995.0).abs() < 1e-9);
        assert!((w.nodes[0].y - 500.0).abs() < 1e-9);
        assert!((w.nodes[0].heading - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn zero_speed_never_moves() {
        let mut w = WorldState::new(
            100.0,
            100.0,
            50.0,
            10.0,
            vec![still_node(0, 30.0, 40.0)],
            7,
        );
        for _ in 0..100 {
            w.step(0.5).unwrap();
        }
        assert_eq!((w.nodes[0].x, w.nodes[0].y), (30.0, 40.0));
    }

    #[test]
    fn step_rejects_non_positive_dt() {
        let mut w = WorldState::new(10.0, 10.0, 5.0, 10.0, vec![still_node(0, 1.0, 1.0)], 0);
        assert!(matches!(w.step(0.0), Err(SimError::NonPositiveStep(_))));
        assert!(matches!(w.step(-1.0), Err(SimError::NonPositiveStep(_))));
    }

    #[test]
    fn link_symmetry() {
        let w = WorldState::new(
            1000.0,
            1000.0,
            150.0,
            10.0,
            vec![still_node(0, 0.0, 0.0), still_node(1, 149.0, 0.0)],
            0,
        );
        assert!(w.linked(0, 1));
        assert!(w.linked(1, 0));
    }

    #[test]
    fn headings_redraw_each_epoch() {
        // Nodes start mid-arena so no reflection happens before the epoch.
        let nodes: Vec<NodeState> = (0..5)
            .map(|id| NodeState {
                id,
                x: 500.0,
                y: 500.0,
                speed: 5.0,
                heading: id as f64,
                cost: 1,
            })
            .collect();
        let mut w = WorldState::new(1000.0, 1000.0, 150.0, 10.0, nodes, 99);
        let before: Vec<f64> = w.nodes.iter().map(|n| n.heading).collect();
        for _ in 0..99 {
            w.step(0.1).unwrap();
        }
        let mid: Vec<f64> = w.nodes.iter().map(|n| n.heading).collect();
        assert_eq!(before, mid);
        w.step(0.1).unwrap();
        let after: Vec<f64> = w.nodes.iter().map(|n| n.heading).collect();
        assert_ne!(mid, after);
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let mut a = WorldState::random(500.0, 500.0, 100.0, 5.0, 10, 8.0, 1, 5, 1234);
        let mut b = WorldState::random(500.0, 500.0, 100.0, 5.0, 10, 8.0, 1, 5, 1234);
        for _ in 0..200 {
            a.step(0.1).unwrap();
            b.step(0.1).unwrap();
        }
        assert_eq!(a.nodes, b.nodes);
    }
}
