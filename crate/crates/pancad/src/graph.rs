//! Proximity graph over the entities of a drawing.
//!
//! Two entities are connected when their endpoint distance falls below a
//! threshold `epsilon`. Near-parallel segment pairs (walls are drawn as
//! parallel line pairs well over `epsilon` apart) additionally connect when
//! `eta` times their exact continuous distance does. Node degrees are then
//! capped at `k_max` by deterministically seeded random edge removal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drawing::Drawing;
use crate::geometry::{
    entity_bbox, entity_distance, is_parallel, segment_min_distance, Entity,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Connection threshold in mm.
    pub epsilon: f64,
    /// Scale factor applied to the continuous distance of parallel segments.
    pub eta: f64,
    /// Maximum node degree after capping.
    pub k_max: usize,
    /// Seed mixed with the drawing id for the degree-capping RNG.
    pub seed: u64,
    /// Angular tolerance (radians) for the parallel test.
    pub parallel_angle_tol: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { epsilon: 100.0, eta: 0.2, k_max: 3, seed: 0, parallel_angle_tol: 0.01 }
    }
}

/// Undirected entity graph: sorted edge list plus adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl EntityGraph {
    /// Build directly from an undirected edge list (self-loops and
    /// duplicates rejected). Mainly for tests and synthetic graphs.
    pub fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::BTreeSet::new();
        for (a, b) in edges {
            assert!(a != b && a < n && b < n, "bad edge ({a}, {b}) for {n} nodes");
            let key = (a.min(b), a.max(b));
            assert!(seen.insert(key), "duplicate edge ({a}, {b})");
            adjacency[a].push(b as u32);
            adjacency[b].push(a as u32);
        }
        for nb in adjacency.iter_mut() {
            nb.sort_unstable();
        }
        Self::from_adjacency(adjacency)
    }

    fn from_adjacency(adjacency: Vec<Vec<u32>>) -> Self {
        let n = adjacency.len();
        let mut edges = Vec::new();
        for (i, nb) in adjacency.iter().enumerate() {
            for &j in nb {
                if (i as u32) < j {
                    edges.push((i as u32, j));
                }
            }
        }
        edges.sort_unstable();
        EntityGraph { n, edges, adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// JSON dump `{"n": ..., "edges": [[i,j], ...]}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            n: usize,
            edges: &'a [(u32, u32)],
        }
        let mut s = serde_json::to_string(&Wire { n: self.n, edges: &self.edges }).unwrap();
        s.push('\n');
        s
    }
}

/// FNV-1a over the seed and the drawing id, so capping is deterministic per
/// (config, drawing) pair without coupling drawings to each other.
fn capping_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(id.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Effective pair predicate: endpoint distance, improved by the scaled
/// continuous distance when both entities are near-parallel segments.
pub fn connected(a: &Entity, b: &Entity, cfg: &GraphConfig) -> bool {
    let mut dist = entity_distance(a, b);
    if is_parallel(a, b, cfg.parallel_angle_tol) {
        let (a1, a2) = a.endpoints().unwrap();
        let (b1, b2) = b.endpoints().unwrap();
        dist = dist.min(cfg.eta * segment_min_distance(a1, a2, b1, b2));
    }
    dist < cfg.epsilon
}

/// Reference candidate generator: every pair, O(n^2). Kept public as the
/// oracle that the grid-accelerated path is tested against.
pub fn candidate_edges_naive(d: &Drawing, cfg: &GraphConfig) -> Vec<(u32, u32)> {
    let n = d.records.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if connected(&d.records[i].entity, &d.records[j].entity, cfg) {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

/// Grid-accelerated candidate generation. Entities are binned by bounding box
/// into a uniform grid of cell size `epsilon`; a pair is worth testing when
/// one box inflated by the maximum connection reach overlaps the other. The
/// parallel rule extends reach to `epsilon / eta`, so that is the inflation
/// radius. Produces exactly the pairs of [`candidate_edges_naive`].
pub fn candidate_edges(d: &Drawing, cfg: &GraphConfig) -> Vec<(u32, u32)> {
    let n = d.records.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(
        cfg.eta > 0.0 && cfg.eta <= 1.0,
        "eta must be in (0, 1] for the grid reach bound to hold"
    );
    let reach = if cfg.eta < 1.0 { cfg.epsilon / cfg.eta } else { cfg.epsilon };
    let cell = cfg.epsilon.max(1e-9);
    let boxes: Vec<_> = d.records.iter().map(|r| entity_bbox(&r.entity)).collect();
    let bounds = boxes.iter().copied().reduce(|a, b| a.union(b)).unwrap();
    let cols = ((bounds.width() / cell).ceil() as usize).max(1);
    let rows = ((bounds.height() / cell).ceil() as usize).max(1);

    let col_of = |x: f64| (((x - bounds.min_x) / cell) as isize).clamp(0, cols as isize - 1) as usize;
    let row_of = |y: f64| (((y - bounds.min_y) / cell) as isize).clamp(0, rows as isize - 1) as usize;

    let mut grid: Vec<Vec<u32>> = vec![Vec::new(); cols * rows];
    for (i, b) in boxes.iter().enumerate() {
        for r in row_of(b.min_y)..=row_of(b.max_y) {
            for c in col_of(b.min_x)..=col_of(b.max_x) {
                grid[r * cols + c].push(i as u32);
            }
        }
    }

    let mut out = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        let q = boxes[i].inflate(reach);
        let mut near: Vec<u32> = Vec::new();
        for r in row_of(q.min_y)..=row_of(q.max_y) {
            for c in col_of(q.min_x)..=col_of(q.max_x) {
                for &j in &grid[r * cols + c] {
                    if j as usize > i && !seen[j as usize] {
                        seen[j as usize] = true;
                        near.push(j);
                    }
                }
            }
        }
        near.sort_unstable();
        for &j in &near {
            seen[j as usize] = false;
            if connected(&d.records[i].entity, &d.records[j as usize].entity, cfg) {
                out.push((i as u32, j));
            }
        }
    }
    out
}

/// Build the entity graph: grid candidates, then degree capping. Nodes are
/// visited in ascending index; while a node exceeds `k_max`, one of its
/// incident edges is removed uniformly at random with a generator seeded from
/// (cfg.seed, drawing id).
pub fn build_graph(d: &Drawing, cfg: &GraphConfig) -> EntityGraph {
    let n = d.records.len();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, j) in candidate_edges(d, cfg) {
        adjacency[i as usize].push(j);
        adjacency[j as usize].push(i);
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(capping_seed(cfg.seed, &d.id));
    for v in 0..n {
        while adjacency[v].len() > cfg.k_max {
            let pick = rng.gen_range(0..adjacency[v].len());
            let u = adjacency[v][pick] as usize;
            adjacency[v].remove(pick);
            let back = adjacency[u].iter().position(|&w| w as usize == v).unwrap();
            adjacency[u].remove(back);
        }
    }
    EntityGraph::from_adjacency(adjacency)
}
