//! Relational substrate: a fixed vertex set with a growing undirected edge
//! multiset, evolved by degree-proportional edge additions.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Generator driving every stochastic step. Recorded in run metadata as [`RNG_NAME`].
pub type GraphRng = ChaCha8Rng;

/// Name of the generator, written into run metadata.
pub const RNG_NAME: &str = "chacha8 (rand_chacha 0.9)";

pub fn rng_from_seed(seed: u64) -> GraphRng {
    GraphRng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("relational graph needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("unknown topology {0:?} (expected ring, random_tree or complete)")]
    UnknownTopology(String),
}

/// Initial connected topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Ring,
    RandomTree,
    Complete,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::RandomTree => "random_tree",
            Topology::Complete => "complete",
        }
    }
}

impl FromStr for Topology {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ring" => Ok(Topology::Ring),
            "random_tree" => Ok(Topology::RandomTree),
            "complete" => Ok(Topology::Complete),
            other => Err(GraphError::UnknownTopology(other.to_string())),
        }
    }
}

/// Undirected multigraph on a fixed vertex set `0..n`.
///
/// Edges are stored as `(min, max)` pairs in insertion order. The flat
/// endpoint list holds every edge endpoint once, so a uniform draw from it is
/// a draw proportional to degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalGraph {
    n_vertices: usize,
    edges: Vec<(u32, u32)>,
    degree: Vec<u64>,
    endpoints: Vec<u32>,
}

impl RelationalGraph {
    /// Empty edge set on `n_vertices` vertices. Not connected; use [`init_graph`]
    /// for a valid starting substrate.
    pub fn empty(n_vertices: usize) -> Self {
        Self {
            n_vertices,
            edges: Vec::new(),
            degree: vec![0; n_vertices],
            endpoints: Vec::new(),
        }
    }

    /// Builds a graph from an explicit edge list. Self-loops are rejected.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize)]) -> Option<Self> {
        let mut g = Self::empty(n_vertices);
        for &(i, j) in edges {
            if i == j || i >= n_vertices || j >= n_vertices {
                return None;
            }
            g.add_edge(i, j);
        }
        Some(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degree
    }

    pub fn degree(&self, v: usize) -> u64 {
        self.degree[v]
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j);
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.push((a as u32, b as u32));
        self.degree[i] += 1;
        self.degree[j] += 1;
        self.endpoints.push(i as u32);
        self.endpoints.push(j as u32);
    }

    /// One inflationary update: pick `i` with probability `deg(i) / Σ deg`,
    /// pick `j` uniformly from the other vertices, add `{i, j}`.
    /// Repeated pairs become multi-edges. Returns the added pair.
    pub fn inflation_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, usize) {
        let i = self.endpoints[rng.random_range(0..self.endpoints.len())] as usize;
        let mut j = rng.random_range(0..self.n_vertices - 1);
        if j >= i {
            j += 1;
        }
        self.add_edge(i, j);
        (i, j)
    }

    /// Applies `n_steps` inflationary updates drawn from `rng`.
    pub fn inflate<R: Rng + ?Sized>(&mut self, n_steps: usize, rng: &mut R) {
        self.edges.reserve(n_steps);
        self.endpoints.reserve(2 * n_steps);
        for _ in 0..n_steps {
            self.inflation_step(rng);
        }
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        if self.n_vertices == 0 {
            return true;
        }
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.n_vertices];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n_vertices
    }

    /// Neighbour lists with multiplicity.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b as usize);
            adj[b as usize].push(a as usize);
        }
        adj
    }

    /// Edge list sorted lexicographically, one `i j` line per edge occurrence.
    pub fn to_edge_list(&self) -> String {
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        let mut out = String::with_capacity(sorted.len() * 10);
        for (a, b) in sorted {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Gini coefficient of the degree sequence.
    pub fn degree_gini(&self) -> f64 {
        gini(&self.degree)
    }

    pub fn max_degree(&self) -> u64 {
        self.degree.iter().copied().max().unwrap_or(0)
    }
}

/// Gini coefficient of a nonnegative integer sample (0 for all-equal or empty).
pub fn gini(values: &[u64]) -> f64 {
    let n = values.len();
    let total: u64 = values.iter().sum();
    if n == 0 || total == 0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| (2 * (k + 1)) as f64 * v as f64)
        .sum();
    weighted / (n as f64 * total as f64) - (n as f64 + 1.0) / n as f64
}

/// Connected starting substrate. `seed` only matters for `RandomTree`.
pub fn init_graph(n_vertices: usize, topology: Topology, seed: u64) -> Result<RelationalGraph, GraphError> {
    if n_vertices < 3 {
        return Err(GraphError::TooFewVertices(n_vertices));
    }
    let mut g = RelationalGraph::empty(n_vertices);
    match topology {
        Topology::Ring => {
            for i in 0..n_vertices {
                g.add_edge(i, (i + 1) % n_vertices);
            }
        }
        Topology::Complete => {
            for i in 0..n_vertices {
                for j in (i + 1)..n_vertices {
                    g.add_edge(i, j);
                }
            }
        }
        Topology::RandomTree => {
            // random recursive tree over a shuffled vertex order
            let mut rng = rng_from_seed(seed);
            let mut order: Vec<usize> = (0..n_vertices).collect();
            order.shuffle(&mut rng);
            for k in 1..n_vertices {
                let parent = order[rng.random_range(0..k)];
                g.add_edge(order[k], parent);
            }
        }
    }
    Ok(g)
}

/// Runs `n_steps` inflationary updates from `g` with a generator seeded by `seed`.
pub fn run_inflation(mut g: RelationalGraph, n_steps: usize, seed: u64) -> RelationalGraph {
    let mut rng = rng_from_seed(seed);
    g.inflate(n_steps, &mut rng);
    g
}
