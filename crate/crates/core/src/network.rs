//! Weighted habitat graph: small-world construction, migration along edges,
//! Hebbian re-weighting and topology statistics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{AgentId, UnionFind};
use crate::habitat::Habitat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("watts-strogatz needs n > k >= 2 with k even (got n={n}, k={k})")]
    InvalidLattice { n: usize, k: usize },
    #[error("rewiring probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i}, {j}) weight {w} outside [0, {w_max}]")]
    WeightOutOfRange { i: usize, j: usize, w: f64, w_max: f64 },
    #[error("no edge between {0} and {1}")]
    UnknownEdge(usize, usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("path length needs at least two nodes")]
    TooFewNodes,
    #[error("hebbian parameters out of range (eta={eta}, lambda={lambda})")]
    InvalidHebbian { eta: f64, lambda: f64 },
}

fn key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Unweighted simple graph used for topology statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::new(n);
        for (i, j) in edges {
            g.adjacency[i].insert(j);
            g.adjacency[j].insert(i);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adjacency[v]
    }

    /// Mean local clustering; nodes of degree below two count as zero.
    pub fn clustering_coefficient(&self) -> f64 {
        let n = self.node_count();
        if n == 0 {
            return 0.0;
        }
        let total: f64 = (0..n)
            .map(|v| {
                let nbrs: Vec<usize> = self.adjacency[v].iter().copied().collect();
                let deg = nbrs.len();
                if deg < 2 {
                    return 0.0;
                }
                let links = nbrs
                    .iter()
                    .enumerate()
                    .map(|(a, &u)| {
                        nbrs[a + 1..]
                            .iter()
                            .filter(|w| self.adjacency[u].contains(w))
                            .count()
                    })
                    .sum::<usize>();
                links as f64 / (deg * (deg - 1) / 2) as f64
            })
            .sum();
        total / n as f64
    }

    fn bfs(&self, source: usize, dist: &mut [usize]) {
        dist.fill(usize::MAX);
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    }

    /// Mean hop count over all unordered node pairs.
    pub fn characteristic_path_length(&self) -> Result<f64, NetworkError> {
        let n = self.node_count();
        if n < 2 {
            return Err(NetworkError::TooFewNodes);
        }
        let mut dist = vec![0; n];
        let mut sum = 0usize;
        for s in 0..n {
            self.bfs(s, &mut dist);
            for &d in &dist[s + 1..] {
                if d == usize::MAX {
                    return Err(NetworkError::Disconnected);
                }
                sum += d;
            }
        }
        Ok(sum as f64 / (n * (n - 1) / 2) as f64)
    }

    /// Components ordered by size descending, then smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut uf = UnionFind::new(n);
        for (v, nbrs) in self.adjacency.iter().enumerate() {
            for &u in nbrs.range(v + 1..) {
                uf.union(v, u);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            groups.entry(uf.find(v)).or_default().push(v);
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// A copy of an agent sent along an edge. `agent` is the copy's id at the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub agent: AgentId,
    pub source: usize,
    pub destination: usize,
    pub epoch: u64,
}

/// Undirected habitat graph with one shared weight per edge.
///
/// The edge set is fixed at construction; only weights change.
#[derive(Debug, Clone, PartialEq)]
pub struct HabitatNetwork {
    n: usize,
    weights: BTreeMap<(usize, usize), f64>,
    adjacency: Vec<Vec<usize>>,
    pub w_max: f64,
    pub w_init: f64,
}

impl HabitatNetwork {
    /// Builds a network from explicit `(i, j, w)` edges.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        w_init: f64,
        w_max: f64,
    ) -> Result<Self, NetworkError> {
        let mut weights = BTreeMap::new();
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(NetworkError::NodeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(NetworkError::SelfLoop(i));
            }
            if !(0.0..=w_max).contains(&w) {
                return Err(NetworkError::WeightOutOfRange { i, j, w, w_max });
            }
            if weights.insert(key(i, j), w).is_some() {
                return Err(NetworkError::DuplicateEdge(i, j));
            }
        }
        Ok(Self::from_weights(n, weights, w_init, w_max))
    }

    fn from_weights(n: usize, weights: BTreeMap<(usize, usize), f64>, w_init: f64, w_max: f64) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in weights.keys() {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Self {
            n,
            weights,
            adjacency,
            w_max,
            w_init,
        }
    }

    /// Every pair connected at `w_init`.
    pub fn complete(n: usize, w_init: f64, w_max: f64) -> Self {
        let weights = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| ((i, j), w_init)))
            .collect();
        Self::from_weights(n, weights, w_init, w_max)
    }

    /// Ring lattice of `k` nearest neighbours with each lattice edge rewired
    /// with probability `p` to a uniform target that is neither the source nor
    /// an existing neighbour.
    pub fn watts_strogatz<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        p: f64,
        w_init: f64,
        w_max: f64,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if k < 2 || !k.is_multiple_of(2) || n <= k {
            return Err(NetworkError::InvalidLattice { n, k });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(NetworkError::InvalidProbability(p));
        }
        let mut g = Graph::new(n);
        for i in 0..n {
            for d in 1..=k / 2 {
                let j = (i + d) % n;
                g.adjacency[i].insert(j);
                g.adjacency[j].insert(i);
            }
        }
        // Lap by lap, as in the original construction: all distance-1 edges first.
        for d in 1..=k / 2 {
            for i in 0..n {
                let j = (i + d) % n;
                if !g.adjacency[i].contains(&j) || !rng.random_bool(p) {
                    continue;
                }
                if g.adjacency[i].len() >= n - 1 {
                    continue;
                }
                let target = loop {
                    let t = rng.random_range(0..n);
                    if t != i && !g.adjacency[i].contains(&t) {
                        break t;
                    }
                };
                g.adjacency[i].remove(&j);
                g.adjacency[j].remove(&i);
                g.adjacency[i].insert(target);
                g.adjacency[target].insert(i);
            }
        }
        let weights = (0..n)
            .flat_map(|i| {
                g.adjacency[i]
                    .range(i + 1..)
                    .map(move |&j| ((i, j), w_init))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self::from_weights(n, weights, w_init, w_max))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.weights.get(&key(i, j)).copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights.contains_key(&key(i, j))
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Edges as `(i, j, w)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.values().sum::<f64>() / self.weights.len() as f64
    }

    /// Topology of edges with weight at least `tau`.
    pub fn graph_at(&self, tau: f64) -> Graph {
        Graph::from_edges(
            self.n,
            self.edges().filter(|e| e.2 >= tau).map(|(i, j, _)| (i, j)),
        )
    }

    pub fn graph(&self) -> Graph {
        Graph::from_edges(self.n, self.weights.keys().copied())
    }

    pub fn clustering_coefficient(&self) -> f64 {
        self.graph().clustering_coefficient()
    }

    pub fn characteristic_path_length(&self) -> Result<f64, NetworkError> {
        self.graph().characteristic_path_length()
    }

    /// Components of the `w >= tau` subgraph.
    pub fn components_at(&self, tau: f64) -> Vec<Vec<usize>> {
        self.graph_at(tau).components()
    }

    /// Probability that one agent of habitat `i` emigrates in an epoch.
    pub fn emigration_probability(&self, i: usize, p_mig: f64) -> f64 {
        let nbrs = &self.adjacency[i];
        if nbrs.is_empty() || self.w_max <= 0.0 {
            return 0.0;
        }
        let total: f64 = nbrs.iter().map(|&j| self.weights[&key(i, j)]).sum();
        (p_mig * total / (nbrs.len() as f64 * self.w_max)).clamp(0.0, 1.0)
    }

    /// Sends migrant copies along edges into the destinations' inboxes.
    ///
    /// `habitats[i].id` must equal `i`. Originals stay where they are.
    pub fn migrate<R: Rng + ?Sized>(
        &self,
        habitats: &mut [Habitat],
        p_mig: f64,
        epoch: u64,
        rng: &mut R,
    ) -> Vec<MigrationEvent> {
        debug_assert_eq!(habitats.len(), self.n);
        let mut events = Vec::new();
        for source in 0..self.n {
            let prob = self.emigration_probability(source, p_mig);
            if prob <= 0.0 {
                continue;
            }
            let nbrs = &self.adjacency[source];
            let cumulative: Vec<f64> = nbrs
                .iter()
                .scan(0.0, |acc, &j| {
                    *acc += self.weights[&key(source, j)];
                    Some(*acc)
                })
                .collect();
            let total = *cumulative.last().expect("non-empty");

            let mut order: Vec<usize> = (0..habitats[source].population.len()).collect();
            order.sort_by_key(|&a| habitats[source].population[a].id);
            for a in order {
                if !rng.random_bool(prob) {
                    continue;
                }
                let x = rng.random_range(0.0..total);
                let slot = cumulative.partition_point(|&c| c <= x).min(nbrs.len() - 1);
                let destination = nbrs[slot];
                let genome = habitats[source].population[a].genome.clone();
                let agent = habitats[destination].receive(genome, source, epoch);
                events.push(MigrationEvent {
                    agent,
                    source,
                    destination,
                    epoch,
                });
            }
        }
        events
    }

    /// Reinforces every edge in `successes` by `eta` (capped at `w_max`), then
    /// decays all edges by the factor `1 - lambda`.
    pub fn hebbian_update(
        &mut self,
        successes: &[(usize, usize)],
        eta: f64,
        lambda: f64,
    ) -> Result<(), NetworkError> {
        if !(eta >= 0.0 && (0.0..1.0).contains(&lambda)) {
            return Err(NetworkError::InvalidHebbian { eta, lambda });
        }
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(i, j) in successes {
            let k = key(i, j);
            if !self.weights.contains_key(&k) {
                return Err(NetworkError::UnknownEdge(i, j));
            }
            *counts.entry(k).or_default() += 1;
        }
        for (k, count) in counts {
            let w = self.weights.get_mut(&k).expect("checked above");
            *w = (*w + count as f64 * eta).min(self.w_max);
        }
        for w in self.weights.values_mut() {
            *w *= 1.0 - lambda;
        }
        Ok(())
    }

    /// Overwrites one edge weight, clamped to `[0, w_max]`.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<(), NetworkError> {
        let w_max = self.w_max;
        let slot = self
            .weights
            .get_mut(&key(i, j))
            .ok_or(NetworkError::UnknownEdge(i, j))?;
        *slot = w.clamp(0.0, w_max);
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct EdgeListError {
    pub line: usize,
    pub reason: String,
}

/// Renders edges as `i j w` lines with shortest round-trip weights.
pub fn write_edge_list(edges: impl IntoIterator<Item = (usize, usize, f64)>) -> String {
    let mut out = String::new();
    for (i, j, w) in edges {
        out.push_str(&format!("{i} {j} {w}\n"));
    }
    out
}

/// Parses `i j w` lines. Blank lines are not allowed; line numbers are 1-based.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>, EdgeListError> {
    text.lines()
        .enumerate()
        .map(|(idx, raw)| {
            let fail = |reason: &str| EdgeListError {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = raw.split(' ').collect();
            if fields.len() != 3 {
                return Err(fail("expected `i j w`"));
            }
            let i = fields[0].parse().map_err(|_| fail("bad node id"))?;
            let j = fields[1].parse().map_err(|_| fail("bad node id"))?;
            let w: f64 = fields[2].parse().map_err(|_| fail("bad weight"))?;
            if !w.is_finite() || w < 0.0 {
                return Err(fail("weight must be finite and non-negative"));
            }
            if i == j {
                return Err(fail("self-loop"));
            }
            Ok((i, j, w))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborWeight {
    pub node: usize,
    pub weight: f64,
}

/// JSON-friendly adjacency view of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyDump {
    pub nodes: usize,
    pub w_max: f64,
    pub adjacency: Vec<Vec<NeighborWeight>>,
}

impl From<&HabitatNetwork> for AdjacencyDump {
    fn from(net: &HabitatNetwork) -> Self {
        Self {
            nodes: net.n,
            w_max: net.w_max,
            adjacency: (0..net.n)
                .map(|i| {
                    net.adjacency[i]
                        .iter()
                        .map(|&j| NeighborWeight {
                            node: j,
                            weight: net.weights[&key(i, j)],
                        })
                        .collect()
                })
                .collect(),
        }
    }
}
