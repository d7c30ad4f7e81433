//! Brute-force reference implementations for tests.
//!
//! Nothing here shares code with the production paths it checks. Compiled only
//! for tests or with the `oracles` feature.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use crate::genome::{Agent, AgentId, SpeciesPartition, Symbol};

/// Edit distance from the textbook recurrence, memoised on suffix positions.
pub fn edit_distance(a: &[Symbol], b: &[Symbol]) -> usize {
    fn go(a: &[Symbol], b: &[Symbol], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

fn normalized(a: &[Symbol], b: &[Symbol]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        0.0
    } else {
        edit_distance(a, b) as f64 / longest as f64
    }
}

/// Single-linkage species by flood fill over the explicit "close" relation.
pub fn single_linkage(pop: &[Agent], threshold: f64) -> SpeciesPartition {
    let n = pop.len();
    let mut label = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        label[start] = start;
        let mut k = 0;
        while k < members.len() {
            let cur = members[k];
            k += 1;
            for other in 0..n {
                if label[other] == usize::MAX
                    && normalized(pop[cur].genome.symbols(), pop[other].genome.symbols()) <= threshold
                {
                    label[other] = start;
                    members.push(other);
                }
            }
        }
        let mut ids: Vec<AgentId> = members.iter().map(|&i| pop[i].id).collect();
        ids.sort();
        clusters.push(ids);
    }
    clusters.sort_by_key(|c| (std::cmp::Reverse(c.len()), c[0]));
    SpeciesPartition {
        clusters,
        threshold,
    }
}

/// Undirected simple graph as a dense boolean adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGraph {
    pub adj: Vec<Vec<bool>>,
}

impl DenseGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![vec![false; n]; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(i, j) in edges {
            g.adj[i][j] = true;
            g.adj[j][i] = true;
        }
        g
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adj[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.floyd_warshall()
            .iter()
            .all(|row| row.iter().all(|d| d.is_some()))
    }

    fn floyd_warshall(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.n();
        let mut d = vec![vec![None; n]; n];
        for i in 0..n {
            d[i][i] = Some(0);
            for j in 0..n {
                if self.adj[i][j] {
                    d[i][j] = Some(1);
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                        if d[i][j].is_none_or(|c| a + b < c) {
                            d[i][j] = Some(a + b);
                        }
                    }
                }
            }
        }
        d
    }

    /// Mean over nodes of closed triangles through the node divided by neighbour pairs.
    pub fn clustering_coefficient(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for v in 0..n {
            let deg = (0..n).filter(|&u| self.adj[v][u]).count();
            if deg < 2 {
                continue;
            }
            let mut triangles = 0usize;
            for a in 0..n {
                for b in a + 1..n {
                    if self.adj[v][a] && self.adj[v][b] && self.adj[a][b] {
                        triangles += 1;
                    }
                }
            }
            total += triangles as f64 / (deg * (deg - 1) / 2) as f64;
        }
        total / n as f64
    }

    /// Mean all-pairs hop distance, or `None` when disconnected or fewer than two nodes.
    pub fn characteristic_path_length(&self) -> Option<f64> {
        let n = self.n();
        if n < 2 {
            return None;
        }
        let d = self.floyd_warshall();
        let mut sum = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                sum += d[i][j]?;
            }
        }
        Some(sum as f64 / (n * (n - 1) / 2) as f64)
    }

    /// Connected components (each sorted), ordered by size desc then smallest id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let d = self.floyd_warshall();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let comp: Vec<usize> = (0..n).filter(|&j| d[i][j].is_some()).collect();
            for &j in &comp {
                seen[j] = true;
            }
            comps.push(comp);
        }
        comps.sort_by_key(|c| (std::cmp::Reverse(c.len()), c[0]));
        comps
    }

    /// Canonical form: lexicographically smallest upper-triangle bitstring over
    /// all vertex orders that list vertices by non-increasing degree.
    fn canonical(&self) -> Vec<bool> {
        let n = self.n();
        let deg: Vec<usize> = (0..n)
            .map(|v| (0..n).filter(|&u| self.adj[v][u]).count())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(deg[v]));
        // Blocks of equal degree; permute within blocks only.
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &v in &order {
            match blocks.last_mut() {
                Some(b) if deg[b[0]] == deg[v] => b.push(v),
                _ => blocks.push(vec![v]),
            }
        }
        let mut best: Option<Vec<bool>> = None;
        let mut current = Vec::with_capacity(n);
        self.canonical_search(&blocks, 0, &mut current, &mut best);
        best.unwrap_or_default()
    }

    fn canonical_search(
        &self,
        blocks: &[Vec<usize>],
        block: usize,
        current: &mut Vec<usize>,
        best: &mut Option<Vec<bool>>,
    ) {
        if block == blocks.len() {
            let n = current.len();
            let mut bits = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    bits.push(self.adj[current[i]][current[j]]);
                }
            }
            if best.as_ref().is_none_or(|b| bits < *b) {
                *best = Some(bits);
            }
            return;
        }
        let mut items = blocks[block].clone();
        permute(&mut items, 0, &mut |perm| {
            let len = current.len();
            current.extend_from_slice(perm);
            self.canonical_search(blocks, block + 1, current, best);
            current.truncate(len);
        });
    }
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// One representative of every isomorphism class of simple graphs on `n` nodes.
///
/// Built by attaching a new vertex, with every possible neighbourhood, to each
/// class on `n - 1` nodes and de-duplicating by canonical form.
pub fn all_graphs(n: usize) -> Vec<DenseGraph> {
    let mut level = vec![DenseGraph::new(0)];
    for size in 1..=n {
        let mut seen = std::collections::HashSet::new();
        let mut next = Vec::new();
        for g in &level {
            let prev = size - 1;
            for mask in 0u32..(1 << prev) {
                let mut h = DenseGraph::new(size);
                for i in 0..prev {
                    for j in 0..prev {
                        h.adj[i][j] = g.adj[i][j];
                    }
                    if mask & (1 << i) != 0 {
                        h.adj[i][prev] = true;
                        h.adj[prev][i] = true;
                    }
                }
                if seen.insert(h.canonical()) {
                    next.push(h);
                }
            }
        }
        level = next;
    }
    level
}

/// Least-squares slope and intercept of `y` on `x` via the normal equations.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}
