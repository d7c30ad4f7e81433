//! Genomes, agents, genome-space distance and species partitioning.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of one service in the alphabet.
pub type Symbol = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenomeError {
    #[error("genome must contain at least one symbol")]
    Empty,
    #[error("genome length {len} exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: Symbol, alphabet: u32 },
}

/// Alphabet size and length cap shared by every genome in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenomeSpec {
    pub alphabet: u32,
    pub max_len: usize,
}

impl Default for GenomeSpec {
    fn default() -> Self {
        Self {
            alphabet: 16,
            max_len: 64,
        }
    }
}

impl GenomeSpec {
    /// A genome of `len` symbols drawn uniformly from the alphabet.
    pub fn random_genome<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Genome {
        let len = len.clamp(1, self.max_len);
        Genome((0..len).map(|_| rng.random_range(0..self.alphabet)).collect())
    }

    /// Draws a symbol uniformly among the `alphabet - 1` symbols other than `s`.
    ///
    /// With a single-symbol alphabet there is nothing to switch to and `s` is returned.
    pub fn resample_symbol<R: Rng + ?Sized>(&self, s: Symbol, rng: &mut R) -> Symbol {
        if self.alphabet < 2 {
            return s;
        }
        let r = rng.random_range(0..self.alphabet - 1);
        if r >= s {
            r + 1
        } else {
            r
        }
    }

    /// Resamples each symbol independently with probability `rate`.
    pub fn resample_each<R: Rng + ?Sized>(&self, symbols: &mut [Symbol], rate: f64, rng: &mut R) {
        if rate <= 0.0 {
            return;
        }
        for s in symbols.iter_mut() {
            if rng.random_bool(rate.min(1.0)) {
                *s = self.resample_symbol(*s, rng);
            }
        }
    }
}

/// An ordered composition of services.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<Symbol>);

impl Genome {
    pub fn new(symbols: Vec<Symbol>, spec: &GenomeSpec) -> Result<Self, GenomeError> {
        if symbols.is_empty() {
            return Err(GenomeError::Empty);
        }
        if symbols.len() > spec.max_len {
            return Err(GenomeError::TooLong {
                len: symbols.len(),
                max: spec.max_len,
            });
        }
        if let Some(&symbol) = symbols.iter().find(|&&s| s >= spec.alphabet) {
            return Err(GenomeError::SymbolOutOfRange {
                symbol,
                alphabet: spec.alphabet,
            });
        }
        Ok(Self(symbols))
    }

    /// Wraps symbols without validation. Callers uphold the length and alphabet bounds.
    pub(crate) fn from_raw(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.0
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub genome: Genome,
    pub birth_epoch: u64,
    pub home_habitat: usize,
}

/// Hands out run-unique agent ids.
///
/// Each habitat owns one allocator; the habitat index occupies the high bits
/// so ids never collide even when habitats evolve in parallel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    prefix: u64,
    next: u64,
}

const SERIAL_BITS: u32 = 40;

impl IdAllocator {
    pub fn for_habitat(habitat: usize) -> Self {
        Self {
            prefix: (habitat as u64 + 1) << SERIAL_BITS,
            next: 0,
        }
    }

    pub fn next_id(&mut self) -> AgentId {
        let id = AgentId(self.prefix | self.next);
        self.next += 1;
        debug_assert!(self.next < 1 << SERIAL_BITS);
        id
    }
}

/// Edit distance between two symbol sequences (insert, delete, substitute, all unit cost).
pub fn levenshtein(a: &[Symbol], b: &[Symbol]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let sub = diag + usize::from(ca != cb);
            row[j + 1] = sub.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

/// Whether `levenshtein(a, b) <= k`, evaluating only the diagonal band of width `2k + 1`.
pub fn levenshtein_within(a: &[Symbol], b: &[Symbol], k: usize) -> bool {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > k {
        return false;
    }
    let cap = k + 1;
    let mut prev: Vec<usize> = (0..=m).map(|j| j.min(cap)).collect();
    let mut cur = vec![cap; m + 1];
    for i in 1..=n {
        cur.fill(cap);
        let lo = i.saturating_sub(k);
        let hi = m.min(i + k);
        if lo == 0 {
            cur[0] = i.min(cap);
        }
        let mut row_min = if lo == 0 { cur[0] } else { cap };
        for j in lo.max(1)..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(cap);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > k {
            return false;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m] <= k
}

/// Largest edit count `d` with `d / longest <= threshold`, matching the float
/// comparison made by [`distance`].
fn max_edits(longest: usize, threshold: f64) -> usize {
    let ratio = |d: usize| d as f64 / longest as f64;
    let mut k = ((threshold * longest as f64).floor().max(0.0) as usize).min(longest);
    while k < longest && ratio(k + 1) <= threshold {
        k += 1;
    }
    while k > 0 && ratio(k) > threshold {
        k -= 1;
    }
    k
}

/// Levenshtein distance divided by the longer length, in `[0, 1]`.
pub fn distance(a: &Genome, b: &Genome) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(&a.0, &b.0) as f64 / longest as f64
}

/// Single-linkage clustering of a population under `distance <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesPartition {
    /// Member ids ascending within each cluster; clusters by size descending,
    /// then smallest member ascending.
    pub clusters: Vec<Vec<AgentId>>,
    pub threshold: f64,
}

impl SpeciesPartition {
    pub fn species_count(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster sizes in descending order.
    pub fn abundances(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Groups `population` into species: agents chained by pairwise distances
/// `<= threshold` share a cluster. `threshold` is expected in `[0, 1)`.
pub fn species_partition<'a, I>(population: I, threshold: f64) -> SpeciesPartition
where
    I: IntoIterator<Item = &'a Agent>,
{
    debug_assert!((0.0..1.0).contains(&threshold));
    // Identical genomes are always in one species, so cluster distinct genomes only.
    let mut by_genome: BTreeMap<&Genome, Vec<AgentId>> = BTreeMap::new();
    for agent in population {
        by_genome.entry(&agent.genome).or_default().push(agent.id);
    }
    let genomes: Vec<&Genome> = by_genome.keys().copied().collect();

    let mut uf = UnionFind::new(genomes.len());
    for i in 0..genomes.len() {
        for j in i + 1..genomes.len() {
            let (a, b) = (genomes[i], genomes[j]);
            let k = max_edits(a.len().max(b.len()), threshold);
            if levenshtein_within(&a.0, &b.0, k) {
                uf.union(i, j);
            }
        }
    }

    let mut grouped: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for (i, ids) in by_genome.into_values().enumerate() {
        grouped.entry(uf.find(i)).or_default().extend(ids);
    }
    let mut clusters: Vec<Vec<AgentId>> = grouped
        .into_values()
        .map(|mut ids| {
            ids.sort_unstable();
            ids
        })
        .collect();
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    SpeciesPartition {
        clusters,
        threshold,
    }
}
