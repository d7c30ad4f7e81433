//! One habitat: a population and its local genetic algorithm.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ConfigIssue;
use crate::genome::{distance, Agent, AgentId, Genome, GenomeSpec, IdAllocator};
use crate::requests::Request;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HabitatError {
    #[error("habitat {0} has an empty population")]
    EmptyPopulation(usize),
    #[error("habitat {0} has no current request")]
    NoRequest(usize),
    #[error("tournament over an empty fitness list")]
    EmptyFitnessList,
    #[error("tournament size {k} not in 1..={len}")]
    TournamentSize { k: usize, len: usize },
    #[error("crossover cut {cut} not in 1..={max}")]
    CutOutOfRange { cut: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaParams {
    pub pop_capacity: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_rate: f64,
    pub indel_rate: f64,
    pub elitism: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            pop_capacity: 50,
            tournament_size: 3,
            crossover_prob: 0.7,
            mutation_rate: 0.02,
            indel_rate: 0.01,
            elitism: 1,
        }
    }
}

impl GaParams {
    pub(crate) fn check(&self, prefix: &str, issues: &mut Vec<ConfigIssue>) {
        let mut flag = |field: &str, message: String| {
            issues.push(ConfigIssue::new(format!("{prefix}.{field}"), message));
        };
        if self.pop_capacity == 0 {
            flag("pop_capacity", "must be at least 1".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.pop_capacity.max(1) {
            flag(
                "tournament_size",
                format!("must be in 1..={}", self.pop_capacity),
            );
        }
        if self.elitism > self.pop_capacity {
            flag("elitism", format!("must be in 0..={}", self.pop_capacity));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_rate", self.mutation_rate),
            ("indel_rate", self.indel_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                flag(name, format!("probability {p} outside [0, 1]"));
            }
        }
    }
}

/// Descending fitness, then ascending id.
fn rank_order(a: &(AgentId, f64), b: &(AgentId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn tournament_index<R: Rng + ?Sized>(
    fits: &[(AgentId, f64)],
    k: usize,
    rng: &mut R,
) -> Result<usize, HabitatError> {
    if fits.is_empty() {
        return Err(HabitatError::EmptyFitnessList);
    }
    if k == 0 || k > fits.len() {
        return Err(HabitatError::TournamentSize { k, len: fits.len() });
    }
    let winner = index::sample(rng, fits.len(), k)
        .into_iter()
        .min_by(|&a, &b| rank_order(&fits[a], &fits[b]))
        .expect("k >= 1");
    Ok(winner)
}

/// Draws `k` distinct entrants uniformly and returns the fittest (lower id on ties).
pub fn tournament_select<R: Rng + ?Sized>(
    fits: &[(AgentId, f64)],
    k: usize,
    rng: &mut R,
) -> Result<AgentId, HabitatError> {
    tournament_index(fits, k, rng).map(|i| fits[i].0)
}

/// One-point crossover at `cut`. Children are truncated to `max_len`.
pub fn crossover(
    a: &Genome,
    b: &Genome,
    cut: usize,
    max_len: usize,
) -> Result<(Genome, Genome), HabitatError> {
    let max = a.len().min(b.len()).saturating_sub(1);
    if cut < 1 || cut > max {
        return Err(HabitatError::CutOutOfRange { cut, max });
    }
    let (a, b) = (a.symbols(), b.symbols());
    let splice = |head: &[u32], tail: &[u32]| {
        let mut s: Vec<u32> = head.iter().chain(tail).copied().collect();
        s.truncate(max_len);
        Genome::from_raw(s)
    };
    Ok((splice(&a[..cut], &b[cut..]), splice(&b[..cut], &a[cut..])))
}

/// Point mutation followed by at most one insertion or deletion.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rate: f64,
    indel: f64,
    spec: &GenomeSpec,
    rng: &mut R,
) -> Genome {
    let mut symbols = genome.symbols().to_vec();
    spec.resample_each(&mut symbols, rate, rng);
    if indel > 0.0 && rng.random_bool(indel.min(1.0)) {
        if rng.random_bool(0.5) {
            if symbols.len() < spec.max_len {
                let at = rng.random_range(0..=symbols.len());
                symbols.insert(at, rng.random_range(0..spec.alphabet));
            }
        } else if symbols.len() > 1 {
            let at = rng.random_range(0..symbols.len());
            symbols.remove(at);
        }
    }
    Genome::from_raw(symbols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Habitat {
    pub id: usize,
    /// Kept sorted by agent id.
    pub population: Vec<Agent>,
    pub params: GaParams,
    pub genome_spec: GenomeSpec,
    pub inbox: Vec<Agent>,
    pub current_request: Option<Request>,
    pub effective_mutation_rate: f64,
    ids: IdAllocator,
}

impl Habitat {
    pub fn new(id: usize, params: GaParams, genome_spec: GenomeSpec) -> Self {
        Self {
            id,
            population: Vec::new(),
            params,
            genome_spec,
            inbox: Vec::new(),
            current_request: None,
            effective_mutation_rate: params.mutation_rate,
            ids: IdAllocator::for_habitat(id),
        }
    }

    /// Adds a freshly created agent carrying `genome` to the population.
    pub fn spawn(&mut self, genome: Genome, epoch: u64) -> AgentId {
        let id = self.ids.next_id();
        self.population.push(Agent {
            id,
            genome,
            birth_epoch: epoch,
            home_habitat: self.id,
        });
        id
    }

    /// Replaces the population with `pop_capacity` uniform random genomes of length `len`.
    pub fn reseed<R: Rng + ?Sized>(&mut self, len: usize, epoch: u64, rng: &mut R) {
        self.population.clear();
        for _ in 0..self.params.pop_capacity {
            let g = self.genome_spec.random_genome(len, rng);
            self.spawn(g, epoch);
        }
    }

    /// Queues a migrant copy of `genome` arriving from `source`; returns the copy's id.
    pub fn receive(&mut self, genome: Genome, source: usize, epoch: u64) -> AgentId {
        let id = self.ids.next_id();
        self.inbox.push(Agent {
            id,
            genome,
            birth_epoch: epoch,
            home_habitat: source,
        });
        id
    }

    fn request(&self) -> Result<&Request, HabitatError> {
        self.current_request
            .as_ref()
            .ok_or(HabitatError::NoRequest(self.id))
    }

    /// Fitness of every member under the current request, ordered by agent id.
    pub fn evaluate(&self) -> Result<Vec<(AgentId, f64)>, HabitatError> {
        let target = &self.request()?.target;
        let mut fits: Vec<(AgentId, f64)> = self
            .population
            .iter()
            .map(|a| (a.id, 1.0 - distance(&a.genome, target)))
            .collect();
        fits.sort_by_key(|f| f.0);
        Ok(fits)
    }

    /// Best and mean fitness, or `None` for an empty population.
    pub fn fitness_summary(&self) -> Result<Option<(f64, f64)>, HabitatError> {
        let fits = self.evaluate()?;
        if fits.is_empty() {
            return Ok(None);
        }
        let best = fits.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        let mean = fits.iter().map(|f| f.1).sum::<f64>() / fits.len() as f64;
        Ok(Some((best, mean)))
    }

    /// Replaces the population with the next generation of the same size.
    pub fn evolve_generation<R: Rng + ?Sized>(
        &mut self,
        epoch: u64,
        rng: &mut R,
    ) -> Result<(), HabitatError> {
        if self.population.is_empty() {
            return Err(HabitatError::EmptyPopulation(self.id));
        }
        self.population.sort_by_key(|a| a.id);
        let fits = self.evaluate()?;
        let size = self.population.len();
        let params = self.params;
        let spec = self.genome_spec;
        let rate = self.effective_mutation_rate;

        let mut ranked: Vec<usize> = (0..size).collect();
        ranked.sort_by(|&a, &b| rank_order(&fits[a], &fits[b]));
        let next: Vec<Agent> = ranked
            .iter()
            .take(params.elitism.min(size))
            .map(|&i| self.population[i].clone())
            .collect();

        let k = params.tournament_size.clamp(1, size);
        let mut children = Vec::with_capacity(size);
        while next.len() + children.len() < size {
            let pa = &self.population[tournament_index(&fits, k, rng)?].genome;
            let pb = &self.population[tournament_index(&fits, k, rng)?].genome;
            let shortest = pa.len().min(pb.len());
            let (ca, cb) = if shortest >= 2 && rng.random_bool(params.crossover_prob) {
                let cut = rng.random_range(1..shortest);
                crossover(pa, pb, cut, spec.max_len)?
            } else {
                (pa.clone(), pb.clone())
            };
            children.push(mutate(&ca, rate, params.indel_rate, &spec, rng));
            if next.len() + children.len() < size {
                children.push(mutate(&cb, rate, params.indel_rate, &spec, rng));
            }
        }
        self.population = next;
        for genome in children {
            self.spawn(genome, epoch);
        }
        self.population.sort_by_key(|a| a.id);
        Ok(())
    }

    /// Moves the inbox into the population, truncating to capacity by fitness.
    /// Returns the ids of migrants that survived.
    pub fn absorb_inbox(&mut self) -> Result<Vec<AgentId>, HabitatError> {
        if self.inbox.is_empty() {
            return Ok(Vec::new());
        }
        let mut arrived: Vec<AgentId> = self.inbox.iter().map(|a| a.id).collect();
        self.population.append(&mut self.inbox);
        self.population.sort_by_key(|a| a.id);
        if self.population.len() > self.params.pop_capacity {
            let fits = self.evaluate()?;
            let mut ranked = fits;
            ranked.sort_by(rank_order);
            let mut keep: Vec<AgentId> = ranked
                .into_iter()
                .take(self.params.pop_capacity)
                .map(|f| f.0)
                .collect();
            keep.sort_unstable();
            self.population.retain(|a| keep.binary_search(&a.id).is_ok());
            arrived.retain(|id| keep.binary_search(id).is_ok());
        }
        arrived.sort_unstable();
        Ok(arrived)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn g(s: &str) -> Genome {
        Genome::from_raw(s.bytes().map(|b| (b - b'A') as u32).collect())
    }

    fn habitat_with(genomes: &[&str], target: &str, params: GaParams) -> Habitat {
        let mut h = Habitat::new(0, params, GenomeSpec::default());
        for s in genomes {
            h.spawn(g(s), 0);
        }
        h.current_request = Some(Request {
            target: g(target),
            epoch: 0,
        });
        h
    }

    #[test]
    fn evaluate_examples() {
        let h = habitat_with(&[], "ABC", GaParams::default());
        assert!(h.evaluate().unwrap().is_empty());

        let h = habitat_with(&["ABC"], "ABC", GaParams::default());
        let id = h.population[0].id;
        assert_eq!(h.evaluate().unwrap(), vec![(id, 1.0)]);

        let h = habitat_with(&["ABC", "ABD"], "ABC", GaParams::default());
        let fits = h.evaluate().unwrap();
        assert_eq!(fits[0].1, 1.0);
        assert!((fits[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(fits[0].0 < fits[1].0);
    }

    #[test]
    fn evaluate_without_request_fails() {
        let h = Habitat::new(3, GaParams::default(), GenomeSpec::default());
        assert_eq!(h.evaluate(), Err(HabitatError::NoRequest(3)));
    }

    #[test]
    fn tournament_examples() {
        let mut r = rng::seeded(0);
        assert_eq!(
            tournament_select(&[(AgentId(7), 0.1), (AgentId(9), 0.9)], 2, &mut r),
            Ok(AgentId(9))
        );
        assert_eq!(
            tournament_select(&[(AgentId(3), 0.5), (AgentId(5), 0.5)], 2, &mut r),
            Ok(AgentId(3))
        );
        assert_eq!(
            tournament_select(&[], 1, &mut r),
            Err(HabitatError::EmptyFitnessList)
        );
        assert_eq!(
            tournament_select(&[(AgentId(1), 0.5)], 2, &mut r),
            Err(HabitatError::TournamentSize { k: 2, len: 1 })
        );
    }

    #[test]
    fn full_tournament_is_global_argmax() {
        let fits: Vec<(AgentId, f64)> = (0..20)
            .map(|i| (AgentId(i), ((i * 7) % 13) as f64 / 13.0))
            .collect();
        for seed in 0..20 {
            let won = tournament_select(&fits, 20, &mut rng::seeded(seed)).unwrap();
            assert_eq!(won, AgentId(11));
        }
    }

    #[test]
    fn crossover_examples() {
        assert_eq!(
            crossover(&g("AABB"), &g("CCDD"), 2, 64).unwrap(),
            (g("AADD"), g("CCBB"))
        );
        assert_eq!(
            crossover(&g("AAAA"), &g("BB"), 1, 64).unwrap(),
            (g("AB"), g("BAAA"))
        );
        for cut in 1..5 {
            assert_eq!(
                crossover(&g("ABCDE"), &g("ABCDE"), cut, 64).unwrap(),
                (g("ABCDE"), g("ABCDE"))
            );
        }
        assert_eq!(
            crossover(&g("AAAA"), &g("BB"), 2, 64),
            Err(HabitatError::CutOutOfRange { cut: 2, max: 1 })
        );
        assert!(crossover(&g("AAAA"), &g("BB"), 0, 64).is_err());
        // Truncation to the length cap.
        assert_eq!(
            crossover(&g("AAAA"), &g("BBBBBB"), 1, 4).unwrap(),
            (g("ABBB"), g("BAAA"))
        );
    }

    #[test]
    fn mutate_examples() {
        let spec = GenomeSpec::default();
        let mut r = rng::seeded(1);
        let x = g("ABCDEFG");
        assert_eq!(mutate(&x, 0.0, 0.0, &spec, &mut r), x);

        let binary = GenomeSpec {
            alphabet: 2,
            max_len: 64,
        };
        assert_eq!(mutate(&g("ABBA"), 1.0, 0.0, &binary, &mut r), g("BAAB"));

        // Length floor: an L=1 genome never shrinks.
        for seed in 0..200 {
            let out = mutate(&g("C"), 0.0, 1.0, &spec, &mut rng::seeded(seed));
            assert!(out.len() == 1 && out == g("C") || out.len() == 2);
        }
        // Length cap.
        let capped = GenomeSpec {
            alphabet: 4,
            max_len: 3,
        };
        for seed in 0..200 {
            let out = mutate(&g("ABC"), 0.0, 1.0, &capped, &mut rng::seeded(seed));
            assert!(out.len() <= 3 && !out.is_empty());
        }
    }

    #[test]
    fn identical_population_without_variation_is_unchanged() {
        let params = GaParams {
            pop_capacity: 10,
            mutation_rate: 0.0,
            indel_rate: 0.0,
            ..GaParams::default()
        };
        let mut h = habitat_with(&["ABCD"; 10], "DDDD", params);
        h.evolve_generation(1, &mut rng::seeded(2)).unwrap();
        assert_eq!(h.population.len(), 10);
        assert!(h.population.iter().all(|a| a.genome == g("ABCD")));
    }

    #[test]
    fn elite_survives() {
        let params = GaParams {
            pop_capacity: 8,
            mutation_rate: 0.5,
            ..GaParams::default()
        };
        let pop = ["AAAA", "ABCD", "BBBB", "ABCA", "DDDD", "CCCC", "ABDD", "AACD"];
        let mut h = habitat_with(&pop, "ABCD", params);
        let mut r = rng::seeded(3);
        let mut best = h.fitness_summary().unwrap().unwrap().0;
        for epoch in 1..30 {
            h.evolve_generation(epoch, &mut r).unwrap();
            let now = h.fitness_summary().unwrap().unwrap().0;
            assert!(now >= best);
            best = now;
        }
    }

    #[test]
    fn single_slot_habitat_is_a_no_op() {
        let params = GaParams {
            pop_capacity: 1,
            tournament_size: 1,
            elitism: 1,
            mutation_rate: 1.0,
            ..GaParams::default()
        };
        let mut h = habitat_with(&["ABAB"], "ABAB", params);
        let before = h.population.clone();
        for epoch in 1..5 {
            h.evolve_generation(epoch, &mut rng::seeded(epoch)).unwrap();
        }
        assert_eq!(h.population, before);
    }

    #[test]
    fn full_elitism_without_variation_is_identity() {
        let params = GaParams {
            pop_capacity: 5,
            elitism: 5,
            mutation_rate: 0.0,
            crossover_prob: 0.0,
            indel_rate: 0.0,
            ..GaParams::default()
        };
        let mut h = habitat_with(&["AB", "CD", "ABC", "D", "CCCC"], "AB", params);
        let before = h.population.clone();
        h.evolve_generation(1, &mut rng::seeded(9)).unwrap();
        assert_eq!(h.population, before);
    }

    #[test]
    fn evolve_empty_population_fails() {
        let mut h = habitat_with(&[], "AB", GaParams::default());
        assert_eq!(
            h.evolve_generation(0, &mut rng::seeded(0)),
            Err(HabitatError::EmptyPopulation(0))
        );
    }

    #[test]
    fn evolve_is_replayable() {
        let spec = GenomeSpec::default();
        let mut base = Habitat::new(2, GaParams::default(), spec);
        base.reseed(12, 0, &mut rng::seeded(5));
        base.current_request = Some(Request {
            target: spec.random_genome(12, &mut rng::seeded(6)),
            epoch: 0,
        });
        let run = |mut h: Habitat| {
            let mut r = rng::seeded(8);
            for e in 1..10 {
                h.evolve_generation(e, &mut r).unwrap();
            }
            h
        };
        assert_eq!(run(base.clone()), run(base));
    }

    #[test]
    fn absorb_examples() {
        let params = GaParams {
            pop_capacity: 3,
            ..GaParams::default()
        };
        let mut h = habitat_with(&["AAAA", "AAAA", "AAAA"], "BBBB", params);
        assert_eq!(h.absorb_inbox().unwrap(), vec![]);
        assert_eq!(h.population.len(), 3);

        let migrant = h.receive(g("BBBB"), 1, 1);
        let accepted = h.absorb_inbox().unwrap();
        assert_eq!(accepted, vec![migrant]);
        assert_eq!(h.population.len(), 3);
        assert!(h.inbox.is_empty());
        // The incumbent with the highest id is the one dropped on the tie.
        assert_eq!(h.population.iter().filter(|a| a.genome == g("AAAA")).count(), 2);
        assert!(h.population.iter().all(|a| a.id.0 & 0xff != 2));

        let mut h = habitat_with(&["AAAA"], "BBBB", params);
        let ids = [h.receive(g("CCCC"), 1, 1), h.receive(g("AAAA"), 2, 1)];
        assert_eq!(h.absorb_inbox().unwrap(), ids.to_vec());
        assert_eq!(h.population.len(), 3);
    }

    #[test]
    fn weak_migrant_is_rejected_from_full_habitat() {
        let params = GaParams {
            pop_capacity: 2,
            ..GaParams::default()
        };
        let mut h = habitat_with(&["BBBB", "BBBA"], "BBBB", params);
        h.receive(g("AAAA"), 1, 1);
        assert_eq!(h.absorb_inbox().unwrap(), vec![]);
        assert_eq!(h.population.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn generations_keep_genomes_valid_and_size_bounded(
            seed in any::<u64>(),
            mutation in 0.0f64..0.5,
            indel in 0.0f64..1.0,
            capacity in 1usize..20,
        ) {
            let spec = GenomeSpec { alphabet: 5, max_len: 8 };
            let params = GaParams {
                pop_capacity: capacity,
                tournament_size: capacity.min(3),
                mutation_rate: mutation,
                indel_rate: indel,
                ..GaParams::default()
            };
            let mut h = Habitat::new(1, params, spec);
            let mut r = rng::seeded(seed);
            h.reseed(4, 0, &mut r);
            h.current_request = Some(Request { target: spec.random_genome(6, &mut r), epoch: 0 });
            for epoch in 1..=40 {
                h.evolve_generation(epoch, &mut r).unwrap();
                prop_assert_eq!(h.population.len(), capacity);
                for a in &h.population {
                    prop_assert!(Genome::new(a.genome.symbols().to_vec(), &spec).is_ok());
                }
            }
        }
    }
}
