//! The epoch loop.
//!
//! One epoch runs, in order: sector drift, per-habitat request draw and local
//! GA generations, migration, inbox absorption, Hebbian re-weighting, the
//! global diversity feedback check, and metrics. Only the GA and metrics
//! phases fan out across worker threads; each habitat draws from its own
//! derived stream, so the worker count never changes results.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{species_partition, GenomeSpec, SpeciesPartition};
use crate::habitat::{GaParams, Habitat, HabitatError};
use crate::metrics::{shannon_diversity, EpochReport, HabitatStats, MetricsError};
use crate::network::{HabitatNetwork, MigrationEvent, NetworkError};
use crate::requests::{sector_of, RequestError, SectorProfile};
use crate::rng::{self, Entity, Phase};

/// Cap applied to a boosted mutation rate.
pub const MAX_BOOSTED_MUTATION: f64 = 0.5;

/// One invalid config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigIssue>),
    #[error(transparent)]
    Habitat(#[from] HabitatError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("habitat {0} does not exist")]
    UnknownHabitat(usize),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorsConfig {
    pub count: usize,
    pub archetype_length: usize,
    pub noise_rate: f64,
    pub drift_rate: f64,
}

impl Default for SectorsConfig {
    fn default() -> Self {
        Self {
            count: 2,
            archetype_length: 12,
            noise_rate: 0.05,
            drift_rate: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MigrationConfig {
    pub p_mig: f64,
}

impl Default for MigrationConfig {
    fn default() -> Self {
        Self { p_mig: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HebbianConfig {
    pub eta: f64,
    pub lambda: f64,
}

impl Default for HebbianConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            lambda: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    WattsStrogatz { k: usize, p: f64 },
    Complete,
    /// Explicit `[i, j, w]` triples.
    EdgeList { edges: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub w_init: f64,
    pub w_max: f64,
    pub topology: Topology,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            w_init: 0.1,
            w_max: 1.0,
            topology: Topology::WattsStrogatz { k: 4, p: 0.1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesConfig {
    pub theta: f64,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        Self { theta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    /// Species floor; `0` disables feedback.
    pub floor: usize,
    pub boost: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            floor: 0,
            boost: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Edge-weight threshold for the reported topology statistics.
    pub tau: f64,
    pub species_area_replicates: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            species_area_replicates: crate::metrics::SPECIES_AREA_REPLICATES,
        }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub n_habitats: usize,
    pub epochs: u64,
    pub generations_per_epoch: usize,
    pub genome: GenomeSpec,
    pub sectors: SectorsConfig,
    pub ga: GaParams,
    pub migration: MigrationConfig,
    pub hebbian: HebbianConfig,
    pub network: NetworkConfig,
    pub species: SpeciesConfig,
    pub feedback: FeedbackConfig,
    pub metrics: MetricsConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_habitats: 10,
            epochs: 100,
            generations_per_epoch: 5,
            genome: GenomeSpec::default(),
            sectors: SectorsConfig::default(),
            ga: GaParams::default(),
            migration: MigrationConfig::default(),
            hebbian: HebbianConfig::default(),
            network: NetworkConfig::default(),
            species: SpeciesConfig::default(),
            feedback: FeedbackConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

fn probability(issues: &mut Vec<ConfigIssue>, field: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        issues.push(ConfigIssue::new(field, format!("probability {p} outside [0, 1]")));
    }
}

impl SimConfig {
    /// Every invalid field, not just the first.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut flag = |field: &str, message: String| issues.push(ConfigIssue::new(field, message));
        if self.n_habitats == 0 {
            flag("n_habitats", "must be at least 1".into());
        }
        if self.generations_per_epoch == 0 {
            flag("generations_per_epoch", "must be at least 1".into());
        }
        if self.genome.alphabet == 0 {
            flag("genome.alphabet", "must be at least 1".into());
        }
        if self.genome.max_len == 0 {
            flag("genome.max_len", "must be at least 1".into());
        }
        if self.sectors.archetype_length == 0 || self.sectors.archetype_length > self.genome.max_len {
            flag(
                "sectors.archetype_length",
                format!("must be in 1..={}", self.genome.max_len),
            );
        }
        if self.sectors.count == 0 || self.sectors.count > self.n_habitats.max(1) {
            flag("sectors.count", format!("must be in 1..={}", self.n_habitats));
        }
        if !(self.hebbian.eta >= 0.0 && self.hebbian.eta.is_finite()) {
            flag("hebbian.eta", "must be a finite non-negative number".into());
        }
        if !(0.0..1.0).contains(&self.hebbian.lambda) {
            flag("hebbian.lambda", "must be in [0, 1)".into());
        }
        if !(self.network.w_max > 0.0 && self.network.w_max.is_finite()) {
            flag("network.w_max", "must be positive".into());
        }
        if !(0.0..=self.network.w_max).contains(&self.network.w_init) {
            flag("network.w_init", format!("must be in [0, {}]", self.network.w_max));
        }
        if !(0.0..1.0).contains(&self.species.theta) {
            flag("species.theta", "must be in [0, 1)".into());
        }
        if !(self.feedback.boost >= 0.0 && self.feedback.boost.is_finite()) {
            flag("feedback.boost", "must be a finite non-negative number".into());
        }
        if !(0.0..=self.network.w_max).contains(&self.metrics.tau) {
            flag("metrics.tau", format!("must be in [0, {}]", self.network.w_max));
        }
        if self.metrics.species_area_replicates == 0 {
            flag("metrics.species_area_replicates", "must be at least 1".into());
        }
        match &self.network.topology {
            Topology::WattsStrogatz { k, p } => {
                if *k < 2 || k % 2 != 0 || self.n_habitats <= *k {
                    flag(
                        "network.topology.k",
                        format!("need n_habitats > k >= 2 with k even (n_habitats={})", self.n_habitats),
                    );
                }
                probability(&mut issues, "network.topology.p", *p);
            }
            Topology::Complete => {}
            Topology::EdgeList { edges } => {
                if let Err(e) = HabitatNetwork::from_edges(
                    self.n_habitats,
                    edges,
                    self.network.w_init,
                    self.network.w_max,
                ) {
                    issues.push(ConfigIssue::new("network.topology.edges", e.to_string()));
                }
            }
        }
        probability(&mut issues, "sectors.noise_rate", self.sectors.noise_rate);
        probability(&mut issues, "sectors.drift_rate", self.sectors.drift_rate);
        probability(&mut issues, "migration.p_mig", self.migration.p_mig);
        self.ga.check("ga", &mut issues);
        issues
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(EngineError::Config(issues))
        }
    }

    pub fn sector_of(&self, habitat: usize) -> usize {
        sector_of(habitat, self.n_habitats, self.sectors.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub epoch: u64,
    pub habitats: Vec<Habitat>,
    pub network: HabitatNetwork,
    pub sectors: Vec<SectorProfile>,
    /// Sector index for each habitat.
    pub sector_of: Vec<usize>,
    pub feedback_active: bool,
}

impl SimState {
    /// Boosts every habitat's mutation rate while the species count is below
    /// `floor`, and restores the configured rate otherwise.
    pub fn feedback_check(&mut self, species_count: usize, floor: usize, boost: f64) {
        self.feedback_active = species_count < floor;
        for h in &mut self.habitats {
            h.effective_mutation_rate = if self.feedback_active {
                (h.params.mutation_rate * boost).min(MAX_BOOSTED_MUTATION)
            } else {
                h.params.mutation_rate
            };
        }
    }

    pub fn species(&self, theta: f64) -> SpeciesPartition {
        species_partition(self.habitats.iter().flat_map(|h| &h.population), theta)
    }

    pub fn total_population(&self) -> usize {
        self.habitats.iter().map(|h| h.population.len()).sum()
    }
}

/// A run in progress.
pub struct Simulation {
    config: SimConfig,
    state: SimState,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("epoch", &self.state.epoch)
            .field("threads", &self.pool.as_ref().map(|p| p.current_num_threads()))
            .finish()
    }
}

impl Simulation {
    /// Builds the epoch-0 state: sector archetypes, random populations, the
    /// habitat network and the first round of requests.
    pub fn new(config: SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let seed = config.seed;
        let n = config.n_habitats;
        let spec = config.genome;

        let sector_of: Vec<usize> = (0..n).map(|h| config.sector_of(h)).collect();
        let sectors: Vec<SectorProfile> = (0..config.sectors.count)
            .map(|s| {
                let mut r = rng::stream(seed, Entity::Sector, s as u64, 0, Phase::Init);
                SectorProfile {
                    id: s,
                    archetype: spec.random_genome(config.sectors.archetype_length, &mut r),
                    members: (0..n).filter(|&h| sector_of[h] == s).collect(),
                    noise_rate: config.sectors.noise_rate,
                    drift_rate: config.sectors.drift_rate,
                }
            })
            .collect();

        let habitats: Vec<Habitat> = (0..n)
            .map(|h| {
                let mut habitat = Habitat::new(h, config.ga, spec);
                let mut r = rng::stream(seed, Entity::Habitat, h as u64, 0, Phase::Init);
                habitat.reseed(config.sectors.archetype_length, 0, &mut r);
                habitat
            })
            .collect();

        let net = &config.network;
        let network = match &net.topology {
            Topology::WattsStrogatz { k, p } => {
                let mut r = rng::stream(seed, Entity::Network, 0, 0, Phase::Topology);
                HabitatNetwork::watts_strogatz(n, *k, *p, net.w_init, net.w_max, &mut r)?
            }
            Topology::Complete => HabitatNetwork::complete(n, net.w_init, net.w_max),
            Topology::EdgeList { edges } => {
                HabitatNetwork::from_edges(n, edges, net.w_init, net.w_max)?
            }
        };

        let mut sim = Self {
            config,
            state: SimState {
                epoch: 0,
                habitats,
                network,
                sectors,
                sector_of,
                feedback_active: false,
            },
            pool: None,
        };
        sim.draw_requests()?;
        Ok(sim)
    }

    /// Runs the per-habitat phases on `threads` workers. Results do not depend on it.
    pub fn with_threads(mut self, threads: usize) -> Result<Self, EngineError> {
        self.pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| EngineError::ThreadPool(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(self)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }

    /// Changes the migration probability for subsequent epochs.
    pub fn set_migration_probability(&mut self, p_mig: f64) -> Result<(), EngineError> {
        if !(0.0..=1.0).contains(&p_mig) {
            return Err(EngineError::Config(vec![ConfigIssue::new(
                "migration.p_mig",
                format!("probability {p_mig} outside [0, 1]"),
            )]));
        }
        self.config.migration.p_mig = p_mig;
        Ok(())
    }

    /// Overwrites one edge weight (clamped to `[0, w_max]`).
    pub fn set_edge_weight(&mut self, i: usize, j: usize, w: f64) -> Result<(), EngineError> {
        Ok(self.state.network.set_weight(i, j, w)?)
    }

    /// Replaces a habitat's population with fresh random genomes, as if it
    /// had just joined the network.
    pub fn reseed_habitat(&mut self, habitat: usize) -> Result<(), EngineError> {
        let epoch = self.state.epoch;
        let len = self.config.sectors.archetype_length;
        let h = self
            .state
            .habitats
            .get_mut(habitat)
            .ok_or(EngineError::UnknownHabitat(habitat))?;
        let mut r = rng::stream(self.config.seed, Entity::Habitat, habitat as u64, epoch, Phase::Reseed);
        h.reseed(len, epoch, &mut r);
        h.inbox.clear();
        Ok(())
    }

    fn fan_out<T, F>(&mut self, f: F) -> Result<Vec<T>, EngineError>
    where
        T: Send,
        F: Fn(&mut Habitat, &SimState) -> Result<T, EngineError> + Sync + Send,
    {
        // The closure sees the non-habitat parts of the state read-only.
        let mut habitats = std::mem::take(&mut self.state.habitats);
        let state = &self.state;
        let result = match &self.pool {
            Some(pool) => pool.install(|| habitats.par_iter_mut().map(|h| f(h, state)).collect()),
            None => habitats.iter_mut().map(|h| f(h, state)).collect(),
        };
        self.state.habitats = habitats;
        result
    }

    fn draw_requests(&mut self) -> Result<(), EngineError> {
        let seed = self.config.seed;
        let spec = self.config.genome;
        let epoch = self.state.epoch;
        self.fan_out(|h, state| {
            let sector = &state.sectors[state.sector_of[h.id]];
            let mut r = rng::stream(seed, Entity::Habitat, h.id as u64, epoch, Phase::Request);
            h.current_request = Some(sector.next_request(h.id, epoch, &spec, &mut r)?);
            Ok(())
        })?;
        Ok(())
    }

    /// Advances one epoch and reports on the resulting state.
    pub fn step(&mut self) -> Result<EpochReport, EngineError> {
        let seed = self.config.seed;
        let spec = self.config.genome;
        self.state.epoch += 1;
        let epoch = self.state.epoch;

        for sector in &mut self.state.sectors {
            let mut r = rng::stream(seed, Entity::Sector, sector.id as u64, epoch, Phase::Drift);
            sector.drift(&spec, &mut r);
        }

        let generations = self.config.generations_per_epoch;
        self.draw_requests()?;
        self.fan_out(|h, _| {
            let mut r = rng::stream(seed, Entity::Habitat, h.id as u64, epoch, Phase::Evolve);
            for _ in 0..generations {
                h.evolve_generation(epoch, &mut r)?;
            }
            Ok(())
        })?;

        let mut r = rng::stream(seed, Entity::Network, 0, epoch, Phase::Migrate);
        let events = self.state.network.migrate(
            &mut self.state.habitats,
            self.config.migration.p_mig,
            epoch,
            &mut r,
        );

        let mut successes = Vec::new();
        for h in &mut self.state.habitats {
            let accepted = h.absorb_inbox()?;
            successes.extend(
                events
                    .iter()
                    .filter(|e| e.destination == h.id && accepted.binary_search(&e.agent).is_ok())
                    .map(|e| (e.source, e.destination)),
            );
        }

        let hebb = &self.config.hebbian;
        self.state
            .network
            .hebbian_update(&successes, hebb.eta, hebb.lambda)?;

        let species = self.state.species(self.config.species.theta);
        self.state.feedback_check(
            species.species_count(),
            self.config.feedback.floor,
            self.config.feedback.boost,
        );

        self.report(species, events, successes.len())
    }

    /// Report for the current state without advancing it.
    pub fn initial_report(&mut self) -> Result<EpochReport, EngineError> {
        let species = self.state.species(self.config.species.theta);
        self.report(species, Vec::new(), 0)
    }

    fn report(
        &mut self,
        species: SpeciesPartition,
        events: Vec<MigrationEvent>,
        accepted: usize,
    ) -> Result<EpochReport, EngineError> {
        let habitats = self.fan_out(|h, _| {
            let (best, mean) = h.fitness_summary()?.unwrap_or((0.0, 0.0));
            Ok(HabitatStats {
                id: h.id,
                best_fitness: best,
                mean_fitness: mean,
                population: h.population.len(),
                effective_mutation_rate: h.effective_mutation_rate,
            })
        })?;
        let abundances = species.abundances();
        let shannon = if abundances.is_empty() {
            0.0
        } else {
            shannon_diversity(&abundances)?
        };
        let graph = self.state.network.graph_at(self.config.metrics.tau);
        Ok(EpochReport {
            epoch: self.state.epoch,
            habitats,
            species_count: abundances.len(),
            abundances,
            shannon,
            migrations: events.len(),
            accepted,
            migration_events: events,
            mean_weight: self.state.network.mean_weight(),
            clustering: graph.clustering_coefficient(),
            path_length: graph.characteristic_path_length().ok(),
            components: graph.components().len(),
            feedback_active: self.state.feedback_active,
        })
    }
}

/// A run that stopped early; `reports` holds everything produced before the failure.
#[derive(Debug, Error)]
#[error("run aborted after {} reports: {source}", .reports.len())]
pub struct RunFailure {
    pub reports: Vec<EpochReport>,
    #[source]
    pub source: EngineError,
}

/// Runs `config` to completion: the epoch-0 report plus one per epoch.
pub fn run(config: &SimConfig) -> Result<Vec<EpochReport>, RunFailure> {
    run_with_threads(config, 1)
}

pub fn run_with_threads(config: &SimConfig, threads: usize) -> Result<Vec<EpochReport>, RunFailure> {
    let fail = |reports, source| RunFailure { reports, source };
    let mut sim = Simulation::new(config.clone())
        .and_then(|s| s.with_threads(threads))
        .map_err(|e| fail(Vec::new(), e))?;
    let mut reports = Vec::with_capacity(config.epochs as usize + 1);
    match sim.initial_report() {
        Ok(r) => reports.push(r),
        Err(e) => return Err(fail(reports, e)),
    }
    for _ in 0..config.epochs {
        match sim.step() {
            Ok(r) => reports.push(r),
            Err(e) => return Err(fail(reports, e)),
        }
    }
    Ok(reports)
}
