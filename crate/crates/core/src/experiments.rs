//! Canned multi-run experiments.
//!
//! Each experiment fixes its own config, fans seeds out across threads, and
//! returns the measured statistics together with a pass flag computed from
//! the thresholds declared next to it. Individual runs stay single-threaded
//! and deterministic, so results never depend on the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{
    EngineError, HebbianConfig, MigrationConfig, NetworkConfig, SectorsConfig, SimConfig,
    Simulation, Topology,
};
use crate::habitat::GaParams;
use crate::metrics::divergence;
use crate::network::HabitatNetwork;
use crate::rng::{self, Entity, Phase};

/// Names accepted by [`run_recipe`].
pub const RECIPES: &[&str] = &[
    "convergence",
    "prior-sampling",
    "sectors",
    "fragmentation",
    "smallworld",
    "feedback",
];

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base + i).collect()
}

// ---------------------------------------------------------------------------
// Small-world regime
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SmallWorld {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub seeds: usize,
    pub clustering_lattice: f64,
    pub clustering_rewired: f64,
    pub path_length_lattice: f64,
    pub path_length_rewired: f64,
    /// Rewired graphs that came out disconnected and were left out of the path-length mean.
    pub disconnected: usize,
    pub c_ratio: f64,
    pub l_ratio: f64,
    pub c_pass: bool,
    pub l_pass: bool,
    pub pass: bool,
}

pub const SMALLWORLD_MIN_C_RATIO: f64 = 0.6;
pub const SMALLWORLD_MAX_L_RATIO: f64 = 0.5;

pub fn smallworld(n: usize, k: usize, p: f64, seed_count: usize) -> Result<SmallWorld, EngineError> {
    let measure = |p: f64, seed: u64| -> Result<(f64, Option<f64>), EngineError> {
        let mut r = rng::stream(seed, Entity::Network, 0, 0, Phase::Topology);
        let g = HabitatNetwork::watts_strogatz(n, k, p, 0.1, 1.0, &mut r)?.graph();
        Ok((g.clustering_coefficient(), g.characteristic_path_length().ok()))
    };
    let lattice = measure(0.0, 0)?;
    let l0 = lattice.1.ok_or(crate::network::NetworkError::Disconnected)?;
    let rewired = seeds(1, seed_count)
        .into_par_iter()
        .map(|s| measure(p, s))
        .collect::<Result<Vec<_>, _>>()?;
    let c = rewired.iter().map(|r| r.0).sum::<f64>() / rewired.len() as f64;
    let paths: Vec<f64> = rewired.iter().filter_map(|r| r.1).collect();
    let l = paths.iter().sum::<f64>() / paths.len() as f64;
    let c_ratio = c / lattice.0;
    let l_ratio = l / l0;
    let c_pass = c_ratio >= SMALLWORLD_MIN_C_RATIO;
    let l_pass = l_ratio <= SMALLWORLD_MAX_L_RATIO;
    Ok(SmallWorld {
        n,
        k,
        p,
        seeds: seed_count,
        clustering_lattice: lattice.0,
        clustering_rewired: c,
        path_length_lattice: l0,
        path_length_rewired: l,
        disconnected: rewired.len() - paths.len(),
        c_ratio,
        l_ratio,
        c_pass,
        l_pass,
        pass: c_pass && l_pass,
    })
}

// ---------------------------------------------------------------------------
// Local GA convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub seeds: usize,
    pub max_generations: u64,
    /// Generations until best fitness hit 1.0, per seed; `None` if never.
    pub generations_to_optimum: Vec<Option<u64>>,
    pub success_fraction: f64,
    pub pass: bool,
}

pub const CONVERGENCE_MIN_SUCCESS: f64 = 0.9;

/// One habitat against a fixed request: A = 16, L = 12, capacity 50.
pub fn convergence_config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        n_habitats: 1,
        generations_per_epoch: 1,
        sectors: SectorsConfig {
            count: 1,
            archetype_length: 12,
            noise_rate: 0.0,
            drift_rate: 0.0,
        },
        ga: GaParams {
            pop_capacity: 50,
            ..GaParams::default()
        },
        network: NetworkConfig {
            topology: Topology::EdgeList { edges: vec![] },
            ..NetworkConfig::default()
        },
        ..SimConfig::default()
    }
}

pub fn convergence(seed_count: usize, max_generations: u64) -> Result<Convergence, EngineError> {
    let outcomes = seeds(1, seed_count)
        .into_par_iter()
        .map(|seed| {
            let mut sim = Simulation::new(convergence_config(seed))?;
            if sim.initial_report()?.habitats[0].best_fitness >= 1.0 {
                return Ok(Some(0));
            }
            for _ in 0..max_generations {
                let r = sim.step()?;
                if r.habitats[0].best_fitness >= 1.0 {
                    return Ok(Some(r.epoch));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    let hits = outcomes.iter().filter(|o| o.is_some()).count();
    let success_fraction = hits as f64 / seed_count as f64;
    Ok(Convergence {
        seeds: seed_count,
        max_generations,
        generations_to_optimum: outcomes,
        success_fraction,
        pass: success_fraction >= CONVERGENCE_MIN_SUCCESS,
    })
}

// ---------------------------------------------------------------------------
// Prior sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PriorSampling {
    pub seeds: usize,
    pub warmup_epochs: u64,
    pub max_epochs: u64,
    pub target_fitness: f64,
    /// Epochs after joining until the newcomer reached the target; `None` if never.
    pub connected_epochs: Vec<Option<u64>>,
    pub isolated_epochs: Vec<Option<u64>>,
    /// Medians with misses counted as infinity.
    pub connected_median: f64,
    pub isolated_median: f64,
    pub pass: bool,
}

pub const PRIOR_SAMPLING_TARGET: f64 = 0.95;

/// Two habitats of one sector joined by a single edge, migration off.
pub fn prior_sampling_config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        n_habitats: 2,
        sectors: SectorsConfig {
            count: 1,
            ..SectorsConfig::default()
        },
        migration: MigrationConfig { p_mig: 0.0 },
        network: NetworkConfig {
            topology: Topology::EdgeList {
                edges: vec![(0, 1, 1.0)],
            },
            ..NetworkConfig::default()
        },
        ..SimConfig::default()
    }
}

/// Habitat 0 evolves alone for `warmup` epochs; habitat 1 is then replaced by
/// a fresh random population and the epochs it needs to reach the target are
/// counted, with migration either enabled (connected) or not (isolated).
pub fn prior_sampling(seed_count: usize, warmup: u64, max_epochs: u64) -> Result<PriorSampling, EngineError> {
    let p_mig = MigrationConfig::default().p_mig;
    let trial = |seed: u64, connected: bool| -> Result<Option<u64>, EngineError> {
        let mut sim = Simulation::new(prior_sampling_config(seed))?;
        for _ in 0..warmup {
            sim.step()?;
        }
        sim.reseed_habitat(1)?;
        let w_max = sim.config().network.w_max;
        sim.set_edge_weight(0, 1, w_max)?;
        sim.set_migration_probability(if connected { p_mig } else { 0.0 })?;
        for elapsed in 1..=max_epochs {
            if sim.step()?.habitats[1].best_fitness >= PRIOR_SAMPLING_TARGET {
                return Ok(Some(elapsed));
            }
        }
        Ok(None)
    };
    let pairs = seeds(1, seed_count)
        .into_par_iter()
        .map(|s| Ok((trial(s, true)?, trial(s, false)?)))
        .collect::<Result<Vec<_>, EngineError>>()?;
    let as_f64 = |o: &Option<u64>| o.map_or(f64::INFINITY, |e| e as f64);
    let connected: Vec<Option<u64>> = pairs.iter().map(|p| p.0).collect();
    let isolated: Vec<Option<u64>> = pairs.iter().map(|p| p.1).collect();
    let connected_median = median(&connected.iter().map(as_f64).collect::<Vec<_>>());
    let isolated_median = median(&isolated.iter().map(as_f64).collect::<Vec<_>>());
    Ok(PriorSampling {
        seeds: seed_count,
        warmup_epochs: warmup,
        max_epochs,
        target_fitness: PRIOR_SAMPLING_TARGET,
        connected_epochs: connected,
        isolated_epochs: isolated,
        connected_median,
        isolated_median,
        pass: connected_median < isolated_median,
    })
}

// ---------------------------------------------------------------------------
// Hebbian sector recovery
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SectorRecovery {
    pub seeds: usize,
    pub epochs: u64,
    pub intra_mean: Vec<f64>,
    pub inter_mean: Vec<f64>,
    pub seeds_recovered: usize,
    pub required: usize,
    pub pass: bool,
}

/// Two sectors of five habitats on a complete graph.
pub fn sectors_config(seed: u64, epochs: u64) -> SimConfig {
    SimConfig {
        seed,
        n_habitats: 10,
        epochs,
        sectors: SectorsConfig {
            count: 2,
            ..SectorsConfig::default()
        },
        network: NetworkConfig {
            topology: Topology::Complete,
            ..NetworkConfig::default()
        },
        ..SimConfig::default()
    }
}

/// Mean weight of edges inside sectors and between sectors.
pub fn sector_weight_split(sim: &Simulation) -> (f64, f64) {
    let st = sim.state();
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for (i, j, w) in st.network.edges() {
        let slot = if st.sector_of[i] == st.sector_of[j] {
            &mut intra
        } else {
            &mut inter
        };
        slot.0 += w;
        slot.1 += 1;
    }
    (intra.0 / intra.1.max(1) as f64, inter.0 / inter.1.max(1) as f64)
}

pub fn sector_recovery(seed_count: usize, epochs: u64, required: usize) -> Result<SectorRecovery, EngineError> {
    let splits = seeds(1, seed_count)
        .into_par_iter()
        .map(|seed| {
            let mut sim = Simulation::new(sectors_config(seed, epochs))?;
            for _ in 0..epochs {
                sim.step()?;
            }
            Ok(sector_weight_split(&sim))
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    let recovered = splits.iter().filter(|(a, b)| a > b).count();
    Ok(SectorRecovery {
        seeds: seed_count,
        epochs,
        intra_mean: splits.iter().map(|s| s.0).collect(),
        inter_mean: splits.iter().map(|s| s.1).collect(),
        seeds_recovered: recovered,
        required,
        pass: recovered >= required,
    })
}

// ---------------------------------------------------------------------------
// Fragmentation and divergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Fragmentation {
    pub seeds: usize,
    pub epochs: u64,
    pub isolated_divergence: Vec<f64>,
    pub connected_divergence: Vec<f64>,
    pub isolated_median: f64,
    pub connected_median: f64,
    pub pass: bool,
}

/// Two habitats of one sector, either unlinked or linked at `w_max`.
pub fn fragmentation_config(seed: u64, epochs: u64, connected: bool) -> SimConfig {
    SimConfig {
        seed,
        n_habitats: 2,
        epochs,
        sectors: SectorsConfig {
            count: 1,
            ..SectorsConfig::default()
        },
        migration: MigrationConfig { p_mig: 0.05 },
        network: NetworkConfig {
            topology: Topology::EdgeList {
                edges: if connected { vec![(0, 1, 1.0)] } else { vec![] },
            },
            ..NetworkConfig::default()
        },
        hebbian: HebbianConfig::default(),
        ..SimConfig::default()
    }
}

pub fn fragmentation(seed_count: usize, epochs: u64) -> Result<Fragmentation, EngineError> {
    let final_divergence = |seed: u64, connected: bool| -> Result<f64, EngineError> {
        let mut sim = Simulation::new(fragmentation_config(seed, epochs, connected))?;
        for _ in 0..epochs {
            sim.step()?;
        }
        let hs = &sim.state().habitats;
        Ok(divergence(&hs[0].population, &hs[1].population)?)
    };
    let pairs = seeds(1, seed_count)
        .into_par_iter()
        .map(|s| Ok((final_divergence(s, false)?, final_divergence(s, true)?)))
        .collect::<Result<Vec<_>, EngineError>>()?;
    let isolated: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let connected: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let isolated_median = median(&isolated);
    let connected_median = median(&connected);
    Ok(Fragmentation {
        seeds: seed_count,
        epochs,
        isolated_divergence: isolated,
        connected_divergence: connected,
        isolated_median,
        connected_median,
        pass: isolated_median > connected_median,
    })
}

// ---------------------------------------------------------------------------
// Global negative feedback
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Feedback {
    pub seed: u64,
    pub calibration_epochs: u64,
    /// Largest species count over the second half of the unfeedbacked run.
    pub equilibrium_species: usize,
    pub floor: usize,
    pub boost: f64,
    pub activation_epoch: Option<u64>,
    pub within_epochs: u64,
    pub expected_boosted_rate: f64,
    /// Effective rates were exactly the boosted rate whenever feedback was active,
    /// and the configured rate otherwise.
    pub rates_consistent: bool,
    pub disabled_ever_active: bool,
    pub pass: bool,
}

pub fn feedback_config(seed: u64, floor: usize) -> SimConfig {
    let mut c = SimConfig {
        seed,
        n_habitats: 6,
        ..SimConfig::default()
    };
    c.feedback.floor = floor;
    c
}

pub fn feedback(seed: u64, calibration_epochs: u64, within: u64) -> Result<Feedback, EngineError> {
    let mut control = Simulation::new(feedback_config(seed, 0))?;
    let mut counts = Vec::new();
    let mut disabled_ever_active = false;
    for _ in 0..calibration_epochs {
        let r = control.step()?;
        disabled_ever_active |= r.feedback_active
            || r.habitats
                .iter()
                .any(|h| h.effective_mutation_rate != control.config().ga.mutation_rate);
        counts.push(r.species_count);
    }
    let equilibrium = counts[counts.len() / 2..].iter().copied().max().unwrap_or(0);
    let floor = equilibrium + 1;

    let config = feedback_config(seed, floor);
    let rate = config.ga.mutation_rate;
    let boost = config.feedback.boost;
    let boosted = (rate * boost).min(crate::engine::MAX_BOOSTED_MUTATION);
    let mut sim = Simulation::new(config)?;
    let mut activation = None;
    let mut consistent = true;
    for _ in 0..within {
        let r = sim.step()?;
        let expected = if r.feedback_active { boosted } else { rate };
        consistent &= r.habitats.iter().all(|h| h.effective_mutation_rate == expected);
        if r.feedback_active && activation.is_none() {
            activation = Some(r.epoch);
        }
    }
    Ok(Feedback {
        seed,
        calibration_epochs,
        equilibrium_species: equilibrium,
        floor,
        boost,
        activation_epoch: activation,
        within_epochs: within,
        expected_boosted_rate: boosted,
        rates_consistent: consistent,
        disabled_ever_active,
        pass: activation.is_some() && consistent && !disabled_ever_active,
    })
}

/// Outcome of a named recipe, ready for JSON serialisation.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum RecipeOutcome {
    Convergence(Convergence),
    PriorSampling(PriorSampling),
    Sectors(SectorRecovery),
    Fragmentation(Fragmentation),
    SmallWorld(SmallWorld),
    Feedback(Feedback),
}

impl RecipeOutcome {
    pub fn pass(&self) -> bool {
        match self {
            Self::Convergence(r) => r.pass,
            Self::PriorSampling(r) => r.pass,
            Self::Sectors(r) => r.pass,
            Self::Fragmentation(r) => r.pass,
            Self::SmallWorld(r) => r.pass,
            Self::Feedback(r) => r.pass,
        }
    }
}

/// Runs a recipe at its standard size; `None` for an unknown name.
pub fn run_recipe(name: &str) -> Option<Result<RecipeOutcome, EngineError>> {
    Some(match name {
        "convergence" => convergence(20, 200).map(RecipeOutcome::Convergence),
        "prior-sampling" => prior_sampling(20, 50, 200).map(RecipeOutcome::PriorSampling),
        "sectors" => sector_recovery(20, 300, 18).map(RecipeOutcome::Sectors),
        "fragmentation" => fragmentation(20, 200).map(RecipeOutcome::Fragmentation),
        "smallworld" => smallworld(200, 8, 0.1, 10).map(RecipeOutcome::SmallWorld),
        "feedback" => feedback(1, 100, 50).map(RecipeOutcome::Feedback),
        _ => return None,
    })
}
