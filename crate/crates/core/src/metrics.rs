//! Ecological and topological statistics.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{distance, species_partition, Agent};
use crate::network::MigrationEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("abundance vector is empty")]
    NoSpecies,
    #[error("abundance counts must be positive")]
    NonPositiveCount,
    #[error("population is empty")]
    EmptyPopulation,
    #[error("power-law fit needs at least two points with distinct positive areas")]
    DegenerateFit,
    #[error("area {area} exceeds the {available} habitats available")]
    AreaTooLarge { area: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HabitatStats {
    pub id: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub population: usize,
    pub effective_mutation_rate: f64,
}

/// Summary of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: u64,
    pub habitats: Vec<HabitatStats>,
    pub species_count: usize,
    /// Species sizes, descending.
    pub abundances: Vec<usize>,
    pub shannon: f64,
    pub migrations: usize,
    pub accepted: usize,
    pub migration_events: Vec<MigrationEvent>,
    pub mean_weight: f64,
    /// Statistics of the subgraph with weights at or above the reporting threshold.
    pub clustering: f64,
    pub path_length: Option<f64>,
    pub components: usize,
    pub feedback_active: bool,
}

impl EpochReport {
    pub fn best_fitness_mean(&self) -> f64 {
        mean(self.habitats.iter().map(|h| h.best_fitness))
    }

    pub fn mean_fitness_mean(&self) -> f64 {
        mean(self.habitats.iter().map(|h| h.mean_fitness))
    }

    pub fn total_population(&self) -> usize {
        self.habitats.iter().map(|h| h.population).sum()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Shannon entropy of the relative abundances, in nats.
pub fn shannon_diversity(abundances: &[usize]) -> Result<f64, MetricsError> {
    if abundances.is_empty() {
        return Err(MetricsError::NoSpecies);
    }
    if abundances.contains(&0) {
        return Err(MetricsError::NonPositiveCount);
    }
    let total = abundances.iter().sum::<usize>() as f64;
    let h = -abundances
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalCheck {
    pub species: usize,
    pub skewness: Option<f64>,
    pub verdict: ShapeVerdict,
}

pub const LOGNORMAL_MIN_SPECIES: usize = 10;
pub const LOGNORMAL_SKEW_BAND: f64 = 1.0;

/// Weak log-normality check: the log-abundances should be roughly symmetric.
pub fn lognormal_shape_check(abundances: &[usize]) -> LogNormalCheck {
    let species = abundances.len();
    if species < LOGNORMAL_MIN_SPECIES || abundances.contains(&0) {
        return LogNormalCheck {
            species,
            skewness: None,
            verdict: ShapeVerdict::Inconclusive,
        };
    }
    let logs: Vec<f64> = abundances.iter().map(|&c| (c as f64).ln()).collect();
    let skew = sample_skewness(&logs);
    LogNormalCheck {
        species,
        skewness: Some(skew),
        verdict: if skew.abs() <= LOGNORMAL_SKEW_BAND {
            ShapeVerdict::Pass
        } else {
            ShapeVerdict::Fail
        },
    }
}

/// Moment skewness `m3 / m2^(3/2)`; zero for a constant sample.
pub fn sample_skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mu).powi(3)).sum::<f64>() / n;
    if m2 <= f64::EPSILON * mu.abs().max(1.0) {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// `S = c * A^z` fitted on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub c: f64,
    pub z: f64,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, MetricsError> {
    if points.len() < 2 || points.iter().any(|&(a, s)| a <= 0.0 || s <= 0.0) {
        return Err(MetricsError::DegenerateFit);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(a, s)| (a.ln(), s.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(MetricsError::DegenerateFit);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let z = sxy / sxx;
    Ok(PowerLawFit {
        c: (my - z * mx).exp(),
        z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesArea {
    /// `(area, mean species count)` per sampled area.
    pub curve: Vec<(usize, f64)>,
    pub fit: PowerLawFit,
}

pub const SPECIES_AREA_REPLICATES: usize = 20;

/// Mean species count in pooled random subsets of `area` habitats, and the
/// power-law fit over the resulting curve.
pub fn species_area<R: Rng + ?Sized>(
    populations: &[&[Agent]],
    areas: &[usize],
    threshold: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<SpeciesArea, MetricsError> {
    let available = populations.len();
    let mut curve = Vec::with_capacity(areas.len());
    for &area in areas {
        if area > available {
            return Err(MetricsError::AreaTooLarge { area, available });
        }
        let mut total = 0usize;
        for _ in 0..replicates {
            let picked = index::sample(rng, available, area);
            let pooled = picked.iter().flat_map(|h| populations[h].iter());
            total += species_partition(pooled, threshold).species_count();
        }
        curve.push((area, total as f64 / replicates.max(1) as f64));
    }
    let points: Vec<(f64, f64)> = curve.iter().map(|&(a, s)| (a as f64, s)).collect();
    let fit = fit_power_law(&points)?;
    Ok(SpeciesArea { curve, fit })
}

/// Mean genome distance over the cross product of two populations.
pub fn divergence(a: &[Agent], b: &[Agent]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPopulation);
    }
    let total: f64 = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| distance(&x.genome, &y.genome)))
        .sum();
    Ok(total / (a.len() * b.len()) as f64)
}
