//! On-disk artifacts of a run.

use std::path::Path;

use eve_core::metrics::{divergence, lognormal_shape_check, species_area, LogNormalCheck, SpeciesArea};
use eve_core::network::write_edge_list;
use eve_core::rng::{self, Entity, Phase};
use eve_core::{EpochReport, SimConfig, SimState};
use serde::Serialize;

use crate::error::CliError;

pub const REPORT_COLUMNS: [&str; 12] = [
    "epoch",
    "best_fitness_mean",
    "mean_fitness_mean",
    "species_count",
    "shannon",
    "migrations",
    "accepted",
    "mean_weight",
    "clustering",
    "path_length",
    "components",
    "feedback_active",
];

/// One CSV record per report; floats use the shortest round-trip form.
pub fn report_record(r: &EpochReport) -> [String; 12] {
    [
        r.epoch.to_string(),
        r.best_fitness_mean().to_string(),
        r.mean_fitness_mean().to_string(),
        r.species_count.to_string(),
        r.shannon.to_string(),
        r.migrations.to_string(),
        r.accepted.to_string(),
        r.mean_weight.to_string(),
        r.clustering.to_string(),
        r.path_length.map(|l| l.to_string()).unwrap_or_default(),
        r.components.to_string(),
        r.feedback_active.to_string(),
    ]
}

fn csv_string<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
}

pub fn report_csv(reports: &[EpochReport]) -> String {
    csv_string(&REPORT_COLUMNS, reports.iter().map(report_record))
}

/// Sweep summary: the run's coordinates followed by its final report row.
pub fn sweep_csv(rows: &[(String, String, u64, String, EpochReport)]) -> String {
    let mut header = vec!["param", "value", "seed", "run_dir"];
    header.extend(REPORT_COLUMNS);
    csv_string(
        &header,
        rows.iter().map(|(param, value, seed, dir, r)| {
            let mut rec = vec![param.clone(), value.clone(), seed.to_string(), dir.clone()];
            rec.extend(report_record(r));
            rec
        }),
    )
}

/// Habitat count above which the all-pairs divergence summary is skipped.
pub const DIVERGENCE_MAX_HABITATS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceSummary {
    /// Mean over habitats joined by an edge of the final network.
    pub neighbor_mean: Option<f64>,
    pub all_pairs_mean: Option<f64>,
    pub same_sector_mean: Option<f64>,
    pub cross_sector_mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub epoch: u64,
    pub species_count: usize,
    pub abundances: Vec<usize>,
    pub lognormal: LogNormalCheck,
    /// `None` when fewer than two distinct areas are available.
    pub species_area: Option<SpeciesArea>,
    pub divergence: DivergenceSummary,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Areas 1, 2, 4, ... up to the habitat count, which is always included.
pub fn areas(n: usize) -> Vec<usize> {
    let mut a: Vec<usize> = std::iter::successors(Some(1usize), |x| x.checked_mul(2))
        .take_while(|&x| x < n)
        .collect();
    a.push(n);
    a.dedup();
    a
}

pub fn analyse(config: &SimConfig, state: &SimState) -> Result<Analysis, CliError> {
    let runtime = |e: eve_core::metrics::MetricsError| CliError::Runtime(e.to_string());
    let theta = config.species.theta;
    let partition = state.species(theta);
    let abundances = partition.abundances();
    let pops: Vec<&[eve_core::Agent]> = state.habitats.iter().map(|h| h.population.as_slice()).collect();

    let area_list = areas(pops.len());
    let species_area = if area_list.len() >= 2 {
        let mut r = rng::stream(config.seed, Entity::Analysis, 0, state.epoch, Phase::SpeciesArea);
        Some(species_area(&pops, &area_list, theta, config.metrics.species_area_replicates, &mut r).map_err(runtime)?)
    } else {
        None
    };

    let mut neighbor = Vec::new();
    for (i, j, _) in state.network.edges() {
        neighbor.push(divergence(pops[i], pops[j]).map_err(runtime)?);
    }
    let (mut all, mut same, mut cross) = (Vec::new(), Vec::new(), Vec::new());
    if pops.len() <= DIVERGENCE_MAX_HABITATS {
        for i in 0..pops.len() {
            for j in i + 1..pops.len() {
                let d = divergence(pops[i], pops[j]).map_err(runtime)?;
                all.push(d);
                if state.sector_of[i] == state.sector_of[j] {
                    same.push(d);
                } else {
                    cross.push(d);
                }
            }
        }
    }
    Ok(Analysis {
        epoch: state.epoch,
        species_count: abundances.len(),
        lognormal: lognormal_shape_check(&abundances),
        abundances,
        species_area,
        divergence: DivergenceSummary {
            neighbor_mean: mean(&neighbor),
            all_pairs_mean: mean(&all),
            same_sector_mean: mean(&same),
            cross_sector_mean: mean(&cross),
        },
    })
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(CliError::io(path))
}

/// Writes the four run artifacts into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    config: &SimConfig,
    reports: &[EpochReport],
    state: &SimState,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    write(&dir.join("report.csv"), &report_csv(reports))?;
    write(&dir.join("network_final.edges"), &write_edge_list(state.network.edges()))?;
    let analysis = analyse(config, state)?;
    let json = serde_json::to_string_pretty(&analysis).map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&dir.join("analysis.json"), &(json + "\n"))?;
    write(&dir.join("config_resolved.toml"), &crate::config::resolved(config))
}
