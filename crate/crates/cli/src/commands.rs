use std::path::{Path, PathBuf};

use eve_core::experiments::{run_recipe, RecipeOutcome, RECIPES};
use eve_core::network::{parse_edge_list, Graph, NetworkError};
use eve_core::{EpochReport, SimConfig, SimState, Simulation};
use serde::Serialize;

use crate::config;
use crate::error::CliError;
use crate::output;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs `config` to completion and returns every report plus the final state.
pub fn simulate(config: &SimConfig, threads: usize) -> Result<(Vec<EpochReport>, SimState), CliError> {
    let mut sim = Simulation::new(config.clone())
        .and_then(|s| s.with_threads(threads))
        .map_err(runtime)?;
    let mut reports = vec![sim.initial_report().map_err(runtime)?];
    for _ in 0..config.epochs {
        reports.push(sim.step().map_err(runtime)?);
    }
    Ok((reports, sim.state().clone()))
}

pub fn run(config_path: &Path, out: &Path, seed: Option<u64>, threads: usize) -> Result<(), CliError> {
    let mut config = config::load(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let (reports, state) = simulate(&config, threads)?;
    output::write_run(out, &config, &reports, &state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PathLength {
    Hops(f64),
    Disconnected(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetStats {
    pub nodes: usize,
    pub edges: usize,
    pub tau: f64,
    pub clustering: f64,
    pub path_length: PathLength,
    pub components: usize,
}

/// Statistics of the graph of edges with weight at least `tau`. Nodes are
/// `0..=max id` over all listed edges, whatever their weight.
pub fn netstats_of(text: &str, tau: f64) -> Result<NetStats, CliError> {
    let edges = parse_edge_list(text).map_err(|e| CliError::Input(e.to_string()))?;
    let Some(max_id) = edges.iter().map(|&(i, j, _)| i.max(j)).max() else {
        return Err(CliError::Input("edge list is empty".into()));
    };
    let nodes = max_id + 1;
    let kept: Vec<(usize, usize)> = edges.iter().filter(|e| e.2 >= tau).map(|&(i, j, _)| (i, j)).collect();
    let g = Graph::from_edges(nodes, kept);
    let path_length = match g.characteristic_path_length() {
        Ok(l) => PathLength::Hops(l),
        Err(NetworkError::Disconnected) => PathLength::Disconnected("disconnected"),
        Err(e) => return Err(runtime(e)),
    };
    Ok(NetStats {
        nodes,
        edges: g.edge_count(),
        tau,
        clustering: g.clustering_coefficient(),
        path_length,
        components: g.components().len(),
    })
}

pub fn netstats(edges: &Path, tau: f64) -> Result<String, CliError> {
    if !tau.is_finite() {
        return Err(CliError::Usage(format!("tau must be finite, got {tau}")));
    }
    let text = std::fs::read_to_string(edges).map_err(CliError::io(edges))?;
    let stats = netstats_of(&text, tau)?;
    serde_json::to_string(&stats).map_err(runtime)
}

pub struct SweepPlan {
    pub param: String,
    pub values: Vec<String>,
    pub seeds: u64,
}

pub fn sweep(config_path: &Path, plan: &SweepPlan, out: &Path, threads: usize) -> Result<usize, CliError> {
    let base = config::load(config_path)?;
    if plan.values.is_empty() || plan.values.iter().any(|v| v.trim().is_empty()) {
        return Err(CliError::Usage("--values needs a comma-separated list of numbers".into()));
    }
    if plan.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    // Resolve every value up front so a bad one fails before any run starts.
    let configs = plan
        .values
        .iter()
        .map(|v| config::with_param(&base, &plan.param, v).map(|c| (v.trim().to_string(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let mut rows = Vec::new();
    for (value, config) in &configs {
        for offset in 0..plan.seeds {
            let mut c = config.clone();
            c.seed = base.seed + offset;
            let dir_name = format!("run-{:03}", rows.len());
            let (reports, state) = simulate(&c, threads)?;
            output::write_run(&out.join(&dir_name), &c, &reports, &state)?;
            let last = reports.last().expect("at least the epoch-0 report").clone();
            rows.push((plan.param.clone(), value.clone(), c.seed, dir_name, last));
        }
    }
    output::write(&out.join("sweep.csv"), &output::sweep_csv(&rows))?;
    Ok(rows.len())
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub recipe: String,
    pub pass: bool,
    pub result: RecipeOutcome,
}

pub fn recipe(name: &str, out: &Path) -> Result<Verdict, CliError> {
    let outcome = run_recipe(name)
        .ok_or_else(|| CliError::Usage(format!("unknown recipe `{name}` (known: {})", RECIPES.join(", "))))?
        .map_err(runtime)?;
    let verdict = Verdict {
        recipe: name.to_string(),
        pass: outcome.pass(),
        result: outcome,
    };
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let json = serde_json::to_string_pretty(&verdict).map_err(runtime)?;
    output::write(&recipe_path(out, name), &(json + "\n"))?;
    Ok(verdict)
}

pub fn recipe_path(out: &Path, name: &str) -> PathBuf {
    out.join(format!("{name}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn netstats_examples() {
        let k3 = netstats_of("0 1 1\n1 2 1\n0 2 1\n", 0.0).unwrap();
        assert_eq!((k3.clustering, k3.path_length.clone(), k3.components), (1.0, PathLength::Hops(1.0), 1));
        let split = netstats_of("0 1 1\n2 3 1\n", 0.0).unwrap();
        assert_eq!((split.path_length, split.components), (PathLength::Disconnected("disconnected"), 2));
        let faint = netstats_of("0 1 0.01\n1 2 0.02\n", 0.5).unwrap();
        assert_eq!((faint.components, faint.edges), (3, 0));
    }

    #[test]
    fn netstats_json_shape() {
        let s = serde_json::to_string(&netstats_of("0 1 1\n2 3 1\n", 0.0).unwrap()).unwrap();
        assert!(s.contains("\"path_length\":\"disconnected\""), "{s}");
    }

    #[test]
    fn netstats_rejects_bad_lines_with_their_number() {
        match netstats_of("0 1 1\n0 x 1\n", 0.0) {
            Err(CliError::Input(m)) => assert!(m.starts_with("line 2:"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(netstats_of("", 0.0), Err(CliError::Input(_))));
    }
}
