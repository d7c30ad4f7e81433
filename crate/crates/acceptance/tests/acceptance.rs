//! Acceptance suite. Prints one line per criterion and exits non-zero if any fails.
//!
//! Set `EVE_SIM_BLESS=1` to (re)write the golden report used by criterion 9.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use eve_core::experiments;
use eve_core::genome::{distance, Genome, GenomeSpec};
use eve_core::habitat::Habitat;
use eve_core::metrics::{fit_power_law, shannon_diversity, species_area};
use eve_core::network::{Graph, HabitatNetwork};
use eve_core::oracles::{self, DenseGraph};
use eve_core::rng;
use eve_core::GaParams;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn distance_oracle() -> Verdict {
    let spec = GenomeSpec {
        alphabet: 4,
        max_len: 10,
    };
    let mut r = rng::seeded(101);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let a = spec.random_genome(r.random_range(1..=10), &mut r);
        let b = spec.random_genome(r.random_range(1..=10), &mut r);
        let expected = oracles::edit_distance(a.symbols(), b.symbols()) as f64 / a.len().max(b.len()) as f64;
        if distance(&a, &b) != expected {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("10000 pairs, {mismatches} mismatches"))
}

fn same_metrics(g: &Graph, d: &DenseGraph) -> bool {
    g.clustering_coefficient() == d.clustering_coefficient()
        && g.characteristic_path_length().ok() == d.characteristic_path_length()
}

fn graph_oracle() -> Verdict {
    let mut checked = 0;
    let mut mismatches = 0;
    for n in 1..=8 {
        for d in oracles::all_graphs(n).into_iter().filter(DenseGraph::is_connected) {
            checked += 1;
            if !same_metrics(&Graph::from_edges(n, d.edges()), &d) {
                mismatches += 1;
            }
        }
    }
    let mut r = rng::seeded(202);
    for _ in 0..100 {
        let n = r.random_range(2..=50);
        let p = r.random_range(0.0..0.3);
        // A random spanning tree keeps it connected; extra edges vary the density.
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (r.random_range(0..v), v)).collect();
        for i in 0..n {
            for j in i + 1..n {
                if r.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        let d = DenseGraph::from_edges(n, &edges);
        checked += 1;
        if !d.is_connected() || !same_metrics(&Graph::from_edges(n, edges), &d) {
            mismatches += 1;
        }
    }
    let lattice = HabitatNetwork::watts_strogatz(10, 4, 0.0, 0.1, 1.0, &mut rng::seeded(0))
        .expect("ring lattice")
        .clustering_coefficient();
    let cycle = Graph::from_edges(8, (0..8).map(|i| (i, (i + 1) % 8)))
        .characteristic_path_length()
        .expect("connected cycle");
    let spot = (lattice - 0.5).abs() <= 1e-12 && (cycle - 16.0 / 7.0).abs() <= 1e-12;
    verdict(
        mismatches == 0 && checked == 11_117 + 853 + 112 + 21 + 6 + 2 + 1 + 1 + 100 && spot,
        format!("{checked} graphs, {mismatches} mismatches; lattice C = {lattice}, C8 L = {cycle}"),
    )
}

fn smallworld() -> Verdict {
    let s = experiments::smallworld(200, 8, 0.1, 10).expect("smallworld");
    verdict(
        s.c_ratio >= 0.6 && s.l_ratio <= 0.5,
        format!("C ratio {:.4} (>= 0.6), L ratio {:.4} (<= 0.5)", s.c_ratio, s.l_ratio),
    )
}

fn convergence() -> Verdict {
    let c = experiments::convergence(20, 200).expect("convergence");
    let hits = c.generations_to_optimum.iter().filter(|g| g.is_some()).count();
    verdict(
        c.success_fraction >= 0.9,
        format!("{hits}/20 seeds reached fitness 1.0 within 200 generations (need >= 18)"),
    )
}

fn prior_sampling() -> Verdict {
    let p = experiments::prior_sampling(20, 50, 200).expect("prior sampling");
    verdict(
        p.connected_median < p.isolated_median,
        format!("median epochs to 0.95: connected {} vs isolated {}", p.connected_median, p.isolated_median),
    )
}

fn sectors() -> Verdict {
    let s = experiments::sector_recovery(20, 300, 18).expect("sectors");
    verdict(
        s.seeds_recovered >= 18,
        format!("{}/20 seeds with intra-sector weight > inter-sector weight (need >= 18)", s.seeds_recovered),
    )
}

fn fragmentation() -> Verdict {
    let f = experiments::fragmentation(20, 200).expect("fragmentation");
    verdict(
        f.isolated_median > f.connected_median,
        format!("median divergence: no edge {:.4} vs connected {:.4}", f.isolated_median, f.connected_median),
    )
}

fn feedback() -> Verdict {
    let runs: Vec<_> = (1..=3).map(|s| experiments::feedback(s, 100, 50).expect("feedback")).collect();
    let pass = runs.iter().all(|f| {
        f.activation_epoch.is_some_and(|e| e <= 50)
            && f.rates_consistent
            && f.expected_boosted_rate == (0.02f64 * f.boost).min(0.5)
            && !f.disabled_ever_active
    });
    let detail = runs
        .iter()
        .map(|f| {
            format!(
                "seed {}: F = {}, active at epoch {:?}, boosted rate {}, F = 0 active: {}",
                f.seed, f.floor, f.activation_epoch, f.expected_boosted_rate, f.disabled_ever_active
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(pass, detail)
}

const GOLDEN_CONFIG: &str = "schema_version = 1
seed = 2024
n_habitats = 6
epochs = 12

[sectors]
count = 2

[network.topology]
kind = \"watts_strogatz\"
k = 2
p = 0.2
";

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn run_cli(config: &Path, out: &Path, threads: &str) -> Vec<u8> {
    let code = eve_sim::main_with_args([
        OsStr::new("eve-sim"),
        OsStr::new("run"),
        OsStr::new("--config"),
        config.as_os_str(),
        OsStr::new("--out"),
        out.as_os_str(),
        OsStr::new("--threads"),
        OsStr::new(threads),
    ]);
    assert_eq!(code, 0, "eve-sim run failed");
    std::fs::read(out.join("report.csv")).expect("report.csv")
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("tempdir");
    let config = tmp.path().join("config.toml");
    std::fs::write(&config, GOLDEN_CONFIG).expect("write config");
    let a = run_cli(&config, &tmp.path().join("a"), "1");
    let b = run_cli(&config, &tmp.path().join("b"), "1");
    let c = run_cli(&config, &tmp.path().join("c"), "4");
    let golden_path = golden_dir().join("report.csv");
    if std::env::var_os("EVE_SIM_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).expect("golden dir");
        std::fs::write(&golden_path, &a).expect("write golden");
    }
    let golden = std::fs::read(&golden_path).unwrap_or_default();
    verdict(
        a == b && a == c && a == golden,
        format!(
            "repeat identical: {}, threads 1 vs 4 identical: {}, matches golden: {}",
            a == b,
            a == c,
            a == golden
        ),
    )
}

fn metric_spots() -> Verdict {
    let h = shannon_diversity(&[5, 5, 5, 5]).expect("shannon");
    let z_points = fit_power_law(&[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]).expect("fit").z;

    // Four habitats, each holding two species found nowhere else: S(a) = 2a exactly.
    let spec = GenomeSpec::default();
    let pops: Vec<Habitat> = (0..4u32)
        .map(|i| {
            let mut h = Habitat::new(i as usize, GaParams::default(), spec);
            for s in 0..2u32 {
                let sym = 2 * i + s;
                h.spawn(Genome::new(vec![sym; 12], &spec).expect("genome"), 0);
            }
            h
        })
        .collect();
    let slices: Vec<&[eve_core::Agent]> = pops.iter().map(|h| h.population.as_slice()).collect();
    let sa = species_area(&slices, &[1, 2, 4], 0.1, 20, &mut rng::seeded(3)).expect("species area");
    let curve_exact = sa.curve == vec![(1, 2.0), (2, 4.0), (4, 8.0)];
    verdict(
        (h - 4f64.ln()).abs() <= 1e-12 && (z_points - 1.0).abs() <= 1e-12 && (sa.fit.z - 1.0).abs() <= 1e-12 && curve_exact,
        format!("H = {h}, z (points) = {z_points}, z (species_area) = {}", sa.fit.z),
    )
}

fn main() {
    type Criterion = (u8, &'static str, Option<Duration>, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        (1, "distance oracle", Some(Duration::from_secs(5)), distance_oracle),
        (2, "graph metric oracles", None, graph_oracle),
        (3, "small-world regime", Some(Duration::from_secs(10)), smallworld),
        (4, "local GA convergence", Some(Duration::from_secs(10)), convergence),
        (5, "prior sampling", Some(Duration::from_secs(60)), prior_sampling),
        (6, "Hebbian sector recovery", Some(Duration::from_secs(120)), sectors),
        (7, "fragmentation divergence", Some(Duration::from_secs(60)), fragmentation),
        (8, "negative feedback", None, feedback),
        (9, "determinism", None, determinism),
        (10, "metric spot values", None, metric_spots),
    ];
    let filter: Option<u8> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for (id, name, budget, check) in criteria {
        if filter.is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let in_budget = budget.is_none_or(|b| took < b);
        let pass = v.pass && in_budget;
        let budget_note = match budget {
            Some(b) if !in_budget => format!(" over budget {}s", b.as_secs()),
            Some(b) => format!(" < {}s", b.as_secs()),
            None => String::new(),
        };
        println!(
            "criterion {id:>2} {}  {name}: {} [{:.2}s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
