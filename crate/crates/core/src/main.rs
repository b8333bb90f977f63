use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qslam::cli_io::commands::{
    evaluate_posteriors, generate_compositions, generate_graphs, generate_triplets, propagate_graphs, score_graphs,
    solve_scenarios, with_threads, SolveOptions,
};
use qslam::cli_io::mrclam::{ingest_mrclam, read_mrclam_dir, IngestConfig};
use qslam::cli_io::tensor_file::{load_or_build, read_tensor, to_json};
use qslam::cli_io::{
    percentile_table, read_graph_scenarios, read_posteriors, read_results, read_scenarios, write_csv,
    write_graph_scenarios, write_json, write_percentile_table, write_posteriors, write_scenarios, TABLE_METRICS,
};
use qslam::composition::CompositionMode;
use qslam::factor_graph::DEFAULT_ALPHA;
use qslam::metrics::median;
use qslam::models::NoiseConfig;
use qslam::partition::SpacePartition;
use qslam::simulation::{default_noise_grid, gen_experiment_grid, GraphConfig};
use qslam::solver::{SolverParams, SolverVariant};
use qslam::{Error, Result};

#[derive(Parser)]
#[command(name = "qslam", version, about = "Qualitative landmark-triplet localization and mapping")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bundled partition name or partition JSON file.
    #[arg(long, global = true, default_value = "edc")]
    partition: String,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 2.0)]
    sigma_v_deg: f64,
    #[arg(long, global = true, default_value_t = 5.0)]
    sigma_w_deg: f64,
    #[arg(long, global = true, default_value_t = 3)]
    views: usize,
    /// Number of scenarios to generate (per noise cell for grids).
    #[arg(long, global = true, default_value_t = 100)]
    scenarios: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Triplet,
    Grid,
    Graph,
    Composition,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated scenarios.
    Gen {
        #[arg(long, value_enum, default_value = "triplet")]
        kind: GenKind,
        #[arg(long, default_value_t = GraphConfig::default().landmark_count)]
        landmarks: usize,
        #[arg(long, default_value_t = GraphConfig::default().factor_count)]
        factors: usize,
        #[arg(long, default_value_t = GraphConfig::default().coverage_rate)]
        coverage: f64,
        #[arg(long, default_value_t = GraphConfig::default().candidates)]
        candidates: usize,
        /// Output file name inside the output directory.
        #[arg(long)]
        output: Option<String>,
    },
    /// Build (or fetch from the output directory) a composition tensor.
    BuildTensor {
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value = "prob")]
        mode: CompositionMode,
        /// Rebuild even if a matching file exists.
        #[arg(long)]
        force: bool,
        /// Also write a JSON export next to the binary file.
        #[arg(long)]
        json: bool,
    },
    /// Solve every triplet of a scenario file.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "full")]
        solver: Vec<SolverVariant>,
        #[arg(long)]
        pose_samples: Option<usize>,
        /// Record per-row wall time in the results.
        #[arg(long)]
        timing: bool,
    },
    /// Solve seen triplets of graph scenarios and propagate through compositions.
    Propagate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long, default_value = "fast")]
        solver: SolverVariant,
    },
    /// Topology scores and composition levels of graph scenarios.
    Tscore {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Seen triplets start at score 1 instead of their information score.
        #[arg(long)]
        selection: bool,
    },
    /// Percentile tables of solver results.
    Eval {
        /// Scenario file the posteriors refer to.
        #[arg(long, requires = "posteriors")]
        input: Option<PathBuf>,
        #[arg(long, requires = "input")]
        posteriors: Option<PathBuf>,
        /// Results CSV to summarize instead of posteriors.
        #[arg(long, conflicts_with = "input")]
        results: Option<PathBuf>,
    },
    /// Convert an MRCLAM dataset directory into a scenario file.
    IngestMrclam {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = IngestConfig::default().view_window)]
        view_window: f64,
        #[arg(long, default_value_t = IngestConfig::default().min_view_gap)]
        min_view_gap: f64,
    },
}

fn out_path(g: &Global, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&g.out_dir)?;
    Ok(g.out_dir.join(name))
}

fn noise(g: &Global) -> Result<NoiseConfig> {
    NoiseConfig::from_degrees(g.sigma_v_deg, g.sigma_w_deg)
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let partition = SpacePartition::load(&g.partition)?;
    match cli.command {
        Command::Gen {
            kind,
            landmarks,
            factors,
            coverage,
            candidates,
            output,
        } => {
            let config = GraphConfig {
                landmark_count: landmarks,
                factor_count: factors,
                coverage_rate: coverage,
                candidates,
                views: g.views,
            };
            let name = |default: &str| output.clone().unwrap_or_else(|| default.to_string());
            let (path, count) = match kind {
                GenKind::Triplet => {
                    let s = generate_triplets(g.scenarios, g.views, noise(g)?, g.seed)?;
                    let path = out_path(g, &name("scenarios.json"))?;
                    write_scenarios(&path, &s)?;
                    (path, s.len())
                }
                GenKind::Grid => {
                    let s = gen_experiment_grid(&default_noise_grid(), g.scenarios, g.views, g.seed)?;
                    let path = out_path(g, &name("grid.json"))?;
                    write_scenarios(&path, &s)?;
                    (path, s.len())
                }
                GenKind::Graph => {
                    let s = generate_graphs(g.scenarios, &config, noise(g)?, partition.d(), g.seed)?;
                    let path = out_path(g, &name("graphs.json"))?;
                    write_graph_scenarios(&path, &s)?;
                    (path, s.len())
                }
                GenKind::Composition => {
                    let s = generate_compositions(g.scenarios, g.views, noise(g)?, partition.d(), g.seed)?;
                    let path = out_path(g, &name("composition.json"))?;
                    write_graph_scenarios(&path, &s)?;
                    (path, s.len())
                }
            };
            println!("wrote {count} scenarios to {}", show(&path));
        }
        Command::BuildTensor {
            samples,
            mode,
            force,
            json,
        } => {
            fs::create_dir_all(&g.out_dir)?;
            if force {
                let name = qslam::cli_io::tensor_file::cache_file_name(&partition.name, mode, samples, g.seed);
                let _ = fs::remove_file(g.out_dir.join(name));
            }
            let (tensor, path, cached) = load_or_build(&g.out_dir, &partition, mode, samples, g.seed)?;
            if json {
                write_json(&path.with_extension("json"), &to_json(&tensor))?;
            }
            let d = tensor.d;
            println!(
                "{}: d = {d}, {} entries, {} nonzero{}",
                show(&path),
                d * d * d,
                tensor.nonzero_count(),
                if cached { " (cached)" } else { "" }
            );
        }
        Command::Solve {
            input,
            solver,
            pose_samples,
            timing,
        } => {
            let scenarios = read_scenarios(&input)?;
            let mut params = SolverParams::default();
            if let Some(n) = pose_samples {
                params.pose_samples = n;
            }
            let options = SolveOptions {
                variants: solver,
                params,
                seed: g.seed,
                timing,
            };
            let (rows, posts) = with_threads(g.threads, || solve_scenarios(&scenarios, &partition, &options))??;
            let results = out_path(g, "results.csv")?;
            write_csv(&results, &rows)?;
            write_posteriors(&out_path(g, "posteriors.json")?, &posts)?;
            let degraded = posts.iter().filter(|p| p.degraded).count();
            println!("{} rows to {} ({degraded} degraded)", rows.len(), show(&results));
            for variant in &options.variants {
                let d: Vec<f64> = rows.iter().filter(|r| r.solver_variant == variant.name()).map(|r| r.dmse).collect();
                println!("{variant}: median dmse {:.4}", median(&d));
            }
        }
        Command::Propagate { input, tensor, solver } => {
            let tensor_path = tensor.ok_or_else(|| Error::Config("propagate needs --tensor FILE (see build-tensor)".into()))?;
            let tensor = read_tensor(&tensor_path)?;
            let graphs = read_graph_scenarios(&input)?;
            let params = SolverParams::default();
            let (graphs, rows) =
                with_threads(g.threads, || propagate_graphs(&graphs, &tensor, &partition, solver, &params, g.seed))??;
            write_graph_scenarios(&out_path(g, "propagated.json")?, &graphs)?;
            let path = out_path(g, "isc.csv")?;
            write_csv(&path, &rows)?;
            let unseen: Vec<f64> = rows.iter().filter(|r| !r.seen).map(|r| r.dmse).collect();
            println!(
                "{} graphs, {} variables to {}; unseen median dmse {:.4}",
                graphs.len(),
                rows.len(),
                show(&path),
                median(&unseen)
            );
        }
        Command::Tscore { input, alpha, selection } => {
            let mut graphs = read_graph_scenarios(&input)?;
            let rows = score_graphs(&mut graphs, alpha, selection)?;
            let path = out_path(g, "tscore.csv")?;
            write_csv(&path, &rows)?;
            let conn: Vec<f64> = graphs.iter().map(|s| s.connectivity).collect();
            println!("{} variables to {}; median connectivity {:.4}", rows.len(), show(&path), median(&conn));
        }
        Command::Eval {
            input,
            posteriors,
            results,
        } => {
            let rows = match (input, posteriors, results) {
                (Some(s), Some(p), _) => evaluate_posteriors(&read_scenarios(&s)?, &read_posteriors(&p)?, &partition)?,
                (_, _, Some(r)) => read_results(&r)?,
                _ => return Err(Error::Config("eval needs --input with --posteriors, or --results".into())),
            };
            let table = percentile_table(&rows);
            let path = out_path(g, "eval.csv")?;
            write_percentile_table(&path, &table)?;
            for row in &table {
                let m = &row.metrics;
                println!(
                    "{} sv={} sw={} n={}: {} {:.3}/{:.3}/{:.3}, {} {:.3}/{:.3}/{:.3}",
                    row.solver_variant,
                    row.sigma_v_deg,
                    row.sigma_w_deg,
                    row.count,
                    TABLE_METRICS[0],
                    m[0][0],
                    m[0][1],
                    m[0][2],
                    TABLE_METRICS[1],
                    m[1][0],
                    m[1][1],
                    m[1][2]
                );
            }
            println!("table to {}", show(&path));
        }
        Command::IngestMrclam {
            dir,
            view_window,
            min_view_gap,
        } => {
            let bundle = read_mrclam_dir(&dir)?;
            let config = IngestConfig {
                view_window,
                min_view_gap,
                ..IngestConfig::default()
            };
            let (scenarios, report) = ingest_mrclam(&bundle, noise(g)?, &config)?;
            let path = out_path(g, "mrclam.json")?;
            write_scenarios(&path, &scenarios)?;
            if report.unresolved_barcodes > 0 {
                eprintln!("warning: skipped {} measurements with unknown barcodes", report.unresolved_barcodes);
            }
            println!(
                "{} views, {} triplets in {} scenarios to {}",
                report.views,
                report.triplets,
                scenarios.len(),
                show(&path)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
