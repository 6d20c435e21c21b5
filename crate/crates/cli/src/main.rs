use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nope_core::io::{self, json_floats, RunManifest};
use nope_core::metrics::{loglog_slope, trajectory_report, Checkpoint, TrajectoryOptions};
use nope_core::synth::{gen_cluster_features, gen_erdos_renyi};
use nope_core::{run, Algorithm, EngineConfig, EngineRun, FeatureMatrix, RunStatus, StaticGraph};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_TARGET_NOT_REACHED: u8 = 2;

/// Interference-aware greedy graph coarsening.
#[derive(Parser)]
#[command(name = "nope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarsen one graph and write the partition, coarse graph and trace.
    Coarsen(CoarsenArgs),
    /// Run several engines on the same input and compare metric trajectories.
    Compare(CompareArgs),
    /// Time engines on synthetic random graphs of increasing size.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Node features, CSV or the binary matrix layout.
    #[arg(long)]
    features: PathBuf,
    /// Node count, when trailing nodes are isolated and absent from the edge list.
    #[arg(long)]
    num_nodes: Option<usize>,
}

#[derive(Args)]
struct CoarsenArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    algorithm: Algorithm,
    /// Fraction of nodes to remove, in (0, 1).
    #[arg(long, value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record one trace line per merge.
    #[arg(long)]
    trace: bool,
    /// Also record the exact interference of each merge (implies --trace).
    #[arg(long)]
    trace_exact: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated engine names.
    #[arg(long, value_delimiter = ',', required = true)]
    algorithms: Vec<Algorithm>,
    #[arg(long, value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    checkpoint_stride: u64,
    #[arg(long, default_value_t = nope_core::metrics::EWMA_DEFAULT_ALPHA)]
    ewma_alpha: f64,
    /// Skip edge betweenness checkpoints.
    #[arg(long)]
    no_betweenness: bool,
    /// Largest coarse graph for which edge betweenness is computed.
    #[arg(long, default_value_t = nope_core::metrics::EBC_DEFAULT_CAP)]
    ebc_cap: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 8.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.5, value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long, value_delimiter = ',', default_value = "nope,nope-star")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed runs per cell; the minimum wall time is reported.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(format!("ratio must lie strictly between 0 and 1, got {r}"))
    }
}

struct Inputs {
    graph: StaticGraph,
    features: FeatureMatrix,
    digests: BTreeMap<String, String>,
}

fn load(args: &InputArgs) -> Result<Inputs> {
    let edges = io::read_edge_list(&args.edges, args.num_nodes)?;
    if edges.normalization.duplicates > 0 {
        log::info!(
            "merged {} duplicate edge(s)",
            edges.normalization.duplicates
        );
    }
    let features = io::read_features(&args.features, edges.graph.num_nodes())?;
    let mut digests = BTreeMap::new();
    digests.insert("edges".to_string(), io::file_digest(&args.edges)?);
    digests.insert("features".to_string(), io::file_digest(&args.features)?);
    Ok(Inputs {
        graph: edges.graph,
        features,
        digests,
    })
}

fn status_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Complete => EXIT_OK,
        RunStatus::TargetNotReached => EXIT_TARGET_NOT_REACHED,
    }
}

fn summary(alg: Algorithm, n: usize, out: &EngineRun) -> String {
    let status = match out.status {
        RunStatus::Complete => "complete",
        RunStatus::TargetNotReached => "target not reached",
    };
    format!(
        "{alg}: {n} -> {} nodes, achieved ratio {:.4}, {:.1} ms, peak tracked {} B, {status}",
        out.coarse.graph.num_nodes(),
        out.coarse.ratio_achieved,
        out.stats.elapsed.as_secs_f64() * 1e3,
        out.stats.peak_tracked_bytes
    )
}

fn cmd_coarsen(args: CoarsenArgs) -> Result<u8> {
    let inputs = load(&args.input)?;
    let config = EngineConfig::new(args.algorithm, args.ratio)?
        .with_seed(args.seed)
        .with_trace(args.trace)
        .with_exact_trace(args.trace_exact);
    let out = run(&inputs.graph, &inputs.features, config)?;
    let manifest = RunManifest::from_run(&config, &inputs.graph, &out, inputs.digests);
    io::write_outputs(&args.out, &out.coarse, &out.trace, None, &manifest)?;
    println!(
        "{}",
        summary(args.algorithm, inputs.graph.num_nodes(), &out)
    );
    Ok(status_code(out.status))
}

#[derive(Serialize)]
struct CompareEntry<'a> {
    algorithm: &'a str,
    status: RunStatus,
    merges: usize,
    #[serde(serialize_with = "json_floats::f64")]
    achieved_ratio: f64,
    #[serde(serialize_with = "json_floats::opt")]
    final_smoothed_interference: Option<f64>,
    dirichlet: &'a [Checkpoint],
    avg_edge_betweenness: &'a [Checkpoint],
}

#[derive(Serialize)]
struct CompareFile<'a> {
    #[serde(serialize_with = "json_floats::f64")]
    ratio: f64,
    checkpoint_stride: u64,
    #[serde(serialize_with = "json_floats::f64")]
    ewma_alpha: f64,
    seed: u64,
    series: Vec<CompareEntry<'a>>,
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    let inputs = load(&args.input)?;
    let options = TrajectoryOptions {
        checkpoint_stride: args.checkpoint_stride as usize,
        alpha: args.ewma_alpha,
        betweenness: !args.no_betweenness,
        ebc_cap: args.ebc_cap,
    };
    let mut runs = Vec::new();
    for &alg in &args.algorithms {
        let config = EngineConfig::new(alg, args.ratio)?
            .with_seed(args.seed)
            .with_exact_trace(true);
        let out = run(&inputs.graph, &inputs.features, config)?;
        let report = trajectory_report(&inputs.graph, &inputs.features, &out, options)?;
        let manifest = RunManifest::from_run(&config, &inputs.graph, &out, inputs.digests.clone());
        io::write_outputs(
            args.out.join(alg.name()),
            &out.coarse,
            &out.trace,
            Some(&report),
            &manifest,
        )?;
        println!("{}", summary(alg, inputs.graph.num_nodes(), &out));
        runs.push((alg, out, report));
    }
    let file = CompareFile {
        ratio: args.ratio,
        checkpoint_stride: args.checkpoint_stride,
        ewma_alpha: args.ewma_alpha,
        seed: args.seed,
        series: runs
            .iter()
            .map(|(alg, out, report)| CompareEntry {
                algorithm: alg.name(),
                status: out.status,
                merges: out.stats.merges,
                achieved_ratio: out.coarse.ratio_achieved,
                final_smoothed_interference: report.smoothed.last().copied(),
                dirichlet: &report.dirichlet_checkpoints,
                avg_edge_betweenness: &report.ebc_checkpoints,
            })
            .collect(),
    };
    io::write_json(args.out.join("compare.json"), &file)?;
    Ok(runs
        .iter()
        .map(|(_, out, _)| status_code(out.status))
        .max()
        .unwrap_or(EXIT_OK))
}

#[derive(Serialize)]
struct Speedup {
    n: usize,
    baseline: &'static str,
    candidate: &'static str,
    #[serde(serialize_with = "json_floats::f64")]
    ratio: f64,
}

#[derive(Serialize)]
struct BenchSummary {
    sizes: Vec<usize>,
    #[serde(serialize_with = "json_floats::f64")]
    avg_degree: f64,
    dim: usize,
    #[serde(serialize_with = "json_floats::f64")]
    ratio: f64,
    seed: u64,
    /// Fitted log-log wall-time slope per engine; null with a single size.
    slopes: BTreeMap<&'static str, Option<f64>>,
    speedups: Vec<Speedup>,
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    if args.sizes.iter().any(|&n| n < 2) {
        bail!("every benchmark size must be at least 2");
    }
    if args.dim == 0 {
        bail!("--dim must be positive");
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut csv = String::from("n,algorithm,wall_ms,peak_bytes\n");
    let mut timings: BTreeMap<&'static str, Vec<(f64, f64)>> = BTreeMap::new();
    let mut speedups = Vec::new();
    let mut worst = EXIT_OK;
    for &n in &args.sizes {
        let p = (args.avg_degree / (n - 1) as f64).min(1.0);
        let graph = gen_erdos_renyi(n, p, args.seed.wrapping_add(n as u64));
        let labels: Vec<u32> = (0..n as u32).map(|i| i % 8).collect();
        let features = gen_cluster_features(
            &labels,
            args.dim,
            1.0,
            0.5,
            args.seed.wrapping_add(n as u64) ^ 0x9e37_79b9_7f4a_7c15,
        );
        let mut walls = BTreeMap::new();
        for &alg in &args.algorithms {
            let config = EngineConfig::new(alg, args.ratio)?.with_seed(args.seed);
            let mut best: Option<EngineRun> = None;
            for _ in 0..args.repeats {
                let out = run(&graph, &features, config)?;
                if best
                    .as_ref()
                    .is_none_or(|b| out.stats.elapsed < b.stats.elapsed)
                {
                    best = Some(out);
                }
            }
            let out = best.expect("at least one repeat");
            worst = worst.max(status_code(out.status));
            let wall_ms = out.stats.elapsed.as_secs_f64() * 1e3;
            writeln!(
                csv,
                "{n},{alg},{wall_ms:.3},{}",
                out.stats.peak_tracked_bytes
            )?;
            println!("{}", summary(alg, n, &out));
            timings
                .entry(alg.name())
                .or_default()
                .push((n as f64, wall_ms));
            walls.insert(alg.name(), wall_ms);
        }
        if let (Some(&base), Some(&fast)) = (
            walls.get(Algorithm::Nope.name()),
            walls.get(Algorithm::NopeStar.name()),
        ) {
            speedups.push(Speedup {
                n,
                baseline: Algorithm::Nope.name(),
                candidate: Algorithm::NopeStar.name(),
                ratio: base / fast,
            });
        }
    }
    let csv_path = args.out.join("bench.csv");
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let slopes: BTreeMap<_, _> = timings
        .iter()
        .map(|(&alg, pts)| (alg, loglog_slope(pts)))
        .collect();
    for (alg, slope) in &slopes {
        match slope {
            Some(s) => println!("{alg}: log-log slope {s:.3}"),
            None => println!("{alg}: log-log slope undefined (need two sizes)"),
        }
    }
    for s in &speedups {
        println!(
            "n={}: {} / {} wall time = {:.2}",
            s.n, s.baseline, s.candidate, s.ratio
        );
    }
    io::write_json(
        args.out.join("bench.json"),
        &BenchSummary {
            sizes: args.sizes.clone(),
            avg_degree: args.avg_degree,
            dim: args.dim,
            ratio: args.ratio,
            seed: args.seed,
            slopes,
            speedups,
        },
    )?;
    Ok(worst)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Coarsen(a) => cmd_coarsen(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
