use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rankaudit::diagnosis::diagnose_precomputed;
use rankaudit::graph::{parse_graph, DirectedGraph, ParseOptions};
use rankaudit::ranking::{HitsScoreKind, Method, RankingConfig};
use rankaudit::sensitivity::{sweep, AuditConfig, BaselineMode};
use rankaudit::service::{self, AppState, ServiceConfig};
use rankaudit::store::{read_cache_path, write_cache, write_cache_path, AuditCache};

#[derive(Parser)]
#[command(name = "rankaudit", version, about = "Node-removal sensitivity audits for PageRank and HITS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the graph, remove every node in turn and write the audit cache
    Precompute(PrecomputeArgs),
    /// Print the diagnosis of one node removal from a cache
    Report(ReportArgs),
    /// Serve a cache over HTTP
    Serve(ServeArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, one `source,target` (or tab-separated) pair per line
    #[arg(long)]
    graph: PathBuf,
    /// Node labels, one `node,label` pair per line
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Skip the first row of each input file
    #[arg(long)]
    header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pagerank,
    Hits,
}

#[derive(Clone, Copy, ValueEnum)]
enum HitsScoreArg {
    Authority,
    Hub,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Compact,
    Gap,
}

#[derive(Args)]
struct PrecomputeArgs {
    #[command(flatten)]
    input: GraphArgs,
    #[arg(long, value_enum, default_value = "pagerank")]
    method: MethodArg,
    /// PageRank damping factor
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// Convergence threshold on the L1 change between iterations
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// Which HITS vector ranks the nodes
    #[arg(long, value_enum, default_value = "authority")]
    hits_score: HitsScoreArg,
    /// How original positions are aligned with post-removal positions
    #[arg(long, value_enum, default_value = "compact")]
    mode: ModeArg,
    /// Worker threads for the sweep [default: available cores]
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Cache path; `-` writes to stdout, a `.gz` suffix compresses
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    input: GraphArgs,
    /// Node whose removal is diagnosed
    #[arg(long)]
    node: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Top-k cutoff for label proportions [default: min(100, n - 1)]
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    input: GraphArgs,
    #[arg(long, env = "RANKAUDIT_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Built UI assets to mount at `/`
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

/// Failure after argument parsing; always exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_graph(args: &GraphArgs) -> Result<DirectedGraph, Failure> {
    let edges = read_text(&args.graph)?;
    let labels = match &args.labels {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let parsed = parse_graph(&edges, &labels, ParseOptions { header: args.header })?;
    let d = parsed.dropped;
    if d.self_loops + d.duplicates > 0 {
        eprintln!("dropped {} self-loops and {} duplicate edges", d.self_loops, d.duplicates);
    }
    Ok(parsed.graph)
}

fn load_cache(path: &Path, g: &DirectedGraph) -> Result<AuditCache, Failure> {
    let cache = read_cache_path(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    cache.verify_graph(g)?;
    Ok(cache)
}

fn precompute(args: PrecomputeArgs) -> Result<(), Failure> {
    let g = load_graph(&args.input)?;
    let ranking = RankingConfig {
        method: match args.method {
            MethodArg::Pagerank => Method::PageRank,
            MethodArg::Hits => Method::Hits,
        },
        damping: args.damping,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        hits_score: match args.hits_score {
            HitsScoreArg::Authority => HitsScoreKind::Authority,
            HitsScoreArg::Hub => HitsScoreKind::Hub,
        },
        teleportation: None,
    };
    let config = AuditConfig {
        ranking,
        mode: match args.mode {
            ModeArg::Compact => BaselineMode::Compact,
            ModeArg::Gap => BaselineMode::Gap,
        },
    };

    let started = Instant::now();
    let result = sweep(&g, &config, args.threads.map(usize::from))?;
    let elapsed = started.elapsed();
    let stats = result.stats;
    let cache = AuditCache::from(result);

    if args.out.as_os_str() == "-" {
        let stdout = io::stdout();
        write_cache(&cache, stdout.lock())?;
    } else {
        write_cache_path(&cache, &args.out).map_err(|e| Failure(format!("{}: {e}", args.out.display())))?;
    }
    eprintln!(
        "precomputed {} nodes, {} edges in {:.3} s; iterations: original {}, perturbed min {} / mean {:.1} / max {}",
        g.node_count(),
        g.edge_count(),
        elapsed.as_secs_f64(),
        stats.original_iterations,
        stats.min_iterations,
        stats.mean_iterations(),
        stats.max_iterations,
    );
    Ok(())
}

fn suggestions<'a>(g: &'a DirectedGraph, node: &str) -> Vec<&'a str> {
    let mut scored: Vec<(f64, &str)> = g
        .ids()
        .iter()
        .map(|id| (strsim::jaro_winkler(node, id.as_str()), id.as_str()))
        .filter(|(s, _)| *s >= 0.7)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, id)| id).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let g = load_graph(&args.input)?;
    let cache = load_cache(&args.cache, &g)?;
    let Some(delta) = cache.delta(&args.node) else {
        let near = suggestions(&g, &args.node);
        let hint = if near.is_empty() {
            String::new()
        } else {
            format!("; did you mean {}?", near.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(", "))
        };
        return Err(Failure(format!("unknown node `{}`{hint}", args.node)));
    };
    let k = args
        .k
        .unwrap_or_else(|| service::DEFAULT_TOP_K.min(g.node_count().saturating_sub(1)).max(1));
    let rep = diagnose_precomputed(&g, &cache.positions, cache.config.mode, delta, k, &cache.fingerprint)?;

    let mut out = io::stdout().lock();
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rep)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "node,previous_rank,perturbed_rank,delta,label")?;
            for c in &rep.changes {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(c.node.as_str()),
                    c.previous_rank,
                    c.perturbed_rank,
                    c.delta,
                    csv_field(c.label.as_str())
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let g = load_graph(&args.input)?;
    let cache = read_cache_path(&args.cache).map_err(|e| Failure(format!("{}: {e}", args.cache.display())))?;
    let config = ServiceConfig {
        static_dir: args.static_dir,
        ..ServiceConfig::default()
    };
    let state = Arc::new(AppState::new(cache, g, config)?);
    let addr = SocketAddr::new(args.host, args.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(service::serve(state, addr))
        .map_err(|e| Failure(format!("{addr}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Precompute(a) => precompute(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
