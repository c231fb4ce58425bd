use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cryptarank::bench::{self, BenchGrid};
use cryptarank::encoding::ScaleConfig;
use cryptarank::graph::{AdjacencyGraph, GraphError};
use cryptarank::protocol::{self, serve_tcp_party, ProtocolError, ProtocolParams, RunOutcome};
use cryptarank::transport::tcp::PartyListener;
use cryptarank::transport::transcript::Transcript;
use cryptarank::transport::Backend;
use cryptarank::verify::verify;

const SEED_ENV: &str = "CRYPTARANK_SEED";

const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_USAGE: u8 = 2;
const EXIT_TRANSPORT: u8 = 4;
const EXIT_OVERFLOW: u8 = 5;

/// Privacy-preserving PageRank over a column-partitioned, Paillier-encrypted
/// adjacency matrix.
#[derive(Parser)]
#[command(name = "cryptarank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random graph in edge-list format.
    GenGraph(GenGraphArgs),
    /// Run the encrypted protocol on a graph.
    Run(RunArgs),
    /// Run the protocol and compare against the plaintext oracle.
    Verify(RunArgs),
    /// Time the protocol over a grid of party counts and key sizes.
    Bench(BenchArgs),
    /// Serve one party over TCP until the coordinator shuts it down.
    Party(PartyArgs),
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 0.2)]
    prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Transport {
    Inproc,
    Tcp,
}

impl From<Transport> for Backend {
    fn from(t: Transport) -> Self {
        match t {
            Transport::Inproc => Backend::InProc,
            Transport::Tcp => Backend::Tcp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Args, Clone)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 3)]
    parties: usize,
    #[arg(long, default_value_t = 512)]
    key_bits: u64,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long, default_value_t = 10)]
    scale_base: u32,
    #[arg(long, default_value_t = 6)]
    scale_exp: u32,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Seeds the column partition and any generated graph. Overridden by
    /// the CRYPTARANK_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Transport::Inproc)]
    transport: Transport,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

impl ProtocolArgs {
    fn params(&self) -> Result<ProtocolParams> {
        Ok(ProtocolParams {
            party_count: self.parties,
            key_bits: self.key_bits,
            damping: self.damping,
            scale: ScaleConfig { base: self.scale_base, exponent: self.scale_exp },
            tolerance: self.tol,
            max_iter: self.max_iter,
            seed: effective_seed(self.seed)?,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Where to write the report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record every coordinator-party message as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Address of an already running `party` process, once per party in
    /// order. Implies the TCP transport.
    #[arg(long = "party-addr")]
    party_addrs: Vec<SocketAddr>,
}

#[derive(Args)]
struct BenchArgs {
    /// PARTIESxKEY_BITS, each a comma list.
    #[arg(long, default_value = "3,5,7,10x128,256,512,1024")]
    grid: BenchGrid,
    /// Benchmark this graph instead of a generated one.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 0.2)]
    prob: f64,
    /// Runs per cell; the per-phase median is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Markdown table destination; stderr when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct PartyArgs {
    #[arg(long, default_value = "127.0.0.1:7000")]
    listen: String,
}

/// A configuration or usage problem, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(value) => value
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}={value:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn load_graph(path: &Path) -> Result<AdjacencyGraph> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read graph file {}: {e}", path.display())))?;
    AdjacencyGraph::parse_edge_list(&text)
        .map_err(|e| usage(format!("invalid graph file {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<ProtocolError>() {
        Some(e) if e.is_overflow() => EXIT_OVERFLOW,
        Some(e) if e.is_transport() => EXIT_TRANSPORT,
        Some(ProtocolError::Config(_) | ProtocolError::Graph(_) | ProtocolError::Oracle(_)) => {
            EXIT_USAGE
        }
        Some(ProtocolError::Codec(_)) => EXIT_USAGE,
        _ => 1,
    }
}

fn gen_graph(args: &GenGraphArgs) -> Result<u8> {
    let seed = effective_seed(args.seed)?;
    let graph = AdjacencyGraph::random(args.nodes, args.prob, seed).map_err(|e| match e {
        GraphError::InvalidProbability(_) | GraphError::TooFewNodes => usage(e.to_string()),
        other => other.into(),
    })?;
    let header = format!("random graph: nodes={} prob={} seed={seed}", args.nodes, args.prob);
    write_output(args.out.as_deref(), &graph.to_edge_list(Some(&header)))?;
    Ok(0)
}

fn execute(graph: &AdjacencyGraph, args: &RunArgs, params: &ProtocolParams) -> Result<RunOutcome> {
    let transcript = args.transcript.as_ref().map(|_| Transcript::new());
    let outcome = if args.party_addrs.is_empty() {
        protocol::run_local(graph, params, args.protocol.transport.into(), transcript.as_ref())?
    } else {
        if args.party_addrs.len() != params.party_count {
            return Err(usage(format!(
                "{} party addresses given for {} parties",
                args.party_addrs.len(),
                params.party_count
            )));
        }
        protocol::run_remote(graph, params, &args.party_addrs, transcript.as_ref())?
    };
    if let (Some(path), Some(t)) = (&args.transcript, &transcript) {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        t.write_jsonl(BufWriter::new(file))?;
    }
    Ok(outcome)
}

fn run(args: &RunArgs) -> Result<u8> {
    let params = args.protocol.params()?;
    let graph = load_graph(&args.graph)?;
    let outcome = execute(&graph, args, &params)?;
    let report = &outcome.report;
    let body = match args.protocol.output {
        OutputFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        OutputFormat::Text => {
            let mut s = format!(
                "converged: {} after {} iterations ({} parties, {}-bit key, {:.3} s)\n",
                report.converged,
                report.iterations,
                report.parties,
                report.key_bits,
                report.elapsed_s.total
            );
            for (node, rank) in report.pagerank.iter().enumerate() {
                s.push_str(&format!("{node}\t{rank:.9}\n"));
            }
            s
        }
    };
    write_output(args.out.as_deref(), &body)?;
    Ok(if report.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn verify_cmd(args: &RunArgs) -> Result<u8> {
    if !args.party_addrs.is_empty() || args.transcript.is_some() {
        return Err(usage("verify runs all parties locally; --party-addr and --transcript do not apply"));
    }
    let params = args.protocol.params()?;
    let graph = load_graph(&args.graph)?;
    let report = verify(&graph, &params, args.protocol.transport.into())?;
    let body = match args.protocol.output {
        OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        OutputFormat::Text => format!(
            "max_abs_diff {:.3e}\nl1_diff {:.3e}\nbound {:.3e}\niterations {}\nreplay_exact {}\n{}\n",
            report.max_abs_diff,
            report.l1_diff,
            report.bound,
            report.iterations,
            report.replay_exact,
            if report.pass { "PASS" } else { "FAIL" }
        ),
    };
    write_output(args.out.as_deref(), &body)?;
    Ok(if report.pass { 0 } else { 1 })
}

fn bench_cmd(args: &BenchArgs) -> Result<u8> {
    let params = args.protocol.params()?;
    let graph = match &args.graph {
        Some(path) => load_graph(path)?,
        None => AdjacencyGraph::random(args.nodes, args.prob, params.seed)
            .map_err(|e| usage(e.to_string()))?,
    };
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let backend = args.protocol.transport.into();
    let cells = bench::run_bench(&graph, &params, &args.grid, backend, args.reps);
    for cell in &cells {
        if let Some(err) = &cell.error {
            eprintln!("cell {}x{} failed: {err}", cell.parties, cell.key_bits);
        }
    }
    let body = match args.protocol.output {
        OutputFormat::Json => serde_json::to_string_pretty(&cells)? + "\n",
        OutputFormat::Text => bench::to_csv(&cells),
    };
    write_output(args.out.as_deref(), &body)?;
    let table = bench::to_markdown(&cells);
    match &args.table {
        Some(path) => fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?,
        None => eprint!("{table}"),
    }
    Ok(if cells.iter().all(|c| c.error.is_some()) { 1 } else { 0 })
}

fn party(args: &PartyArgs) -> Result<u8> {
    let listener = PartyListener::bind(args.listen.as_str())
        .map_err(|e| ProtocolError::Transport { round: 0, source: e })?;
    let addr = listener.local_addr().map_err(|e| ProtocolError::Transport { round: 0, source: e })?;
    eprintln!("party listening on {addr}");
    let rounds = serve_tcp_party(&listener)?;
    eprintln!("party served {rounds} rounds");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenGraph(args) => gen_graph(args),
        Command::Run(args) => run(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Bench(args) => bench_cmd(args),
        Command::Party(args) => party(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
