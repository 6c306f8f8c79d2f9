//! `tagcrawl` command line.
//!
//! Machine-readable output (JSON lines, CSV) goes to stdout, logs to stderr.
//! Exit status: 0 success, 1 fatal error or bad usage, 2 run stopped by a
//! budget.

mod commands;
mod config;
mod sim;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tagcrawl_core::metrics::ReportKind;
use tracing_subscriber::EnvFilter;

use config::BackendKind;

#[derive(Parser)]
#[command(name = "tagcrawl", version, about = "Recursive discovery of DNS-filtered web pages", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the probe, tag, search loop over a store until fixpoint or budget.
    Run(Box<RunArgs>),
    /// Print a CSV report computed from a store.
    Report(ReportArgs),
    /// Check domains against the sinks and print the evidence as JSON lines.
    Probe(ProbeArgs),
    /// Simulated world: generate, censor, serve.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed URLs, one per line.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    /// Sink list, one ip[:port] per line. Defaults to the built-in list.
    #[arg(long)]
    pub sinks: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Corpus directory for the simulated search backend.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Store directory (created if missing).
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Background document-frequency table (`N=<n>` then `token<TAB>df`).
    #[arg(long)]
    pub frequency_table: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub tags_per_page: Option<usize>,
    #[arg(long)]
    pub results_per_search: Option<usize>,
    /// How long a domain verdict stays valid, e.g. `7d`.
    #[arg(long)]
    pub verdict_ttl: Option<String>,
    /// Total search queries allowed over the life of the store.
    #[arg(long)]
    pub max_searches: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<u32>,
    #[arg(long)]
    pub max_urls: Option<usize>,
    /// Treat every subdomain of SUFFIX as one domain. Repeatable.
    #[arg(long = "collapse", value_name = "SUFFIX")]
    pub collapse: Vec<String>,
    /// Drop search results on domains already in the store.
    #[arg(long)]
    pub skip_known_domains: bool,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Per-sink wait for an injected reply, e.g. `5s` or `200ms`.
    #[arg(long)]
    pub probe_timeout: Option<String>,
    #[arg(long)]
    pub fetch_timeout: Option<String>,
    /// HTTP proxy for page fetches, e.g. `http://127.0.0.1:8080`.
    #[arg(long)]
    pub proxy: Option<String>,
    /// Minimum gap between fetches to one host.
    #[arg(long)]
    pub per_domain_delay: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    store: PathBuf,
    /// summary, top_domains, top_domains_excluding_list, top_tags or discovery_power.
    #[arg(long, default_value = "summary")]
    kind: ReportKind,
    /// Popularity list as `rank,domain` CSV.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// Only the first N entries of the exclusion list count.
    #[arg(long, default_value_t = 1000)]
    exclude_top: u64,
    #[arg(long)]
    limit: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(required = true)]
    domains: Vec<String>,
    #[arg(long)]
    sinks: Option<PathBuf>,
    #[arg(long, default_value = "5s")]
    timeout: String,
    #[arg(long, default_value_t = 1)]
    retries_on_clean: u32,
    /// Query sinks one after another instead of all at once.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Write a world (corpus, manifest, background model) to a directory.
    Generate {
        /// World spec JSON; without it the 60-domain desk world is used.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Seed for the desk world when no spec is given.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Run the DNS injector until interrupted.
    Censor {
        /// Censor spec JSON.
        #[arg(long, conflicts_with = "world", required_unless_present = "world")]
        spec: Option<PathBuf>,
        /// Take the blacklist from this world's manifest.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:5353")]
        listen: SocketAddr,
    },
    /// Serve a corpus over HTTP until interrupted; usable as a proxy.
    Serve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// Print blacklisted URLs from a world manifest, for use as seeds.
    Seeds {
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
}

fn init_logging() {
    let filter = EnvFilter::try_from_env("TAGCRAWL_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(filter)
        .with_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Run(a) => commands::run(&a).await,
            Command::Report(a) => commands::report(&a).map(|_| ExitCode::SUCCESS),
            Command::Probe(a) => commands::probe(&a).await,
            Command::Sim(c) => sim::dispatch(c).await.map(|_| ExitCode::SUCCESS),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
