//! `--config` file schema and the merge of file values, environment and
//! flags into one validated run configuration.
//!
//! Precedence is flag, then file, then built-in default. The search API key
//! is read only from `TAGCRAWL_SEARCH_KEY`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Deserialize;
use tagcrawl_core::dnsprobe::{ProbeConfig, SinkSet};
use tagcrawl_core::engine::{Budgets, CollapseRule, RunConfig};
use tagcrawl_core::fetch::{FetchConfig, FetchLimits, DEFAULT_USER_AGENT};
use tagcrawl_core::search::{LiveConfig, DEFAULT_KEY_HEADER};
use tagcrawl_core::sim::{BACKGROUND_FILE, STOPWORDS_FILE};

use crate::RunArgs;

pub const API_KEY_ENV: &str = "TAGCRAWL_SEARCH_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.bing.microsoft.com/v7.0/search";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Sim,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seeds: Option<PathBuf>,
    pub sinks: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub corpus: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub frequency_table: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub tags_per_page: Option<usize>,
    pub results_per_search: Option<usize>,
    pub verdict_ttl: Option<String>,
    pub max_searches: Option<u64>,
    pub max_iterations: Option<u32>,
    pub max_urls: Option<usize>,
    pub collapse: Option<Vec<String>>,
    pub skip_known_domains: Option<bool>,
    pub concurrency: Option<usize>,
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub fetch: FetchSection,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub timeout: Option<String>,
    pub parallel: Option<bool>,
    pub retries_on_clean: Option<u32>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    pub timeout: Option<String>,
    pub max_bytes: Option<usize>,
    pub max_redirects: Option<usize>,
    pub user_agent: Option<String>,
    pub proxy: Option<String>,
    pub per_domain_delay: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub endpoint: Option<String>,
    pub key_header: Option<String>,
    pub page_size: Option<usize>,
    pub market: Option<String>,
    pub qps: Option<f64>,
    pub retry_budget: Option<u32>,
    pub backoff: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn parse_duration(s: &str) -> Result<Duration> {
    humantime::parse_duration(s.trim()).with_context(|| format!("bad duration {s:?}"))
}

/// Everything `run` needs, checked before any socket is opened.
#[derive(Debug)]
pub struct Settings {
    pub seeds: PathBuf,
    pub sinks: SinkSet,
    pub corpus: Option<PathBuf>,
    pub store: PathBuf,
    pub frequency_table: PathBuf,
    pub stopwords: PathBuf,
    pub run: RunConfig,
    pub probe: ProbeConfig,
    pub fetch: FetchConfig,
    pub live: Option<LiveConfig>,
}

fn duration_or(flag: Option<&str>, file: Option<&str>, default: Duration) -> Result<Duration> {
    flag.or(file).map_or(Ok(default), parse_duration)
}

impl Settings {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::merge(args, file, std::env::var(API_KEY_ENV).ok())
    }

    pub fn merge(args: &RunArgs, file: FileConfig, api_key: Option<String>) -> Result<Self> {
        let seeds = args.seeds.clone().or(file.seeds).context("--seeds is required")?;
        let store = args.store.clone().or(file.store).context("--store is required")?;
        let backend = args.backend.or(file.backend).context("--backend is required")?;
        let corpus = args.corpus.clone().or(file.corpus);

        let sinks = match args.sinks.clone().or(file.sinks) {
            Some(p) => SinkSet::load(&p).with_context(|| format!("loading sinks from {}", p.display()))?,
            None => SinkSet::china_default(),
        };

        // The simulated world keeps its background model next to the corpus.
        let world_file = |name: &str| corpus.as_ref().and_then(|c| c.parent()).map(|w| w.join(name));
        let sim = backend == BackendKind::Sim;
        let frequency_table = args
            .frequency_table
            .clone()
            .or(file.frequency_table)
            .or_else(|| sim.then(|| world_file(BACKGROUND_FILE)).flatten())
            .context("--frequency-table is required")?;
        let stopwords = args
            .stopwords
            .clone()
            .or(file.stopwords)
            .or_else(|| sim.then(|| world_file(STOPWORDS_FILE)).flatten())
            .context("--stopwords is required")?;

        let defaults = RunConfig::default();
        let collapse: Vec<String> = if args.collapse.is_empty() {
            file.collapse.unwrap_or_default()
        } else {
            args.collapse.clone()
        };
        let run = RunConfig {
            tags_per_page: args.tags_per_page.or(file.tags_per_page).unwrap_or(defaults.tags_per_page),
            results_per_search: args
                .results_per_search
                .or(file.results_per_search)
                .unwrap_or(defaults.results_per_search),
            verdict_ttl: duration_or(
                args.verdict_ttl.as_deref(),
                file.verdict_ttl.as_deref(),
                defaults.verdict_ttl,
            )?,
            budgets: Budgets {
                max_search_queries: args.max_searches.or(file.max_searches),
                max_iterations: args.max_iterations.or(file.max_iterations),
                max_urls: args.max_urls.or(file.max_urls),
            },
            collapse_rules: collapse.iter().map(|s| CollapseRule::new(s)).collect(),
            skip_known_domains: args.skip_known_domains || file.skip_known_domains.unwrap_or(false),
            batch_size: file.batch_size.unwrap_or(defaults.batch_size),
            concurrency: args.concurrency.or(file.concurrency).unwrap_or(defaults.concurrency),
        };
        run.validate()?;

        let pd = ProbeConfig::default();
        let probe = ProbeConfig {
            timeout: duration_or(args.probe_timeout.as_deref(), file.probe.timeout.as_deref(), pd.timeout)?,
            parallel: file.probe.parallel.unwrap_or(pd.parallel),
            retries_on_clean: file.probe.retries_on_clean.unwrap_or(pd.retries_on_clean),
            max_in_flight: file.probe.max_in_flight.unwrap_or(pd.max_in_flight),
        };
        if probe.timeout.is_zero() || probe.max_in_flight == 0 {
            bail!("probe timeout and max_in_flight must be positive");
        }

        let fl = FetchLimits::default();
        let fetch = FetchConfig {
            limits: FetchLimits {
                timeout: duration_or(args.fetch_timeout.as_deref(), file.fetch.timeout.as_deref(), fl.timeout)?,
                max_bytes: file.fetch.max_bytes.unwrap_or(fl.max_bytes),
                max_redirects: file.fetch.max_redirects.unwrap_or(fl.max_redirects),
            },
            user_agent: file.fetch.user_agent.unwrap_or_else(|| DEFAULT_USER_AGENT.to_string()),
            proxy: args.proxy.clone().or(file.fetch.proxy),
            per_domain_delay: duration_or(
                args.per_domain_delay.as_deref(),
                file.fetch.per_domain_delay.as_deref(),
                FetchConfig::default().per_domain_delay,
            )?,
        };
        if fetch.limits.max_bytes == 0 {
            bail!("fetch max_bytes must be positive");
        }

        let live = match backend {
            BackendKind::Sim => {
                if corpus.is_none() {
                    bail!("--corpus is required with --backend sim");
                }
                None
            }
            BackendKind::Live => {
                let key = api_key
                    .filter(|k| !k.trim().is_empty())
                    .with_context(|| format!("{API_KEY_ENV} must be set for the live backend"))?;
                let s = file.search;
                let d = LiveConfig::new(DEFAULT_ENDPOINT, key.clone());
                let cfg = LiveConfig {
                    endpoint: s.endpoint.unwrap_or(d.endpoint),
                    api_key: key,
                    key_header: s.key_header.unwrap_or_else(|| DEFAULT_KEY_HEADER.to_string()),
                    page_size: s.page_size.unwrap_or(d.page_size),
                    market: s.market,
                    qps: s.qps.unwrap_or(d.qps),
                    retry_budget: s.retry_budget.unwrap_or(d.retry_budget),
                    backoff_base: s.backoff.as_deref().map_or(Ok(d.backoff_base), parse_duration)?,
                    request_timeout: d.request_timeout,
                };
                if cfg.page_size == 0 || cfg.qps.is_nan() || cfg.qps <= 0.0 {
                    bail!("search page_size and qps must be positive");
                }
                Some(cfg)
            }
        };

        Ok(Self {
            seeds,
            sinks,
            corpus,
            store,
            frequency_table,
            stopwords,
            run,
            probe,
            fetch,
            live,
        })
    }
}
