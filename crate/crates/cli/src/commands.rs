use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use tagcrawl_core::dnsprobe::{ProbeConfig, Prober, SinkSet};
use tagcrawl_core::engine::{self, Components, StopReason};
use tagcrawl_core::fetch::Fetcher;
use tagcrawl_core::metrics::{self, ExclusionList};
use tagcrawl_core::search::{LiveBackend, SearchBackend, SimulatedBackend, SimulatedIndex};
use tagcrawl_core::store::Store;
use tagcrawl_core::textproc::CorpusModel;
use tracing::info;

use crate::config::{parse_duration, Settings};
use crate::{ProbeArgs, ReportArgs, RunArgs};

pub async fn run(args: &RunArgs) -> Result<ExitCode> {
    let s = Settings::resolve(args)?;
    let seeds = engine::load_seeds(&s.seeds, &s.run.collapse_rules)?;
    let model = CorpusModel::load(&s.frequency_table, &s.stopwords)?;
    let backend: Box<dyn SearchBackend> = match (&s.live, &s.corpus) {
        (Some(live), _) => Box::new(LiveBackend::new(live.clone()).context("building search client")?),
        (None, Some(corpus)) => {
            let index = SimulatedIndex::build(corpus)?;
            info!(documents = index.document_count(), "simulated index ready");
            Box::new(SimulatedBackend::new(index))
        }
        (None, None) => unreachable!("settings require a corpus for the simulated backend"),
    };
    let prober = Prober::new(s.sinks.clone(), s.probe.clone());
    let fetcher = Fetcher::new(s.fetch.clone())?;

    let mut store = Store::open(&s.store).with_context(|| format!("opening store {}", s.store.display()))?;
    let added = engine::add_seeds(&mut store, seeds)?;
    info!(added, store = %s.store.display(), "seeds loaded");
    let parts = Components {
        checker: &prober,
        pages: &fetcher,
        search: backend.as_ref(),
        model: &model,
    };
    let report = engine::run_loop(&mut store, &parts, &s.run).await?;
    store.checkpoint()?;

    println!(
        "{}",
        json!({
            "stop": report.stop,
            "iterations": report.iterations,
            "metrics": report.metrics,
        })
    );
    Ok(match report.stop {
        StopReason::Fixpoint => ExitCode::SUCCESS,
        StopReason::Budget(_) => ExitCode::from(2),
        StopReason::Stalled => {
            eprintln!("error: no progress possible; check sink reachability");
            ExitCode::from(1)
        }
        StopReason::BackendFailure(msg) => {
            eprintln!("error: {msg}; state saved, rerun to resume");
            ExitCode::from(1)
        }
    })
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let store = Store::open_read_only(&args.store).with_context(|| format!("opening store {}", args.store.display()))?;
    let exclude = args
        .exclude
        .as_deref()
        .map(|p| ExclusionList::load(p, args.exclude_top))
        .transpose()?;
    let csv = metrics::report(store.state(), args.kind, exclude.as_ref(), args.limit)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

pub async fn probe(args: &ProbeArgs) -> Result<ExitCode> {
    let sinks = match &args.sinks {
        Some(p) => SinkSet::load(p).with_context(|| format!("loading sinks from {}", p.display()))?,
        None => SinkSet::china_default(),
    };
    let prober = Prober::new(
        sinks,
        ProbeConfig {
            timeout: parse_duration(&args.timeout)?,
            parallel: !args.sequential,
            retries_on_clean: args.retries_on_clean,
            ..ProbeConfig::default()
        },
    );
    let mut out = std::io::stdout().lock();
    let mut failed = false;
    for domain in &args.domains {
        match prober.probe_domain(domain).await {
            Ok(outcome) => {
                for e in &outcome.evidence {
                    let mut line = serde_json::to_value(e)?;
                    if let Value::Object(m) = &mut line {
                        m.insert("type".into(), "evidence".into());
                        m.insert("domain".into(), domain.as_str().into());
                    }
                    writeln!(out, "{line}")?;
                }
                writeln!(out, "{}", json!({"type": "verdict", "domain": domain, "verdict": outcome.verdict}))?;
            }
            Err(e) => {
                eprintln!("error: {domain}: {e}");
                failed = true;
            }
        }
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
