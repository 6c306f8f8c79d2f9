use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::json;
use tagcrawl_core::sim::{self, CensorSpec, Manifest, WorldSpec};
use tracing::info;

use crate::SimCommand;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

async fn until_interrupted() -> Result<()> {
    tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
    info!("interrupted, shutting down");
    Ok(())
}

pub async fn dispatch(cmd: SimCommand) -> Result<()> {
    match cmd {
        SimCommand::Generate { spec, seed, out, force } => {
            let spec = match spec {
                Some(p) => read_json(&p)?,
                None => WorldSpec::desk_scale(seed),
            };
            let m = sim::generate_world(&spec, &out, force)?;
            println!(
                "{}",
                json!({
                    "out": out,
                    "domains": m.domains.len(),
                    "blacklisted": m.blacklist.len(),
                    "documents": m.document_count,
                })
            );
        }
        SimCommand::Censor { spec, world, listen } => {
            let spec: CensorSpec = match (spec, world) {
                (Some(p), _) => read_json(&p)?,
                (None, Some(w)) => CensorSpec::new(Manifest::load(&w)?.blacklist),
                (None, None) => unreachable!("clap requires one of --spec, --world"),
            };
            let blacklisted = spec.blacklist.len();
            let handle = sim::run_injector(spec, listen).await?;
            println!("{}", json!({"listen": handle.local_addr(), "blacklisted": blacklisted}));
            until_interrupted().await?;
        }
        SimCommand::Serve { corpus, listen } => {
            let handle = sim::serve_corpus(&corpus, listen).await?;
            println!("{}", json!({"listen": handle.local_addr(), "pages": handle.page_count()}));
            until_interrupted().await?;
        }
        SimCommand::Seeds { world, count } => {
            let m = Manifest::load(&world)?;
            let urls = m.domains.iter().filter(|d| d.blacklisted).flat_map(|d| &d.urls);
            for u in urls.take(count) {
                println!("{u}");
            }
        }
    }
    Ok(())
}
