//! Resolve a run configuration from a `key = value` file plus overrides and
//! print the snapshot every CLI run writes next to its outputs.
//!
//!     cargo run --example config_file -- [config-file] [key=value ...]

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use kgx::config::RunConfig;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let file = args.next();
    let mut overrides = BTreeMap::new();
    for kv in args {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("expected key=value, got `{kv}`");
        };
        overrides.insert(k.to_owned(), v.to_owned());
    }
    overrides
        .entry("dataset_dir".into())
        .or_insert_with(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let config = RunConfig::resolve(file.as_deref().map(std::path::Path::new), &overrides)?;
    print!("{}", config.to_text());
    Ok(())
}
