//! Output files: `samples.csv`, `summary.json`, `config_resolved.json`, and
//! `network.json` for generated network data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use relaxhmc_core::network::NetworkData;
use serde::Serialize;

use crate::experiments::Outcome;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config_resolved.json";
pub const NETWORK_FILE: &str = "network.json";

/// Header of `samples.csv` for a `dim`-dimensional parameter.
pub fn samples_header(dim: usize) -> String {
    let mut cols = vec!["lambda".to_string(), "replicate".into(), "iteration".into()];
    cols.extend((1..=dim).map(|k| format!("theta_{k}")));
    cols.push("distance".into());
    cols.push("accepted".into());
    cols.join(",")
}

/// Floats with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_samples(outcome: &Outcome, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    let dim = outcome.blocks.first().map_or(0, |b| b.chain.dim);
    writeln!(w, "{}", samples_header(dim))?;
    let burnin = outcome.config.hmc.n_burnin.unwrap_or(0);
    for b in &outcome.blocks {
        let lam = num(b.lambda);
        for (k, row) in b.chain.rows().enumerate() {
            write!(w, "{lam},{},{}", b.replicate, burnin + k)?;
            for x in row {
                write!(w, ",{}", num(*x))?;
            }
            writeln!(w, ",{},{}", num(b.chain.violations[k]), u8::from(b.chain.accepted[k]))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes every output file into the configured directory.
pub fn write_outputs(outcome: &Outcome) -> Result<()> {
    let dir = &outcome.config.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    write_samples(outcome, &dir.join(SAMPLES_FILE))?;
    write_json(&outcome.summary, &dir.join(SUMMARY_FILE))?;
    write_json(&outcome.config, &dir.join(CONFIG_FILE))?;
    if let Some(net) = &outcome.network {
        write_network(net, &dir.join(NETWORK_FILE))?;
    }
    Ok(())
}

pub fn write_network(data: &NetworkData, path: &Path) -> Result<()> {
    write_json(data, path)
}

pub fn read_network(path: &Path) -> Result<NetworkData> {
    let src = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let data: NetworkData = serde_json::from_str(&src).with_context(|| format!("invalid network file {}", path.display()))?;
    data.validate().with_context(|| format!("invalid network file {}", path.display()))?;
    Ok(data)
}
