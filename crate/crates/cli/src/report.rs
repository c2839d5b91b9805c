//! JSON documents and history tables written by the subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unigeo_core::autoencoder::AeLossBreakdown;
use unigeo_core::curve::CubicCurve;
use unigeo_core::losses::LossBreakdown;
use unigeo_core::oracle::GeodesicReport;

use crate::config::RunConfig;
use crate::csvio::write_table;
use crate::pipeline::ResolvedEndpoints;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Maps each input path to the SHA-256 of its contents.
pub fn hash_inputs(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn save_curve(path: &Path, curve: &CubicCurve) -> Result<()> {
    write_json(path, curve)
}

pub fn load_curve(path: &Path) -> Result<CubicCurve> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let c: CubicCurve = serde_json::from_str(&text).with_context(|| format!("{} is not a curve file", path.display()))?;
    c.validate().with_context(|| format!("bad curve in {}", path.display()))?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub report: GeodesicReport,
    pub endpoints: ResolvedEndpoints,
    /// Input path → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDocument {
    pub stage: String,
    pub summary: BTreeMap<String, f64>,
    pub inputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

pub fn write_ae_history(path: &Path, history: &[AeLossBreakdown]) -> Result<()> {
    let header = ["epoch", "total", "rec", "lat", "dec"].map(String::from);
    write_table(
        path,
        &header,
        history
            .iter()
            .enumerate()
            .map(|(e, h)| vec![e as f64, h.total, h.rec, h.lat, h.dec]),
    )
}

pub fn write_curve_history(path: &Path, history: &[LossBreakdown]) -> Result<()> {
    let header = ["epoch", "total", "conspeed", "geo", "min"].map(String::from);
    write_table(
        path,
        &header,
        history
            .iter()
            .enumerate()
            .map(|(e, h)| vec![e as f64, h.total, h.conspeed, h.geo, h.min]),
    )
}
