//! Loss-term ablation on one trained autoencoder: the same endpoints and
//! seed, with the curve trained under each combination of terms.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use unigeo_core::losses::LossWeights;

use crate::config::RunConfig;
use crate::pipeline::{curve_config_with, evaluate, fit_curve, Prepared};

/// Row labels in table order.
pub const COMBOS: [&str; 7] = [
    "linear",
    "conspeed",
    "min",
    "conspeed+min",
    "conspeed+geo",
    "conspeed+geo+min",
    "real",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub combo: String,
    pub length: f64,
    /// Absent for the analytic row.
    pub uniformity_cv: Option<f64>,
    pub tangential_residual: Option<f64>,
}

/// Term weights for a combination label, taking each present term's weight
/// from the config. `None` for rows that are not trained.
pub fn combo_weights(combo: &str, cfg: &RunConfig) -> Result<Option<LossWeights>> {
    let w = cfg.curve.weights;
    let pick = |c: bool, g: bool, m: bool| {
        LossWeights::new(
            if c { w.conspeed } else { 0.0 },
            if g { w.geo } else { 0.0 },
            if m { w.min } else { 0.0 },
        )
        .with_context(|| format!("ablation row {combo}"))
    };
    Ok(match combo {
        "linear" | "real" => None,
        "conspeed" => Some(pick(true, false, false)?),
        "min" => Some(pick(false, false, true)?),
        "conspeed+min" => Some(pick(true, false, true)?),
        "conspeed+geo" => Some(pick(true, true, false)?),
        "conspeed+geo+min" => Some(pick(true, true, true)?),
        other => anyhow::bail!("unknown ablation row {other:?}"),
    })
}

pub fn ablate(prep: &Prepared, cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let oracle = prep
        .oracle
        .context("the ablation needs an analytic oracle; set eval.oracle")?;
    let model = &prep.ae.model;
    let mut rows = Vec::with_capacity(COMBOS.len());
    for combo in COMBOS {
        if combo == "real" {
            rows.push(AblationRow {
                combo: combo.into(),
                length: oracle,
                uniformity_cv: None,
                tangential_residual: None,
            });
            continue;
        }
        let curve = match combo_weights(combo, cfg)? {
            None => prep.init.clone(),
            Some(w) => fit_curve(model, &prep.init, &curve_config_with(cfg, w)?)?.curve,
        };
        let (rep, _) = evaluate(model, &curve, None, Some(oracle), cfg)?;
        rows.push(AblationRow {
            combo: combo.into(),
            length: rep.polyline_length,
            uniformity_cv: Some(rep.uniformity_cv),
            tangential_residual: Some(rep.tangential_residual),
        });
    }
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["combo", "length", "uniformity_cv", "tangential_residual"])?;
    let opt = |v: Option<f64>| v.map(crate::csvio::fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.combo.clone(),
            crate::csvio::fmt_f64(r.length),
            opt(r.uniformity_cv),
            opt(r.tangential_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}
