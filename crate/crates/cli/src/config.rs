//! The JSON run configuration shared by every subcommand.
//!
//! All sections and keys are optional and fall back to the defaults below;
//! unknown keys are rejected. A single top-level `seed` feeds every random
//! stream, and `UNIGEO_SEED` overrides it.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use unigeo_core::autoencoder::{AeLossWeights, AeTrainConfig, NormMode};
use unigeo_core::datasets::SwissRollParams;
use unigeo_core::losses::{CurveTrainConfig, LossWeights, SampleSpec};
use unigeo_core::ltsa::LtsaConfig;
use unigeo_core::nn::Activation;
use unigeo_core::oracle::ReportSpec;

use crate::UsageError;

pub const SEED_ENV: &str = "UNIGEO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    #[default]
    Semisphere,
    Swissroll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifold: ManifoldKind,
    pub n: usize,
    /// Semi-sphere radius.
    pub radius: f64,
    pub swissroll: SwissRollParams,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            manifold: ManifoldKind::Semisphere,
            n: 2000,
            radius: 1.0,
            swissroll: SwissRollParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Final learning rate of a geometric decay; constant when absent.
    pub lr_final: Option<f64>,
    pub weights: AeLossWeights,
    pub norm: NormMode,
}

impl Default for AeSection {
    fn default() -> Self {
        let c = AeTrainConfig::default();
        Self {
            hidden: c.hidden,
            activation: c.activation,
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr: c.lr,
            lr_final: c.lr_final,
            weights: c.weights,
            norm: c.norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub conspeed: f64,
    pub geo: f64,
    pub min: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            conspeed: w.conspeed,
            geo: w.geo,
            min: w.min,
        }
    }
}

/// How the two curve endpoints are picked from the cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Endpoints {
    /// Manifold-specific targets, snapped to the nearest cloud points.
    #[default]
    Auto,
    /// Row indices into the cloud.
    Indices([usize; 2]),
    /// Ambient points, used as given.
    Points([Vec<f64>; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub n_samples: usize,
    pub dt: f64,
    pub weights: WeightsSection,
    pub epochs: usize,
    pub lr: f64,
    pub resample_random: bool,
    pub endpoints: Endpoints,
}

impl Default for CurveSection {
    fn default() -> Self {
        let c = CurveTrainConfig::default();
        Self {
            n_samples: c.samples.n,
            dt: c.samples.dt,
            weights: WeightsSection::default(),
            epochs: c.epochs,
            lr: c.lr,
            resample_random: c.samples.resample_random,
            endpoints: Endpoints::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Great circle for the semi-sphere, intrinsic distance for the roll.
    #[default]
    Auto,
    Greatcircle,
    Swissroll,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_samples: usize,
    pub dt: f64,
    pub oracle: OracleKind,
}

impl Default for EvalSection {
    fn default() -> Self {
        let r = ReportSpec::default();
        Self {
            n_samples: r.n_samples,
            dt: r.dt,
            oracle: OracleKind::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub ltsa: LtsaConfig,
    pub ae: AeSection,
    pub curve: CurveSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            data: DataSection::default(),
            ltsa: LtsaConfig::default(),
            ae: AeSection::default(),
            curve: CurveSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")).into())
    }

    /// Reads `path`, or the defaults when `None`; then applies the seed override.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                Self::from_json(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => Self::default(),
        };
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |e: unigeo_core::Error| anyhow::Error::from(UsageError(e.to_string()));
        if self.data.n == 0 {
            return Err(UsageError("n must be ≥ 1".into()).into());
        }
        self.data.swissroll.validate().map_err(usage)?;
        self.ae_config().validate().map_err(usage)?;
        let c = self.curve_config().map_err(usage)?;
        c.samples.validate().map_err(usage)?;
        if self.eval.n_samples == 0 {
            return Err(UsageError("eval.n_samples must be ≥ 1".into()).into());
        }
        Ok(())
    }

    pub fn ae_config(&self) -> AeTrainConfig {
        AeTrainConfig {
            latent_dim: self.ltsa.d,
            hidden: self.ae.hidden.clone(),
            activation: self.ae.activation,
            epochs: self.ae.epochs,
            batch_size: self.ae.batch_size,
            lr: self.ae.lr,
            lr_final: self.ae.lr_final,
            weights: self.ae.weights,
            norm: self.ae.norm,
            seed: self.seed,
        }
    }

    pub fn loss_weights(&self) -> unigeo_core::Result<LossWeights> {
        let w = self.curve.weights;
        LossWeights::new(w.conspeed, w.geo, w.min)
    }

    pub fn curve_config(&self) -> unigeo_core::Result<CurveTrainConfig> {
        Ok(CurveTrainConfig {
            samples: SampleSpec {
                n: self.curve.n_samples,
                dt: self.curve.dt,
                resample_random: self.curve.resample_random,
            },
            weights: self.loss_weights()?,
            epochs: self.curve.epochs,
            lr: self.curve.lr,
            seed: self.seed,
        })
    }

    pub fn report_spec(&self) -> ReportSpec {
        ReportSpec {
            n_samples: self.eval.n_samples,
            dt: self.eval.dt,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
