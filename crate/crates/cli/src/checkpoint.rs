//! JSON checkpoints for trained autoencoders.
//!
//! Weights are stored row-major. Numbers are written in shortest round-trip
//! form, so loading a saved model gives back the same bits.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unigeo_core::autoencoder::{AeModel, Normalizer};
use unigeo_core::nn::{Activation, Layer, MlpModel};
use unigeo_core::Matrix;

pub const FORMAT: &str = "unigeo-autoencoder";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpRecord {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<LayerRecord>,
}

impl MlpRecord {
    pub fn from_model(m: &MlpModel) -> Self {
        Self {
            layer_sizes: m.layer_sizes(),
            activation: m.activation(),
            layers: m
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    weight: l.weight.data().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<MlpModel> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || sizes.len() != self.layers.len() + 1 {
            bail!(
                "{} layer sizes do not describe {} layers",
                sizes.len(),
                self.layers.len()
            );
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            if rec.weight.len() != fan_in * fan_out || rec.bias.len() != fan_out {
                bail!("layer {i}: expected a {fan_out}x{fan_in} weight and {fan_out} biases");
            }
            layers.push(Layer {
                weight: Matrix::new(fan_out, fan_in, rec.weight.clone())?,
                bias: rec.bias.clone(),
            });
        }
        Ok(MlpModel::from_layers(self.activation, layers)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeCheckpoint {
    pub format: String,
    pub version: u32,
    pub input_mean: Vec<f64>,
    pub input_scale: f64,
    pub encoder: MlpRecord,
    pub decoder: MlpRecord,
}

impl AeCheckpoint {
    pub fn from_model(m: &AeModel) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            input_mean: m.normalizer.mean.clone(),
            input_scale: m.normalizer.scale,
            encoder: MlpRecord::from_model(&m.encoder),
            decoder: MlpRecord::from_model(&m.decoder),
        }
    }

    pub fn to_model(&self) -> Result<AeModel> {
        if self.format != FORMAT {
            bail!("not an autoencoder checkpoint (format {:?})", self.format);
        }
        if self.version != VERSION {
            bail!("unsupported checkpoint version {}", self.version);
        }
        let normalizer = Normalizer {
            mean: self.input_mean.clone(),
            scale: self.input_scale,
        };
        Ok(AeModel::new(
            self.encoder.to_model().context("encoder")?,
            self.decoder.to_model().context("decoder")?,
            normalizer,
        )?)
    }
}

pub fn save_ae(path: &Path, model: &AeModel) -> Result<()> {
    if !model.encoder.is_finite() || !model.decoder.is_finite() {
        bail!("refusing to save a model with non-finite parameters");
    }
    let text = serde_json::to_string_pretty(&AeCheckpoint::from_model(model))?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_ae(path: &Path) -> Result<AeModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let ck: AeCheckpoint =
        serde_json::from_str(&text).with_context(|| format!("{} is not a valid checkpoint", path.display()))?;
    ck.to_model().with_context(|| format!("bad checkpoint {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use unigeo_core::rng::SplitMix64;

    #[test]
    fn record_round_trip_is_exact() {
        let mut rng = SplitMix64::new(9);
        let m = MlpModel::new(&[3, 5, 2], Activation::Softplus, &mut rng).unwrap();
        let rec = MlpRecord::from_model(&m);
        let text = serde_json::to_string(&rec).unwrap();
        let back: MlpRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_model().unwrap(), m);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = SplitMix64::new(9);
        let m = MlpModel::new(&[3, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let mut rec = MlpRecord::from_model(&m);
        rec.layers[1].bias.pop();
        assert!(rec.to_model().is_err());
        rec.layer_sizes = vec![3];
        assert!(rec.to_model().is_err());
    }
}
