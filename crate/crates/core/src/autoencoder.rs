//! Encoder/decoder pair trained to reproduce the data while its latent codes
//! follow a precomputed chart of the manifold.
//!
//! The loss has three terms, each a norm over the batch:
//! reconstruction `D(E(x)) − x`, latent agreement `E(x) − ML(x)` with the
//! chart coordinates `ML(x)`, and chart decoding `D(ML(x)) − x`.
//!
//! Both networks see data through a fixed [`Normalizer`] (centering and one
//! isotropic scale), so the decoded geometry is a similarity transform of what
//! the networks compute. The two reconstruction residuals are measured in
//! normalized units, which puts them on the same footing as the unit-variance
//! chart regardless of the data's extent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::decoder::{check_latent, check_upstream, Decoder};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, GradientBundle, MlpModel};
use crate::rng::SplitMix64;

/// `x ↦ (x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Column means and the root-mean-square centered entry.
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(invalid("cannot normalize an empty cloud"));
        }
        let mean = x.column_means();
        let mut ss = 0.0;
        for r in x.iter_rows() {
            ss += r.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
        }
        let scale = libm::sqrt(ss / (x.rows() * x.cols()) as f64);
        Ok(Self {
            mean,
            scale: if scale > 0.0 { scale } else { 1.0 },
        })
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale)
    }

    pub fn invert(&self, y: &Matrix) -> Matrix {
        Matrix::from_fn(y.rows(), y.cols(), |i, j| y[(i, j)] * self.scale + self.mean[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub encoder: MlpModel,
    pub decoder: MlpModel,
    pub normalizer: Normalizer,
}

impl AeModel {
    pub fn new(encoder: MlpModel, decoder: MlpModel, normalizer: Normalizer) -> Result<Self> {
        let amb = normalizer.mean.len();
        if encoder.output_dim() != decoder.input_dim() || encoder.input_dim() != amb || decoder.output_dim() != amb {
            return Err(invalid(format!(
                "autoencoder shapes disagree: encoder {:?}, decoder {:?}, data dimension {amb}",
                encoder.layer_sizes(),
                decoder.layer_sizes()
            )));
        }
        if !(normalizer.scale > 0.0 && normalizer.scale.is_finite()) {
            return Err(invalid(format!("normalizer scale must be positive, got {}", normalizer.scale)));
        }
        Ok(Self {
            encoder,
            decoder,
            normalizer,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.normalizer.mean.len()
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                op: "encode",
                left: x.shape(),
                right: (self.ambient_dim(), self.latent_dim()),
            });
        }
        self.encoder.forward(&self.normalizer.apply(x))
    }

    pub fn encode_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode(&Matrix::new(1, x.len(), x.to_vec())?)?.into_data())
    }

    /// Root-mean-square reconstruction error `‖D(E(x)) − x‖` over rows.
    pub fn reconstruction_rmse(&self, x: &Matrix) -> Result<f64> {
        let y = self.decode(&self.encode(x)?)?;
        let ss: f64 = y.data().iter().zip(x.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(libm::sqrt(ss / x.rows() as f64))
    }
}

impl Decoder for AeModel {
    fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    fn ambient_dim(&self) -> usize {
        self.normalizer.mean.len()
    }

    fn decode(&self, z: &Matrix) -> Result<Matrix> {
        check_latent("decode", z, Decoder::latent_dim(self))?;
        Ok(self.normalizer.invert(&self.decoder.forward(z)?))
    }

    fn pullback(&self, z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        check_latent("pullback", z, Decoder::latent_dim(self))?;
        check_upstream(z, upstream, Decoder::ambient_dim(self))?;
        self.decoder.input_pullback(z, &upstream.scaled(self.normalizer.scale))
    }

    fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        Ok(self.decoder.input_jacobian(z)?.scaled(self.normalizer.scale))
    }
}

/// How each loss term turns a residual matrix `R` into a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NormMode {
    /// `‖R‖_F² / rows`, smooth at zero.
    #[default]
    Squared,
    /// `‖R‖_F`.
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AeLossWeights {
    pub rec: f64,
    pub lat: f64,
    pub dec: f64,
}

impl Default for AeLossWeights {
    fn default() -> Self {
        Self {
            rec: 1.0,
            lat: 1.0,
            dec: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AeTrainConfig {
    pub latent_dim: usize,
    /// Hidden layer widths, shared (mirrored) by encoder and decoder.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate at the last epoch; the rate decays geometrically from
    /// `lr`. Equal to `lr` by default (no decay).
    pub lr_final: Option<f64>,
    pub weights: AeLossWeights,
    pub norm: NormMode,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            epochs: 300,
            batch_size: 64,
            lr: 1e-3,
            lr_final: None,
            weights: AeLossWeights::default(),
            norm: NormMode::Squared,
            seed: 0,
        }
    }
}

impl AeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.weights.rec, self.weights.lat, self.weights.dec];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|&v| v == 0.0) {
            return Err(invalid(format!("autoencoder loss weights must be ≥ 0 and not all zero, got {w:?}")));
        }
        if self.latent_dim == 0 || self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(invalid("latent_dim, batch_size and hidden widths must be positive"));
        }
        let lr_ok = |v: f64| v > 0.0 && v.is_finite();
        if !lr_ok(self.lr) || self.lr_final.is_some_and(|v| !lr_ok(v)) {
            return Err(invalid("learning rates must be positive"));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_final {
            Some(end) if self.epochs > 1 => {
                let f = epoch as f64 / (self.epochs - 1) as f64;
                self.lr * libm::pow(end / self.lr, f)
            }
            _ => self.lr,
        }
    }
}

/// Term values under both norm conventions, plus the weighted objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AeLossBreakdown {
    pub total: f64,
    /// Frobenius norms.
    pub rec: f64,
    pub lat: f64,
    pub dec: f64,
    /// Squared Frobenius norms per row.
    pub rec_sq: f64,
    pub lat_sq: f64,
    pub dec_sq: f64,
}

impl AeLossBreakdown {
    fn add_scaled(&mut self, o: &AeLossBreakdown, s: f64) {
        self.total += s * o.total;
        self.rec += s * o.rec;
        self.lat += s * o.lat;
        self.dec += s * o.dec;
        self.rec_sq += s * o.rec_sq;
        self.lat_sq += s * o.lat_sq;
        self.dec_sq += s * o.dec_sq;
    }
}

fn term(r: &Matrix, mode: NormMode) -> (f64, f64, f64) {
    let fro = r.frobenius_norm();
    let sq = fro * fro / r.rows() as f64;
    let used = match mode {
        NormMode::Squared => sq,
        NormMode::Frobenius => fro,
    };
    (used, fro, sq)
}

/// `∂term/∂R` scaled by `w`; zero at `R = 0` in Frobenius mode.
fn term_grad(r: &Matrix, mode: NormMode, w: f64) -> Matrix {
    let s = match mode {
        NormMode::Squared => 2.0 / r.rows() as f64,
        NormMode::Frobenius => {
            let n = r.frobenius_norm();
            if n == 0.0 {
                0.0
            } else {
                1.0 / n
            }
        }
    };
    r.scaled(w * s)
}

struct Pass {
    xn: Matrix,
    z: Matrix,
    r_rec: Matrix,
    r_lat: Matrix,
    r_dec: Matrix,
    loss: AeLossBreakdown,
}

fn forward_pass(model: &AeModel, x: &Matrix, ml: &Matrix, w: &AeLossWeights, mode: NormMode) -> Result<Pass> {
    if x.rows() != ml.rows() {
        return Err(Error::DimensionMismatch {
            op: "autoencoder loss",
            left: x.shape(),
            right: ml.shape(),
        });
    }
    if ml.cols() != model.latent_dim() {
        return Err(Error::DimensionMismatch {
            op: "autoencoder chart",
            left: ml.shape(),
            right: (ml.rows(), model.latent_dim()),
        });
    }
    let xn = model.normalizer.apply(x);
    let z = model.encoder.forward(&xn)?;
    let r_rec = model.decoder.forward(&z)?.sub(&xn)?;
    let r_lat = z.sub(ml)?;
    let r_dec = model.decoder.forward(ml)?.sub(&xn)?;
    let (a, rec, rec_sq) = term(&r_rec, mode);
    let (b, lat, lat_sq) = term(&r_lat, mode);
    let (c, dec, dec_sq) = term(&r_dec, mode);
    let loss = AeLossBreakdown {
        total: w.rec * a + w.lat * b + w.dec * c,
        rec,
        lat,
        dec,
        rec_sq,
        lat_sq,
        dec_sq,
    };
    Ok(Pass {
        xn,
        z,
        r_rec,
        r_lat,
        r_dec,
        loss,
    })
}

/// Weighted loss on a batch `x` with matching chart rows `ml`.
pub fn ae_loss(model: &AeModel, x: &Matrix, ml: &Matrix, cfg: &AeTrainConfig) -> Result<AeLossBreakdown> {
    Ok(forward_pass(model, x, ml, &cfg.weights, cfg.norm)?.loss)
}

/// Loss and exact parameter gradients for encoder and decoder.
pub fn ae_loss_grad(
    model: &AeModel,
    x: &Matrix,
    ml: &Matrix,
    cfg: &AeTrainConfig,
) -> Result<(AeLossBreakdown, GradientBundle, GradientBundle)> {
    let w = &cfg.weights;
    let pass = forward_pass(model, x, ml, w, cfg.norm)?;
    let mut g_enc = GradientBundle::zeros_like(&model.encoder);
    let mut g_dec = GradientBundle::zeros_like(&model.decoder);
    let mut dz = Matrix::zeros(pass.z.rows(), pass.z.cols());
    if w.rec > 0.0 {
        let up = term_grad(&pass.r_rec, cfg.norm, w.rec);
        let g = model.decoder.backward(&pass.z, &up)?;
        g_dec.accumulate(&g);
        dz = dz.add(g.input.as_ref().expect("input gradient"))?;
    }
    if w.lat > 0.0 {
        dz = dz.add(&term_grad(&pass.r_lat, cfg.norm, w.lat))?;
    }
    if w.rec > 0.0 || w.lat > 0.0 {
        g_enc.accumulate(&model.encoder.backward(&pass.xn, &dz)?);
    }
    if w.dec > 0.0 {
        let up = term_grad(&pass.r_dec, cfg.norm, w.dec);
        g_dec.accumulate(&model.decoder.backward(ml, &up)?);
    }
    Ok((pass.loss, g_enc, g_dec))
}

/// Fresh networks for `cfg`: the encoder maps `ambient → hidden… → latent`,
/// the decoder mirrors it.
pub fn init_ae(x: &Matrix, cfg: &AeTrainConfig) -> Result<AeModel> {
    cfg.validate()?;
    let amb = x.cols();
    let mut enc_sizes = vec![amb];
    enc_sizes.extend_from_slice(&cfg.hidden);
    enc_sizes.push(cfg.latent_dim);
    let dec_sizes: Vec<usize> = enc_sizes.iter().rev().copied().collect();
    let encoder = MlpModel::new(&enc_sizes, cfg.activation, &mut SplitMix64::derived(cfg.seed, 1))?;
    let decoder = MlpModel::new(&dec_sizes, cfg.activation, &mut SplitMix64::derived(cfg.seed, 2))?;
    AeModel::new(encoder, decoder, Normalizer::fit(x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeTrainOutcome {
    pub model: AeModel,
    /// Mean batch loss of every epoch.
    pub history: Vec<AeLossBreakdown>,
    /// Reconstruction RMSE on the whole cloud after training.
    pub rmse: f64,
}

/// Mini-batch Adam over `epochs` passes; batches are drawn without
/// replacement from a seeded permutation each epoch.
pub fn train_ae(x: &Matrix, chart: &Matrix, cfg: &AeTrainConfig) -> Result<AeTrainOutcome> {
    if x.rows() != chart.rows() {
        return Err(Error::DimensionMismatch {
            op: "train autoencoder",
            left: x.shape(),
            right: chart.shape(),
        });
    }
    if chart.cols() != cfg.latent_dim {
        return Err(invalid(format!(
            "chart has {} columns but latent_dim is {}",
            chart.cols(),
            cfg.latent_dim
        )));
    }
    let mut model = init_ae(x, cfg)?;
    let mut s_enc = AdamState::for_model(&model.encoder);
    let mut s_dec = AdamState::for_model(&model.decoder);
    let mut rng = SplitMix64::derived(cfg.seed, 3);
    let n = x.rows();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let adam = AdamConfig {
            lr: cfg.lr_at(epoch),
            ..AdamConfig::default()
        };
        let order = rng.permutation(n);
        let mut mean = AeLossBreakdown::default();
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let mb = chart.select_rows(batch);
            let (loss, g_enc, g_dec) = ae_loss_grad(&model, &xb, &mb, cfg)?;
            if !loss.total.is_finite() || !g_enc.is_finite() || !g_dec.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            mean.add_scaled(&loss, batch.len() as f64 / n as f64);
            adam_step(&mut model.encoder, &g_enc, &mut s_enc, &adam).map_err(|_| Error::Divergence { epoch })?;
            adam_step(&mut model.decoder, &g_dec, &mut s_dec, &adam).map_err(|_| Error::Divergence { epoch })?;
        }
        history.push(mean);
    }
    let rmse = model.reconstruction_rmse(x)?;
    Ok(AeTrainOutcome { model, history, rmse })
}
