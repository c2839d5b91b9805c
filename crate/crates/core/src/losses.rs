//! Losses on the decoded curve `G(t) = D(c(t))` and the curve trainer.
//!
//! Every `t`-derivative is a central finite difference, so each loss is an
//! explicit function of decoder outputs at the stencil points
//! `t_i − Δt, t_i, t_i + Δt`. Gradients with respect to the curve's free
//! coefficients are obtained by pulling the loss gradient at those points back
//! through the decoder. The decoder Jacobian inside the geodesic term is held
//! fixed during that sweep.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curve::{coefficient_weights, CubicCurve};
use crate::decoder::Decoder;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dist, norm, Matrix};
use crate::nn::{AdamConfig, AdamState};
use crate::rng::SplitMix64;

/// Weights of the constant-speed, geodesic and length terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LossWeights {
    pub conspeed: f64,
    pub geo: f64,
    pub min: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            conspeed: 1.0,
            geo: 0.1,
            min: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(conspeed: f64, geo: f64, min: f64) -> Result<Self> {
        let w = Self { conspeed, geo, min };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.conspeed, self.geo, self.min];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid(format!("loss weights must be finite and ≥ 0, got {all:?}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(invalid("weights all zero"));
        }
        Ok(())
    }
}

/// Where the curve is sampled and the finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SampleSpec {
    /// Number of segments; the grid has `n + 1` points including both ends.
    pub n: usize,
    pub dt: f64,
    /// Redraw interior sample points uniformly at random every epoch.
    pub resample_random: bool,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            n: 20,
            dt: 1e-3,
            resample_random: false,
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("need at least one curve segment (n ≥ 1)"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {}", self.dt)));
        }
        if self.dt > 0.5 / self.n as f64 {
            return Err(invalid(format!(
                "finite-difference step {} exceeds half the grid spacing 1/(2·{})",
                self.dt, self.n
            )));
        }
        Ok(())
    }

    /// `t_i = i/n`.
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.n)
    }

    /// Pinned endpoints with `n − 1` sorted uniform draws in between.
    pub fn random_grid(&self, rng: &mut SplitMix64) -> Vec<f64> {
        let mut ts: Vec<f64> = (1..self.n).map(|_| rng.next_f64()).collect();
        ts.sort_by(f64::total_cmp);
        ts.insert(0, 0.0);
        ts.push(1.0);
        ts
    }
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Decoded stencil values for every sample parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveBatch {
    pub ts: Vec<f64>,
    pub dt: f64,
    /// `c(t_i)`, one row per sample.
    pub latent: Matrix,
    /// `G(t_i)`.
    pub decoded: Matrix,
    /// `G(t_i − Δt)` and `G(t_i + Δt)`.
    pub minus: Matrix,
    pub plus: Matrix,
    /// `‖(G(t_i + Δt) − G(t_i − Δt)) / 2Δt‖`.
    pub speeds: Vec<f64>,
}

impl CurveBatch {
    /// Evaluates the decoder once on all `3·(n+1)` stencil points.
    pub fn evaluate(decoder: &dyn Decoder, curve: &CubicCurve, ts: &[f64], dt: f64) -> Result<Self> {
        check_ts(ts)?;
        if decoder.latent_dim() != curve.dim() {
            return Err(Error::DimensionMismatch {
                op: "curve batch",
                left: (decoder.latent_dim(), decoder.ambient_dim()),
                right: (curve.dim(), 1),
            });
        }
        let m = ts.len();
        let stencil = stencil_points(curve, ts, dt);
        let out = decoder.decode(&stencil)?;
        if !out.is_finite() {
            return Err(Error::NonFinite("decoded curve".into()));
        }
        let block = |b: usize| Matrix::from_fn(m, out.cols(), |i, j| out[(b * m + i, j)]);
        let (decoded, minus, plus) = (block(0), block(1), block(2));
        let speeds = (0..m)
            .map(|i| dist(plus.row(i), minus.row(i)) / (2.0 * dt))
            .collect();
        Ok(Self {
            ts: ts.to_vec(),
            dt,
            latent: Matrix::from_fn(m, curve.dim(), |i, j| stencil[(i, j)]),
            decoded,
            minus,
            plus,
            speeds,
        })
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Second difference `(G(t+Δt) + G(t−Δt) − 2G(t)) / Δt²` at sample `i`.
    pub fn second_diff(&self, i: usize) -> Vec<f64> {
        let h2 = self.dt * self.dt;
        (0..self.decoded.cols())
            .map(|k| (self.plus[(i, k)] + self.minus[(i, k)] - 2.0 * self.decoded[(i, k)]) / h2)
            .collect()
    }
}

fn check_ts(ts: &[f64]) -> Result<()> {
    if ts.len() < 2 {
        return Err(invalid("a curve batch needs at least two sample parameters"));
    }
    if ts[0] != 0.0 || ts[ts.len() - 1] != 1.0 || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("sample parameters must increase strictly from 0 to 1"));
    }
    Ok(())
}

/// Rows `[c(t_i); c(t_i − Δt); c(t_i + Δt)]` in three blocks.
fn stencil_points(curve: &CubicCurve, ts: &[f64], dt: f64) -> Matrix {
    let (m, d) = (ts.len(), curve.dim());
    let mut pts = Matrix::zeros(3 * m, d);
    for (b, off) in [0.0, -dt, dt].into_iter().enumerate() {
        for (i, &t) in ts.iter().enumerate() {
            pts.row_mut(b * m + i).copy_from_slice(&curve.eval(t + off));
        }
    }
    pts
}

fn stencil_params(ts: &[f64], dt: f64) -> impl Iterator<Item = f64> + '_ {
    [0.0, -dt, dt].into_iter().flat_map(move |off| ts.iter().map(move |t| t + off))
}

/// Decoded speed at a single parameter.
pub fn speed_norm(decoder: &dyn Decoder, curve: &CubicCurve, t: f64, dt: f64) -> Result<f64> {
    let p = decoder.decode_point(&curve.eval(t + dt))?;
    let m = decoder.decode_point(&curve.eval(t - dt))?;
    Ok(dist(&p, &m) / (2.0 * dt))
}

/// Decoded second difference at a single parameter.
pub fn second_diff(decoder: &dyn Decoder, curve: &CubicCurve, t: f64, dt: f64) -> Result<Vec<f64>> {
    let p = decoder.decode_point(&curve.eval(t + dt))?;
    let m = decoder.decode_point(&curve.eval(t - dt))?;
    let z = decoder.decode_point(&curve.eval(t))?;
    let h2 = dt * dt;
    Ok((0..z.len()).map(|k| (p[k] + m[k] - 2.0 * z[k]) / h2).collect())
}

/// `‖s / mean(s) − 1‖` over the given speeds.
pub fn conspeed_of(speeds: &[f64]) -> Result<f64> {
    if speeds.is_empty() {
        return Err(invalid("no speeds to compare"));
    }
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    if !(mean >= 1e-12) {
        return Err(Error::DegenerateCurve);
    }
    Ok(libm::sqrt(speeds.iter().map(|s| (s / mean - 1.0) * (s / mean - 1.0)).sum()))
}

pub fn l_conspeed(batch: &CurveBatch) -> Result<f64> {
    conspeed_of(&batch.speeds)
}

/// Decoder Jacobians at every sample `c(t_i)`.
pub fn sample_jacobians(decoder: &dyn Decoder, batch: &CurveBatch) -> Result<Vec<Matrix>> {
    batch.latent.iter_rows().map(|z| decoder.jacobian(z)).collect()
}

/// Projections `ω_i = J_iᵀ · second_diff_i`, one row per sample.
fn projections(batch: &CurveBatch, jacobians: &[Matrix]) -> Result<Matrix> {
    if jacobians.len() != batch.len() {
        return Err(invalid(format!(
            "{} Jacobians supplied for {} samples",
            jacobians.len(),
            batch.len()
        )));
    }
    let d = batch.latent.cols();
    let mut omega = Matrix::zeros(batch.len(), d);
    for (i, jac) in jacobians.iter().enumerate() {
        if jac.shape() != (batch.decoded.cols(), d) {
            return Err(Error::DimensionMismatch {
                op: "geodesic projection",
                left: jac.shape(),
                right: (batch.decoded.cols(), d),
            });
        }
        let a = batch.second_diff(i);
        for j in 0..d {
            omega[(i, j)] = (0..a.len()).map(|k| jac[(k, j)] * a[k]).sum();
        }
    }
    Ok(omega)
}

/// Frobenius norm of the stacked projections of the decoded acceleration onto
/// the raw Jacobian columns.
pub fn l_geo(decoder: &dyn Decoder, batch: &CurveBatch) -> Result<f64> {
    let jac = sample_jacobians(decoder, batch)?;
    l_geo_with(batch, &jac)
}

/// As [`l_geo`] with caller-supplied Jacobians.
pub fn l_geo_with(batch: &CurveBatch, jacobians: &[Matrix]) -> Result<f64> {
    Ok(projections(batch, jacobians)?.frobenius_norm())
}

/// Length of the decoded polyline through the samples.
pub fn l_min(batch: &CurveBatch) -> f64 {
    (1..batch.len())
        .map(|i| dist(batch.decoded.row(i), batch.decoded.row(i - 1)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub conspeed: f64,
    pub geo: f64,
    pub min: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn combine(conspeed: f64, geo: f64, min: f64, w: &LossWeights) -> Self {
        Self {
            conspeed,
            geo,
            min,
            total: w.conspeed * conspeed + w.geo * geo + w.min * min,
        }
    }
}

pub fn total_loss(decoder: &dyn Decoder, batch: &CurveBatch, w: &LossWeights) -> Result<LossBreakdown> {
    let jac = sample_jacobians(decoder, batch)?;
    total_loss_with(batch, &jac, w)
}

/// Total loss with the geodesic term's Jacobians fixed by the caller.
pub fn total_loss_with(batch: &CurveBatch, jacobians: &[Matrix], w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    Ok(LossBreakdown::combine(
        l_conspeed(batch)?,
        l_geo_with(batch, jacobians)?,
        l_min(batch),
        w,
    ))
}

/// Loss at the current curve and its gradient with respect to the free
/// coefficients (`a` then `b`). Terms with zero weight are skipped in the
/// backward sweep. At the non-differentiable points of the norms (a zero
/// residual) the zero subgradient is used.
pub fn total_loss_grad(
    decoder: &dyn Decoder,
    curve: &CubicCurve,
    ts: &[f64],
    dt: f64,
    w: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let batch = CurveBatch::evaluate(decoder, curve, ts, dt)?;
    let jac = if w.geo > 0.0 {
        sample_jacobians(decoder, &batch)?
    } else {
        Vec::new()
    };
    grad_with(decoder, curve, &batch, &jac, w)
}

/// Same as [`total_loss_grad`] with the Jacobians supplied, which pins the
/// objective for finite-difference checks. `jacobians` may be empty when the
/// geodesic weight is zero.
pub fn total_loss_grad_with(
    decoder: &dyn Decoder,
    curve: &CubicCurve,
    ts: &[f64],
    dt: f64,
    jacobians: &[Matrix],
    w: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let batch = CurveBatch::evaluate(decoder, curve, ts, dt)?;
    grad_with(decoder, curve, &batch, jacobians, w)
}

/// Below this the speed spread is finite-difference rounding, and the
/// norm's direction is noise; the zero subgradient is used instead.
const CONSPEED_FLOOR: f64 = 1e-10;

/// Rounding level of the geodesic term: second differences carry an error of
/// about `eps·|G| / Δt²` per entry.
fn geo_floor(batch: &CurveBatch, jac: &[Matrix]) -> f64 {
    let g = batch
        .decoded
        .data()
        .iter()
        .chain(batch.plus.data())
        .chain(batch.minus.data())
        .fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let j = jac.iter().map(Matrix::frobenius_norm).fold(0.0f64, f64::max);
    let per_sample = 64.0 * f64::EPSILON * g / (batch.dt * batch.dt) * j;
    per_sample * libm::sqrt(batch.len() as f64 * batch.decoded.cols() as f64)
}

fn grad_with(
    decoder: &dyn Decoder,
    curve: &CubicCurve,
    batch: &CurveBatch,
    jac: &[Matrix],
    w: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    w.validate()?;
    let (m, amb, d) = (batch.len(), batch.decoded.cols(), curve.dim());
    let dt = batch.dt;
    // upstream gradients on decoded points, in the three stencil blocks
    let mut up = Matrix::zeros(3 * m, amb);

    let conspeed = l_conspeed(batch)?;
    if w.conspeed > 0.0 && conspeed > CONSPEED_FLOOR {
        let s = &batch.speeds;
        let mean = s.iter().sum::<f64>() / m as f64;
        let r: Vec<f64> = s.iter().map(|v| v / mean - 1.0).collect();
        let rs: f64 = r.iter().zip(s).map(|(ri, si)| ri * si).sum::<f64>() / (conspeed * mean * mean * m as f64);
        for i in 0..m {
            let ds = w.conspeed * (r[i] / (conspeed * mean) - rs);
            let u: Vec<f64> = (0..amb).map(|k| batch.plus[(i, k)] - batch.minus[(i, k)]).collect();
            let un = norm(&u);
            if un == 0.0 {
                continue;
            }
            for k in 0..amb {
                let g = ds * u[k] / (un * 2.0 * dt);
                up[(2 * m + i, k)] += g;
                up[(m + i, k)] -= g;
            }
        }
    }

    let geo = if jac.is_empty() {
        if w.geo > 0.0 {
            return Err(invalid("geodesic term needs one Jacobian per sample"));
        }
        f64::NAN
    } else {
        let omega = projections(batch, jac)?;
        let geo = omega.frobenius_norm();
        if w.geo > 0.0 && geo > geo_floor(batch, jac) {
            let h2 = dt * dt;
            for i in 0..m {
                for k in 0..amb {
                    let ja: f64 = (0..d).map(|j| jac[i][(k, j)] * omega[(i, j)]).sum();
                    let g = w.geo * ja / (geo * h2);
                    up[(2 * m + i, k)] += g;
                    up[(m + i, k)] += g;
                    up[(i, k)] -= 2.0 * g;
                }
            }
        }
        geo
    };

    let min = l_min(batch);
    if w.min > 0.0 {
        for i in 1..m {
            let e: Vec<f64> = (0..amb)
                .map(|k| batch.decoded[(i, k)] - batch.decoded[(i - 1, k)])
                .collect();
            let en = norm(&e);
            if en == 0.0 {
                continue;
            }
            for k in 0..amb {
                let g = w.min * e[k] / en;
                up[(i, k)] += g;
                up[(i - 1, k)] -= g;
            }
        }
    }

    let stencil = stencil_points(curve, &batch.ts, dt);
    let latent_up = decoder.pullback(&stencil, &up)?;
    let mut grad = vec![0.0; 2 * d];
    for (row, t) in stencil_params(&batch.ts, dt).enumerate() {
        let (wa, wb) = coefficient_weights(t);
        for j in 0..d {
            let g = latent_up[(row, j)];
            grad[j] += wa * g;
            grad[d + j] += wb * g;
        }
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("curve gradient".into()));
    }
    let geo_val = if geo.is_nan() { 0.0 } else { geo };
    Ok((LossBreakdown::combine(conspeed, geo_val, min, w), grad))
}

/// Curve-training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CurveTrainConfig {
    pub samples: SampleSpec,
    pub weights: LossWeights,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CurveTrainConfig {
    fn default() -> Self {
        Self {
            samples: SampleSpec::default(),
            weights: LossWeights::default(),
            epochs: 2000,
            lr: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTrainOutcome {
    pub curve: CubicCurve,
    /// Loss before each optimizer step. With a zero geodesic weight the
    /// geodesic column is reported as 0.
    pub history: Vec<LossBreakdown>,
}

/// Adam on the free coefficients with the decoder frozen.
pub fn train_curve(decoder: &dyn Decoder, init: &CubicCurve, cfg: &CurveTrainConfig) -> Result<CurveTrainOutcome> {
    cfg.samples.validate()?;
    cfg.weights.validate()?;
    init.validate()?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(invalid(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut curve = init.clone();
    let mut state = AdamState::new(2 * curve.dim());
    let mut rng = SplitMix64::derived(cfg.seed, 0xC0_55E5);
    let grid = cfg.samples.grid();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let ts = if cfg.samples.resample_random {
            cfg.samples.random_grid(&mut rng)
        } else {
            grid.clone()
        };
        let (loss, grad) = match total_loss_grad(decoder, &curve, &ts, cfg.samples.dt, &cfg.weights) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch }),
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(loss);
        let mut p = curve.free_params();
        state
            .update(&mut p, &grad, &adam)
            .map_err(|_| Error::Divergence { epoch })?;
        curve.set_free_params(&p);
    }
    Ok(CurveTrainOutcome { curve, history })
}
