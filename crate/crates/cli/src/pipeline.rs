//! The end-to-end stages: sample, embed, train the autoencoder, pick
//! endpoints, train the curve, evaluate.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unigeo_core::autoencoder::{train_ae, AeModel, AeTrainOutcome};
use unigeo_core::curve::CubicCurve;
use unigeo_core::datasets::{sample_semisphere, sample_swissroll, PointCloud};
use unigeo_core::linalg::dist_sq;
use unigeo_core::losses::{train_curve, CurveTrainConfig, CurveTrainOutcome, LossWeights};
use unigeo_core::ltsa::ltsa_embed;
use unigeo_core::oracle::{geodesic_report, great_circle, swissroll_geodesic, GeodesicReport};
use unigeo_core::Matrix;

use crate::config::{Endpoints, ManifoldKind, OracleKind, RunConfig};
use crate::UsageError;

pub fn generate(cfg: &RunConfig) -> Result<PointCloud> {
    if cfg.data.n == 0 {
        return Err(UsageError("n must be ≥ 1".into()).into());
    }
    let cloud = match cfg.data.manifold {
        ManifoldKind::Semisphere => sample_semisphere(cfg.data.n, cfg.data.radius, cfg.seed)?,
        ManifoldKind::Swissroll => sample_swissroll(cfg.data.n, cfg.data.swissroll, cfg.seed)?,
    };
    Ok(cloud)
}

pub fn embed(points: &Matrix, cfg: &RunConfig) -> Result<Matrix> {
    let cloud = PointCloud::from_points(points.clone());
    Ok(ltsa_embed(&cloud, &cfg.ltsa).context("LTSA embedding")?.coords)
}

pub fn train_autoencoder(points: &Matrix, chart: &Matrix, cfg: &RunConfig) -> Result<AeTrainOutcome> {
    train_ae(points, chart, &cfg.ae_config()).context("autoencoder training")
}

/// The two ambient endpoints of a curve, with their cloud rows when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEndpoints {
    pub indices: Option<[usize; 2]>,
    pub points: [Vec<f64>; 2],
}

fn nearest_row(points: &Matrix, target: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, row) in points.iter_rows().enumerate() {
        let d = dist_sq(row, target);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Targets for automatic endpoint selection. Semi-sphere: two points at
/// height R/2 that are 60° apart. Swiss roll: the mid-height points at 5%
/// and 95% of the unrolled length.
pub fn auto_targets(cfg: &RunConfig) -> [Vec<f64>; 2] {
    match cfg.data.manifold {
        ManifoldKind::Semisphere => {
            let r = cfg.data.radius;
            let phi = 0.5 * (1.0f64 / 3.0).acos();
            let rho = r * 0.75f64.sqrt();
            let p = |s: f64| vec![rho * phi.cos(), s * rho * phi.sin(), 0.5 * r];
            [p(-1.0), p(1.0)]
        }
        ManifoldKind::Swissroll => {
            let sr = &cfg.data.swissroll;
            let span = sr.arc_length_span();
            let p = |f: f64| sr.point(sr.angle_at_arc_length(f * span), 0.5 * sr.height).to_vec();
            [p(0.05), p(0.95)]
        }
    }
}

pub fn resolve_endpoints(spec: &Endpoints, cfg: &RunConfig, points: &Matrix) -> Result<ResolvedEndpoints> {
    let by_index = |i: usize, j: usize| -> Result<ResolvedEndpoints> {
        for k in [i, j] {
            if k >= points.rows() {
                return Err(UsageError(format!("endpoint index {k} out of range for {} points", points.rows())).into());
            }
        }
        Ok(ResolvedEndpoints {
            indices: Some([i, j]),
            points: [points.row(i).to_vec(), points.row(j).to_vec()],
        })
    };
    let out = match spec {
        Endpoints::Auto => {
            let [a, b] = auto_targets(cfg);
            if a.len() != points.cols() {
                bail!("automatic endpoints need {}-D points, the cloud is {}-D", a.len(), points.cols());
            }
            by_index(nearest_row(points, &a), nearest_row(points, &b))?
        }
        Endpoints::Indices([i, j]) => by_index(*i, *j)?,
        Endpoints::Points([a, b]) => {
            if a.len() != points.cols() || b.len() != points.cols() {
                return Err(UsageError(format!("endpoints must be {}-D", points.cols())).into());
            }
            ResolvedEndpoints {
                indices: None,
                points: [a.clone(), b.clone()],
            }
        }
    };
    if out.points[0] == out.points[1] {
        return Err(UsageError("the two endpoints coincide".into()).into());
    }
    Ok(out)
}

/// The straight latent chord between the encoded endpoints.
pub fn initial_curve(model: &AeModel, ends: &ResolvedEndpoints) -> Result<CubicCurve> {
    let z0 = model.encode_point(&ends.points[0])?;
    let z1 = model.encode_point(&ends.points[1])?;
    Ok(CubicCurve::chord(z0, z1)?)
}

pub fn curve_config_with(cfg: &RunConfig, weights: LossWeights) -> Result<CurveTrainConfig> {
    Ok(CurveTrainConfig {
        weights,
        ..cfg.curve_config()?
    })
}

pub fn fit_curve(model: &AeModel, init: &CubicCurve, tc: &CurveTrainConfig) -> Result<CurveTrainOutcome> {
    train_curve(model, init, tc).context("curve training")
}

/// Closed-form geodesic length between the endpoints, if an oracle applies.
pub fn oracle_length(kind: OracleKind, cfg: &RunConfig, ends: &ResolvedEndpoints) -> Result<Option<f64>> {
    let kind = match kind {
        OracleKind::Auto => match cfg.data.manifold {
            ManifoldKind::Semisphere => OracleKind::Greatcircle,
            ManifoldKind::Swissroll => OracleKind::Swissroll,
        },
        k => k,
    };
    let [p0, p1] = &ends.points;
    Ok(match kind {
        OracleKind::Greatcircle => Some(great_circle(p0, p1, 1).context("great-circle oracle")?.length),
        OracleKind::Swissroll => {
            let sr = &cfg.data.swissroll;
            let q0 = sr.intrinsic_of(p0).context("swiss-roll oracle")?;
            let q1 = sr.intrinsic_of(p1).context("swiss-roll oracle")?;
            Some(swissroll_geodesic(q0, q1, sr)?)
        }
        OracleKind::None | OracleKind::Auto => None,
    })
}

pub fn evaluate(
    model: &AeModel,
    curve: &CubicCurve,
    training: Option<&Matrix>,
    oracle: Option<f64>,
    cfg: &RunConfig,
) -> Result<(GeodesicReport, Matrix)> {
    geodesic_report(model, curve, training, oracle, &cfg.report_spec()).context("evaluation")
}

/// Everything shared by the curves of one experiment.
pub struct Prepared {
    pub cloud: PointCloud,
    pub chart: Matrix,
    pub ae: AeTrainOutcome,
    pub endpoints: ResolvedEndpoints,
    pub init: CubicCurve,
    pub oracle: Option<f64>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let cloud = generate(cfg)?;
    let chart = embed(&cloud.points, cfg)?;
    let ae = train_autoencoder(&cloud.points, &chart, cfg)?;
    let endpoints = resolve_endpoints(&cfg.curve.endpoints, cfg, &cloud.points)?;
    let init = initial_curve(&ae.model, &endpoints)?;
    let oracle = oracle_length(cfg.eval.oracle, cfg, &endpoints)?;
    Ok(Prepared {
        cloud,
        chart,
        ae,
        endpoints,
        init,
        oracle,
    })
}

pub struct FullRun {
    pub prepared: Prepared,
    pub curve: CurveTrainOutcome,
    pub report: GeodesicReport,
    pub decoded: Matrix,
}

pub fn run(cfg: &RunConfig) -> Result<FullRun> {
    let prepared = prepare(cfg)?;
    let curve = fit_curve(&prepared.ae.model, &prepared.init, &cfg.curve_config()?)?;
    let (report, decoded) = evaluate(
        &prepared.ae.model,
        &curve.curve,
        Some(&prepared.cloud.points),
        prepared.oracle,
        cfg,
    )?;
    Ok(FullRun {
        prepared,
        curve,
        report,
        decoded,
    })
}
