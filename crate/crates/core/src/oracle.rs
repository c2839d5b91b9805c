//! Ground truth and evaluation metrics for decoded curves: closed-form
//! geodesics on the two synthetic manifolds, graph shortest paths, polyline
//! statistics, tangential-acceleration diagnostics and affine alignment.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::curve::CubicCurve;
use crate::datasets::SwissRollParams;
use crate::decoder::Decoder;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dist, dist_sq, dot, knn, lstsq, norm, Matrix};
use crate::losses::{self, CurveBatch};

/// Least-squares affine map from the rows of `A` onto the rows of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    /// `(d+1) × q`: linear part stacked over the translation row.
    pub map: Matrix,
    /// Euclidean residual of every row.
    pub residuals: Vec<f64>,
    /// `‖[A 1]·map − B‖_F`.
    pub frobenius: f64,
}

impl AffineFit {
    pub fn mean_residual(&self) -> f64 {
        self.residuals.iter().sum::<f64>() / self.residuals.len() as f64
    }
}

pub fn affine_fit(a: &Matrix, b: &Matrix) -> Result<AffineFit> {
    let (n, d) = a.shape();
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "affine fit",
            left: a.shape(),
            right: b.shape(),
        });
    }
    if n < d + 1 {
        return Err(invalid(format!("affine fit needs at least {} rows, got {n}", d + 1)));
    }
    let design = Matrix::from_fn(n, d + 1, |i, j| if j < d { a[(i, j)] } else { 1.0 });
    let map = lstsq(&design, b)?;
    let fitted = design.matmul(&map)?;
    let residuals: Vec<f64> = (0..n).map(|i| dist(fitted.row(i), b.row(i))).collect();
    let frobenius = libm::sqrt(residuals.iter().map(|r| r * r).sum());
    Ok(AffineFit {
        map,
        residuals,
        frobenius,
    })
}

/// `min_L ‖A·L − B‖ / ‖B‖` over affine `L`.
pub fn procrustes_affine(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "procrustes",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let fit = affine_fit(a, b)?;
    let scale = b.frobenius_norm();
    if scale == 0.0 {
        return Ok(fit.frobenius);
    }
    Ok(fit.frobenius / scale)
}

fn segment_lengths(points: &Matrix) -> Result<Vec<f64>> {
    if points.rows() < 2 {
        return Err(invalid(format!("a polyline needs at least 2 points, got {}", points.rows())));
    }
    Ok((1..points.rows()).map(|i| dist(points.row(i), points.row(i - 1))).collect())
}

pub fn polyline_length(points: &Matrix) -> Result<f64> {
    Ok(segment_lengths(points)?.iter().sum())
}

/// Population standard deviation of the segment lengths over their mean.
pub fn uniformity_cv(points: &Matrix) -> Result<f64> {
    let seg = segment_lengths(points)?;
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    if mean == 0.0 {
        return Err(Error::DegenerateCurve);
    }
    let var = seg.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / seg.len() as f64;
    Ok(libm::sqrt(var) / mean)
}

/// Minor great-circle arc sampled at `m + 1` points.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircle {
    pub points: Matrix,
    pub length: f64,
}

pub fn great_circle(p0: &[f64], p1: &[f64], m: usize) -> Result<GreatCircle> {
    if p0.len() != p1.len() || p0.is_empty() {
        return Err(invalid("great-circle endpoints must share a positive dimension"));
    }
    if m == 0 {
        return Err(invalid("need at least one arc segment"));
    }
    let (r0, r1) = (norm(p0), norm(p1));
    if !(r0 > 0.0) || libm::fabs(r0 - r1) > 1e-9 * r0.max(1.0) {
        return Err(invalid(format!("endpoints must lie on one sphere, radii {r0} and {r1}")));
    }
    let r = 0.5 * (r0 + r1);
    let sum: Vec<f64> = p0.iter().zip(p1).map(|(a, b)| a + b).collect();
    let (chord, anti) = (dist(p0, p1), norm(&sum));
    if anti <= 1e-12 * r {
        return Err(Error::GeodesicNotUnique);
    }
    // the half-angle form stays accurate for nearly equal endpoints
    let theta = 2.0 * libm::atan2(chord, anti);
    let s = libm::sin(theta);
    let mut points = Matrix::zeros(m + 1, p0.len());
    for i in 0..=m {
        let u = i as f64 / m as f64;
        let row = points.row_mut(i);
        if s < 1e-12 {
            for k in 0..row.len() {
                row[k] = (1.0 - u) * p0[k] + u * p1[k];
            }
        } else {
            let (w0, w1) = (libm::sin((1.0 - u) * theta) / s, libm::sin(u * theta) / s);
            for k in 0..row.len() {
                row[k] = w0 * p0[k] + w1 * p1[k];
            }
        }
    }
    points.row_mut(0).copy_from_slice(p0);
    points.row_mut(m).copy_from_slice(p1);
    Ok(GreatCircle {
        points,
        length: r * theta,
    })
}

/// Geodesic length on the roll: the straight-line distance in intrinsic
/// `(arc length, height)` coordinates.
pub fn swissroll_geodesic(q0: [f64; 2], q1: [f64; 2], params: &SwissRollParams) -> Result<f64> {
    params.validate()?;
    let span = params.arc_length_span();
    for q in [q0, q1] {
        let slack_s = 1e-9 * span;
        let slack_h = 1e-9 * params.height;
        if !(q[0] >= -slack_s && q[0] <= span + slack_s && q[1] >= -slack_h && q[1] <= params.height + slack_h) {
            return Err(invalid(format!(
                "intrinsic point {q:?} lies outside [0, {span}] × [0, {}]",
                params.height
            )));
        }
    }
    Ok(dist(&q0, &q1))
}

#[derive(PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra distance between rows `i` and `j` over the symmetrized k-NN graph
/// with Euclidean edge weights.
pub fn knn_graph_shortest_path(points: &Matrix, k: usize, i: usize, j: usize) -> Result<f64> {
    let n = points.rows();
    if i >= n || j >= n {
        return Err(invalid(format!("node index out of range for {n} points")));
    }
    if i == j {
        return Ok(0.0);
    }
    let nb = knn(points, k)?;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (u, row) in nb.iter().enumerate() {
        for &v in row {
            let w = dist(points.row(u), points.row(v));
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
    }
    let mut best = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    best[i] = 0.0;
    heap.push(Frontier { cost: 0.0, node: i });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if node == j {
            return Ok(cost);
        }
        if cost > best[node] {
            continue;
        }
        for &(v, w) in &adj[node] {
            let c = cost + w;
            if c < best[v] {
                best[v] = c;
                heap.push(Frontier { cost: c, node: v });
            }
        }
    }
    let reached = best.iter().filter(|b| b.is_finite()).count();
    Err(Error::Disconnected {
        component_sizes: vec![reached, n - reached],
    })
}

/// Mean share of the decoded acceleration lying in the tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialResidual {
    pub mean: f64,
    /// Sample indices whose Jacobian was numerically rank deficient.
    pub rank_deficient: Vec<usize>,
}

const RESIDUAL_GUARD: f64 = 1e-12;

/// For each `t`, `‖P_T a‖ / (‖a‖ + ε)` with `a` the second difference of the
/// decoded curve and `P_T` the orthogonal projector onto the span of the
/// decoder Jacobian's columns.
pub fn tangential_residual(decoder: &dyn Decoder, curve: &CubicCurve, ts: &[f64], dt: f64) -> Result<TangentialResidual> {
    if ts.is_empty() {
        return Err(invalid("no sample parameters"));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut rank_deficient = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let z = curve.eval(t);
        let g0 = decoder.decode_point(&z)?;
        let gp = decoder.decode_point(&curve.eval(t + dt))?;
        let gm = decoder.decode_point(&curve.eval(t - dt))?;
        let acc: Vec<f64> = (0..g0.len()).map(|k| (gp[k] + gm[k] - 2.0 * g0[k]) / (dt * dt)).collect();
        let Some(basis) = orthonormal_columns(&decoder.jacobian(&z)?) else {
            rank_deficient.push(i);
            continue;
        };
        // below the stencil's rounding floor the acceleration is zero
        let floor = 64.0 * f64::EPSILON * (norm(&gp) + norm(&gm) + 2.0 * norm(&g0)) / (dt * dt);
        if norm(&acc) <= floor {
            used += 1;
            continue;
        }
        let mut proj2 = 0.0;
        for q in &basis {
            let c = dot(q, &acc);
            proj2 += c * c;
        }
        let ratio = libm::sqrt(proj2) / (norm(&acc) + RESIDUAL_GUARD);
        sum += ratio.min(1.0);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Singular("decoder Jacobian at every sample"));
    }
    Ok(TangentialResidual {
        mean: sum / used as f64,
        rank_deficient,
    })
}

/// Gram–Schmidt (two passes) on the columns; `None` if they are dependent.
fn orthonormal_columns(j: &Matrix) -> Option<Vec<Vec<f64>>> {
    let scale = (0..j.cols()).map(|c| norm(&j.column(c))).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(j.cols());
    for c in 0..j.cols() {
        let mut v = j.column(c);
        for _ in 0..2 {
            for q in &basis {
                let p = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qk)| *x -= p * qk);
            }
        }
        let n = norm(&v);
        if n <= 1e-10 * scale {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    Some(basis)
}

/// Mean distance from each query row to its nearest reference row.
pub fn mean_nearest_distance(queries: &Matrix, reference: &Matrix) -> Result<f64> {
    if queries.cols() != reference.cols() || reference.rows() == 0 || queries.rows() == 0 {
        return Err(Error::DimensionMismatch {
            op: "nearest distance",
            left: queries.shape(),
            right: reference.shape(),
        });
    }
    let total: f64 = queries
        .iter_rows()
        .map(|q| {
            let best = reference.iter_rows().map(|r| dist_sq(q, r)).fold(f64::INFINITY, f64::min);
            libm::sqrt(best)
        })
        .sum();
    Ok(total / queries.rows() as f64)
}

/// Median over points of the distance to their nearest other point.
pub fn median_nn_distance(points: &Matrix) -> Result<f64> {
    let nb = knn(points, 1)?;
    let mut d: Vec<f64> = (0..points.rows())
        .map(|i| dist(points.row(i), points.row(nb.of(i)[0])))
        .collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Ok(if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) })
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("rank correlation needs two equally long series of length ≥ 2"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("rank correlation of a constant series"));
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

/// Evaluation grid for [`geodesic_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ReportSpec {
    /// Segments of the evaluation grid.
    pub n_samples: usize,
    pub dt: f64,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeodesicReport {
    pub polyline_length: f64,
    pub oracle_length: Option<f64>,
    pub length_ratio: Option<f64>,
    pub endpoint_distance: f64,
    pub uniformity_cv: f64,
    pub tangential_residual: f64,
    pub rank_deficient_samples: Vec<usize>,
    /// The unnormalized training-time geodesic term on the evaluation grid.
    pub geodesic_loss: f64,
    /// Mean distance from decoded samples to the nearest training point.
    pub on_manifold_dist: Option<f64>,
    pub n_samples: usize,
}

/// Scores a trained curve under `decoder`.
pub fn geodesic_report(
    decoder: &dyn Decoder,
    curve: &CubicCurve,
    training: Option<&Matrix>,
    oracle_length: Option<f64>,
    spec: &ReportSpec,
) -> Result<(GeodesicReport, Matrix)> {
    let ts = losses::uniform_grid(spec.n_samples);
    let batch = CurveBatch::evaluate(decoder, curve, &ts, spec.dt)?;
    let decoded = batch.decoded.clone();
    let polyline = polyline_length(&decoded)?;
    let residual = tangential_residual(decoder, curve, &ts, spec.dt)?;
    let on_manifold = training.map(|t| mean_nearest_distance(&decoded, t)).transpose()?;
    let report = GeodesicReport {
        polyline_length: polyline,
        oracle_length,
        length_ratio: oracle_length.filter(|&l| l > 0.0).map(|l| polyline / l),
        endpoint_distance: dist(decoded.row(0), decoded.row(decoded.rows() - 1)),
        uniformity_cv: uniformity_cv(&decoded)?,
        tangential_residual: residual.mean,
        rank_deficient_samples: residual.rank_deficient,
        geodesic_loss: losses::l_geo(decoder, &batch)?,
        on_manifold_dist: on_manifold,
        n_samples: spec.n_samples,
    };
    Ok((report, decoded))
}
