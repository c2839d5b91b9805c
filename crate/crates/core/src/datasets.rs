//! Deterministic samplers for the two synthetic manifolds: the upper unit
//! hemisphere and the swiss roll.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

/// Which analytic manifold a cloud was drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Manifold {
    SemiSphere { radius: f64 },
    SwissRoll(SwissRollParams),
}

/// Points `(s·t·cos t, h, s·t·sin t)` for `t ∈ [t_min, t_max]`, `h ∈ [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SwissRollParams {
    pub t_min: f64,
    pub t_max: f64,
    pub height: f64,
    pub radius_scale: f64,
}

impl Default for SwissRollParams {
    fn default() -> Self {
        Self {
            t_min: 1.5 * PI,
            t_max: 4.5 * PI,
            height: 10.0,
            radius_scale: 1.0,
        }
    }
}

impl SwissRollParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_min > 0.0
            && self.t_max > self.t_min
            && self.height > 0.0
            && self.radius_scale > 0.0
            && self.t_max.is_finite()
            && self.height.is_finite()
            && self.radius_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "invalid swiss-roll parameters: need 0 < t_min < t_max, height > 0, radius_scale > 0 (got {self:?})"
            )))
        }
    }

    /// Arc length of the spiral from `t = 0` to `t`.
    pub fn arc_length_at(&self, t: f64) -> f64 {
        0.5 * self.radius_scale * (t * libm::sqrt(1.0 + t * t) + libm::asinh(t))
    }

    /// Total arc length covered by `[t_min, t_max]`.
    pub fn arc_length_span(&self) -> f64 {
        self.arc_length_at(self.t_max) - self.arc_length_at(self.t_min)
    }

    /// Roll angle whose arc length from `t_min` is `s` (bisection).
    pub fn angle_at_arc_length(&self, s: f64) -> f64 {
        let target = self.arc_length_at(self.t_min) + s;
        let (mut lo, mut hi) = (self.t_min, self.t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.arc_length_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn point(&self, t: f64, h: f64) -> [f64; 3] {
        let r = self.radius_scale * t;
        [r * libm::cos(t), h, r * libm::sin(t)]
    }

    /// Intrinsic `(arc length from t_min, height)` of an ambient point lying on
    /// (or near) the roll.
    pub fn intrinsic_of(&self, p: &[f64]) -> Result<[f64; 2]> {
        if p.len() != 3 {
            return Err(invalid(format!("swiss-roll points are 3-D, got {}", p.len())));
        }
        let t = libm::sqrt(p[0] * p[0] + p[2] * p[2]) / self.radius_scale;
        let slack = 1e-6 * self.t_max;
        if t < self.t_min - slack || t > self.t_max + slack {
            return Err(invalid(format!(
                "point with roll angle {t} lies outside [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok([self.arc_length_at(t) - self.arc_length_at(self.t_min), p[1]])
    }
}

/// Ambient samples, one per row, with the generating manifold when known.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Matrix,
    pub manifold: Option<Manifold>,
    pub seed: Option<u64>,
    /// Intrinsic flat coordinates (swiss roll only): arc length and height.
    pub intrinsic: Option<Matrix>,
}

impl PointCloud {
    /// A cloud without provenance, e.g. one loaded from disk.
    pub fn from_points(points: Matrix) -> Self {
        Self {
            points,
            manifold: None,
            seed: None,
            intrinsic: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Largest pairwise distance (exhaustive).
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(crate::linalg::dist_sq(self.points.row(i), self.points.row(j)));
            }
        }
        libm::sqrt(best)
    }
}

/// `n` points uniform by area on the upper hemisphere of radius `radius`.
///
/// Uses Archimedes' hat-box theorem: `z` uniform in `[0, R]` and azimuth
/// uniform in `[0, 2π)` is exactly area-uniform on a sphere zone.
pub fn sample_semisphere(n: usize, radius: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(invalid("n must be ≥ 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let z = radius * rng.next_f64();
        let phi = 2.0 * PI * rng.next_f64();
        let rho = libm::sqrt((radius * radius - z * z).max(0.0));
        data.extend_from_slice(&[rho * libm::cos(phi), rho * libm::sin(phi), z]);
    }
    Ok(PointCloud {
        points: Matrix::new(n, 3, data)?,
        manifold: Some(Manifold::SemiSphere { radius }),
        seed: Some(seed),
        intrinsic: None,
    })
}

/// `n` points uniform by surface area on the swiss roll: the roll angle is
/// drawn uniform in arc length (inverse CDF by bisection), the height uniform
/// in `[0, height]`.
pub fn sample_swissroll(n: usize, params: SwissRollParams, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(invalid("n must be ≥ 1"));
    }
    params.validate()?;
    let mut rng = SplitMix64::new(seed);
    let span = params.arc_length_span();
    let mut data = Vec::with_capacity(3 * n);
    let mut intrinsic = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let s = span * rng.next_f64();
        let h = params.height * rng.next_f64();
        let t = params.angle_at_arc_length(s);
        data.extend_from_slice(&params.point(t, h));
        intrinsic.extend_from_slice(&[s, h]);
    }
    Ok(PointCloud {
        points: Matrix::new(n, 3, data)?,
        manifold: Some(Manifold::SwissRoll(params)),
        seed: Some(seed),
        intrinsic: Some(Matrix::new(n, 2, intrinsic)?),
    })
}
