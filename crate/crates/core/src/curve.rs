//! The latent interpolation curve.
//!
//! `c(t) = (1−t)·z0 + t·z1 + t(1−t)·(a + b·t)` spans every cubic with
//! `c(0) = z0` and `c(1) = z1`; the endpoint constraints hold for all values
//! of the free coefficient vectors `a` and `b`, so optimization runs over
//! those `2·d` numbers only. `a = b = 0` is the straight chord.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CubicCurve {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Weights of `a` and `b` in `c(t)`: `(t(1−t), t²(1−t))`.
#[inline]
pub fn coefficient_weights(t: f64) -> (f64, f64) {
    let w = t * (1.0 - t);
    (w, w * t)
}

impl CubicCurve {
    /// The straight chord from `z0` to `z1`.
    pub fn chord(z0: Vec<f64>, z1: Vec<f64>) -> Result<Self> {
        let d = z0.len();
        Self::new(z0, z1, vec![0.0; d], vec![0.0; d])
    }

    pub fn new(z0: Vec<f64>, z1: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let c = Self { z0, z1, a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.z0.len();
        if d == 0 || self.z1.len() != d || self.a.len() != d || self.b.len() != d {
            return Err(invalid(format!(
                "curve vectors must share a positive dimension: z0 {}, z1 {}, a {}, b {}",
                d,
                self.z1.len(),
                self.a.len(),
                self.b.len()
            )));
        }
        if !self.z0.iter().chain(&self.z1).chain(&self.a).chain(&self.b).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("curve coefficients".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.z0.len()
    }

    /// `c(t)`. Defined for every real `t`; finite-difference stencils step
    /// slightly outside `[0, 1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (wa, wb) = coefficient_weights(t);
        (0..self.dim())
            .map(|k| (1.0 - t) * self.z0[k] + t * self.z1[k] + wa * self.a[k] + wb * self.b[k])
            .collect()
    }

    /// `c'(t) = (z1 − z0) + (1 − 2t)(a + b·t) + t(1 − t)·b`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                (self.z1[k] - self.z0[k])
                    + (1.0 - 2.0 * t) * (self.a[k] + self.b[k] * t)
                    + t * (1.0 - t) * self.b[k]
            })
            .collect()
    }

    /// `c''(t) = −2a + 2b − 6b·t`.
    pub fn accel(&self, t: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|k| -2.0 * self.a[k] + 2.0 * self.b[k] - 6.0 * self.b[k] * t)
            .collect()
    }

    /// Free parameters as one vector, `a` followed by `b`.
    pub fn free_params(&self) -> Vec<f64> {
        let mut p = self.a.clone();
        p.extend_from_slice(&self.b);
        p
    }

    pub fn set_free_params(&mut self, p: &[f64]) {
        let d = self.dim();
        assert_eq!(p.len(), 2 * d, "expected {} free parameters", 2 * d);
        self.a.copy_from_slice(&p[..d]);
        self.b.copy_from_slice(&p[d..]);
    }
}
