//! Maps from latent space into ambient space.
//!
//! Curve losses only need three things from a decoder: batched evaluation,
//! vector–Jacobian products with respect to the latent input, and the full
//! input Jacobian at a point. Trained networks implement [`Decoder`], and so do
//! the closed-form maps below, which serve as exact references.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub trait Decoder {
    fn latent_dim(&self) -> usize;

    fn ambient_dim(&self) -> usize;

    /// Decodes each row of `z`.
    fn decode(&self, z: &Matrix) -> Result<Matrix>;

    /// Row `r` of the result is `upstream[r]ᵀ · J(z[r])`.
    fn pullback(&self, z: &Matrix, upstream: &Matrix) -> Result<Matrix>;

    /// `ambient_dim × latent_dim` Jacobian at `z`.
    fn jacobian(&self, z: &[f64]) -> Result<Matrix>;

    fn decode_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::new(1, z.len(), z.to_vec())?;
        Ok(self.decode(&m)?.into_data())
    }
}

pub(crate) fn check_latent(op: &'static str, z: &Matrix, latent_dim: usize) -> Result<()> {
    if z.cols() != latent_dim {
        return Err(Error::DimensionMismatch {
            op,
            left: z.shape(),
            right: (latent_dim, 0),
        });
    }
    Ok(())
}

pub(crate) fn check_upstream(z: &Matrix, upstream: &Matrix, ambient_dim: usize) -> Result<()> {
    if upstream.rows() != z.rows() || upstream.cols() != ambient_dim {
        return Err(Error::DimensionMismatch {
            op: "pullback",
            left: z.shape(),
            right: upstream.shape(),
        });
    }
    Ok(())
}

/// `x ↦ W·x + b` with `W` of shape `ambient × latent`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Matrix::identity(dim),
            bias: alloc::vec![0.0; dim],
        }
    }

    pub fn linear(weight: Matrix) -> Self {
        let bias = alloc::vec![0.0; weight.rows()];
        Self { weight, bias }
    }
}

impl Decoder for AffineMap {
    fn latent_dim(&self) -> usize {
        self.weight.cols()
    }

    fn ambient_dim(&self) -> usize {
        self.weight.rows()
    }

    fn decode(&self, z: &Matrix) -> Result<Matrix> {
        check_latent("decode", z, self.latent_dim())?;
        let mut out = z.matmul(&self.weight.transpose())?;
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    fn pullback(&self, z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        check_latent("pullback", z, self.latent_dim())?;
        check_upstream(z, upstream, self.ambient_dim())?;
        upstream.matmul(&self.weight)
    }

    fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                op: "jacobian",
                left: (1, z.len()),
                right: (self.latent_dim(), 0),
            });
        }
        Ok(self.weight.clone())
    }
}

/// The unit circle `z ↦ (r·cos z, r·sin z)`: a 1-D manifold in the plane whose
/// geodesics are constant-speed arcs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleMap {
    pub radius: f64,
}

impl Default for CircleMap {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

impl Decoder for CircleMap {
    fn latent_dim(&self) -> usize {
        1
    }

    fn ambient_dim(&self) -> usize {
        2
    }

    fn decode(&self, z: &Matrix) -> Result<Matrix> {
        check_latent("decode", z, 1)?;
        Ok(Matrix::from_fn(z.rows(), 2, |i, j| {
            let a = z[(i, 0)];
            self.radius * if j == 0 { libm::cos(a) } else { libm::sin(a) }
        }))
    }

    fn pullback(&self, z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        check_latent("pullback", z, 1)?;
        check_upstream(z, upstream, 2)?;
        Ok(Matrix::from_fn(z.rows(), 1, |i, _| {
            let a = z[(i, 0)];
            self.radius * (-libm::sin(a) * upstream[(i, 0)] + libm::cos(a) * upstream[(i, 1)])
        }))
    }

    fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        if z.len() != 1 {
            return Err(Error::DimensionMismatch {
                op: "jacobian",
                left: (1, z.len()),
                right: (1, 0),
            });
        }
        Matrix::new(2, 1, alloc::vec![-self.radius * libm::sin(z[0]), self.radius * libm::cos(z[0])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_jacobian_matches_finite_differences() {
        let c = CircleMap { radius: 2.0 };
        let z = 0.7;
        let j = c.jacobian(&[z]).unwrap();
        let h = 1e-6;
        let p = c.decode_point(&[z + h]).unwrap();
        let m = c.decode_point(&[z - h]).unwrap();
        for k in 0..2 {
            assert!((j[(k, 0)] - (p[k] - m[k]) / (2.0 * h)).abs() < 1e-8);
        }
        let zs = Matrix::new(1, 1, alloc::vec![z]).unwrap();
        let up = Matrix::new(1, 2, alloc::vec![0.3, -1.1]).unwrap();
        let pb = c.pullback(&zs, &up).unwrap();
        assert!((pb[(0, 0)] - (0.3 * j[(0, 0)] - 1.1 * j[(1, 0)])).abs() < 1e-15);
    }

    #[test]
    fn affine_decode_and_pullback() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]]).unwrap();
        let map = AffineMap {
            weight: w,
            bias: alloc::vec![1.0, 0.0, -1.0],
        };
        let out = map.decode_point(&[1.0, 1.0]).unwrap();
        assert_eq!(out, [4.0, -1.0, 2.5]);
        let z = Matrix::new(1, 2, alloc::vec![1.0, 1.0]).unwrap();
        let up = Matrix::new(1, 3, alloc::vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(map.pullback(&z, &up).unwrap().data(), &[1.0, 2.0]);
        assert!(map.decode(&Matrix::zeros(1, 3)).is_err());
    }
}
