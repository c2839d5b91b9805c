//! Local tangent space alignment.
//!
//! Every point and its `k` nearest neighbors form a patch. The top `d`
//! principal directions of the centered patch give local tangent coordinates;
//! the projector onto their orthogonal complement (together with the constant
//! direction) is accumulated into an `N×N` alignment matrix `B`. The global
//! chart is spanned by the bottom eigenvectors of `B` after the constant
//! vector is removed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datasets::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::linalg::{knn, matmul, matmul_tn, smallest_eigenpairs, sym_eig, Matrix, Neighbors};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LtsaConfig {
    /// Neighbors per patch (the patch also contains the point itself).
    pub k: usize,
    /// Chart dimension.
    pub d: usize,
    /// Singular values of the de-meaned bottom eigenspace below this mean the
    /// chart is degenerate.
    pub eig_floor: f64,
}

impl Default for LtsaConfig {
    fn default() -> Self {
        Self {
            k: 12,
            d: 2,
            eig_floor: 1e-8,
        }
    }
}

impl LtsaConfig {
    pub fn validate(&self, n_points: usize, ambient_dim: usize) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("target dimension d must be ≥ 1"));
        }
        if self.k <= self.d {
            return Err(invalid(format!(
                "neighborhood size k = {} must exceed the target dimension d = {}",
                self.k, self.d
            )));
        }
        if self.d > ambient_dim {
            return Err(invalid(format!(
                "target dimension d = {} exceeds the ambient dimension {ambient_dim}",
                self.d
            )));
        }
        if self.k >= n_points {
            return Err(invalid(format!(
                "neighborhood size k = {} needs more than k points, cloud has {n_points}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EmbeddingSource {
    Ltsa,
    Encoder,
}

/// Low-dimensional coordinates, row-aligned with the cloud they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Matrix,
    pub source: EmbeddingSource,
}

/// Sizes of the connected components of the symmetrized neighbor graph,
/// largest first.
pub fn component_sizes(neighbors: &Neighbors) -> Vec<usize> {
    let n = neighbors.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut sizes = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        sizes[r] += 1;
    }
    let mut sizes: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

fn neighborhoods(cloud: &PointCloud, cfg: &LtsaConfig) -> Result<Neighbors> {
    cfg.validate(cloud.len(), cloud.dim())?;
    let nb = knn(&cloud.points, cfg.k)?;
    let sizes = component_sizes(&nb);
    if sizes.len() > 1 {
        return Err(Error::Disconnected {
            component_sizes: sizes,
        });
    }
    Ok(nb)
}

/// Orthonormal basis (columns) of the top-`d` principal directions of a
/// patch, expressed in patch-member space (`m×d`).
fn local_coordinates(patch: &Matrix, d: usize) -> Result<Matrix> {
    let m = patch.rows();
    let means = patch.column_means();
    let centered = Matrix::from_fn(m, patch.cols(), |i, j| patch[(i, j)] - means[j]);
    let gram = matmul(&centered, &centered.transpose())?;
    let eig = sym_eig(&gram)?;
    Ok(Matrix::from_fn(m, d, |i, j| eig.vectors[(i, m - 1 - j)]))
}

/// The `N×N` LTSA alignment matrix. Symmetric positive semidefinite with the
/// constant vector in its null space.
pub fn alignment_matrix(cloud: &PointCloud, cfg: &LtsaConfig) -> Result<Matrix> {
    let nb = neighborhoods(cloud, cfg)?;
    assemble(cloud, &nb, cfg.d)
}

fn assemble(cloud: &PointCloud, nb: &Neighbors, d: usize) -> Result<Matrix> {
    let n = cloud.len();
    let mut b = Matrix::zeros(n, n);
    let mut idx = Vec::with_capacity(nb.k() + 1);
    for i in 0..n {
        idx.clear();
        idx.push(i);
        idx.extend_from_slice(nb.of(i));
        let m = idx.len();
        let g = local_coordinates(&cloud.points.select_rows(&idx), d)?;
        let inv_m = 1.0 / m as f64;
        for (a, &ia) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                let proj: f64 = inv_m + crate::linalg::dot(g.row(a), g.row(c));
                let delta = if a == c { 1.0 } else { 0.0 };
                b[(ia, ic)] += delta - proj;
            }
        }
    }
    Ok(b)
}

/// Makes every column's largest-magnitude entry positive.
pub fn fix_signs(coords: &mut Matrix) {
    for j in 0..coords.cols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..coords.rows() {
            let v = coords[(i, j)];
            if libm::fabs(v) > best {
                best = libm::fabs(v);
                sign = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            for i in 0..coords.rows() {
                coords[(i, j)] = -coords[(i, j)];
            }
        }
    }
}

/// Global `d`-dimensional LTSA chart of the cloud: centered, unit covariance
/// (`coordsᵀ·coords = N·I`), column signs fixed by [`fix_signs`].
pub fn ltsa_embed(cloud: &PointCloud, cfg: &LtsaConfig) -> Result<Embedding> {
    let nb = neighborhoods(cloud, cfg)?;
    let b = assemble(cloud, &nb, cfg.d)?;
    let n = cloud.len();
    let d = cfg.d;
    let bottom = smallest_eigenpairs(&b, d + 1)?;

    // Remove the constant direction from the bottom eigenspace. When several
    // eigenvalues are numerically zero the solver may mix it into any of them.
    let mut w = bottom.vectors.clone();
    for j in 0..=d {
        let mean = w.column(j).iter().sum::<f64>() / n as f64;
        for i in 0..n {
            w[(i, j)] -= mean;
        }
    }
    let gram = matmul_tn(&w, &w)?;
    let svd = sym_eig(&gram)?;
    // top-d right singular vectors span the de-meaned space
    for j in 1..=d {
        let sigma = libm::sqrt(svd.values[j].max(0.0));
        if sigma < cfg.eig_floor {
            return Err(invalid(format!(
                "LTSA chart is degenerate: singular value {sigma:e} below eig_floor {:e}",
                cfg.eig_floor
            )));
        }
    }
    let mut basis = Matrix::zeros(n, d);
    for j in 0..d {
        let col = d - j;
        let sigma = libm::sqrt(svd.values[col]);
        for i in 0..n {
            let mut s = 0.0;
            for r in 0..=d {
                s += w[(i, r)] * svd.vectors[(r, col)];
            }
            basis[(i, j)] = s / sigma;
        }
    }
    // Rayleigh–Ritz inside the constant-free subspace restores eigen-ordering.
    let bq = matmul(&b, &basis)?;
    let h = matmul_tn(&basis, &bq)?;
    let ritz = sym_eig(&h)?;
    let mut coords = matmul(&basis, &ritz.vectors)?;

    let scale = libm::sqrt(n as f64);
    for j in 0..d {
        let col = coords.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let norm = libm::sqrt(col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>());
        for i in 0..n {
            coords[(i, j)] = (coords[(i, j)] - mean) / norm * scale;
        }
    }
    fix_signs(&mut coords);
    Ok(Embedding {
        coords,
        source: EmbeddingSource::Ltsa,
    })
}
