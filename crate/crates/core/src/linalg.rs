//! Dense row-major matrices and the handful of factorizations the pipeline
//! needs: symmetric eigendecomposition (cyclic Jacobi), bottom-of-spectrum
//! eigenpairs for large PSD matrices (shift-invert subspace iteration on a
//! Cholesky factor), Householder least squares and exact k-nearest neighbors.
//!
//! Everything is double precision.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{invalid, Error, Result};
use crate::rng::SplitMix64;

/// Dense matrix, `data[i * cols + j]` holds entry `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(alloc::format!(
                "matrix data has {} entries, expected {rows}x{cols} = {}",
                data.len(),
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(invalid(alloc::format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        Ok(Matrix::from_fn(n, n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)])))
    }

    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "mat_vec",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        Ok(self.iter_rows().map(|r| dot(r, x)).collect())
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.rows.max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(dist_sq(a, b))
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul_tn",
            left: (a.cols, a.rows),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let brow = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            for (o, &bkj) in out.row_mut(i).iter_mut().zip(brow) {
                *o += aki * bkj;
            }
        }
    }
    Ok(out)
}

/// Eigenpairs sorted by ascending eigenvalue; `vectors` holds them column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }

    fn sorted(values: Vec<f64>, vectors: Matrix) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
        let n = vectors.rows;
        let sorted_values = order.iter().map(|&i| values[i]).collect();
        let sorted_vectors = Matrix::from_fn(n, order.len(), |r, c| vectors[(r, order[c])]);
        Self {
            values: sorted_values,
            vectors: sorted_vectors,
        }
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    libm::sqrt(s)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first. Eigenvalues come back in
/// ascending order with orthonormal eigenvectors as columns.
pub fn sym_eig(a: &Matrix) -> Result<EigenResult> {
    let mut a = a.symmetrized()?;
    let n = a.rows;
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if n == 0 || scale == 0.0 {
        return Ok(EigenResult::sorted(vec![0.0; n], v));
    }
    if !scale.is_finite() {
        return Err(Error::NonFinite("sym_eig input".into()));
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Below this the rotation cannot change either diagonal entry.
                if libm::fabs(apq) <= f64::EPSILON * 1e-2 * (libm::fabs(app) + libm::fabs(aqq))
                    || libm::fabs(apq) <= f64::MIN_POSITIVE * 1e4
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if libm::fabs(theta) > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp;
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            return Ok(EigenResult::sorted(values, v));
        }
    }
    Err(Error::NoConvergence {
        what: "jacobi eigensolver",
        iterations: JACOBI_MAX_SWEEPS,
        residual: off_diagonal_norm(&a),
    })
}

/// Matrices up to this order go through the dense Jacobi solver in
/// [`smallest_eigenpairs`]; larger ones use shift-invert subspace iteration.
pub const DENSE_EIG_LIMIT: usize = 256;

/// The `m` algebraically smallest eigenpairs of a symmetric positive
/// semidefinite matrix, ascending.
pub fn smallest_eigenpairs(a: &Matrix, m: usize) -> Result<EigenResult> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if m == 0 || m > a.rows {
        return Err(invalid(alloc::format!(
            "requested {m} eigenpairs of a {}x{} matrix",
            a.rows,
            a.rows
        )));
    }
    if a.rows <= DENSE_EIG_LIMIT {
        let full = sym_eig(a)?;
        Ok(truncate_eigen(full, m))
    } else {
        smallest_eigenpairs_subspace(a, m)
    }
}

fn truncate_eigen(full: EigenResult, m: usize) -> EigenResult {
    let n = full.vectors.rows;
    EigenResult {
        values: full.values[..m].to_vec(),
        vectors: Matrix::from_fn(n, m, |i, j| full.vectors[(i, j)]),
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Singular("cholesky"));
                }
                l[(i, i)] = libm::sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·X = B` in place, column block `b` (n×p).
fn cholesky_solve_in_place(l: &Matrix, b: &mut Matrix) {
    let n = l.rows;
    let p = b.cols;
    // forward: L y = b
    for i in 0..n {
        let lrow = l.row(i);
        for c in 0..p {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= lrow[k] * b[(k, c)];
            }
            b[(i, c)] = s / lrow[i];
        }
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let lii = l[(i, i)];
        for c in 0..p {
            b[(i, c)] /= lii;
        }
        let (head, tail) = b.data.split_at_mut(i * p);
        let xi = &tail[..p];
        let lrow = l.row(i);
        for k in 0..i {
            let lik = lrow[k];
            if lik == 0.0 {
                continue;
            }
            for (bk, &x) in head[k * p..(k + 1) * p].iter_mut().zip(xi) {
                *bk -= lik * x;
            }
        }
    }
}

/// Orthonormalizes the columns of `x` in place (modified Gram–Schmidt, two
/// passes). Returns the number of columns that collapsed to zero.
fn orthonormalize_columns(x: &mut Matrix, rng: &mut SplitMix64) -> usize {
    let (n, p) = x.shape();
    let mut collapsed = 0;
    for j in 0..p {
        for _pass in 0..2 {
            for i in 0..j {
                let mut d = 0.0;
                for r in 0..n {
                    d += x[(r, i)] * x[(r, j)];
                }
                for r in 0..n {
                    x[(r, j)] -= d * x[(r, i)];
                }
            }
        }
        let mut nrm = 0.0;
        for r in 0..n {
            nrm += x[(r, j)] * x[(r, j)];
        }
        nrm = libm::sqrt(nrm);
        if nrm < 1e-300 {
            collapsed += 1;
            for r in 0..n {
                x[(r, j)] = rng.uniform(-1.0, 1.0);
            }
            // one more projection for the replacement column
            for i in 0..j {
                let mut d = 0.0;
                for r in 0..n {
                    d += x[(r, i)] * x[(r, j)];
                }
                for r in 0..n {
                    x[(r, j)] -= d * x[(r, i)];
                }
            }
            nrm = 0.0;
            for r in 0..n {
                nrm += x[(r, j)] * x[(r, j)];
            }
            nrm = libm::sqrt(nrm);
        }
        for r in 0..n {
            x[(r, j)] /= nrm;
        }
    }
    collapsed
}

const SUBSPACE_MAX_ITERS: usize = 2000;
const SUBSPACE_TOL: f64 = 1e-11;

/// Bottom eigenpairs by block inverse iteration on `A + σI` with a
/// Rayleigh–Ritz step every iteration. Exposed for testing against the dense
/// path on matrices small enough for both.
pub fn smallest_eigenpairs_subspace(a: &Matrix, m: usize) -> Result<EigenResult> {
    let a = a.symmetrized()?;
    let n = a.rows;
    if m == 0 || m > n {
        return Err(invalid(alloc::format!(
            "requested {m} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let p = n.min((2 * m).max(m + 8));
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(EigenResult::sorted(
            vec![0.0; m],
            Matrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 }),
        ));
    }
    let max_diag = (0..n).map(|i| libm::fabs(a[(i, i)])).fold(0.0, f64::max);
    let mut shift = 1e-8 * max_diag.max(scale / libm::sqrt(n as f64));
    let factor = loop {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        match cholesky(&shifted) {
            Ok(l) => break l,
            Err(_) if shift < scale => shift *= 100.0,
            Err(e) => return Err(e),
        }
    };

    let mut rng = SplitMix64::new(0x005e_ed0f_e16e);
    let mut x = Matrix::from_fn(n, p, |_, _| rng.uniform(-1.0, 1.0));
    orthonormalize_columns(&mut x, &mut rng);

    let mut worst = f64::INFINITY;
    for _ in 0..SUBSPACE_MAX_ITERS {
        cholesky_solve_in_place(&factor, &mut x);
        orthonormalize_columns(&mut x, &mut rng);
        let ax = matmul(&a, &x)?;
        let h = matmul_tn(&x, &ax)?;
        let ritz = sym_eig(&h)?;
        x = matmul(&x, &ritz.vectors)?;
        let ax = matmul(&ax, &ritz.vectors)?;
        worst = 0.0;
        for j in 0..m {
            let lambda = ritz.values[j];
            let mut r = 0.0;
            for i in 0..n {
                let d = ax[(i, j)] - lambda * x[(i, j)];
                r += d * d;
            }
            worst = f64::max(worst, libm::sqrt(r));
        }
        if worst <= SUBSPACE_TOL * scale {
            return Ok(EigenResult {
                values: ritz.values[..m].to_vec(),
                vectors: Matrix::from_fn(n, m, |i, j| x[(i, j)]),
            });
        }
    }
    Err(Error::NoConvergence {
        what: "subspace iteration",
        iterations: SUBSPACE_MAX_ITERS,
        residual: worst / scale,
    })
}

/// Least-squares solution of `A·X ≈ B` by Householder QR (A is n×p, n ≥ p,
/// full column rank).
pub fn lstsq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (n, p) = a.shape();
    if b.rows != n {
        return Err(Error::DimensionMismatch {
            op: "lstsq",
            left: a.shape(),
            right: b.shape(),
        });
    }
    if n < p {
        return Err(invalid(alloc::format!(
            "least squares needs at least as many rows as columns, got {n}x{p}"
        )));
    }
    let q = b.cols;
    let mut r = a.clone();
    let mut rhs = b.clone();
    let col_scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for k in 0..p {
        let mut alpha = 0.0;
        for i in k..n {
            alpha += r[(i, k)] * r[(i, k)];
        }
        alpha = libm::sqrt(alpha);
        if alpha <= 1e-13 * col_scale {
            return Err(Error::Singular("lstsq"));
        }
        if r[(k, k)] > 0.0 {
            alpha = -alpha;
        }
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                r[(i, j)] -= s * v[i - k];
            }
        }
        for j in 0..q {
            let s: f64 = (k..n).map(|i| v[i - k] * rhs[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                rhs[(i, j)] -= s * v[i - k];
            }
        }
    }
    let mut x = Matrix::zeros(p, q);
    for j in 0..q {
        for i in (0..p).rev() {
            let mut s = rhs[(i, j)];
            for k in (i + 1)..p {
                s -= r[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Row `i` lists the `k` nearest other rows of the point matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    k: usize,
    idx: Vec<usize>,
}

impl Neighbors {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.idx.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.idx[i * self.k..(i + 1) * self.k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.idx.chunks_exact(self.k)
    }
}

/// Exact k-nearest-neighbor table under the Euclidean metric. A point is never
/// its own neighbor; equal distances are broken by the lower index.
pub fn knn(points: &Matrix, k: usize) -> Result<Neighbors> {
    let n = points.rows;
    if k == 0 || k >= n {
        return Err(invalid(alloc::format!(
            "knn needs 0 < k < N, got k = {k} with N = {n}"
        )));
    }
    let mut idx = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        let pi = points.row(i);
        for j in 0..n {
            if j != i {
                cand.push((dist_sq(pi, points.row(j)), j));
            }
        }
        let by_dist = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_dist);
        }
        let head = &mut cand[..k];
        head.sort_unstable_by(by_dist);
        idx.extend(head.iter().map(|c| c.1));
    }
    Ok(Neighbors { k, idx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = SplitMix64::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
    }

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        random(n, n, seed).symmetrized().unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let a = random(3, 4, 1);
        assert_eq!(matmul(&Matrix::identity(3), &a).unwrap(), a);
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let v = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let p = matmul(&m, &v).unwrap();
        assert_eq!(p.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = random(5, 7, 2);
        let b = random(7, 3, 3);
        let c = matmul(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..7 {
                    s += a[(i, k)] * b[(k, j)];
                }
                assert!((c[(i, j)] - s).abs() < 1e-12);
            }
        }
        let tn = matmul_tn(&a.transpose(), &b).unwrap();
        for (x, y) in tn.data().iter().zip(c.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = std::format!("{err}");
        assert!(msg.contains("2x3") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn eig_diagonal() {
        let r = sym_eig(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(r.values, [1.0, 2.0, 3.0]);
        // permuted identity columns
        assert_eq!(r.vector(0), [0.0, 1.0, 0.0]);
        assert_eq!(r.vector(1), [0.0, 0.0, 1.0]);
        assert_eq!(r.vector(2), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn eig_two_by_two() {
        let r = sym_eig(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-14);
        assert!((r.values[1] - 3.0).abs() < 1e-14);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let v0 = r.vector(0);
        let v1 = r.vector(1);
        assert!((v0[0].abs() - h).abs() < 1e-14 && (v0[0] + v0[1]).abs() < 1e-14);
        assert!((v1[0].abs() - h).abs() < 1e-14 && (v1[0] - v1[1]).abs() < 1e-14);
    }

    fn reconstruction_error(a: &Matrix, r: &EigenResult) -> f64 {
        let lam = Matrix::diag(&r.values);
        let vl = matmul(&r.vectors, &lam).unwrap();
        let rec = matmul(&vl, &r.vectors.transpose()).unwrap();
        rec.sub(a).unwrap().frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn eig_random_reconstructs() {
        let a = random_symmetric(20, 4);
        let r = sym_eig(&a).unwrap();
        assert!(reconstruction_error(&a, &r) < 1e-8);
        let vtv = matmul_tn(&r.vectors, &r.vectors).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - e).abs() < 1e-10);
            }
        }
        assert!(r.values.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = r.values.iter().sum();
        assert!((sum - a.trace()).abs() <= 1e-9 * a.trace().abs().max(1.0));
    }

    #[test]
    fn eig_product_is_determinant() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]).unwrap();
        let det = 4.0 * (3.0 * 2.0 - 0.04) - 1.0 * (1.0 * 2.0 - 0.2 * 0.5) + 0.5 * (0.2 - 3.0 * 0.5);
        let r = sym_eig(&a).unwrap();
        let prod: f64 = r.values.iter().product();
        assert!((prod - det).abs() < 1e-12 * det.abs());
    }

    #[test]
    fn eig_rejects_non_square() {
        assert!(matches!(
            sym_eig(&Matrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    fn random_psd(n: usize, seed: u64) -> Matrix {
        let g = random(n, n, seed);
        matmul_tn(&g, &g).unwrap()
    }

    #[test]
    fn smallest_pairs_path_laplacian() {
        let l = Matrix::from_rows(&[
            [1.0, -1.0, 0.0, 0.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.0, 0.0, -1.0, 1.0],
        ])
        .unwrap();
        let r = smallest_eigenpairs(&l, 1).unwrap();
        assert!(r.values[0].abs() < 1e-12);
        let v = r.vector(0);
        for x in &v {
            assert!((x.abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn smallest_pairs_match_full_spectrum() {
        let a = random_psd(30, 5);
        let full = sym_eig(&a).unwrap();
        let bottom = smallest_eigenpairs(&a, 5).unwrap();
        for j in 0..5 {
            assert!((full.values[j] - bottom.values[j]).abs() < 1e-8);
        }
        assert!(bottom.values[0] >= -1e-8);
        assert!(smallest_eigenpairs(&a, 31).is_err());
        assert!(smallest_eigenpairs(&a, 0).is_err());
    }

    #[test]
    fn subspace_iteration_agrees_with_jacobi() {
        // PSD with a nontrivial null space, like an alignment matrix.
        let n = 120;
        let g = random(n - 3, n, 6);
        let a = matmul_tn(&g, &g).unwrap();
        let full = sym_eig(&a).unwrap();
        let sub = smallest_eigenpairs_subspace(&a, 6).unwrap();
        let scale = a.frobenius_norm();
        for j in 0..6 {
            assert!(
                (full.values[j] - sub.values[j]).abs() < 1e-8 * scale,
                "{j}: {} vs {}",
                full.values[j],
                sub.values[j]
            );
            let v = sub.vector(j);
            let av = a.mat_vec(&v).unwrap();
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - sub.values[j] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-8 * scale);
        }
    }

    #[test]
    fn cholesky_roundtrip() {
        let mut a = random_psd(10, 8);
        for i in 0..10 {
            a[(i, i)] += 1.0;
        }
        let l = cholesky(&a).unwrap();
        let rec = matmul(&l, &l.transpose()).unwrap();
        assert!(rec.sub(&a).unwrap().frobenius_norm() < 1e-12 * a.frobenius_norm());
        let b = random(10, 2, 9);
        let mut x = b.clone();
        cholesky_solve_in_place(&l, &mut x);
        let ax = matmul(&a, &x).unwrap();
        assert!(ax.sub(&b).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn lstsq_exact_system() {
        let a = random(8, 3, 10);
        let x_true = random(3, 2, 11);
        let b = matmul(&a, &x_true).unwrap();
        let x = lstsq(&a, &b).unwrap();
        assert!(x.sub(&x_true).unwrap().frobenius_norm() < 1e-12);
        let rank_deficient = Matrix::from_fn(5, 2, |i, _| i as f64);
        assert!(lstsq(&rank_deficient, &random(5, 1, 1)).is_err());
    }

    #[test]
    fn knn_small_cases() {
        let line = Matrix::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let nb = knn(&line, 1).unwrap();
        let flat: Vec<usize> = nb.iter().flatten().copied().collect();
        assert_eq!(flat, [1, 0, 1]);

        // equilateral with exactly representable squared side lengths
        let tri = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let nb = knn(&tri, 2).unwrap();
        assert_eq!(nb.of(0), [1, 2]);
        assert_eq!(nb.of(1), [0, 2]);
        assert_eq!(nb.of(2), [0, 1]);

        assert!(knn(&tri, 3).is_err());
    }

    #[test]
    fn knn_matches_brute_force_sort() {
        let pts = random(200, 3, 12);
        let nb = knn(&pts, 8).unwrap();
        for i in 0..200 {
            let mut all: Vec<(f64, usize)> = (0..200)
                .filter(|&j| j != i)
                .map(|j| (dist_sq(pts.row(i), pts.row(j)), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all[..8].iter().map(|x| x.1).collect();
            assert_eq!(nb.of(i), expect.as_slice());
        }
    }
}
