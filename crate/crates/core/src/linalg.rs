//! Dense linear-algebra kernel: row-major matrices, cyclic Jacobi
//! eigendecomposition, one-sided Jacobi SVD and rank/kernel/range helpers.
//!
//! Everything here is deterministic (fixed sweep orders, no randomized
//! pivoting), so repeated runs of the same computation produce identical
//! bytes. Matrices are small (a few hundred rows at most), which is the
//! regime where Jacobi methods are both simple and accurate.

use crate::{cast, Scalar};

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.concat() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diag(diag: &[S]) -> Self {
        let mut m = Mat::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Matrix with the given columns.
    pub fn from_cols(rows: usize, cols: &[Vec<S>]) -> Self {
        let mut m = Mat::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat<S> {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn mul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j) + other.at(i, j))
    }

    pub fn sub(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j) - other.at(i, j))
    }

    pub fn scaled(&self, a: S) -> Mat<S> {
        Mat::from_fn(self.rows, self.cols, |i, j| a * self.at(i, j))
    }

    pub fn symmetrized(&self) -> Mat<S> {
        assert!(self.is_square());
        let half = cast::<S>(0.5);
        Mat::from_fn(self.rows, self.cols, |i, j| (self.at(i, j) + self.at(j, i)) * half)
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat<S> {
        Mat::from_fn(rows, cols, |i, j| self.at(r0 + i, c0 + j))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat<S>) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b.at(i, j);
            }
        }
    }

    pub fn hstack(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.rows, other.rows);
        let mut m = Mat::zeros(self.rows, self.cols + other.cols);
        m.set_block(0, 0, self);
        m.set_block(0, self.cols, other);
        m
    }
}

impl<S: Scalar> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> std::fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:?}", self.at(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Eigendecomposition of a symmetric matrix: `a = vectors * diag(values) * vectors^T`.
pub struct EigenSym<S> {
    /// Eigenvalues in ascending order.
    pub values: Vec<S>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Mat<S>,
}

const MAX_JACOBI_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Off-diagonal entries are annihilated in a fixed row-major sweep order
/// until their Frobenius mass drops below machine precision relative to the
/// matrix norm. Converges to full accuracy for every symmetric input.
pub fn eigen_sym<S: Scalar>(a: &Mat<S>) -> EigenSym<S> {
    assert!(a.is_square(), "eigen_sym needs a square matrix");
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return EigenSym { values: (0..n).map(|i| m.at(i, i)).collect(), vectors: v };
    }

    let norm = frob(&m).max(S::min_positive_value());
    let stop = S::epsilon() * norm;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = S::zero();
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += m.at(p, q) * m.at(p, q);
            }
        }
        if (off + off).sqrt() <= stop {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m.at(p, q);
                if apq.abs() <= stop * cast(1e-3) {
                    continue;
                }
                let app = m.at(p, p);
                let aqq = m.at(q, q);
                let theta = (aqq - app) / (cast::<S>(2.0) * apq);
                let t = {
                    let s = if theta >= S::zero() { S::one() } else { -S::one() };
                    s / (theta.abs() + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;
                // rotate rows/columns p and q of m
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<S> = (0..n).map(|i| m.at(i, i)).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("NaN eigenvalue"));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v.at(i, order[j]));
    EigenSym { values, vectors }
}

fn frob<S: Scalar>(m: &Mat<S>) -> S {
    m.data.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Thin singular-value decomposition `a = u * diag(sigma) * v^T`.
pub struct Svd<S> {
    /// Left singular vectors as columns (`m x k`); columns for vanishing
    /// singular values are zero.
    pub u: Mat<S>,
    /// Singular values in descending order, length `k = cols`.
    pub sigma: Vec<S>,
    /// Full orthogonal matrix of right singular vectors (`n x n`).
    pub v: Mat<S>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of a working copy are rotated until pairwise orthogonal; column
/// norms are then the singular values and the accumulated rotations give a
/// full right factor, so the kernel comes out even for rank-deficient or
/// wide input. Small singular values are computed to high relative accuracy,
/// which is what the rank thresholds rely on.
pub fn svd<S: Scalar>(a: &Mat<S>) -> Svd<S> {
    let n = a.cols();
    let m = a.rows();
    let work_rows = m.max(n);
    let mut w = Mat::zeros(work_rows, n);
    w.set_block(0, 0, a);
    let mut v = Mat::identity(n);

    if n > 0 {
        let eps = S::epsilon();
        for _ in 0..MAX_JACOBI_SWEEPS {
            let mut rotated = false;
            for p in 0..n.saturating_sub(1) {
                for q in p + 1..n {
                    let mut alpha = S::zero();
                    let mut beta = S::zero();
                    let mut gamma = S::zero();
                    for i in 0..work_rows {
                        let wp = w.at(i, p);
                        let wq = w.at(i, q);
                        alpha += wp * wp;
                        beta += wq * wq;
                        gamma += wp * wq;
                    }
                    if alpha == S::zero() || beta == S::zero() {
                        continue;
                    }
                    if gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (cast::<S>(2.0) * gamma);
                    let t = {
                        let s = if zeta >= S::zero() { S::one() } else { -S::one() };
                        s / (zeta.abs() + (S::one() + zeta * zeta).sqrt())
                    };
                    let c = S::one() / (S::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..work_rows {
                        let wp = w.at(i, p);
                        let wq = w.at(i, q);
                        w[(i, p)] = c * wp - s * wq;
                        w[(i, q)] = s * wp + c * wq;
                    }
                    for i in 0..n {
                        let vp = v.at(i, p);
                        let vq = v.at(i, q);
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
    }

    let mut sigma: Vec<S> = (0..n)
        .map(|j| (0..work_rows).map(|i| w.at(i, j) * w.at(i, j)).sum::<S>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("NaN singular value"));
    let v_sorted = Mat::from_fn(n, n, |i, j| v.at(i, order[j]));
    let mut u = Mat::zeros(m, n);
    let sorted_sigma: Vec<S> = order.iter().map(|&i| sigma[i]).collect();
    for j in 0..n {
        let s = sorted_sigma[j];
        if s > S::zero() {
            for i in 0..m {
                u[(i, j)] = w.at(i, order[j]) / s;
            }
        }
    }
    sigma = sorted_sigma;
    Svd { u, sigma, v: v_sorted }
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank_from_sigma<S: Scalar>(sigma: &[S], tol: S) -> usize {
    let top = sigma.first().copied().unwrap_or(S::zero());
    if top <= S::zero() {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * top).count()
}

/// True when some singular value sits inside the decision band
/// `[tol/band, tol*band] * sigma_max`, so the rank call is fragile.
pub fn rank_ambiguous<S: Scalar>(sigma: &[S], tol: S, band: S) -> bool {
    let top = sigma.first().copied().unwrap_or(S::zero());
    if top <= S::zero() {
        return false;
    }
    sigma.iter().any(|&s| {
        let r = s / top;
        r >= tol / band && r <= tol * band
    })
}

/// Orthonormal basis of the null space of `a`, as columns of an
/// `n x (n - rank)` matrix.
pub fn kernel_basis<S: Scalar>(a: &Mat<S>, tol: S) -> Mat<S> {
    let n = a.cols();
    if a.rows() == 0 {
        return Mat::identity(n);
    }
    let dec = svd(a);
    let r = rank_from_sigma(&dec.sigma, tol);
    Mat::from_fn(n, n - r, |i, j| dec.v.at(i, r + j))
}

/// Orthonormal basis of the column space of `a`, as columns of an
/// `m x rank` matrix.
pub fn range_basis<S: Scalar>(a: &Mat<S>, tol: S) -> Mat<S> {
    let dec = svd(a);
    let r = rank_from_sigma(&dec.sigma, tol);
    dec.u.block(0, 0, a.rows(), r)
}

/// Orthonormal basis of the Euclidean orthogonal complement of the span of
/// the columns of `basis`.
pub fn orth_complement<S: Scalar>(basis: &Mat<S>, tol: S) -> Mat<S> {
    kernel_basis(&basis.transpose(), tol)
}

/// Dimension of the intersection of two column spans in the same ambient
/// space: `dim A + dim B - dim(A + B)`.
pub fn intersect_dim<S: Scalar>(a: &Mat<S>, b: &Mat<S>, tol: S) -> usize {
    assert_eq!(a.rows(), b.rows(), "ambient dimension mismatch");
    let ra = rank_from_sigma(&svd(a).sigma, tol);
    let rb = rank_from_sigma(&svd(b).sigma, tol);
    let rab = rank_from_sigma(&svd(&a.hstack(b)).sigma, tol);
    ra + rb - rab
}

/// Determinant by LU factorization with partial pivoting.
pub fn det<S: Scalar>(a: &Mat<S>) -> S {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return S::one();
    }
    let mut m = a.clone();
    let mut d = S::one();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m.at(i, k).abs() > m.at(piv, k).abs() {
                piv = i;
            }
        }
        if m.at(piv, k) == S::zero() {
            return S::zero();
        }
        if piv != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                m[(k, j)] = m.at(piv, j);
                m[(piv, j)] = tmp;
            }
            d = -d;
        }
        d = d * m.at(k, k);
        for i in k + 1..n {
            let f = m.at(i, k) / m.at(k, k);
            for j in k..n {
                let v = m.at(k, j);
                m[(i, j)] = m.at(i, j) - f * v;
            }
        }
    }
    d
}

/// Minimum-norm least-squares solution of `a x = rhs` via the SVD
/// pseudo-inverse (columns of `rhs` solved independently).
pub fn solve_least_squares<S: Scalar>(a: &Mat<S>, rhs: &Mat<S>, tol: S) -> Mat<S> {
    assert_eq!(a.rows(), rhs.rows());
    let dec = svd(a);
    let r = rank_from_sigma(&dec.sigma, tol);
    // x = V Sigma^+ U^T rhs
    let ut_rhs = dec.u.transpose().mul(rhs);
    let mut scaled = Mat::zeros(a.cols(), rhs.cols());
    for i in 0..r {
        for j in 0..rhs.cols() {
            scaled[(i, j)] = ut_rhs.at(i, j) / dec.sigma[i];
        }
    }
    dec.v.mul(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn eigen_recovers_diagonal() {
        let a = mat(&[&[2.0, 0.0], &[0.0, -3.0]]);
        let e = eigen_sym(&a);
        assert!((e.values[0] + 3.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = mat(&[&[4.0, 1.0, -2.0], &[1.0, 2.0, 0.3], &[-2.0, 0.3, -1.0]]);
        let e = eigen_sym(&a);
        let d = Mat::from_diag(&e.values);
        let back = e.vectors.mul(&d).mul(&e.vectors.transpose());
        assert!(back.sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn svd_rank_and_kernel() {
        // rank-1 matrix: kernel is 2-dimensional
        let a = mat(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[-1.0, -2.0, -3.0]]);
        let dec = svd(&a);
        assert_eq!(rank_from_sigma(&dec.sigma, 1e-10), 1);
        let k = kernel_basis(&a, 1e-10);
        assert_eq!(k.cols(), 2);
        assert!(a.mul(&k).max_abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        let a = mat(&[&[1.0, -0.5], &[0.25, 2.0], &[3.0, 0.1]]);
        let dec = svd(&a);
        let s = Mat::from_diag(&dec.sigma);
        let back = dec.u.mul(&s).mul(&dec.v.transpose());
        assert!(back.sub(&a).max_abs() < 1e-13);
    }

    #[test]
    fn kernel_of_empty_map_is_everything() {
        let a = Mat::<f64>::zeros(0, 4);
        let k = kernel_basis(&a, 1e-10);
        assert_eq!((k.rows(), k.cols()), (4, 4));
    }

    #[test]
    fn det_matches_lu_expectations() {
        let a = mat(&[&[0.0, 2.0], &[1.0, 0.0]]);
        assert!((det(&a) + 2.0).abs() < 1e-15);
        assert_eq!(det(&Mat::<f64>::identity(5)), 1.0);
    }

    #[test]
    fn intersection_dimension() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let b = mat(&[&[0.0], &[1.0], &[0.0]]);
        assert_eq!(intersect_dim(&a, &b, 1e-10), 1);
    }

    #[test]
    fn least_squares_solves_consistent_system() {
        let a = mat(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 2.0]]);
        let x_true = mat(&[&[0.5], &[-1.5]]);
        let rhs = a.mul(&x_true);
        let x = solve_least_squares(&a, &rhs, 1e-12);
        assert!(x.sub(&x_true).max_abs() < 1e-12);
    }
}
