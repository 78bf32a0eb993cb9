//! Dense linear-algebra kernels shared by the whole solver.
//!
//! Everything is double precision and desk scale: factorizations are dense
//! (or banded for the subdomain stiffness matrices) and eigen-decompositions
//! go through `nalgebra`. The generalized symmetric eigensolver handles a
//! positive semi-definite right-hand side by spectral deflation, which is
//! what the parallel-sum eigenproblems need.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold below which right-hand-side directions are deflated in
/// [`sym_gevp`] and singular values are dropped in [`pinv`].
pub const DEFLATION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotSpd,
    #[error("matrix is singular")]
    Singular,
}

fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Largest entry of `A - A^T`, relative to the largest entry of `A`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

fn check_symmetric(a: &Matrix) -> Result<(), LinalgError> {
    let rel = asymmetry(a);
    if rel > 1e-8 {
        return Err(LinalgError::NotSymmetric(rel));
    }
    Ok(())
}

/// Cholesky factorization of a dense SPD matrix with multi-RHS solves.
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    dim: usize,
}

impl SpdFactor {
    /// Factor `a`. Fails if `a` is visibly asymmetric or not numerically
    /// positive definite.
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        check_symmetric(a)?;
        let dim = a.nrows();
        let chol = nalgebra::Cholesky::new(a.clone()).ok_or(LinalgError::NotSpd)?;
        Ok(Self { chol, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    /// Lower Cholesky factor `L` with `A = L L^T`.
    pub fn l_factor(&self) -> Matrix {
        self.chol.l()
    }
}

/// Solve `a x = b` for a single right-hand side.
pub fn spd_solve(a: &Matrix, b: &Vector) -> Result<Vector, LinalgError> {
    Ok(SpdFactor::new(a)?.solve_vec(b))
}

/// Symmetric banded SPD matrix in lower band storage.
///
/// Entry `(i, j)` with `j <= i <= j + bw` lives at `data[j * (bw + 1) + (i - j)]`.
/// This is what the subdomain stiffness matrices use: lattice numbering keeps
/// the bandwidth at a couple of grid lines.
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Add `v` at `(i, j)`; only the lower triangle is stored, so callers
    /// pass each symmetric pair once with `i >= j` (or rely on `add_sym`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw, "entry outside band");
        self.data[c * (self.bw + 1) + (r - c)] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            return 0.0;
        }
        self.data[c * (self.bw + 1) + (r - c)]
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// In-place banded Cholesky. Fails when a pivot is not strictly positive.
    #[allow(clippy::needless_range_loop)]
    pub fn factor(mut self) -> Result<BandedCholesky, LinalgError> {
        let bw = self.bw;
        let n = self.n;
        for j in 0..n {
            let djj = self.data[j * (bw + 1)];
            if !djj.is_finite() || djj <= 0.0 {
                return Err(LinalgError::NotSpd);
            }
            let ljj = djj.sqrt();
            self.data[j * (bw + 1)] = ljj;
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                self.data[j * (bw + 1) + (i - j)] /= ljj;
            }
            for k in (j + 1)..=hi {
                let lkj = self.data[j * (bw + 1) + (k - j)];
                if lkj == 0.0 {
                    continue;
                }
                for i in k..=hi {
                    let lij = self.data[j * (bw + 1) + (i - j)];
                    self.data[k * (bw + 1) + (i - k)] -= lij * lkj;
                }
            }
        }
        Ok(BandedCholesky {
            n,
            bw,
            data: self.data,
        })
    }
}

/// Factored form of [`BandedSpd`]; solves by forward/back substitution.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let bw = self.bw;
        // L y = b
        for j in 0..self.n {
            let xj = x[j] / self.data[j * (bw + 1)];
            x[j] = xj;
            let hi = (j + bw).min(self.n - 1);
            for i in (j + 1)..=hi {
                x[i] -= self.data[j * (bw + 1) + (i - j)] * xj;
            }
        }
        // L^T x = y
        for j in (0..self.n).rev() {
            let hi = (j + bw).min(self.n - 1);
            let mut s = x[j];
            for i in (j + 1)..=hi {
                s -= self.data[j * (bw + 1) + (i - j)] * x[i];
            }
            x[j] = s / self.data[j * (bw + 1)];
        }
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Solve against every column of `b`.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let slice: &mut [f64] = col.as_mut_slice();
            self.solve_in_place(slice);
        }
        x
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending,
/// eigenvectors orthonormal in the same column order.
pub fn sym_eig(a: &Matrix) -> (Vector, Matrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vector::zeros(0), Matrix::zeros(0, 0));
    }
    // Work on the symmetrized matrix so tiny assembly asymmetry cannot leak in.
    let sym = (a + a.transpose()) * 0.5;
    let decomp = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        decomp.eigenvalues[p]
            .partial_cmp(&decomp.eigenvalues[q])
            .unwrap()
    });
    let values = Vector::from_iterator(n, order.iter().map(|&p| decomp.eigenvalues[p]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Result of the generalized symmetric eigenproblem `A v = lambda B v` with a
/// PSD right-hand side `B`.
pub struct GevpResult {
    /// Finite eigenvalues, ascending, one per retained direction.
    pub eigenvalues: Vec<f64>,
    /// B-orthonormal eigenvectors (columns), matching `eigenvalues`.
    pub eigenvectors: Matrix,
    /// Orthonormal basis of the deflated (numerically B-null) directions.
    /// These behave as eigenvalue `+inf`.
    pub deflated: Matrix,
}

/// Generalized symmetric eigenproblem on the range of `B`.
///
/// Directions of `B` whose eigenvalue falls below `deflation_tol` times the
/// largest are reported separately in `deflated` instead of producing huge
/// unreliable eigenvalues.
pub fn sym_gevp(a: &Matrix, b: &Matrix, deflation_tol: f64) -> GevpResult {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    assert_eq!(b.ncols(), n);
    let (bvals, bvecs) = sym_eig(b);
    let bmax = bvals.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let cut = deflation_tol * bmax;
    let kept: Vec<usize> = (0..n).filter(|&l| bvals[l] > cut).collect();
    let dropped: Vec<usize> = (0..n).filter(|&l| bvals[l] <= cut).collect();

    let mut deflated = Matrix::zeros(n, dropped.len());
    for (c, &l) in dropped.iter().enumerate() {
        deflated.set_column(c, &bvecs.column(l));
    }

    let r = kept.len();
    if r == 0 {
        return GevpResult {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(n, 0),
            deflated,
        };
    }

    // Whitening map W = V_r diag(d^{-1/2}); the reduced problem is ordinary.
    let mut w = Matrix::zeros(n, r);
    for (c, &l) in kept.iter().enumerate() {
        let scale = 1.0 / bvals[l].sqrt();
        w.set_column(c, &(bvecs.column(l) * scale));
    }
    let reduced = w.transpose() * a * &w;
    let (vals, vecs) = sym_eig(&reduced);
    let eigenvectors = w * vecs;
    GevpResult {
        eigenvalues: vals.iter().copied().collect(),
        eigenvectors,
        deflated,
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix, truncating the
/// spectrum below `tol` times the largest eigenvalue.
pub fn pinv(a: &Matrix, tol: f64) -> Matrix {
    let n = a.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let (vals, vecs) = sym_eig(a);
    let vmax = vals.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let cut = tol * vmax;
    let inv = Vector::from_iterator(
        n,
        vals.iter().map(|&v| if v > cut { 1.0 / v } else { 0.0 }),
    );
    &vecs * Matrix::from_diagonal(&inv) * vecs.transpose()
}

/// 2-norm condition number via SVD.
pub fn cond_2(a: &Matrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &x| acc.max(x));
    let smin = sv.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}
