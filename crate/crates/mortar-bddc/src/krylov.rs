//! Preconditioned conjugate gradients with extreme-eigenvalue estimates
//! from the CG coefficients.
//!
//! The stopping test is the 2-norm of the preconditioned residual relative
//! to its initial value; the initial guess is zero. The alpha/beta
//! coefficients feed the standard CG-Lanczos tridiagonal matrix whose
//! extreme eigenvalues estimate the spectrum of M^{-1} S.

use crate::linalg::{sym_eig, Matrix, Vector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("PCG did not reduce the preconditioned residual by {tol:e} within {maxit} iterations (reached {reached:e})")]
    NoConvergence { tol: f64, maxit: usize, reached: f64 },
}

/// PCG run data: solution, convergence flag, residual history, and the CG
/// coefficients needed for spectral estimates.
pub struct PcgOutcome {
    pub solution: Vector,
    pub iterations: usize,
    pub converged: bool,
    /// Relative preconditioned-residual history, starting at 1.
    pub residuals: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Solve `S x = g` with preconditioner action `apply_m`.
pub fn pcg(
    apply_s: &dyn Fn(&Vector) -> Vector,
    apply_m: &dyn Fn(&Vector) -> Vector,
    g: &Vector,
    tol: f64,
    maxit: usize,
) -> PcgOutcome {
    let n = g.len();
    let mut x = Vector::zeros(n);
    let mut r = g.clone();
    let mut z = apply_m(&r);
    let z0_norm = z.norm();
    let mut residuals = vec![1.0];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    if z0_norm == 0.0 {
        return PcgOutcome {
            solution: x,
            iterations: 0,
            converged: true,
            residuals,
            alphas,
            betas,
        };
    }
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..maxit {
        let sp = apply_s(&p);
        let alpha = rz / p.dot(&sp);
        alphas.push(alpha);
        x += &p * alpha;
        r -= sp * alpha;
        z = apply_m(&r);
        let rel = z.norm() / z0_norm;
        iterations += 1;
        residuals.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        p = &z + &p * beta;
    }
    PcgOutcome {
        solution: x,
        iterations,
        converged,
        residuals,
        alphas,
        betas,
    }
}

/// Extreme eigenvalues of the CG-Lanczos tridiagonal matrix built from the
/// alpha/beta sequences: T[m,m] = 1/alpha_m + beta_{m-1}/alpha_{m-1},
/// T[m,m+1] = sqrt(beta_m)/alpha_m.
pub fn lanczos_estimates(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    assert!(m >= 1, "need at least one CG iteration");
    let mut t = Matrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 1.0 / alphas[i];
        if i > 0 {
            diag += betas[i - 1] / alphas[i - 1];
        }
        t[(i, i)] = diag;
        if i + 1 < m {
            let off = betas[i].max(0.0).sqrt() / alphas[i];
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    let (vals, _) = sym_eig(&t);
    (vals[0], vals[m - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat_apply(m: Matrix) -> impl Fn(&Vector) -> Vector {
        move |v: &Vector| &m * v
    }

    #[test]
    fn one_by_one_system() {
        let s = mat_apply(Matrix::from_element(1, 1, 2.0));
        let m = mat_apply(Matrix::identity(1, 1));
        let g = Vector::from_element(1, 4.0);
        let out = pcg(&s, &m, &g, 1e-10, 10);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_abs_diff_eq!(out.solution[0], 2.0, epsilon = 1e-12);
        let (lo, hi) = lanczos_estimates(&out.alphas, &out.betas);
        assert_abs_diff_eq!(lo, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_preconditioner_converges_immediately() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let inv = a.clone().try_inverse().unwrap();
        let g = Vector::from_vec(vec![1.0, -1.0, 2.0]);
        let out = pcg(&mat_apply(a), &mat_apply(inv), &g, 1e-10, 10);
        assert!(out.converged);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn zero_rhs_is_trivial() {
        let a = Matrix::identity(2, 2);
        let out = pcg(
            &mat_apply(a.clone()),
            &mat_apply(a),
            &Vector::zeros(2),
            1e-10,
            5,
        );
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn diag_two_eigenvalues_estimated_exactly() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 10.0]));
        let id = Matrix::identity(2, 2);
        let g = Vector::from_vec(vec![1.0, 1.0]);
        let out = pcg(&mat_apply(a), &mat_apply(id), &g, 1e-12, 10);
        assert!(out.converged);
        assert_eq!(out.iterations, 2);
        let (lo, hi) = lanczos_estimates(&out.alphas, &out.betas);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(hi, 10.0, epsilon = 1e-8);
    }

    #[test]
    fn monotone_energy_error_decrease() {
        // CG decreases the energy-norm error every iteration.
        let n = 20;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 + (i as f64) * 0.37;
            if i + 1 < n {
                a[(i, i + 1)] = -0.7;
                a[(i + 1, i)] = -0.7;
            }
        }
        let g = Vector::from_fn(n, |i, _| ((i * 3 + 1) as f64).cos());
        let exact = a.clone().lu().solve(&g).unwrap();
        let id = Matrix::identity(n, n);
        // Replay PCG step by step to record intermediate iterates.
        let mut errs = Vec::new();
        for it in 1..=8usize {
            let out = pcg(&mat_apply(a.clone()), &mat_apply(id.clone()), &g, 0.0, it);
            let e = &exact - &out.solution;
            errs.push((e.transpose() * &a * &e)[(0, 0)]);
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "energy error not monotone");
        }
    }

    #[test]
    fn non_convergence_reported() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e6]));
        let id = Matrix::identity(2, 2);
        let g = Vector::from_vec(vec![1.0, 1.0]);
        let out = pcg(&mat_apply(a), &mat_apply(id), &g, 1e-14, 1);
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.residuals.len(), 2);
    }
}
