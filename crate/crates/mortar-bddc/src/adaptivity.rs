//! Per-interface scaling matrices, the parallel sum, the generalized
//! eigenproblem selecting the coarse space, the eigenvalue split at the
//! tolerance, and the transformed scalings.
//!
//! For an interface F shared by subdomains i and j the eigenproblem is
//!
//! ```text
//! (D_i^T S_j D_i + D_j^T S_i D_j) v = lambda (Sbar_i : Sbar_j) v
//! ```
//!
//! with `:` the parallel sum `B (A + B)^+ A`. Eigenvectors with lambda <=
//! Theta span the dual part of the transformed basis, the rest (including
//! directions deflated from the PSD right-hand side, which act as
//! lambda = +inf) become primal.

use crate::linalg::{self, GevpResult, Matrix, SpdFactor, DEFLATION_TOL};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdaptivityError {
    #[error("deluxe scaling: S_i + S_j is singular")]
    SingularScalingSum,
    #[error("transformation matrix is ill-conditioned (cond = {0:.3e})")]
    IllConditionedTransformation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingKind {
    /// Both weights are I/2.
    Multiplicity,
    /// Weights built from the edge Schur complements,
    /// `D_i = (S_i + S_j)^{-1} S_i`.
    Deluxe,
}

/// Pair of interface scaling matrices with `D_i + D_j = I`.
#[derive(Debug, Clone)]
pub struct ScalingPair {
    pub kind: ScalingKind,
    pub d: [Matrix; 2],
}

pub fn multiplicity_scaling(n: usize) -> ScalingPair {
    let half = Matrix::identity(n, n) * 0.5;
    ScalingPair {
        kind: ScalingKind::Multiplicity,
        d: [half.clone(), half],
    }
}

pub fn deluxe_scaling(s_i: &Matrix, s_j: &Matrix) -> Result<ScalingPair, AdaptivityError> {
    let sum = s_i + s_j;
    let factor = SpdFactor::new(&sum).map_err(|_| AdaptivityError::SingularScalingSum)?;
    Ok(ScalingPair {
        kind: ScalingKind::Deluxe,
        d: [factor.solve_mat(s_i), factor.solve_mat(s_j)],
    })
}

/// Parallel sum `A : B = B (A + B)^+ A`, symmetrized. PSD-monotone in both
/// arguments.
pub fn parallel_sum(a: &Matrix, b: &Matrix, tol: f64) -> Matrix {
    let p = b * linalg::pinv(&(a + b), tol) * a;
    (&p + p.transpose()) * 0.5
}

/// Generalized eigenproblem of one interface. Near-null directions of the
/// right-hand side are deflated and reported through [`GevpResult`]; they
/// are classified primal by the split.
pub fn edge_gevp(
    s_i: &Matrix,
    s_j: &Matrix,
    sbar_i: &Matrix,
    sbar_j: &Matrix,
    scaling: &ScalingPair,
) -> GevpResult {
    let d_i = &scaling.d[0];
    let d_j = &scaling.d[1];
    let lhs = d_i.transpose() * s_j * d_i + d_j.transpose() * s_i * d_j;
    let lhs = (&lhs + lhs.transpose()) * 0.5;
    let rhs = parallel_sum(sbar_i, sbar_j, DEFLATION_TOL);
    linalg::sym_gevp(&lhs, &rhs, DEFLATION_TOL)
}

/// Adaptive data of one interface: eigenvalues, the dual/primal split, the
/// transformation `T = [T_dual | T_primal]`, and the transformed scalings.
#[derive(Debug, Clone)]
pub struct EdgeAdaptivity {
    pub interface_id: usize,
    pub dim: usize,
    /// Finite generalized eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of deflated (right-hand-side null) directions.
    pub deflated: usize,
    pub n_delta: usize,
    pub n_pi: usize,
    /// Columns: `n_delta` dual eigenvectors, then the primal ones.
    pub t: Matrix,
    /// Transformed scalings `T^{-1} D_side T`, one per side.
    pub d_check: [Matrix; 2],
}

/// How eigenpairs are classified into dual and primal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// lambda <= theta goes dual, the rest (and all deflated directions)
    /// primal.
    Threshold(f64),
    /// Force an empty dual set.
    AllPrimal,
    /// Force an empty primal set.
    AllDual,
}

/// Assemble the transformation from the GEVP output; `d_check` is filled by
/// [`attach_scalings`].
pub fn split_transformation(
    gevp: &GevpResult,
    rule: SplitRule,
    interface_id: usize,
) -> EdgeAdaptivity {
    let n_finite = gevp.eigenvalues.len();
    let n_deflated = gevp.deflated.ncols();
    let dim = n_finite + n_deflated;
    let n_delta = match rule {
        SplitRule::Threshold(theta) => gevp
            .eigenvalues
            .iter()
            .take_while(|&&lam| lam <= theta)
            .count(),
        SplitRule::AllPrimal => 0,
        SplitRule::AllDual => dim,
    };
    let mut t = Matrix::zeros(dim, dim);
    match rule {
        SplitRule::AllDual => {
            // Dual set takes every column, deflated directions last.
            for c in 0..n_finite {
                t.set_column(c, &gevp.eigenvectors.column(c));
            }
            for c in 0..n_deflated {
                t.set_column(n_finite + c, &gevp.deflated.column(c));
            }
        }
        _ => {
            for c in 0..n_finite {
                t.set_column(c, &gevp.eigenvectors.column(c));
            }
            // Deflated directions append to the primal block; they are
            // orthonormal and independent of the finite eigenvectors.
            for c in 0..n_deflated {
                t.set_column(n_finite + c, &gevp.deflated.column(c));
            }
        }
    }
    EdgeAdaptivity {
        interface_id,
        dim,
        eigenvalues: gevp.eigenvalues.clone(),
        deflated: n_deflated,
        n_delta,
        n_pi: dim - n_delta,
        t,
        d_check: [Matrix::zeros(0, 0), Matrix::zeros(0, 0)],
    }
}

/// Similarity transform of one scaling matrix, `T^{-1} D T`. Rejects an
/// ill-conditioned transformation (degenerate eigenbasis).
pub fn transformed_scaling(t: &Matrix, d: &Matrix) -> Result<Matrix, AdaptivityError> {
    let cond = linalg::cond_2(t);
    if !cond.is_finite() || cond > 1e12 {
        return Err(AdaptivityError::IllConditionedTransformation(cond));
    }
    let lu = t.clone().lu();
    let dt = d * t;
    let solved = lu
        .solve(&dt)
        .ok_or(AdaptivityError::IllConditionedTransformation(f64::INFINITY))?;
    Ok(solved)
}

/// Fill both transformed scalings of the edge. The second side is stored as
/// the complement `I - D_check_i`, which keeps the partition of unity exact
/// instead of leaving it at the roundoff of two independent similarity
/// transforms.
pub fn attach_scalings(
    adapt: &mut EdgeAdaptivity,
    scaling: &ScalingPair,
) -> Result<(), AdaptivityError> {
    let first = transformed_scaling(&adapt.t, &scaling.d[0])?;
    let second = Matrix::identity(adapt.dim, adapt.dim) - &first;
    adapt.d_check = [first, second];
    Ok(())
}

/// Full adaptive construction for one interface.
pub fn build_edge_adaptivity(
    interface_id: usize,
    s_i: &Matrix,
    s_j: &Matrix,
    sbar_i: &Matrix,
    sbar_j: &Matrix,
    kind: ScalingKind,
    rule: SplitRule,
) -> Result<(EdgeAdaptivity, ScalingPair), AdaptivityError> {
    let scaling = match kind {
        ScalingKind::Multiplicity => multiplicity_scaling(s_i.nrows()),
        ScalingKind::Deluxe => deluxe_scaling(s_i, s_j)?,
    };
    let gevp = edge_gevp(s_i, s_j, sbar_i, sbar_j, &scaling);
    let mut adapt = split_transformation(&gevp, rule, interface_id);
    attach_scalings(&mut adapt, &scaling)?;
    Ok((adapt, scaling))
}
