//! Mortar finite element discretization of 2D elliptic problems on
//! non-matching structured grids, reduced to the Lagrange-multiplier Schur
//! complement system and solved with PCG under an adaptive BDDC
//! preconditioner.
//!
//! The model problem is `-div(rho grad u) + eps u = f` on the unit square
//! with homogeneous Dirichlet data. The domain is split into axis-aligned
//! rectangular subdomains, each carrying an independent uniform triangulation
//! and a P1 or P2 nodal space; weak continuity across the non-matching
//! interfaces is enforced by Lagrange multipliers on the nonmortar side.
//! Eliminating the displacement unknowns leaves a dense-by-interface Schur
//! system in the multipliers, which is preconditioned by a BDDC operator
//! whose per-interface coarse components are selected adaptively from
//! generalized eigenvalue problems built on edge Schur complements and their
//! parallel sum.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense SPD/eigen/pseudo-inverse kernels and a banded Cholesky
//! - [`geometry`]: partitions, triangulations, nodal spaces, interfaces
//! - [`coefficients`]: constant / channel / random coefficient fields
//! - [`assembly`]: per-subdomain stiffness-plus-mass matrices and loads
//! - [`mortar`]: multiplier spaces and signed cross-mesh coupling blocks
//! - [`schur`]: subdomain and edge Schur complements, global action, rhs
//! - [`adaptivity`]: scalings, parallel sum, edge eigenproblems, splits
//! - [`bddc`]: partially assembled operator and the preconditioner action
//! - [`krylov`]: PCG with extreme-eigenvalue estimation
//! - [`harness`]: experiment configs, pipeline, reports, dense oracle

pub mod adaptivity;
pub mod assembly;
pub mod bddc;
pub mod coefficients;
pub mod geometry;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod mortar;
pub mod quadrature;
pub mod schur;

pub use linalg::{Matrix, Vector};
