//! Dense Schur complements in multiplier space.
//!
//! Per subdomain, `S^(i) = B_i A_i^{-1} B_i^T` over all multiplier dofs on
//! its interfaces (one banded factorization, multi-RHS solves). Per edge and
//! side, the principal block `S_F` and the block Schur complement `Sbar_F`
//! obtained by eliminating the other edges' multipliers. The global action
//! `lambda -> S lambda` and the reduced right-hand side `g = B A^{-1} f` are
//! assembled by fixed-order subdomain summation.

use crate::assembly::LocalMatrix;
use crate::geometry::FESpace;
use crate::linalg::{BandedCholesky, LinalgError, Matrix, SpdFactor, Vector};
use crate::mortar::CouplingBlock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchurError {
    #[error("subdomain {subdomain}: local factorization failed: {source}")]
    LocalFactorization {
        subdomain: usize,
        source: LinalgError,
    },
    #[error("subdomain {subdomain}: eliminating edges other than {interface} hit a singular block")]
    SingularElimination { subdomain: usize, interface: usize },
    #[error("interface {0} is not on this subdomain")]
    UnknownInterface(usize),
}

/// Multiplier-space Schur complement of one subdomain, blocked by interface.
pub struct SubdomainSchur {
    pub subdomain_id: usize,
    /// Ascending interface ids on this subdomain.
    pub interface_ids: Vec<usize>,
    /// Block offsets; `offsets[len] = dim`.
    pub offsets: Vec<usize>,
    /// `S^(i) = B_i A_i^{-1} B_i^T`, symmetric positive (semi-)definite.
    pub matrix: Matrix,
}

impl SubdomainSchur {
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn position(&self, interface_id: usize) -> Option<usize> {
        self.interface_ids.iter().position(|&k| k == interface_id)
    }

    pub fn block_range(&self, pos: usize) -> std::ops::Range<usize> {
        self.offsets[pos]..self.offsets[pos + 1]
    }

    pub fn block(&self, pa: usize, pb: usize) -> Matrix {
        let ra = self.block_range(pa);
        let rb = self.block_range(pb);
        self.matrix
            .view((ra.start, rb.start), (ra.len(), rb.len()))
            .into_owned()
    }
}

/// Factored local matrix together with the subdomain Schur complement and
/// the local contribution to the reduced right-hand side.
pub struct SubdomainReduction {
    pub schur: SubdomainSchur,
    /// `g_i = B_i A_i^{-1} f_i`, blocked like the Schur matrix.
    pub rhs: Vector,
    /// Kept for solution recovery and debugging.
    pub factor: BandedCholesky,
}

/// Scatter the coupling blocks of one subdomain into a dense
/// `(free dofs) x (multiplier dofs)` right-hand-side matrix `B_i^T`.
fn stacked_coupling_transpose(
    space: &FESpace,
    blocks: &[(usize, &CouplingBlock)],
    offsets: &[usize],
) -> Matrix {
    let q = *offsets.last().unwrap();
    let mut bt = Matrix::zeros(space.num_free(), q);
    for (pos, (_, block)) in blocks.iter().enumerate() {
        for (col_local, &full_dof) in block.trace_dofs.iter().enumerate() {
            let Some(free) = space.full_to_free[full_dof] else {
                continue;
            };
            for l in 0..block.matrix.nrows() {
                bt[(free, offsets[pos] + l)] += block.matrix[(l, col_local)];
            }
        }
    }
    bt
}

/// Build `S^(i)` and `g_i` from the assembled local matrix, the subdomain's
/// coupling blocks (as `(interface_id, block)`, ascending by id), and the
/// local load vector over unmasked dofs.
pub fn subdomain_schur(
    local: LocalMatrix,
    space: &FESpace,
    blocks: &[(usize, &CouplingBlock)],
    load: &Vector,
) -> Result<SubdomainReduction, SchurError> {
    let subdomain_id = local.subdomain_id;
    debug_assert!(blocks.windows(2).all(|w| w[0].0 < w[1].0));
    let mut offsets = vec![0usize];
    for (_, block) in blocks {
        offsets.push(offsets.last().unwrap() + block.matrix.nrows());
    }
    let bt = stacked_coupling_transpose(space, blocks, &offsets);
    let factor = local
        .matrix
        .factor()
        .map_err(|source| SchurError::LocalFactorization {
            subdomain: subdomain_id,
            source,
        })?;
    let x = factor.solve_mat(&bt);
    let mut s = bt.transpose() * &x;
    // Exact symmetry by construction; enforce it against roundoff.
    s = (&s + s.transpose()) * 0.5;
    let rhs = bt.transpose() * factor.solve_vec(load);
    Ok(SubdomainReduction {
        schur: SubdomainSchur {
            subdomain_id,
            interface_ids: blocks.iter().map(|(k, _)| *k).collect(),
            offsets,
            matrix: s,
        },
        rhs,
        factor,
    })
}

/// Principal block and eliminated block of `S^(i)` for one interface.
pub struct EdgeSchur {
    /// `S_F`: principal block of the interface.
    pub s: Matrix,
    /// `Sbar_F`: Schur complement of the interface block after eliminating
    /// the subdomain's other interfaces.
    pub sbar: Matrix,
}

pub fn edge_schur(ss: &SubdomainSchur, interface_id: usize) -> Result<EdgeSchur, SchurError> {
    let pos = ss
        .position(interface_id)
        .ok_or(SchurError::UnknownInterface(interface_id))?;
    let rk = ss.block_range(pos);
    let s = ss.block(pos, pos);
    let others: Vec<usize> = (0..ss.dim()).filter(|d| !rk.contains(d)).collect();
    if others.is_empty() {
        return Ok(EdgeSchur { sbar: s.clone(), s });
    }
    let soo = Matrix::from_fn(others.len(), others.len(), |a, b| {
        ss.matrix[(others[a], others[b])]
    });
    let sko = Matrix::from_fn(rk.len(), others.len(), |a, b| {
        ss.matrix[(rk.start + a, others[b])]
    });
    let factor = SpdFactor::new(&soo).map_err(|_| SchurError::SingularElimination {
        subdomain: ss.subdomain_id,
        interface: interface_id,
    })?;
    let y = factor.solve_mat(&sko.transpose());
    let mut sbar = &s - &sko * y;
    sbar = (&sbar + sbar.transpose()) * 0.5;
    Ok(EdgeSchur { s, sbar })
}

/// Global multiplier numbering: one block per interface.
#[derive(Debug, Clone)]
pub struct MultiplierNumbering {
    pub offsets: Vec<usize>,
    pub total: usize,
}

impl MultiplierNumbering {
    pub fn new(dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        for &d in dims {
            offsets.push(acc);
            acc += d;
        }
        offsets.push(acc);
        Self {
            offsets,
            total: acc,
        }
    }

    pub fn range(&self, interface_id: usize) -> std::ops::Range<usize> {
        self.offsets[interface_id]..self.offsets[interface_id + 1]
    }
}

/// Apply the assembled global Schur complement: fixed subdomain order,
/// gather/scatter by interface block.
pub fn apply_global_schur(
    schurs: &[SubdomainSchur],
    numbering: &MultiplierNumbering,
    lambda: &Vector,
) -> Vector {
    let mut out = Vector::zeros(numbering.total);
    for ss in schurs {
        let mut local = Vector::zeros(ss.dim());
        for (pos, &k) in ss.interface_ids.iter().enumerate() {
            let src = numbering.range(k);
            let dst = ss.block_range(pos);
            local
                .rows_mut(dst.start, dst.len())
                .copy_from(&lambda.rows(src.start, src.len()));
        }
        let y = &ss.matrix * local;
        for (pos, &k) in ss.interface_ids.iter().enumerate() {
            let dst = numbering.range(k);
            let src = ss.block_range(pos);
            let mut view = out.rows_mut(dst.start, dst.len());
            view += y.rows(src.start, src.len());
        }
    }
    out
}

/// Assemble `g = sum_i B_i A_i^{-1} f_i` in the global numbering.
pub fn schur_rhs(reductions: &[SubdomainReduction], numbering: &MultiplierNumbering) -> Vector {
    let mut g = Vector::zeros(numbering.total);
    for red in reductions {
        for (pos, &k) in red.schur.interface_ids.iter().enumerate() {
            let dst = numbering.range(k);
            let src = red.schur.block_range(pos);
            let mut view = g.rows_mut(dst.start, dst.len());
            view += red.rhs.rows(src.start, src.len());
        }
    }
    g
}

/// Dense global Schur matrix (desk scale), for oracles and debugging.
pub fn dense_global_schur(schurs: &[SubdomainSchur], numbering: &MultiplierNumbering) -> Matrix {
    let mut s = Matrix::zeros(numbering.total, numbering.total);
    for ss in schurs {
        for (pa, &ka) in ss.interface_ids.iter().enumerate() {
            for (pb, &kb) in ss.interface_ids.iter().enumerate() {
                let blk = ss.block(pa, pb);
                let ra = numbering.range(ka);
                let rb = numbering.range(kb);
                let mut view = s.view_mut((ra.start, rb.start), (ra.len(), rb.len()));
                view += blk;
            }
        }
    }
    s
}
