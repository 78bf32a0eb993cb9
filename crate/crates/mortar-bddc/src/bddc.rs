//! The partially assembled BDDC operator and its preconditioner action.
//!
//! Coordinates are taken in the transformed per-interface basis, so the
//! assembled interface space splits per edge into `n_delta` leading dual
//! slots and `n_pi` trailing primal slots. The partially assembled space
//! duplicates every edge's dual slots on both subdomains and shares one
//! copy of the primal slots:
//!
//! ```text
//! dim(hat)   = sum_k n_k
//! dim(tilde) = sum_i sum_{k in M_i} n_delta^k + sum_k n_pi^k
//! ```
//!
//! The preconditioner is applied in the concise operator form
//! `sum_i R_i (S_dd^(i))^{-1} R_i^T + R_0^T F^{-1} R_0` with cached
//! factorizations; the four-step reference form is exercised by tests.

use crate::adaptivity::EdgeAdaptivity;
use crate::linalg::{sym_eig, LinalgError, Matrix, SpdFactor, Vector};
use crate::schur::SubdomainSchur;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BddcError {
    #[error("subdomain {subdomain}: dual block factorization failed: {source}")]
    SingularDualBlock {
        subdomain: usize,
        source: LinalgError,
    },
    #[error("coarse matrix factorization failed: {0}")]
    SingularCoarse(LinalgError),
    #[error("layout mismatch: {0}")]
    Mismatch(String),
}

/// Per-subdomain slice of the layout.
#[derive(Debug, Clone)]
pub struct SubdomainLayout {
    pub subdomain_id: usize,
    /// Ascending interface ids on this subdomain.
    pub interfaces: Vec<usize>,
    /// Which side (0 or 1) this subdomain is on for each interface.
    pub side: Vec<usize>,
    /// Block offset of each interface in the subdomain's local transformed
    /// vector; last entry is the local dimension.
    pub local_offsets: Vec<usize>,
    /// Local indices of the dual slots, interface by interface.
    pub dual_indices: Vec<usize>,
    /// Local indices of the primal slots.
    pub pi_indices: Vec<usize>,
    /// Global primal index of each entry of `pi_indices`.
    pub pi_global: Vec<usize>,
    /// Offset of this subdomain's dual block in the tilde numbering.
    pub tilde_offset: usize,
}

impl SubdomainLayout {
    pub fn local_dim(&self) -> usize {
        *self.local_offsets.last().unwrap()
    }
}

/// Index structure of the assembled (hat) and partially assembled (tilde)
/// interface spaces.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub n_k: Vec<usize>,
    pub n_delta: Vec<usize>,
    pub n_pi: Vec<usize>,
    /// Interface offsets in the hat numbering.
    pub hat_offsets: Vec<usize>,
    pub dim_hat: usize,
    /// Interface offsets in the shared primal numbering.
    pub pi_offsets: Vec<usize>,
    pub dim_pi: usize,
    pub subdomains: Vec<SubdomainLayout>,
    /// Total duplicated dual size; tilde dim = dim_dual + dim_pi.
    pub dim_dual: usize,
}

impl DofLayout {
    pub fn dim_tilde(&self) -> usize {
        self.dim_dual + self.dim_pi
    }

    /// Total primal unknowns.
    pub fn pnum(&self) -> usize {
        self.dim_pi
    }

    /// Primal fraction of all multiplier unknowns.
    pub fn ppnum(&self) -> f64 {
        if self.dim_hat == 0 {
            0.0
        } else {
            self.dim_pi as f64 / self.dim_hat as f64
        }
    }
}

/// Build the layout from the interface pair list and the per-edge splits.
pub fn build_layout(
    num_subdomains: usize,
    pairs: &[(usize, usize)],
    adapt: &[EdgeAdaptivity],
) -> DofLayout {
    let m = pairs.len();
    assert_eq!(adapt.len(), m);
    let n_k: Vec<usize> = adapt.iter().map(|a| a.dim).collect();
    let n_delta: Vec<usize> = adapt.iter().map(|a| a.n_delta).collect();
    let n_pi: Vec<usize> = adapt.iter().map(|a| a.n_pi).collect();
    let mut hat_offsets = Vec::with_capacity(m);
    let mut pi_offsets = Vec::with_capacity(m);
    let (mut acc_hat, mut acc_pi) = (0usize, 0usize);
    for k in 0..m {
        hat_offsets.push(acc_hat);
        pi_offsets.push(acc_pi);
        acc_hat += n_k[k];
        acc_pi += n_pi[k];
    }
    let mut subdomains = Vec::with_capacity(num_subdomains);
    let mut tilde_offset = 0usize;
    for i in 0..num_subdomains {
        let mut interfaces = Vec::new();
        let mut side = Vec::new();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if a == i {
                interfaces.push(k);
                side.push(0);
            } else if b == i {
                interfaces.push(k);
                side.push(1);
            }
        }
        let mut local_offsets = vec![0usize];
        for &k in &interfaces {
            local_offsets.push(local_offsets.last().unwrap() + n_k[k]);
        }
        let mut dual_indices = Vec::new();
        let mut pi_indices = Vec::new();
        let mut pi_global = Vec::new();
        for (pos, &k) in interfaces.iter().enumerate() {
            let base = local_offsets[pos];
            dual_indices.extend(base..base + n_delta[k]);
            pi_indices.extend(base + n_delta[k]..base + n_k[k]);
            pi_global.extend(pi_offsets[k]..pi_offsets[k] + n_pi[k]);
        }
        let dual_len = dual_indices.len();
        subdomains.push(SubdomainLayout {
            subdomain_id: i,
            interfaces,
            side,
            local_offsets,
            dual_indices,
            pi_indices,
            pi_global,
            tilde_offset,
        });
        tilde_offset += dual_len;
    }
    DofLayout {
        n_k,
        n_delta,
        n_pi,
        hat_offsets,
        dim_hat: acc_hat,
        pi_offsets,
        dim_pi: acc_pi,
        subdomains,
        dim_dual: tilde_offset,
    }
}

/// Cached per-subdomain pieces of the operator.
pub struct SubdomainOperator {
    /// Transformed Schur matrix `T^T S^(i) T`.
    s_tilde: Matrix,
    /// Factor of the dual-dual block (absent when the dual set is empty).
    dual_factor: Option<SpdFactor>,
    /// Primal-dual coupling `[S~]_pd` (rows primal, cols dual).
    s_pd: Matrix,
    /// Precomputed `(S_dd)^{-1} S_dp`.
    k_dp: Matrix,
    /// Per interface position: leading `n_delta` columns of this side's
    /// transformed scaling.
    d_check_cols: Vec<Matrix>,
}

impl SubdomainOperator {
    pub fn s_tilde(&self) -> &Matrix {
        &self.s_tilde
    }

    pub fn d_check_cols(&self) -> &[Matrix] {
        &self.d_check_cols
    }
}

/// Partially assembled BDDC operator with cached factorizations.
pub struct BddcOperator {
    pub layout: DofLayout,
    subs: Vec<SubdomainOperator>,
    coarse_factor: Option<SpdFactor>,
    /// Assembled coarse matrix (empty when there are no primal dofs).
    pub f_pipi: Matrix,
}

fn gather(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub fn build_operator(
    schurs: &[SubdomainSchur],
    adapt: &[EdgeAdaptivity],
    layout: DofLayout,
) -> Result<BddcOperator, BddcError> {
    let mut subs = Vec::with_capacity(layout.subdomains.len());
    let mut f_pipi = Matrix::zeros(layout.dim_pi, layout.dim_pi);
    for sl in &layout.subdomains {
        let ss = &schurs[sl.subdomain_id];
        if ss.interface_ids != sl.interfaces {
            return Err(BddcError::Mismatch(format!(
                "subdomain {}: schur interfaces {:?} vs layout {:?}",
                sl.subdomain_id, ss.interface_ids, sl.interfaces
            )));
        }
        let q = sl.local_dim();
        // Block-diagonal transformation, then congruence.
        let mut t_blk = Matrix::zeros(q, q);
        for (pos, &k) in sl.interfaces.iter().enumerate() {
            let base = sl.local_offsets[pos];
            let t = &adapt[k].t;
            t_blk
                .view_mut((base, base), (t.nrows(), t.ncols()))
                .copy_from(t);
        }
        let s_tilde = t_blk.transpose() * &ss.matrix * &t_blk;
        let s_tilde = (&s_tilde + s_tilde.transpose()) * 0.5;
        let s_dd = gather(&s_tilde, &sl.dual_indices, &sl.dual_indices);
        let s_dp = gather(&s_tilde, &sl.dual_indices, &sl.pi_indices);
        let s_pp = gather(&s_tilde, &sl.pi_indices, &sl.pi_indices);
        let (dual_factor, k_dp) = if sl.dual_indices.is_empty() {
            (None, Matrix::zeros(0, sl.pi_indices.len()))
        } else {
            let f = SpdFactor::new(&s_dd).map_err(|source| BddcError::SingularDualBlock {
                subdomain: sl.subdomain_id,
                source,
            })?;
            let k_dp = f.solve_mat(&s_dp);
            (Some(f), k_dp)
        };
        // Coarse contribution: S_pp - S_pd (S_dd)^{-1} S_dp in shared
        // primal numbering.
        let local_coarse = &s_pp - s_dp.transpose() * &k_dp;
        for (a, &ga) in sl.pi_global.iter().enumerate() {
            for (b, &gb) in sl.pi_global.iter().enumerate() {
                f_pipi[(ga, gb)] += local_coarse[(a, b)];
            }
        }
        let mut d_check_cols = Vec::with_capacity(sl.interfaces.len());
        for (pos, &k) in sl.interfaces.iter().enumerate() {
            let dc = &adapt[k].d_check[sl.side[pos]];
            d_check_cols.push(dc.columns(0, adapt[k].n_delta).into_owned());
        }
        subs.push(SubdomainOperator {
            s_tilde,
            dual_factor,
            s_pd: s_dp.transpose().into_owned(),
            k_dp,
            d_check_cols,
        });
    }
    f_pipi = (&f_pipi + f_pipi.transpose()) * 0.5;
    let coarse_factor = if layout.dim_pi > 0 {
        Some(SpdFactor::new(&f_pipi).map_err(BddcError::SingularCoarse)?)
    } else {
        None
    };
    Ok(BddcOperator {
        layout,
        subs,
        coarse_factor,
        f_pipi,
    })
}

impl BddcOperator {
    pub fn dim(&self) -> usize {
        self.layout.dim_hat
    }

    pub fn subdomain(&self, i: usize) -> &SubdomainOperator {
        &self.subs[i]
    }

    /// `(R_i)^T r`: weighted restriction of an assembled vector to the
    /// subdomain's dual slots.
    fn weighted_restrict(&self, sl: &SubdomainLayout, sub: &SubdomainOperator, r: &Vector) -> Vector {
        let mut out = Vector::zeros(sl.dual_indices.len());
        let mut at = 0usize;
        for (pos, &k) in sl.interfaces.iter().enumerate() {
            let nd = self.layout.n_delta[k];
            if nd == 0 {
                continue;
            }
            let rk = r.rows(self.layout.hat_offsets[k], self.layout.n_k[k]);
            let contrib = sub.d_check_cols[pos].transpose() * rk;
            out.rows_mut(at, nd).copy_from(&contrib);
            at += nd;
        }
        out
    }

    /// `R_i w`: weighted prolongation of a dual vector into the assembled
    /// numbering, accumulated into `out`.
    fn weighted_prolong(
        &self,
        sl: &SubdomainLayout,
        sub: &SubdomainOperator,
        w: &Vector,
        out: &mut Vector,
    ) {
        let mut at = 0usize;
        for (pos, &k) in sl.interfaces.iter().enumerate() {
            let nd = self.layout.n_delta[k];
            if nd == 0 {
                continue;
            }
            let contrib = &sub.d_check_cols[pos] * w.rows(at, nd);
            let mut view = out.rows_mut(self.layout.hat_offsets[k], self.layout.n_k[k]);
            view += contrib;
            at += nd;
        }
    }

    fn gather_pi(&self, r: &Vector) -> Vector {
        let mut out = Vector::zeros(self.layout.dim_pi);
        for k in 0..self.layout.n_k.len() {
            let np = self.layout.n_pi[k];
            if np == 0 {
                continue;
            }
            let src = self.layout.hat_offsets[k] + self.layout.n_delta[k];
            out.rows_mut(self.layout.pi_offsets[k], np)
                .copy_from(&r.rows(src, np));
        }
        out
    }

    fn scatter_pi_add(&self, v: &Vector, out: &mut Vector) {
        for k in 0..self.layout.n_k.len() {
            let np = self.layout.n_pi[k];
            if np == 0 {
                continue;
            }
            let dst = self.layout.hat_offsets[k] + self.layout.n_delta[k];
            let mut view = out.rows_mut(dst, np);
            view += v.rows(self.layout.pi_offsets[k], np);
        }
    }

    /// Transformed global Schur action (the operator PCG iterates with).
    pub fn apply_schur(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.layout.dim_hat);
        for sl in &self.layout.subdomains {
            let sub = &self.subs[sl.subdomain_id];
            let mut local = Vector::zeros(sl.local_dim());
            for (pos, &k) in sl.interfaces.iter().enumerate() {
                local
                    .rows_mut(sl.local_offsets[pos], self.layout.n_k[k])
                    .copy_from(&v.rows(self.layout.hat_offsets[k], self.layout.n_k[k]));
            }
            let y = &sub.s_tilde * local;
            for (pos, &k) in sl.interfaces.iter().enumerate() {
                let mut view =
                    out.rows_mut(self.layout.hat_offsets[k], self.layout.n_k[k]);
                view += y.rows(sl.local_offsets[pos], self.layout.n_k[k]);
            }
        }
        out
    }

    /// Preconditioner action `z = M^{-1} r`.
    pub fn apply(&self, r: &Vector) -> Vector {
        assert_eq!(r.len(), self.layout.dim_hat, "size mismatch");
        let mut z = Vector::zeros(self.layout.dim_hat);
        // Dual solves, and the coarse residual R_0 r on the fly.
        let mut r_pi = self.gather_pi(r);
        let mut dual_solutions = Vec::with_capacity(self.subs.len());
        for sl in &self.layout.subdomains {
            let sub = &self.subs[sl.subdomain_id];
            let y = match &sub.dual_factor {
                Some(f) => f.solve_vec(&self.weighted_restrict(sl, sub, r)),
                None => Vector::zeros(0),
            };
            if !y.is_empty() {
                self.weighted_prolong(sl, sub, &y, &mut z);
                let pi_part = &sub.s_pd * &y;
                for (a, &ga) in sl.pi_global.iter().enumerate() {
                    r_pi[ga] -= pi_part[a];
                }
            }
            dual_solutions.push(y);
        }
        // Coarse solve and R_0^T.
        if let Some(coarse) = &self.coarse_factor {
            let u_pi = coarse.solve_vec(&r_pi);
            self.scatter_pi_add(&u_pi, &mut z);
            for sl in &self.layout.subdomains {
                let sub = &self.subs[sl.subdomain_id];
                if sub.dual_factor.is_none() || sl.pi_global.is_empty() {
                    continue;
                }
                let u_local = Vector::from_iterator(
                    sl.pi_global.len(),
                    sl.pi_global.iter().map(|&g| u_pi[g]),
                );
                let corr = &sub.k_dp * u_local;
                let mut neg = corr;
                neg.neg_mut();
                self.weighted_prolong(sl, sub, &neg, &mut z);
            }
        }
        z
    }

    /// Dense natural injection `I_Gamma: hat -> tilde`.
    pub fn injection_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.layout.dim_tilde(), self.layout.dim_hat);
        for sl in &self.layout.subdomains {
            let mut at = 0usize;
            for (pos, &k) in sl.interfaces.iter().enumerate() {
                let _ = pos;
                for d in 0..self.layout.n_delta[k] {
                    out[(sl.tilde_offset + at, self.layout.hat_offsets[k] + d)] = 1.0;
                    at += 1;
                }
            }
        }
        for k in 0..self.layout.n_k.len() {
            for p in 0..self.layout.n_pi[k] {
                out[(
                    self.layout.dim_dual + self.layout.pi_offsets[k] + p,
                    self.layout.hat_offsets[k] + self.layout.n_delta[k] + p,
                )] = 1.0;
            }
        }
        out
    }

    /// Dense weighted averaging `E_D: tilde -> hat`.
    pub fn averaging_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.layout.dim_hat, self.layout.dim_tilde());
        for sl in &self.layout.subdomains {
            let sub = &self.subs[sl.subdomain_id];
            let mut at = 0usize;
            for (pos, &k) in sl.interfaces.iter().enumerate() {
                let nd = self.layout.n_delta[k];
                if nd == 0 {
                    continue;
                }
                let cols = &sub.d_check_cols[pos];
                for d in 0..nd {
                    for row in 0..self.layout.n_k[k] {
                        out[(
                            self.layout.hat_offsets[k] + row,
                            sl.tilde_offset + at + d,
                        )] += cols[(row, d)];
                    }
                }
                at += nd;
            }
        }
        for k in 0..self.layout.n_k.len() {
            for p in 0..self.layout.n_pi[k] {
                out[(
                    self.layout.hat_offsets[k] + self.layout.n_delta[k] + p,
                    self.layout.dim_dual + self.layout.pi_offsets[k] + p,
                )] = 1.0;
            }
        }
        out
    }

    /// Dense partially assembled matrix on the tilde space.
    pub fn dense_tilde_matrix(&self) -> Matrix {
        let nt = self.layout.dim_tilde();
        let mut out = Matrix::zeros(nt, nt);
        for sl in &self.layout.subdomains {
            let sub = &self.subs[sl.subdomain_id];
            // Tilde indices of the subdomain's full local vector.
            let mut map = vec![0usize; sl.local_dim()];
            for (a, &li) in sl.dual_indices.iter().enumerate() {
                map[li] = sl.tilde_offset + a;
            }
            for (b, &li) in sl.pi_indices.iter().enumerate() {
                map[li] = self.layout.dim_dual + sl.pi_global[b];
            }
            for p in 0..sl.local_dim() {
                for q in 0..sl.local_dim() {
                    out[(map[p], map[q])] += sub.s_tilde[(p, q)];
                }
            }
        }
        out
    }

    /// Dense assembled (transformed) Schur matrix.
    pub fn dense_schur(&self) -> Matrix {
        let n = self.layout.dim_hat;
        let mut out = Matrix::zeros(n, n);
        for sl in &self.layout.subdomains {
            let sub = &self.subs[sl.subdomain_id];
            for (pa, &ka) in sl.interfaces.iter().enumerate() {
                for (pb, &kb) in sl.interfaces.iter().enumerate() {
                    for a in 0..self.layout.n_k[ka] {
                        for b in 0..self.layout.n_k[kb] {
                            out[(
                                self.layout.hat_offsets[ka] + a,
                                self.layout.hat_offsets[kb] + b,
                            )] += sub.s_tilde[(
                                sl.local_offsets[pa] + a,
                                sl.local_offsets[pb] + b,
                            )];
                        }
                    }
                }
            }
        }
        out
    }

    /// Dense preconditioner via application to basis vectors.
    pub fn dense_preconditioner(&self) -> Matrix {
        let n = self.layout.dim_hat;
        let mut out = Matrix::zeros(n, n);
        let mut e = Vector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            out.set_column(j, &self.apply(&e));
            e[j] = 0.0;
        }
        out
    }
}

/// Explicit preconditioned matrix `M^{-1} S_hat`, column by column.
pub fn dense_preconditioned_matrix(op: &BddcOperator) -> Matrix {
    let n = op.layout.dim_hat;
    let mut out = Matrix::zeros(n, n);
    let mut e = Vector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        out.set_column(j, &op.apply(&op.apply_schur(&e)));
        e[j] = 0.0;
    }
    out
}

/// Spectrum of the preconditioned operator `M^{-1} S_hat` (similar to the
/// symmetric `L^T M^{-1} L` with `S_hat = L L^T`), ascending.
pub fn preconditioned_spectrum(op: &BddcOperator) -> Result<Vec<f64>, LinalgError> {
    let s_hat = op.dense_schur();
    let m_inv = op.dense_preconditioner();
    let l = SpdFactor::new(&s_hat)?.l_factor();
    let sym = l.transpose() * m_inv * &l;
    let (vals, _) = sym_eig(&sym);
    Ok(vals.iter().copied().collect())
}
