//! Nonmortar selection, Lagrange multiplier spaces, and the signed coupling
//! blocks of B assembled by cross-mesh 1D quadrature.
//!
//! The multiplier space on a nonmortar mesh with m elements is the classical
//! first-generation mortar space: continuous piecewise polynomials of degree
//! s with the degree lowered to s - 1 on the two end elements and no
//! endpoint dofs, so dim = s m - 1 and constants are reproduced exactly.

use crate::geometry::{FESpace, Interface, Orientation};
use crate::linalg::Matrix;
use crate::quadrature::gauss_legendre_01;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MortarError {
    #[error("interface {0}: nonmortar mesh has a single element, multiplier space is degenerate")]
    DegenerateMultiplier(usize),
    #[error("interface {0}: side meshes do not tile the same segment")]
    SegmentMismatch(usize),
    #[error("unsupported multiplier degree {0}")]
    BadDegree(usize),
}

/// Interface side label; `I` is the side of the smaller subdomain id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    I,
    J,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::I => 0,
            Side::J => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::I => Side::J,
            Side::J => Side::I,
        }
    }
}

/// The nonmortar side is the one with the larger mesh step; ties go to the
/// smaller subdomain id.
pub fn select_nonmortar(iface: &Interface) -> Side {
    let hi = iface.sides[0].spacing;
    let hj = iface.sides[1].spacing;
    if hi >= hj - 1e-12 * hi.max(hj) {
        Side::I
    } else {
        Side::J
    }
}

/// Lagrange multiplier space on the nonmortar side mesh of one interface.
#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    pub interface_id: usize,
    pub side: Side,
    pub degree: usize,
    /// Nonmortar elements on the segment.
    pub elems: usize,
    /// dim = degree * elems - 1.
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
}

pub fn build_multiplier_space(
    iface: &Interface,
    degree: usize,
) -> Result<MultiplierSpace, MortarError> {
    if degree != 1 && degree != 2 {
        return Err(MortarError::BadDegree(degree));
    }
    let side = select_nonmortar(iface);
    let mesh = iface.sides[side.index()];
    if mesh.elements < 2 {
        return Err(MortarError::DegenerateMultiplier(iface.id));
    }
    Ok(MultiplierSpace {
        interface_id: iface.id,
        side,
        degree,
        elems: mesh.elements,
        dim: degree * mesh.elements - 1,
        lo: iface.lo,
        hi: iface.hi,
        spacing: mesh.spacing,
    })
}

impl MultiplierSpace {
    /// Nonzero basis functions on element `j` at local coordinate `t`,
    /// as (dof, value) pairs.
    pub fn element_basis(&self, j: usize, t: f64) -> Vec<(usize, f64)> {
        let m = self.elems;
        debug_assert!(j < m);
        match self.degree {
            1 => {
                // Dof l sits at breakpoint x_{l+1}; end elements are constant.
                if j == 0 {
                    vec![(0, 1.0)]
                } else if j == m - 1 {
                    vec![(m - 2, 1.0)]
                } else {
                    vec![(j - 1, 1.0 - t), (j, t)]
                }
            }
            2 => {
                // Dofs: mid_j -> 2j, breakpoint x_j -> 2j - 1 (j = 1..m-1).
                if j == 0 {
                    vec![(0, 2.0 - 2.0 * t), (1, 2.0 * t - 1.0)]
                } else if j == m - 1 {
                    vec![(2 * j - 1, 1.0 - 2.0 * t), (2 * j, 2.0 * t)]
                } else {
                    vec![
                        (2 * j - 1, 2.0 * (t - 0.5) * (t - 1.0)),
                        (2 * j, 4.0 * t * (1.0 - t)),
                        (2 * j + 1, 2.0 * t * (t - 0.5)),
                    ]
                }
            }
            _ => unreachable!(),
        }
    }

    /// Point evaluation of one basis function.
    pub fn eval(&self, dof: usize, x: f64) -> f64 {
        let rel = (x - self.lo) / self.spacing;
        let j = (rel.floor() as isize).clamp(0, self.elems as isize - 1) as usize;
        let t = rel - j as f64;
        self.element_basis(j, t)
            .into_iter()
            .find(|&(d, _)| d == dof)
            .map_or(0.0, |(_, v)| v)
    }

    /// Exact integral of one basis function over the segment.
    pub fn integral(&self, dof: usize) -> f64 {
        let rule = gauss_legendre_01(self.degree + 1);
        let mut total = 0.0;
        for j in 0..self.elems {
            for &(g, w) in &rule {
                for (d, v) in self.element_basis(j, g) {
                    if d == dof {
                        total += w * self.spacing * v;
                    }
                }
            }
        }
        total
    }
}

/// Signed coupling block of one interface side: rows are multiplier dofs,
/// columns are the side's trace dofs in segment order (masked dofs
/// included; the Schur stage drops eliminated columns).
#[derive(Debug, Clone)]
pub struct CouplingBlock {
    pub subdomain: usize,
    pub sign: f64,
    pub trace_dofs: Vec<usize>,
    pub matrix: Matrix,
}

/// Both signed blocks of one interface.
#[derive(Debug, Clone)]
pub struct MortarCoupling {
    pub interface_id: usize,
    pub blocks: [CouplingBlock; 2],
}

/// 1D trace shape functions of degree s on a side element at local `t`,
/// as (local trace-dof offset, value) pairs.
fn trace_shape(degree: usize, t: f64) -> Vec<(usize, f64)> {
    match degree {
        1 => vec![(0, 1.0 - t), (1, t)],
        2 => vec![
            (0, 2.0 * (t - 0.5) * (t - 1.0)),
            (1, 4.0 * t * (1.0 - t)),
            (2, 2.0 * t * (t - 0.5)),
        ],
        _ => unreachable!(),
    }
}

/// Assemble both signed blocks of B for one interface by quadrature on the
/// merged breakpoint list; exact for the degree-2s integrands.
pub fn assemble_coupling(
    iface: &Interface,
    spaces: [&FESpace; 2],
    mspace: &MultiplierSpace,
) -> Result<MortarCoupling, MortarError> {
    let degree = mspace.degree;
    let rule = gauss_legendre_01(degree + 1);
    let mut blocks = Vec::with_capacity(2);
    for (s_idx, space) in spaces.iter().enumerate() {
        let side = iface.sides[s_idx];
        if (side.elements as f64 * side.spacing - iface.length()).abs()
            > 1e-9 * iface.length()
        {
            return Err(MortarError::SegmentMismatch(iface.id));
        }
        let sign = if s_idx == 0 { 1.0 } else { -1.0 };
        let trace_dofs = match iface.orientation {
            Orientation::Vertical => {
                space.dofs_on_segment(Orientation::Vertical, iface.line, iface.lo, iface.hi)
            }
            Orientation::Horizontal => {
                space.dofs_on_segment(Orientation::Horizontal, iface.line, iface.lo, iface.hi)
            }
        };
        debug_assert_eq!(trace_dofs.len(), degree * side.elements + 1);
        // Merged breakpoints of the two 1D meshes on the segment.
        let mut cuts: Vec<f64> = (0..=mspace.elems)
            .map(|a| iface.lo + a as f64 * mspace.spacing)
            .chain((0..=side.elements).map(|b| iface.lo + b as f64 * side.spacing))
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut matrix = Matrix::zeros(mspace.dim, trace_dofs.len());
        for win in cuts.windows(2) {
            let (u, v) = (win[0], win[1]);
            let mid = 0.5 * (u + v);
            let jn = (((mid - iface.lo) / mspace.spacing).floor() as usize)
                .min(mspace.elems - 1);
            let jt =
                (((mid - iface.lo) / side.spacing).floor() as usize).min(side.elements - 1);
            for &(g, w) in &rule {
                let x = u + g * (v - u);
                let tn = (x - iface.lo - jn as f64 * mspace.spacing) / mspace.spacing;
                let tt = (x - iface.lo - jt as f64 * side.spacing) / side.spacing;
                let mu = mspace.element_basis(jn, tn);
                let th = trace_shape(degree, tt);
                let scale = sign * w * (v - u);
                for &(l, mv) in &mu {
                    for &(q, tv) in &th {
                        matrix[(l, degree * jt + q)] += scale * mv * tv;
                    }
                }
            }
        }
        blocks.push(CouplingBlock {
            subdomain: side.subdomain,
            sign,
            trace_dofs,
            matrix,
        });
    }
    let b1 = blocks.pop().unwrap();
    let b0 = blocks.pop().unwrap();
    Ok(MortarCoupling {
        interface_id: iface.id,
        blocks: [b0, b1],
    })
}
