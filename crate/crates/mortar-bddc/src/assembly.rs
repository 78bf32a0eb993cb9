//! Per-subdomain stiffness-plus-mass matrices and load vectors for the
//! bilinear form `int_Omega_i (rho grad u . grad v + eps u v)`.
//!
//! The coefficient is treated as constant per element (evaluated at the
//! centroid) and the fixed triangle rules are exact for the resulting
//! degree-2s integrands, so assembly commits no quadrature error. Dirichlet
//! dofs are eliminated by dropping their rows and columns.

use crate::coefficients::CoefficientField;
use crate::geometry::{FESpace, Rect, Triangulation};
use crate::linalg::{BandedSpd, Matrix, Vector};
use crate::quadrature::triangle_rule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(
        "subdomain {0} is floating (no outer Dirichlet edge) and eps = 0; \
         the local form is singular"
    )]
    FloatingSubdomain(usize),
    #[error("eps must be nonnegative, got {0}")]
    NegativeEps(f64),
}

/// Right-hand side descriptor; the shipped experiments use f = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RhsField {
    Constant { value: f64 },
}

impl Default for RhsField {
    fn default() -> Self {
        RhsField::Constant { value: 1.0 }
    }
}

impl RhsField {
    pub fn value(&self, _point: [f64; 2]) -> f64 {
        match self {
            RhsField::Constant { value } => *value,
        }
    }
}

/// Assembled symmetric local matrix over the unmasked dofs of one subdomain,
/// kept in banded storage (lattice numbering keeps the band narrow).
pub struct LocalMatrix {
    pub subdomain_id: usize,
    pub matrix: BandedSpd,
}

impl LocalMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn to_dense(&self) -> Matrix {
        self.matrix.to_dense()
    }
}

/// Reference shape values and gradients at a reference point.
fn shape(degree: usize, xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let l0 = 1.0 - xi - eta;
    let l1 = xi;
    let l2 = eta;
    match degree {
        1 => (
            vec![l0, l1, l2],
            vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        ),
        2 => {
            let vals = vec![
                l0 * (2.0 * l0 - 1.0),
                l1 * (2.0 * l1 - 1.0),
                l2 * (2.0 * l2 - 1.0),
                4.0 * l0 * l1,
                4.0 * l1 * l2,
                4.0 * l2 * l0,
            ];
            let d0 = [-1.0, -1.0];
            let d1 = [1.0, 0.0];
            let d2 = [0.0, 1.0];
            let grads = vec![
                [(4.0 * l0 - 1.0) * d0[0], (4.0 * l0 - 1.0) * d0[1]],
                [(4.0 * l1 - 1.0) * d1[0], (4.0 * l1 - 1.0) * d1[1]],
                [(4.0 * l2 - 1.0) * d2[0], (4.0 * l2 - 1.0) * d2[1]],
                [
                    4.0 * (l0 * d1[0] + l1 * d0[0]),
                    4.0 * (l0 * d1[1] + l1 * d0[1]),
                ],
                [
                    4.0 * (l1 * d2[0] + l2 * d1[0]),
                    4.0 * (l1 * d2[1] + l2 * d1[1]),
                ],
                [
                    4.0 * (l2 * d0[0] + l0 * d2[0]),
                    4.0 * (l2 * d0[1] + l0 * d2[1]),
                ],
            ];
            (vals, grads)
        }
        _ => unreachable!("degree checked at space construction"),
    }
}

/// Element stiffness + mass matrix for a triangle with the given vertices,
/// constant coefficient `rho` and zero-order coefficient `eps`.
pub fn element_matrix(
    vertices: [[f64; 2]; 3],
    degree: usize,
    rho: f64,
    eps: f64,
) -> Matrix {
    let nloc = if degree == 1 { 3 } else { 6 };
    let [a, b, c] = vertices;
    let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let area = 0.5 * det.abs();
    // J^{-T} rows.
    let inv_t = [
        [j[1][1] / det, -j[1][0] / det],
        [-j[0][1] / det, j[0][0] / det],
    ];
    let mut k = Matrix::zeros(nloc, nloc);
    for &(xi, eta, w) in triangle_rule(2 * degree) {
        let (vals, grads) = shape(degree, xi, eta);
        let phys: Vec<[f64; 2]> = grads
            .iter()
            .map(|g| {
                [
                    inv_t[0][0] * g[0] + inv_t[0][1] * g[1],
                    inv_t[1][0] * g[0] + inv_t[1][1] * g[1],
                ]
            })
            .collect();
        for p in 0..nloc {
            for q in 0..nloc {
                let stiff = rho * (phys[p][0] * phys[q][0] + phys[p][1] * phys[q][1]);
                let mass = eps * vals[p] * vals[q];
                k[(p, q)] += w * area * (stiff + mass);
            }
        }
    }
    k
}

/// Element load vector for the given right-hand side.
pub fn element_load(vertices: [[f64; 2]; 3], degree: usize, f: &RhsField) -> Vector {
    let nloc = if degree == 1 { 3 } else { 6 };
    let [a, b, c] = vertices;
    let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let area = 0.5 * det.abs();
    let mut out = Vector::zeros(nloc);
    for &(xi, eta, w) in triangle_rule(2 * degree) {
        let (vals, _) = shape(degree, xi, eta);
        let x = a[0] + j[0][0] * xi + j[0][1] * eta;
        let y = a[1] + j[1][0] * xi + j[1][1] * eta;
        let fv = f.value([x, y]);
        for p in 0..nloc {
            out[p] += w * area * fv * vals[p];
        }
    }
    out
}

/// Assemble the local matrix of one subdomain over its unmasked dofs.
pub fn assemble_local(
    space: &FESpace,
    tri: &Triangulation,
    rect: &Rect,
    rho: &CoefficientField,
    eps: f64,
) -> Result<LocalMatrix, AssemblyError> {
    if eps < 0.0 {
        return Err(AssemblyError::NegativeEps(eps));
    }
    if eps == 0.0 && !rect.touches_outer_boundary() {
        return Err(AssemblyError::FloatingSubdomain(space.subdomain_id));
    }
    let n_free = space.num_free();
    // Bandwidth in free numbering.
    let mut bw = 0usize;
    for dofs in &space.elem_dofs {
        let free: Vec<usize> = dofs
            .iter()
            .filter_map(|&d| space.full_to_free[d])
            .collect();
        for &p in &free {
            for &q in &free {
                bw = bw.max(p.abs_diff(q));
            }
        }
    }
    let mut banded = BandedSpd::zeros(n_free, bw);
    for (e, dofs) in space.elem_dofs.iter().enumerate() {
        let [a, b, c] = tri.elements[e];
        let vertices = [tri.nodes[a], tri.nodes[b], tri.nodes[c]];
        let rho_e = rho.value(space.subdomain_id, e, tri.centroid(e), rect);
        let ke = element_matrix(vertices, space.degree, rho_e, eps);
        for (p, &dp) in dofs.iter().enumerate() {
            let Some(fp) = space.full_to_free[dp] else {
                continue;
            };
            for (q, &dq) in dofs.iter().enumerate() {
                let Some(fq) = space.full_to_free[dq] else {
                    continue;
                };
                if fp >= fq {
                    banded.add(fp, fq, ke[(p, q)]);
                }
            }
        }
    }
    Ok(LocalMatrix {
        subdomain_id: space.subdomain_id,
        matrix: banded,
    })
}

/// Assemble the load vector over the unmasked dofs of one subdomain.
pub fn assemble_load(space: &FESpace, tri: &Triangulation, f: &RhsField) -> Vector {
    let mut out = Vector::zeros(space.num_free());
    for (e, dofs) in space.elem_dofs.iter().enumerate() {
        let [a, b, c] = tri.elements[e];
        let vertices = [tri.nodes[a], tri.nodes[b], tri.nodes[c]];
        let fe = element_load(vertices, space.degree, f);
        for (p, &dp) in dofs.iter().enumerate() {
            if let Some(fp) = space.full_to_free[dp] {
                out[fp] += fe[p];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::constant_field;
    use crate::geometry::{fe_space, triangulate};
    use approx::assert_abs_diff_eq;

    fn interior_rect() -> Rect {
        Rect {
            x0: 0.25,
            y0: 0.25,
            w: 0.5,
            h: 0.5,
        }
    }

    #[test]
    fn p1_reference_stiffness() {
        // Right triangle with legs h and the right angle at vertex 0.
        let h = 0.3;
        let k = element_matrix([[0.0, 0.0], [h, 0.0], [0.0, h]], 1, 1.0, 0.0);
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for p in 0..3 {
            for q in 0..3 {
                assert_abs_diff_eq!(k[(p, q)], expected[p][q], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_without_mass() {
        for degree in [1usize, 2] {
            let k = element_matrix([[0.1, 0.2], [0.5, 0.25], [0.3, 0.6]], degree, 2.0, 0.0);
            for p in 0..k.nrows() {
                let s: f64 = (0..k.ncols()).map(|q| k[(p, q)]).sum();
                assert_abs_diff_eq!(s, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_linear_in_rho() {
        let v = [[0.0, 0.0], [0.4, 0.1], [0.1, 0.5]];
        let k1 = element_matrix(v, 2, 1.0, 0.0);
        let k2 = element_matrix(v, 2, 2.0, 0.0);
        assert!((&k2 - &k1 * 2.0).norm() < 1e-14);
    }

    #[test]
    fn p1_load_is_area_thirds() {
        let v = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]];
        let area = 0.125;
        let f = RhsField::Constant { value: 1.0 };
        let load = element_load(v, 1, &f);
        for p in 0..3 {
            assert_abs_diff_eq!(load[p], area / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn load_zero_and_linearity() {
        let rect = interior_rect();
        let tri = triangulate(&rect, 3, 0);
        let space = fe_space(&tri, &rect, 2).unwrap();
        let zero = assemble_load(&space, &tri, &RhsField::Constant { value: 0.0 });
        assert_abs_diff_eq!(zero.norm(), 0.0, epsilon = 1e-15);
        let f1 = assemble_load(&space, &tri, &RhsField::Constant { value: 1.0 });
        let f2 = assemble_load(&space, &tri, &RhsField::Constant { value: 2.5 });
        assert!((&f2 - &f1 * 2.5).norm() < 1e-13);
        // Total load equals integral of f over the subdomain (partition of
        // unity of the nodal basis).
        assert_abs_diff_eq!(f1.sum(), rect.area(), epsilon = 1e-13);
    }

    #[test]
    fn floating_subdomain_rejected_for_zero_eps() {
        let rect = interior_rect();
        let tri = triangulate(&rect, 2, 0);
        let space = fe_space(&tri, &rect, 1).unwrap();
        let rho = constant_field(1.0).unwrap();
        assert!(matches!(
            assemble_local(&space, &tri, &rect, &rho, 0.0),
            Err(AssemblyError::FloatingSubdomain(0))
        ));
        assert!(assemble_local(&space, &tri, &rect, &rho, 1.0).is_ok());
        // Boundary-touching subdomain is fine with eps = 0.
        let rect_b = Rect {
            x0: 0.0,
            y0: 0.0,
            w: 0.5,
            h: 0.5,
        };
        let tri_b = triangulate(&rect_b, 2, 1);
        let space_b = fe_space(&tri_b, &rect_b, 1).unwrap();
        assert!(assemble_local(&space_b, &tri_b, &rect_b, &rho, 0.0).is_ok());
    }

    #[test]
    fn local_matrix_is_spd_and_galerkin_exact() {
        for degree in [1usize, 2] {
            let rect = interior_rect();
            let tri = triangulate(&rect, 3, 0);
            let space = fe_space(&tri, &rect, degree).unwrap();
            let rho = constant_field(2.0).unwrap();
            let local = assemble_local(&space, &tri, &rect, &rho, 1.0).unwrap();
            let dense = local.to_dense();
            // SPD: Cholesky succeeds.
            assert!(crate::linalg::SpdFactor::new(&dense).is_ok());
            // Galerkin exactness for interpolants of global affine
            // functions: u = 1 + 2x - y, v = x + 3y, eps contribution via
            // exact integrals of the products.
            let u_fun = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1];
            let v_fun = |p: [f64; 2]| p[0] + 3.0 * p[1];
            let u = Vector::from_iterator(
                space.num_free(),
                space.free_dofs.iter().map(|&d| u_fun(space.dof_coords[d])),
            );
            let v = Vector::from_iterator(
                space.num_free(),
                space.free_dofs.iter().map(|&d| v_fun(space.dof_coords[d])),
            );
            let discrete = (u.transpose() * &dense * &v)[(0, 0)];
            // grad u . grad v = 2*1 + (-1)*3 = -1, times rho = 2, over area.
            let grad_part = -2.0 * rect.area();
            // eps * int u v over the rectangle, by 2-point Gauss per
            // direction (exact for the bilinear-in-each-variable integrand).
            let gauss = crate::quadrature::gauss_legendre_01(2);
            let mut mass_part = 0.0;
            for &(gx, wx) in &gauss {
                for &(gy, wy) in &gauss {
                    let p = [rect.x0 + gx * rect.w, rect.y0 + gy * rect.h];
                    mass_part += wx * wy * u_fun(p) * v_fun(p) * rect.area();
                }
            }
            assert_abs_diff_eq!(discrete, grad_part + mass_part, epsilon = 1e-12);
        }
    }
}
