//! Property tests for the load-bearing invariants: mortar consistency on
//! arbitrary mesh pairings, parallel-sum domination, and the pseudo-inverse
//! identities.

use mortar_bddc::adaptivity::parallel_sum;
use mortar_bddc::geometry::{detect_interfaces, fe_space, triangulate, PartitionRecord};
use mortar_bddc::linalg::{pinv, sym_eig, Matrix, Vector, DEFLATION_TOL};
use mortar_bddc::mortar::{assemble_coupling, build_multiplier_space};
use proptest::prelude::*;

fn random_psd(n: usize, entries: &[f64], rank_deficient: bool) -> Matrix {
    let g = Matrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let mut a = &g * g.transpose();
    if !rank_deficient {
        a += Matrix::identity(n, n) * 0.1;
    }
    (&a + a.transpose()) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Interpolated traces of a global polynomial of degree <= s are in the
    /// kernel of the signed coupling operator, whatever the two side meshes.
    #[test]
    fn mortar_zero_jump(
        m_left in 2usize..9,
        m_right in 2usize..9,
        degree in 1usize..3,
        split in 0.3f64..0.7,
        coeffs in proptest::array::uniform3(-2.0f64..2.0),
    ) {
        let p = mortar_bddc::geometry::partition_from_records(&[
            PartitionRecord { x0: 0.0, y0: 0.0, w: split, h: 1.0, m: m_left },
            PartitionRecord { x0: split, y0: 0.0, w: 1.0 - split, h: 1.0, m: m_right },
        ]).unwrap();
        let ifaces = detect_interfaces(&p).unwrap();
        let iface = &ifaces[0];
        let tri0 = triangulate(&p.rects[0], p.mesh_counts[0], 0);
        let tri1 = triangulate(&p.rects[1], p.mesh_counts[1], 1);
        let s0 = fe_space(&tri0, &p.rects[0], degree).unwrap();
        let s1 = fe_space(&tri1, &p.rects[1], degree).unwrap();
        let ms = build_multiplier_space(iface, degree).unwrap();
        let coupling = assemble_coupling(iface, [&s0, &s1], &ms).unwrap();
        let poly = |pt: [f64; 2]| {
            let lin = coeffs[0] + coeffs[1] * pt[0] + coeffs[2] * pt[1];
            if degree == 2 { lin + coeffs[1] * pt[1] * pt[1] } else { lin }
        };
        let spaces = [&s0, &s1];
        let mut jump = Vector::zeros(ms.dim);
        for (space, block) in spaces.iter().zip(&coupling.blocks) {
            let vals = Vector::from_iterator(
                block.trace_dofs.len(),
                block.trace_dofs.iter().map(|&d| poly(space.dof_coords[d])),
            );
            jump += &block.matrix * vals;
        }
        prop_assert!(jump.amax() <= 1e-12, "jump {}", jump.amax());
    }

    /// A : B stays below both operands in the Loewner order.
    #[test]
    fn parallel_sum_monotonicity(
        ea in proptest::collection::vec(-1.0f64..1.0, 16),
        eb in proptest::collection::vec(-1.0f64..1.0, 16),
        deficient in proptest::bool::ANY,
    ) {
        let a = random_psd(4, &ea, deficient);
        let b = random_psd(4, &eb, false);
        let p = parallel_sum(&a, &b, DEFLATION_TOL);
        for m in [&a, &b] {
            let (vals, _) = sym_eig(&(m - &p));
            prop_assert!(vals[0] >= -1e-9, "domination violated: {}", vals[0]);
        }
    }

    /// Moore-Penrose identities for the PSD pseudo-inverse.
    #[test]
    fn pinv_identities(
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
        deficient in proptest::bool::ANY,
    ) {
        let a = random_psd(4, &entries, deficient);
        let p = pinv(&a, 1e-10);
        let scale = a.norm().max(1e-300);
        prop_assert!((&a * &p * &a - &a).norm() <= 1e-9 * scale);
        prop_assert!((&p * &a * &p - &p).norm() <= 1e-9 * p.norm().max(1e-300));
        prop_assert!(((&a * &p).transpose() - &a * &p).norm() <= 1e-9 * scale * p.norm().max(1.0));
        prop_assert!(((&p * &a).transpose() - &p * &a).norm() <= 1e-9 * scale * p.norm().max(1.0));
    }
}
