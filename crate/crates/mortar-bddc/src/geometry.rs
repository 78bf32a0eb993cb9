//! Subdomain partitions of the unit square, per-subdomain uniform
//! triangulations, P1/P2 nodal spaces, and interface detection.
//!
//! Partitions are lists of axis-aligned rectangles that tile (0,1)^2. They
//! are either built as a conforming k x k checkerboard or loaded from a JSON
//! description; loaded partitions may be geometrically unconforming as long
//! as every pairwise contact of positive length is a full edge of at least
//! one rectangle in the pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Matching tolerance for geometric predicates (coordinates live in [0,1]).
pub const GEO_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("beta * n = {0} is not a positive integer")]
    BetaNotInteger(f64),
    #[error("k and n must be at least 1")]
    BadConformingArgs,
    #[error("invalid rectangle {index}: {reason}")]
    InvalidRect { index: usize, reason: String },
    #[error("rectangle areas sum to {sum}, expected 1 (gap or overflow)")]
    AreaMismatch { sum: f64 },
    #[error("rectangles {i} and {j} overlap with area {area:.3e}")]
    Overlap { i: usize, j: usize, area: f64 },
    #[error(
        "rectangles {i} and {j} share a segment that is a full edge of neither (T-intersection)"
    )]
    EdgeRule { i: usize, j: usize },
    #[error("side mesh of subdomain {subdomain} does not tile interface {interface}")]
    MisalignedSideMesh { interface: usize, subdomain: usize },
    #[error("partition file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported finite element degree {0} (expected 1 or 2)")]
    BadDegree(usize),
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn x1(&self) -> f64 {
        self.x0 + self.w
    }

    pub fn y1(&self) -> f64 {
        self.y0 + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let dx = (self.x1().min(other.x1()) - self.x0.max(other.x0)).max(0.0);
        let dy = (self.y1().min(other.y1()) - self.y0.max(other.y0)).max(0.0);
        dx * dy
    }

    /// True when one of the rectangle's edges lies on the boundary of the
    /// unit square (positive-length Dirichlet contact).
    pub fn touches_outer_boundary(&self) -> bool {
        self.x0.abs() < GEO_TOL
            || (self.x1() - 1.0).abs() < GEO_TOL
            || self.y0.abs() < GEO_TOL
            || (self.y1() - 1.0).abs() < GEO_TOL
    }
}

/// One record of the partition file: rectangle plus elements-per-direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
    pub m: usize,
}

/// Tiling of the unit square by rectangular subdomains, each with a uniform
/// elements-per-direction count.
#[derive(Debug, Clone)]
pub struct SubdomainPartition {
    pub rects: Vec<Rect>,
    pub mesh_counts: Vec<usize>,
}

impl SubdomainPartition {
    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    fn validate(&self) -> Result<(), GeometryError> {
        for (index, r) in self.rects.iter().enumerate() {
            if !(r.w > GEO_TOL && r.h > GEO_TOL) {
                return Err(GeometryError::InvalidRect {
                    index,
                    reason: "non-positive extent".into(),
                });
            }
            if r.x0 < -GEO_TOL
                || r.y0 < -GEO_TOL
                || r.x1() > 1.0 + GEO_TOL
                || r.y1() > 1.0 + GEO_TOL
            {
                return Err(GeometryError::InvalidRect {
                    index,
                    reason: "outside the unit square".into(),
                });
            }
            if self.mesh_counts[index] == 0 {
                return Err(GeometryError::InvalidRect {
                    index,
                    reason: "mesh count must be positive".into(),
                });
            }
        }
        for i in 0..self.rects.len() {
            for j in (i + 1)..self.rects.len() {
                let area = self.rects[i].overlap_area(&self.rects[j]);
                if area > 1e-12 {
                    return Err(GeometryError::Overlap { i, j, area });
                }
            }
        }
        let sum: f64 = self.rects.iter().map(Rect::area).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(GeometryError::AreaMismatch { sum });
        }
        Ok(())
    }
}

/// Conforming k x k partition with mesh counts alternating n / beta*n in a
/// checkerboard: grid position (p, q) gets n when p + q is even.
pub fn build_conforming_partition(
    k: usize,
    n: usize,
    beta: f64,
) -> Result<SubdomainPartition, GeometryError> {
    if k == 0 || n == 0 {
        return Err(GeometryError::BadConformingArgs);
    }
    let bn = beta * n as f64;
    if bn < 1.0 - GEO_TOL || (bn - bn.round()).abs() > GEO_TOL {
        return Err(GeometryError::BetaNotInteger(bn));
    }
    let bn = bn.round() as usize;
    let side = 1.0 / k as f64;
    let mut rects = Vec::with_capacity(k * k);
    let mut mesh_counts = Vec::with_capacity(k * k);
    for p in 0..k {
        for q in 0..k {
            rects.push(Rect {
                x0: q as f64 * side,
                y0: p as f64 * side,
                w: side,
                h: side,
            });
            mesh_counts.push(if (p + q) % 2 == 0 { n } else { bn });
        }
    }
    let partition = SubdomainPartition { rects, mesh_counts };
    partition.validate()?;
    Ok(partition)
}

/// Parse and validate a partition description (JSON array of records
/// `{x0, y0, w, h, m}`). Rejects overlaps, gaps, and contacts that violate
/// the full-edge rule.
pub fn load_partition(text: &str) -> Result<SubdomainPartition, GeometryError> {
    let records: Vec<PartitionRecord> = serde_json::from_str(text)?;
    partition_from_records(&records)
}

pub fn partition_from_records(
    records: &[PartitionRecord],
) -> Result<SubdomainPartition, GeometryError> {
    let partition = SubdomainPartition {
        rects: records
            .iter()
            .map(|r| Rect {
                x0: r.x0,
                y0: r.y0,
                w: r.w,
                h: r.h,
            })
            .collect(),
        mesh_counts: records.iter().map(|r| r.m).collect(),
    };
    partition.validate()?;
    // The edge rule is enforced during interface detection.
    detect_interfaces(&partition)?;
    Ok(partition)
}

/// Uniform triangulation of a rectangle: an m x m grid of cells, each split
/// along the lower-left-to-upper-right diagonal.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub subdomain_id: usize,
    pub m: usize,
    /// Cell extents (w/m, h/m).
    pub dx: f64,
    pub dy: f64,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
}

impl Triangulation {
    pub fn element_area(&self) -> f64 {
        0.5 * self.dx * self.dy
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[element];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }
}

pub fn triangulate(rect: &Rect, m: usize, subdomain_id: usize) -> Triangulation {
    assert!(m >= 1, "mesh count must be positive");
    let dx = rect.w / m as f64;
    let dy = rect.h / m as f64;
    let nn = m + 1;
    let mut nodes = Vec::with_capacity(nn * nn);
    for iy in 0..nn {
        for ix in 0..nn {
            nodes.push([rect.x0 + ix as f64 * dx, rect.y0 + iy as f64 * dy]);
        }
    }
    let node = |ix: usize, iy: usize| iy * nn + ix;
    let mut elements = Vec::with_capacity(2 * m * m);
    for cy in 0..m {
        for cx in 0..m {
            let bl = node(cx, cy);
            let br = node(cx + 1, cy);
            let tr = node(cx + 1, cy + 1);
            let tl = node(cx, cy + 1);
            // Diagonal runs from bl to tr in every cell.
            elements.push([bl, br, tr]);
            elements.push([bl, tr, tl]);
        }
    }
    Triangulation {
        subdomain_id,
        m,
        dx,
        dy,
        nodes,
        elements,
    }
}

/// P1 or P2 nodal space on a subdomain triangulation. Degrees of freedom sit
/// on the (s*m + 1)^2 lattice; dofs on the outer Dirichlet boundary are
/// masked.
#[derive(Debug, Clone)]
pub struct FESpace {
    pub subdomain_id: usize,
    pub degree: usize,
    /// Lattice points per direction: s*m + 1.
    pub points_per_dir: usize,
    pub dof_coords: Vec<[f64; 2]>,
    pub dirichlet: Vec<bool>,
    /// 3 (P1) or 6 (P2) dofs per element, ordered [v0, v1, v2(, m01, m12, m20)].
    pub elem_dofs: Vec<Vec<usize>>,
    /// Unmasked dofs in lattice order.
    pub free_dofs: Vec<usize>,
    pub full_to_free: Vec<Option<usize>>,
    rect: Rect,
}

impl FESpace {
    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Lattice spacing per direction (w / (s m), h / (s m)).
    pub fn lattice_spacing(&self) -> (f64, f64) {
        let steps = (self.points_per_dir - 1) as f64;
        (self.rect.w / steps, self.rect.h / steps)
    }

    /// Dofs lying on the given axis-aligned segment of the subdomain
    /// boundary, ordered along the segment. Includes masked dofs.
    pub fn dofs_on_segment(
        &self,
        orientation: Orientation,
        line: f64,
        lo: f64,
        hi: f64,
    ) -> Vec<usize> {
        let (sx, sy) = self.lattice_spacing();
        let npts = self.points_per_dir;
        let idx = |v: f64, origin: f64, step: f64| -> Option<usize> {
            let t = (v - origin) / step;
            let r = t.round();
            if (t - r).abs() < 1e-3 && r >= -0.5 && (r as usize) < npts {
                Some(r as usize)
            } else {
                None
            }
        };
        match orientation {
            Orientation::Vertical => {
                let ix = idx(line, self.rect.x0, sx).expect("segment not on lattice line");
                let i0 = idx(lo, self.rect.y0, sy).expect("segment end not on lattice");
                let i1 = idx(hi, self.rect.y0, sy).expect("segment end not on lattice");
                (i0..=i1).map(|iy| iy * npts + ix).collect()
            }
            Orientation::Horizontal => {
                let iy = idx(line, self.rect.y0, sy).expect("segment not on lattice line");
                let i0 = idx(lo, self.rect.x0, sx).expect("segment end not on lattice");
                let i1 = idx(hi, self.rect.x0, sx).expect("segment end not on lattice");
                (i0..=i1).map(|ix| iy * npts + ix).collect()
            }
        }
    }
}

/// Nodal space of the given degree on the triangulation of `rect`.
pub fn fe_space(
    tri: &Triangulation,
    rect: &Rect,
    degree: usize,
) -> Result<FESpace, GeometryError> {
    if degree != 1 && degree != 2 {
        return Err(GeometryError::BadDegree(degree));
    }
    let m = tri.m;
    let npts = degree * m + 1;
    let sx = rect.w / (npts - 1) as f64;
    let sy = rect.h / (npts - 1) as f64;
    let mut dof_coords = Vec::with_capacity(npts * npts);
    let mut dirichlet = Vec::with_capacity(npts * npts);
    for iy in 0..npts {
        for ix in 0..npts {
            let x = rect.x0 + ix as f64 * sx;
            let y = rect.y0 + iy as f64 * sy;
            dof_coords.push([x, y]);
            let on_boundary = x.abs() < GEO_TOL
                || (x - 1.0).abs() < GEO_TOL
                || y.abs() < GEO_TOL
                || (y - 1.0).abs() < GEO_TOL;
            dirichlet.push(on_boundary);
        }
    }
    let lat = |ix: usize, iy: usize| iy * npts + ix;
    let mut elem_dofs = Vec::with_capacity(tri.elements.len());
    for cy in 0..m {
        for cx in 0..m {
            // Lattice coordinates of the cell corners for this degree.
            let (bx, by) = (degree * cx, degree * cy);
            if degree == 1 {
                let bl = lat(bx, by);
                let br = lat(bx + 1, by);
                let tr = lat(bx + 1, by + 1);
                let tl = lat(bx, by + 1);
                elem_dofs.push(vec![bl, br, tr]);
                elem_dofs.push(vec![bl, tr, tl]);
            } else {
                let bl = lat(bx, by);
                let br = lat(bx + 2, by);
                let tr = lat(bx + 2, by + 2);
                let tl = lat(bx, by + 2);
                // Lower triangle (bl, br, tr).
                elem_dofs.push(vec![
                    bl,
                    br,
                    tr,
                    lat(bx + 1, by),
                    lat(bx + 2, by + 1),
                    lat(bx + 1, by + 1),
                ]);
                // Upper triangle (bl, tr, tl).
                elem_dofs.push(vec![
                    bl,
                    tr,
                    tl,
                    lat(bx + 1, by + 1),
                    lat(bx + 1, by + 2),
                    lat(bx, by + 1),
                ]);
            }
        }
    }
    let mut free_dofs = Vec::new();
    let mut full_to_free = vec![None; dof_coords.len()];
    for (d, &masked) in dirichlet.iter().enumerate() {
        if !masked {
            full_to_free[d] = Some(free_dofs.len());
            free_dofs.push(d);
        }
    }
    Ok(FESpace {
        subdomain_id: tri.subdomain_id,
        degree,
        points_per_dir: npts,
        dof_coords,
        dirichlet,
        elem_dofs,
        free_dofs,
        full_to_free,
        rect: *rect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Segment on a vertical line x = const, parameterized by y.
    Vertical,
    /// Segment on a horizontal line y = const, parameterized by x.
    Horizontal,
}

/// One side of an interface: which subdomain, and its inherited 1D mesh on
/// the shared segment.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceSide {
    pub subdomain: usize,
    /// Elements of this side's edge mesh on the segment.
    pub elements: usize,
    /// 1D mesh spacing of this side along the segment direction.
    pub spacing: f64,
}

/// Shared segment between two subdomains with both inherited 1D side meshes.
#[derive(Debug, Clone)]
pub struct Interface {
    pub id: usize,
    /// Subdomain pair, `sub_i < sub_j`.
    pub sub_i: usize,
    pub sub_j: usize,
    pub orientation: Orientation,
    /// Coordinate of the line carrying the segment (x for vertical).
    pub line: f64,
    /// Segment extent in the running coordinate.
    pub lo: f64,
    pub hi: f64,
    /// Side meshes, `[for sub_i, for sub_j]`.
    pub sides: [InterfaceSide; 2],
}

impl Interface {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < GEO_TOL
}

/// Detect all shared segments of positive length. Deterministic ordering:
/// lexicographic by (min id, max id, segment origin).
pub fn detect_interfaces(
    partition: &SubdomainPartition,
) -> Result<Vec<Interface>, GeometryError> {
    let n = partition.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &partition.rects[i];
            let b = &partition.rects[j];
            let candidate = if close(a.x1(), b.x0) || close(b.x1(), a.x0) {
                let line = if close(a.x1(), b.x0) { a.x1() } else { a.x0 };
                let lo = a.y0.max(b.y0);
                let hi = a.y1().min(b.y1());
                (hi - lo > GEO_TOL).then_some((Orientation::Vertical, line, lo, hi))
            } else if close(a.y1(), b.y0) || close(b.y1(), a.y0) {
                let line = if close(a.y1(), b.y0) { a.y1() } else { a.y0 };
                let lo = a.x0.max(b.x0);
                let hi = a.x1().min(b.x1());
                (hi - lo > GEO_TOL).then_some((Orientation::Horizontal, line, lo, hi))
            } else {
                None
            };
            let Some((orientation, line, lo, hi)) = candidate else {
                continue;
            };
            // Full-edge rule: the segment must coincide with the complete
            // edge of at least one rectangle of the pair.
            let full_edge_of = |r: &Rect| match orientation {
                Orientation::Vertical => close(lo, r.y0) && close(hi, r.y1()),
                Orientation::Horizontal => close(lo, r.x0) && close(hi, r.x1()),
            };
            if !full_edge_of(a) && !full_edge_of(b) {
                return Err(GeometryError::EdgeRule { i, j });
            }
            let id = out.len();
            let side = |sub: usize| -> Result<InterfaceSide, GeometryError> {
                let r = &partition.rects[sub];
                let m = partition.mesh_counts[sub];
                let (origin, extent) = match orientation {
                    Orientation::Vertical => (r.y0, r.h),
                    Orientation::Horizontal => (r.x0, r.w),
                };
                let spacing = extent / m as f64;
                // Far tighter than the lattice lookup tolerance, so a file
                // that validates can never miss a breakpoint later.
                let aligned = |v: f64| {
                    let t = (v - origin) / spacing;
                    (t - t.round()).abs() < 1e-9
                };
                if !aligned(lo) || !aligned(hi) {
                    return Err(GeometryError::MisalignedSideMesh {
                        interface: id,
                        subdomain: sub,
                    });
                }
                let elements = ((hi - lo) / spacing).round() as usize;
                Ok(InterfaceSide {
                    subdomain: sub,
                    elements,
                    spacing,
                })
            };
            out.push(Interface {
                id,
                sub_i: i,
                sub_j: j,
                orientation,
                line,
                lo,
                hi,
                sides: [side(i)?, side(j)?],
            });
        }
    }
    // Pair iteration is already (min, max)-lexicographic; refine by origin
    // for stability and reassign ids.
    out.sort_by(|p, q| {
        (p.sub_i, p.sub_j)
            .cmp(&(q.sub_i, q.sub_j))
            .then(p.line.partial_cmp(&q.line).unwrap())
            .then(p.lo.partial_cmp(&q.lo).unwrap())
    });
    for (id, iface) in out.iter_mut().enumerate() {
        iface.id = id;
    }
    Ok(out)
}
