//! Structured quadrilateral / hexahedral meshes over box domains.
//!
//! The last coordinate direction is vertical. A terrain-following map lifts
//! the bottom boundary onto a bell-shaped hill and decays the displacement
//! linearly to zero at the domain top. Cells use an isoparametric version of
//! that map: the hill height is replaced by its degree-`r` Gauss-Lobatto
//! interpolant on every cell, which makes the discrete metric terms
//! polynomial and the DG divergence of a constant field vanish to round-off.

use std::fmt::Write as _;

use crate::basis::Basis1D;
use crate::error::{Error, Result};
use crate::quadrature::gauss_lobatto;

/// Boundary treatment in one coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Periodic,
    SlipWall,
}

/// Bell-shaped hill `h = h_c [1 + ((x-x_c)/a_c)^2 + ((y-y_c)/a_c)^2]^{-3/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillParams {
    /// Peak height (m).
    pub h_c: f64,
    /// Half-width (m).
    pub a_c: f64,
    /// Centre (m).
    pub x_c: f64,
    pub y_c: f64,
}

impl HillParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_c >= 0.0) || !(self.a_c > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "hill needs h_c >= 0 and a_c > 0, got h_c={} a_c={}",
                self.h_c, self.a_c
            )));
        }
        Ok(())
    }

    /// Height and horizontal gradient `(h, dh/dx, dh/dy)`; `y = None` drops the
    /// transverse term (2D slice).
    pub fn height_and_gradient(&self, x: f64, y: Option<f64>) -> (f64, f64, f64) {
        let sx = (x - self.x_c) / self.a_c;
        let sy = y.map_or(0.0, |y| (y - self.y_c) / self.a_c);
        let s = 1.0 + sx * sx + sy * sy;
        let h = self.h_c * s.powf(-1.5);
        let common = -3.0 * self.h_c * s.powf(-2.5) / self.a_c;
        let dhdy = if y.is_some() { common * sy } else { 0.0 };
        (h, common * sx, dhdy)
    }
}

/// Hill profile height at `(x, y)`; pass `y = None` in 2D.
pub fn hill_height(x: f64, y: Option<f64>, params: &HillParams) -> f64 {
    params.height_and_gradient(x, y).0
}

/// Exact terrain-following map `z = z_ref + h(x, y) (1 - z_ref / top)`.
///
/// `reference` holds `(x, [y,] z_ref)`. Returns the physical point and the
/// row-major Jacobian `d x_phys / d x_ref`.
pub fn terrain_map(reference: &[f64], params: &HillParams, domain_top: f64) -> (Vec<f64>, Vec<f64>) {
    let d = reference.len();
    let x = reference[0];
    let y = (d == 3).then(|| reference[1]);
    let z = reference[d - 1];
    let (h, hx, hy) = params.height_and_gradient(x, y);
    let decay = 1.0 - z / domain_top;
    let mut phys = reference.to_vec();
    phys[d - 1] = z + h * decay;
    let mut jac = vec![0.0; d * d];
    for a in 0..d - 1 {
        jac[a * d + a] = 1.0;
    }
    jac[(d - 1) * d] = hx * decay;
    if d == 3 {
        jac[(d - 1) * d + 1] = hy * decay;
    }
    jac[d * d - 1] = 1.0 - h / domain_top;
    (phys, jac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapping {
    Identity,
    TerrainFollowing(HillParams),
}

/// A face between two cells (or a cell and a wall). The reference normal
/// points from `minus` to `plus` along direction `dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub dir: usize,
    pub minus: Option<usize>,
    pub plus: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }
}

/// Geometry of one cell: affine box plus an interpolated hill displacement.
#[derive(Debug, Clone)]
pub struct CellMap {
    /// Cell centre of the undeformed box.
    pub center: [f64; 3],
    /// Half widths of the undeformed box.
    pub half: [f64; 3],
    /// Hill heights at the horizontal Gauss-Lobatto nodes, lexicographic.
    pub hill_nodes: Vec<f64>,
}

/// Metric data at the tensor-product points of one quadrature rule.
#[derive(Debug, Clone)]
pub struct MetricData {
    /// Points per cell volume.
    pub n_q: usize,
    /// Points per face.
    pub n_fq: usize,
    pub det_j: Vec<f64>,
    /// `d x d` per point, row `a` holds `d xi_a / d x_b`.
    pub inv_j: Vec<f64>,
    /// `w_q * det J_q`.
    pub jxw: Vec<f64>,
    /// Unit normal (`d` per face point) along the face's reference direction.
    pub face_normal: Vec<f64>,
    /// `w_f * |surface Jacobian|` per face point.
    pub face_jxw: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MeshGeometry {
    pub dim: usize,
    pub degree: usize,
    /// Gauss-Lobatto nodes of the cell basis on [-1, 1].
    pub gll_nodes: Vec<f64>,
    pub extents: Vec<f64>,
    pub cell_counts: Vec<usize>,
    pub mapping: Mapping,
    pub boundary: Vec<BoundaryTag>,
    pub cells: Vec<CellMap>,
    pub faces: Vec<Face>,
    /// `2 * dim` faces per cell: lower and upper face in each direction.
    pub cell_faces: Vec<usize>,
    /// Physical coordinates of the nodal points, `dim` per node.
    pub node_coords: Vec<f64>,
    /// `(r + 1)`-point Gauss-Legendre metrics.
    pub collocated: MetricData,
    /// `(2r + 1)`-point Gauss-Legendre metrics.
    pub consistent: MetricData,
}

/// Builds a structured mesh of `[0, L_0] x ... x [0, L_{d-1}]`.
pub fn build_mesh(
    dim: usize,
    extents: &[f64],
    cell_counts: &[usize],
    mapping: Mapping,
    boundary: &[BoundaryTag],
    degree: usize,
) -> Result<MeshGeometry> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
    }
    if extents.len() != dim || cell_counts.len() != dim || boundary.len() != dim {
        return Err(Error::InvalidArgument(
            "extents, cell counts and boundary tags need one entry per direction".into(),
        ));
    }
    if extents.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("extents must be positive".into()));
    }
    if cell_counts.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("cell counts must be at least 1".into()));
    }
    let top = extents[dim - 1];
    if let Mapping::TerrainFollowing(hill) = &mapping {
        hill.validate()?;
        if hill.h_c >= top {
            return Err(Error::InvalidGeometry(format!(
                "hill height {} reaches the domain top {top}",
                hill.h_c
            )));
        }
    }
    let gll = gauss_lobatto(degree + 1)?;
    let n1 = degree + 1;
    let n_cells: usize = cell_counts.iter().product();
    let n_hnodes = n1.pow(dim as u32 - 1);

    let mut cells = Vec::with_capacity(n_cells);
    for c in 0..n_cells {
        let idx = cell_multi_index(c, cell_counts);
        let mut center = [0.0; 3];
        let mut half = [0.0; 3];
        for a in 0..dim {
            let w = extents[a] / cell_counts[a] as f64;
            half[a] = 0.5 * w;
            center[a] = (idx[a] as f64 + 0.5) * w;
        }
        let mut hill_nodes = vec![0.0; n_hnodes];
        if let Mapping::TerrainFollowing(hill) = &mapping {
            for (k, h) in hill_nodes.iter_mut().enumerate() {
                let x = center[0] + half[0] * gll.points[k % n1];
                let y = (dim == 3).then(|| center[1] + half[1] * gll.points[k / n1]);
                *h = hill_height(x, y, hill);
            }
        }
        cells.push(CellMap {
            center,
            half,
            hill_nodes,
        });
    }

    let (faces, cell_faces) = build_faces(dim, cell_counts, boundary);

    let mut mesh = MeshGeometry {
        dim,
        degree,
        gll_nodes: gll.points.clone(),
        extents: extents.to_vec(),
        cell_counts: cell_counts.to_vec(),
        mapping,
        boundary: boundary.to_vec(),
        cells,
        faces,
        cell_faces,
        node_coords: Vec::new(),
        collocated: empty_metrics(),
        consistent: empty_metrics(),
    };
    let n_nodes = n1.pow(dim as u32);
    let mut coords = Vec::with_capacity(n_cells * n_nodes * dim);
    for c in 0..n_cells {
        for q in 0..n_nodes {
            let xi = tensor_point(q, &gll.points, dim);
            let (x, _) = mesh.map_point(c, &xi);
            coords.extend_from_slice(&x[..dim]);
        }
    }
    mesh.node_coords = coords;
    mesh.collocated = mesh.compute_metrics(&Basis1D::collocated(degree)?)?;
    mesh.consistent = mesh.compute_metrics(&Basis1D::consistent(degree)?)?;
    Ok(mesh)
}

fn empty_metrics() -> MetricData {
    MetricData {
        n_q: 0,
        n_fq: 0,
        det_j: Vec::new(),
        inv_j: Vec::new(),
        jxw: Vec::new(),
        face_normal: Vec::new(),
        face_jxw: Vec::new(),
    }
}

pub(crate) fn cell_multi_index(c: usize, counts: &[usize]) -> [usize; 3] {
    let mut idx = [0; 3];
    let mut rem = c;
    for (a, &n) in counts.iter().enumerate() {
        idx[a] = rem % n;
        rem /= n;
    }
    idx
}

fn cell_linear_index(idx: &[usize; 3], counts: &[usize]) -> usize {
    let mut c = 0;
    for a in (0..counts.len()).rev() {
        c = c * counts[a] + idx[a];
    }
    c
}

/// Reference coordinates of lexicographic point `q` of a tensor rule.
pub(crate) fn tensor_point(q: usize, points: &[f64], dim: usize) -> [f64; 3] {
    let n = points.len();
    let mut xi = [0.0; 3];
    let mut rem = q;
    for x in xi.iter_mut().take(dim) {
        *x = points[rem % n];
        rem /= n;
    }
    xi
}

fn build_faces(dim: usize, counts: &[usize], boundary: &[BoundaryTag]) -> (Vec<Face>, Vec<usize>) {
    let n_cells: usize = counts.iter().product();
    let mut faces = Vec::new();
    let mut cell_faces = vec![usize::MAX; n_cells * 2 * dim];
    for dir in 0..dim {
        let n = counts[dir];
        let periodic = boundary[dir] == BoundaryTag::Periodic;
        let layers = if periodic { n } else { n + 1 };
        let transverse: usize = n_cells / n;
        for t in 0..transverse {
            // expand transverse index over the other directions
            let mut idx = [0usize; 3];
            let mut rem = t;
            for a in 0..dim {
                if a == dir {
                    continue;
                }
                idx[a] = rem % counts[a];
                rem /= counts[a];
            }
            for layer in 0..layers {
                let plus = (layer < n).then(|| {
                    let mut i = idx;
                    i[dir] = layer;
                    cell_linear_index(&i, counts)
                });
                let minus = if layer > 0 {
                    let mut i = idx;
                    i[dir] = layer - 1;
                    Some(cell_linear_index(&i, counts))
                } else if periodic {
                    let mut i = idx;
                    i[dir] = n - 1;
                    Some(cell_linear_index(&i, counts))
                } else {
                    None
                };
                let f = faces.len();
                faces.push(Face { dir, minus, plus });
                if let Some(p) = plus {
                    cell_faces[p * 2 * dim + 2 * dir] = f;
                }
                if let Some(m) = minus {
                    cell_faces[m * 2 * dim + 2 * dir + 1] = f;
                }
            }
        }
    }
    (faces, cell_faces)
}

impl MeshGeometry {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_dofs_per_cell(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_cells() * self.n_dofs_per_cell()
    }

    pub fn metrics(&self, collocated: bool) -> &MetricData {
        if collocated {
            &self.collocated
        } else {
            &self.consistent
        }
    }

    /// Lower (`upper = false`) or upper face of `cell` in direction `dir`.
    pub fn cell_face(&self, cell: usize, dir: usize, upper: bool) -> usize {
        self.cell_faces[cell * 2 * self.dim + 2 * dir + usize::from(upper)]
    }

    /// Smallest undeformed cell width.
    pub fn min_cell_width(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.extents[a] / self.cell_counts[a] as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Physical point and Jacobian `d x / d xi` (row-major) of the
    /// isoparametric cell map at reference point `xi`.
    pub fn map_point(&self, cell: usize, xi: &[f64; 3]) -> ([f64; 3], [f64; 9]) {
        let d = self.dim;
        let cm = &self.cells[cell];
        let mut x = [0.0; 3];
        let mut jac = [0.0; 9];
        for a in 0..d {
            x[a] = cm.center[a] + cm.half[a] * xi[a];
            jac[a * d + a] = cm.half[a];
        }
        if let Mapping::TerrainFollowing(_) = self.mapping {
            let top = self.extents[d - 1];
            let (h, dh) = self.interpolated_hill(cell, xi);
            let zref = x[d - 1];
            let decay = 1.0 - zref / top;
            x[d - 1] = zref + h * decay;
            for a in 0..d - 1 {
                jac[(d - 1) * d + a] = dh[a] * decay;
            }
            jac[(d - 1) * d + d - 1] = cm.half[d - 1] * (1.0 - h / top);
        }
        (x, jac)
    }

    /// Interpolated hill height and its reference derivatives on a cell.
    fn interpolated_hill(&self, cell: usize, xi: &[f64; 3]) -> (f64, [f64; 2]) {
        let n1 = self.degree + 1;
        let nodes = &self.gll_nodes;
        let cm = &self.cells[cell];
        let lag = |j: usize, x: f64| -> (f64, f64) {
            let mut v = 1.0;
            let mut dv = 0.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m == j {
                    continue;
                }
                let f = 1.0 / (nodes[j] - xm);
                dv = dv * (x - xm) * f + v * f;
                v *= (x - xm) * f;
            }
            (v, dv)
        };
        if self.dim == 2 {
            let mut h = 0.0;
            let mut dh = 0.0;
            for j in 0..n1 {
                let (v, dv) = lag(j, xi[0]);
                h += cm.hill_nodes[j] * v;
                dh += cm.hill_nodes[j] * dv;
            }
            (h, [dh, 0.0])
        } else {
            let mut h = 0.0;
            let mut dhx = 0.0;
            let mut dhy = 0.0;
            for jy in 0..n1 {
                let (vy, dvy) = lag(jy, xi[1]);
                for jx in 0..n1 {
                    let (vx, dvx) = lag(jx, xi[0]);
                    let hn = cm.hill_nodes[jx + n1 * jy];
                    h += hn * vx * vy;
                    dhx += hn * dvx * vy;
                    dhy += hn * vx * dvy;
                }
            }
            (h, [dhx, dhy])
        }
    }

    fn compute_metrics(&self, basis: &Basis1D) -> Result<MetricData> {
        let d = self.dim;
        let pts = &basis.rule.points;
        let wts = &basis.rule.weights;
        let nq1 = pts.len();
        let n_q = nq1.pow(d as u32);
        let n_fq = nq1.pow(d as u32 - 1);
        let n_cells = self.n_cells();
        let mut det_j = Vec::with_capacity(n_cells * n_q);
        let mut inv_j = Vec::with_capacity(n_cells * n_q * d * d);
        let mut jxw = Vec::with_capacity(n_cells * n_q);
        for c in 0..n_cells {
            for q in 0..n_q {
                let xi = tensor_point(q, pts, d);
                let (_, jac) = self.map_point(c, &xi);
                let (det, inv) = invert(&jac, d);
                if !(det > 0.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "non-positive Jacobian determinant {det:e} in cell {c}"
                    )));
                }
                let mut w = 1.0;
                let mut rem = q;
                for _ in 0..d {
                    w *= wts[rem % nq1];
                    rem /= nq1;
                }
                det_j.push(det);
                inv_j.extend_from_slice(&inv[..d * d]);
                jxw.push(w * det);
            }
        }
        let mut face_normal = Vec::with_capacity(self.faces.len() * n_fq * d);
        let mut face_jxw = Vec::with_capacity(self.faces.len() * n_fq);
        for face in &self.faces {
            let (cell, side) = match (face.minus, face.plus) {
                (Some(m), _) => (m, 1.0),
                (None, Some(p)) => (p, -1.0),
                (None, None) => unreachable!("face without cells"),
            };
            for fq in 0..n_fq {
                let mut xi = [0.0; 3];
                let mut rem = fq;
                let mut w = 1.0;
                for (a, x) in xi.iter_mut().enumerate().take(d) {
                    if a == face.dir {
                        *x = side;
                    } else {
                        *x = pts[rem % nq1];
                        w *= wts[rem % nq1];
                        rem /= nq1;
                    }
                }
                let (_, jac) = self.map_point(cell, &xi);
                let (det, inv) = invert(&jac, d);
                let mut n = [0.0; 3];
                let mut norm = 0.0;
                for b in 0..d {
                    n[b] = det * inv[face.dir * d + b];
                    norm += n[b] * n[b];
                }
                let norm = norm.sqrt();
                for nb in n.iter().take(d) {
                    face_normal.push(nb / norm);
                }
                face_jxw.push(w * norm);
            }
        }
        Ok(MetricData {
            n_q,
            n_fq,
            det_j,
            inv_j,
            jxw,
            face_normal,
            face_jxw,
        })
    }

    /// Total volume by the consistent rule.
    pub fn volume(&self) -> f64 {
        self.consistent.jxw.iter().sum()
    }

    /// Text summary for reports.
    pub fn summary(&self) -> String {
        let (lo, hi) = self
            .consistent
            .det_j
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut s = String::new();
        let counts: Vec<String> = self.cell_counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "dimension        {}", self.dim);
        let _ = writeln!(s, "cells            {} ({})", self.n_cells(), counts.join(" x "));
        let _ = writeln!(s, "degree           {}", self.degree);
        let _ = writeln!(s, "dofs per scalar  {}", self.n_dofs());
        let _ = writeln!(s, "volume           {:.12e}", self.volume());
        let _ = writeln!(s, "min det J        {lo:.6e}");
        let _ = writeln!(s, "max det J        {hi:.6e}");
        s
    }
}

/// Determinant and inverse of a `d x d` row-major matrix (`d` = 2 or 3).
pub(crate) fn invert(m: &[f64; 9], d: usize) -> (f64, [f64; 9]) {
    let mut inv = [0.0; 9];
    if d == 2 {
        let det = m[0] * m[3] - m[1] * m[2];
        inv[0] = m[3] / det;
        inv[1] = -m[1] / det;
        inv[2] = -m[2] / det;
        inv[3] = m[0] / det;
        (det, inv)
    } else {
        let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6]);
        inv[0] = (m[4] * m[8] - m[5] * m[7]) / det;
        inv[1] = (m[2] * m[7] - m[1] * m[8]) / det;
        inv[2] = (m[1] * m[5] - m[2] * m[4]) / det;
        inv[3] = (m[5] * m[6] - m[3] * m[8]) / det;
        inv[4] = (m[0] * m[8] - m[2] * m[6]) / det;
        inv[5] = (m[2] * m[3] - m[0] * m[5]) / det;
        inv[6] = (m[3] * m[7] - m[4] * m[6]) / det;
        inv[7] = (m[1] * m[6] - m[0] * m[7]) / det;
        inv[8] = (m[0] * m[4] - m[1] * m[3]) / det;
        (det, inv)
    }
}
