#![allow(dead_code)]

//! Dense reference assembly of the cell and face operators, built point by
//! point from the isoparametric map so it shares no code with the
//! sum-factorized kernels.

use imexdg_core::basis::Basis1D;
use imexdg_core::mesh::MeshGeometry;
use imexdg_core::operators::Discretization;
use imexdg_core::quadrature::gauss_legendre;
use nalgebra::DMatrix;

/// Tensor-product quadrature point on the reference cell.
struct Point {
    xi: [f64; 3],
    w: f64,
}

fn volume_points(dim: usize, n: usize) -> Vec<Point> {
    let rule = gauss_legendre(n).unwrap();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|k| {
            let mut xi = [0.0; 3];
            let mut w = 1.0;
            let mut rem = k;
            for a in 0..dim {
                xi[a] = rule.points[rem % n];
                w *= rule.weights[rem % n];
                rem /= n;
            }
            Point { xi, w }
        })
        .collect()
}

/// Points on the face `xi_dir = +-1`.
fn face_points(dim: usize, n: usize, dir: usize, upper: bool) -> Vec<Point> {
    let rule = gauss_legendre(n).unwrap();
    let total = n.pow(dim as u32 - 1);
    (0..total)
        .map(|k| {
            let mut xi = [0.0; 3];
            let mut w = 1.0;
            let mut rem = k;
            for a in 0..dim {
                if a == dir {
                    xi[a] = if upper { 1.0 } else { -1.0 };
                } else {
                    xi[a] = rule.points[rem % n];
                    w *= rule.weights[rem % n];
                    rem /= n;
                }
            }
            Point { xi, w }
        })
        .collect()
}

pub struct Geometry {
    pub det: f64,
    /// `inv[a][b] = d xi_a / d x_b`.
    pub inv: [[f64; 3]; 3],
}

fn geometry(mesh: &MeshGeometry, cell: usize, xi: &[f64; 3]) -> Geometry {
    let d = mesh.dim;
    let (_, jac) = mesh.map_point(cell, xi);
    let mut m = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            m[(a, b)] = jac[a * d + b];
        }
    }
    let det = m.determinant();
    let inv_m = m.try_inverse().expect("singular cell map");
    let mut inv = [[0.0; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            inv[a][b] = inv_m[(a, b)];
        }
    }
    Geometry { det, inv }
}

/// Reference-space values and gradients of all cell basis functions.
fn shape(basis: &Basis1D, dim: usize, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let n1 = basis.n_nodes();
    let nd = n1.pow(dim as u32);
    let mut v = vec![0.0; nd];
    let mut g = vec![[0.0; 3]; nd];
    for i in 0..nd {
        let mut idx = [0usize; 3];
        let mut rem = i;
        for a in 0..dim {
            idx[a] = rem % n1;
            rem /= n1;
        }
        let vals: Vec<f64> = (0..dim).map(|a| basis.value(idx[a], xi[a])).collect();
        let ders: Vec<f64> = (0..dim).map(|a| basis.derivative(idx[a], xi[a])).collect();
        v[i] = vals.iter().product();
        for a in 0..dim {
            g[i][a] = (0..dim).map(|b| if a == b { ders[b] } else { vals[b] }).product();
        }
    }
    (v, g)
}

fn physical_grad(geo: &Geometry, dim: usize, g: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for b in 0..dim {
        out[b] = (0..dim).map(|a| geo.inv[a][b] * g[a]).sum();
    }
    out
}

/// Cofactor normal `det J * J^{-T} e_dir`, signed outward.
fn area_normal(geo: &Geometry, dim: usize, dir: usize, upper: bool) -> [f64; 3] {
    let s = if upper { 1.0 } else { -1.0 };
    let mut n = [0.0; 3];
    for b in 0..dim {
        n[b] = s * geo.det * geo.inv[dir][b];
    }
    n
}

fn eval(vals: &[f64], field: &[f64], base: usize) -> f64 {
    vals.iter().enumerate().map(|(j, v)| v * field[base + j]).sum()
}

pub struct Oracle<'a> {
    pub disc: &'a Discretization,
    pub basis: Basis1D,
}

/// Neighbour across the face and whether it exists.
struct Side {
    cell: usize,
    other: Option<usize>,
}

impl<'a> Oracle<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        let basis = Basis1D::consistent(disc.mesh.degree).unwrap();
        Self { disc, basis }
    }

    fn dim(&self) -> usize {
        self.disc.dim()
    }

    fn nd(&self) -> usize {
        self.disc.n_dofs()
    }

    fn n_cons(&self) -> usize {
        2 * self.disc.mesh.degree + 1
    }

    fn n_colloc(&self) -> usize {
        self.disc.mesh.degree + 1
    }

    fn neighbour(&self, cell: usize, dir: usize, upper: bool) -> Side {
        let face = self.disc.mesh.faces[self.disc.mesh.cell_face(cell, dir, upper)];
        let other = if upper { face.plus } else { face.minus };
        Side { cell, other }
    }

    /// Density-weighted mass block for one velocity component.
    pub fn weighted_mass(&self, rho: &[f64], n_points: usize) -> DMatrix<f64> {
        let (nd, dim) = (self.nd(), self.dim());
        let n = self.disc.scalar_len();
        let mut m = DMatrix::zeros(n, n);
        for c in 0..self.disc.n_cells() {
            for p in volume_points(dim, n_points) {
                let geo = geometry(&self.disc.mesh, c, &p.xi);
                let (v, _) = shape(&self.basis, dim, &p.xi);
                let r = eval(&v, rho, c * nd);
                let w = p.w * geo.det * r;
                for i in 0..nd {
                    for j in 0..nd {
                        m[(c * nd + i, c * nd + j)] += w * v[i] * v[j];
                    }
                }
            }
        }
        m
    }

    pub fn mass(&self) -> DMatrix<f64> {
        self.weighted_mass(&vec![1.0; self.disc.scalar_len()], self.n_colloc())
    }

    /// Vector operator with the same block on every component.
    pub fn blockwise(&self, block: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
        let (nd, dim) = (self.nd(), self.dim());
        let mut out = vec![0.0; u.len()];
        for a in 0..dim {
            let comp: Vec<f64> = (0..self.disc.scalar_len())
                .map(|k| u[((k / nd) * dim + a) * nd + k % nd])
                .collect();
            let y = block * nalgebra::DVector::from_vec(comp);
            for k in 0..self.disc.scalar_len() {
                out[((k / nd) * dim + a) * nd + k % nd] = y[k];
            }
        }
        out
    }

    /// Weak pressure gradient, `n_v x n` with centred face pressure and the
    /// interior pressure at walls.
    pub fn pressure_gradient(&self) -> DMatrix<f64> {
        let (nd, dim) = (self.nd(), self.dim());
        let n = self.disc.scalar_len();
        let mut b = DMatrix::zeros(n * dim, n);
        let row = |c: usize, a: usize, i: usize| (c * dim + a) * nd + i;
        for c in 0..self.disc.n_cells() {
            for p in volume_points(dim, self.n_cons()) {
                let geo = geometry(&self.disc.mesh, c, &p.xi);
                let (v, g) = shape(&self.basis, dim, &p.xi);
                for i in 0..nd {
                    let gi = physical_grad(&geo, dim, &g[i]);
                    for a in 0..dim {
                        for j in 0..nd {
                            b[(row(c, a, i), c * nd + j)] -= p.w * geo.det * gi[a] * v[j];
                        }
                    }
                }
            }
            for dir in 0..dim {
                for upper in [false, true] {
                    let side = self.neighbour(c, dir, upper);
                    for p in face_points(dim, self.n_cons(), dir, upper) {
                        let geo = geometry(&self.disc.mesh, c, &p.xi);
                        let nrm = area_normal(&geo, dim, dir, upper);
                        let (v, _) = shape(&self.basis, dim, &p.xi);
                        let mut xo = p.xi;
                        xo[dir] = -xo[dir];
                        let (vo, _) = shape(&self.basis, dim, &xo);
                        for i in 0..nd {
                            for a in 0..dim {
                                let base = p.w * nrm[a] * v[i];
                                match side.other {
                                    Some(o) => {
                                        for j in 0..nd {
                                            b[(row(c, a, i), side.cell * nd + j)] += 0.5 * base * v[j];
                                            b[(row(c, a, i), o * nd + j)] += 0.5 * base * vo[j];
                                        }
                                    }
                                    None => {
                                        for j in 0..nd {
                                            b[(row(c, a, i), c * nd + j)] += base * v[j];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        b
    }

    /// Weak divergence of `rho_h u`, `n x n_v`, centred fluxes and zero
    /// wall flux.
    pub fn energy_divergence(&self, rho_h: &[f64]) -> DMatrix<f64> {
        let (nd, dim) = (self.nd(), self.dim());
        let n = self.disc.scalar_len();
        let mut m = DMatrix::zeros(n, n * dim);
        let col = |c: usize, b: usize, j: usize| (c * dim + b) * nd + j;
        for c in 0..self.disc.n_cells() {
            for p in volume_points(dim, self.n_cons()) {
                let geo = geometry(&self.disc.mesh, c, &p.xi);
                let (v, g) = shape(&self.basis, dim, &p.xi);
                let h = eval(&v, rho_h, c * nd);
                for i in 0..nd {
                    let gi = physical_grad(&geo, dim, &g[i]);
                    for b in 0..dim {
                        for j in 0..nd {
                            m[(c * nd + i, col(c, b, j))] -= p.w * geo.det * h * v[j] * gi[b];
                        }
                    }
                }
            }
            for dir in 0..dim {
                for upper in [false, true] {
                    let Some(o) = self.neighbour(c, dir, upper).other else {
                        continue;
                    };
                    for p in face_points(dim, self.n_cons(), dir, upper) {
                        let geo = geometry(&self.disc.mesh, c, &p.xi);
                        let nrm = area_normal(&geo, dim, dir, upper);
                        let (v, _) = shape(&self.basis, dim, &p.xi);
                        let mut xo = p.xi;
                        xo[dir] = -xo[dir];
                        let (vo, _) = shape(&self.basis, dim, &xo);
                        let hm = eval(&v, rho_h, c * nd);
                        let hp = eval(&vo, rho_h, o * nd);
                        for i in 0..nd {
                            for b in 0..dim {
                                let base = 0.5 * p.w * nrm[b] * v[i];
                                for j in 0..nd {
                                    m[(c * nd + i, col(c, b, j))] += base * hm * v[j];
                                    m[(c * nd + i, col(o, b, j))] += base * hp * vo[j];
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }

    /// Diagonal of `D + (a dt)^2 int gamma/(gamma-1) p/rho |grad phi_i|^2`.
    pub fn helmholtz_diagonal(&self, rho: &[f64], p: &[f64], a_dt: f64) -> Vec<f64> {
        let (nd, dim) = (self.nd(), self.dim());
        let gas = &self.disc.gas;
        let mass = self.mass();
        let mut out: Vec<f64> = (0..self.disc.scalar_len()).map(|k| mass[(k, k)] / (gas.gamma - 1.0)).collect();
        let factor = gas.gamma / (gas.gamma - 1.0) * a_dt * a_dt;
        for c in 0..self.disc.n_cells() {
            for q in volume_points(dim, self.n_cons()) {
                let geo = geometry(&self.disc.mesh, c, &q.xi);
                let (v, g) = shape(&self.basis, dim, &q.xi);
                let ratio = eval(&v, p, c * nd) / eval(&v, rho, c * nd);
                for i in 0..nd {
                    let gi = physical_grad(&geo, dim, &g[i]);
                    let g2: f64 = gi.iter().map(|x| x * x).sum();
                    out[c * nd + i] += q.w * geo.det * factor * ratio * g2;
                }
            }
        }
        out
    }
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
}

/// `max |a - b| / max |b|`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}
