#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imexdg_core::mesh::{build_mesh, BoundaryTag, HillParams, Mapping};
use imexdg_core::operators::Discretization;
use imexdg_core::state::GasConstants;

pub const HILL: HillParams = HillParams {
    h_c: 300.0,
    a_c: 1500.0,
    x_c: 4000.0,
    y_c: 3000.0,
};

/// Small mesh over an 8 km x (6 km) x 8 km box, periodic horizontally.
pub fn disc(dim: usize, degree: usize, cells: &[usize], terrain: bool, gravity: bool) -> Discretization {
    let ext: Vec<f64> = if dim == 2 { vec![8000.0, 8000.0] } else { vec![8000.0, 6000.0, 8000.0] };
    let mut tags = vec![BoundaryTag::Periodic; dim];
    tags[dim - 1] = BoundaryTag::SlipWall;
    let mapping = if terrain { Mapping::TerrainFollowing(HILL) } else { Mapping::Identity };
    let mesh = build_mesh(dim, &ext, cells, mapping, &tags, degree).unwrap();
    Discretization::new(mesh, GasConstants::default(), gravity).unwrap()
}

pub fn random(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn nodal(d: &Discretization, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let dim = d.dim();
    (0..d.scalar_len())
        .map(|k| f(&d.mesh.node_coords[k * dim..(k + 1) * dim]))
        .collect()
}

/// Cell-blocked vector field from a function returning all components.
pub fn nodal_vector(d: &Discretization, f: impl Fn(&[f64]) -> [f64; 3]) -> Vec<f64> {
    let dim = d.dim();
    let nd = d.n_dofs();
    let mut out = vec![0.0; d.vector_len()];
    for k in 0..d.scalar_len() {
        let v = f(&d.mesh.node_coords[k * dim..(k + 1) * dim]);
        let (c, i) = (k / nd, k % nd);
        for a in 0..dim {
            out[(c * dim + a) * nd + i] = v[a];
        }
    }
    out
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Stratified density and pressure with scale heights near 8-9 km.
pub fn stratified(d: &Discretization) -> (Vec<f64>, Vec<f64>) {
    let dim = d.dim();
    let rho = nodal(d, |x| 1.2 * (-x[dim - 1] / 8500.0).exp());
    let p = nodal(d, |x| 1e5 * (-x[dim - 1] / 8000.0).exp());
    (rho, p)
}
