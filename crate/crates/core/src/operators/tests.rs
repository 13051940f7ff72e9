use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mesh::{build_mesh, BoundaryTag, HillParams, Mapping};

const HILL: HillParams = HillParams {
    h_c: 400.0,
    a_c: 1000.0,
    x_c: 3000.0,
    y_c: 2000.0,
};

fn disc(dim: usize, degree: usize, terrain: bool, periodic_z: bool, gravity: bool) -> Discretization {
    let (ext, counts) = if dim == 2 {
        (vec![6000.0, 4000.0], vec![4, 3])
    } else {
        (vec![6000.0, 4000.0, 4000.0], vec![3, 2, 2])
    };
    let mut tags = vec![BoundaryTag::Periodic; dim];
    if !periodic_z {
        tags[dim - 1] = BoundaryTag::SlipWall;
    }
    let mapping = if terrain {
        Mapping::TerrainFollowing(HILL)
    } else {
        Mapping::Identity
    };
    let mesh = build_mesh(dim, &ext, &counts, mapping, &tags, degree).unwrap();
    Discretization::new(mesh, GasConstants::default(), gravity).unwrap()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nodal values of a function of the physical coordinates.
fn nodal(d: &Discretization, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let dim = d.dim();
    (0..d.scalar_len())
        .map(|k| f(&d.mesh.node_coords[k * dim..(k + 1) * dim]))
        .collect()
}

#[test]
fn mass_inverse_round_trip() {
    for dim in [2, 3] {
        let d = disc(dim, 2, true, false, false);
        let x = random(d.scalar_len(), 1);
        let mut mx = vec![0.0; x.len()];
        d.apply_mass(&x, &mut mx).unwrap();
        let mut y = vec![0.0; x.len()];
        d.inverse_mass(&mx, &mut y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }
}

#[test]
fn mass_matches_pointwise_quadrature() {
    // dense oracle built from point evaluations of the 1D basis
    let d = disc(2, 2, true, false, false);
    let b = &d.collocated;
    let n1 = b.n_nodes();
    let nq1 = b.n_quad();
    let m = &d.mesh.collocated;
    let nd = d.n_dofs();
    let cell = 5;
    let x = random(d.scalar_len(), 2);
    let mut mx = vec![0.0; x.len()];
    d.apply_mass(&x, &mut mx).unwrap();
    for i in 0..nd {
        let mut acc = 0.0;
        for q in 0..m.n_q {
            let (qx, qy) = (q % nq1, q / nq1);
            let (px, py) = (b.rule.points[qx], b.rule.points[qy]);
            let phi_i = b.value(i % n1, px) * b.value(i / n1, py);
            let mut u = 0.0;
            for j in 0..nd {
                u += x[cell * nd + j] * b.value(j % n1, px) * b.value(j / n1, py);
            }
            acc += m.jxw[cell * m.n_q + q] * phi_i * u;
        }
        assert!((acc - mx[cell * nd + i]).abs() < 1e-9 * acc.abs().max(1.0));
    }
}

#[test]
fn mass_diagonal_matches_unit_vectors() {
    let d = disc(2, 3, true, false, false);
    let diag = d.mass_diagonal();
    let n = d.scalar_len();
    for k in (0..n).step_by(7) {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut me = vec![0.0; n];
        d.apply_mass(&e, &mut me).unwrap();
        assert!((me[k] - diag[k]).abs() < 1e-10 * diag[k]);
    }
}

#[test]
fn weighted_mass_inverse_both_modes() {
    let d = disc(3, 2, true, false, false);
    let rho = nodal(&d, |x| 1.2 * (-x[2] / 8000.0).exp());
    let u = random(d.vector_len(), 3);
    for mode in [IntegrationMode::Consistent, IntegrationMode::Collocated] {
        let a = d.weighted_mass(&rho, mode).unwrap();
        let mut au = vec![0.0; u.len()];
        d.apply_weighted_mass(&a, &u, &mut au).unwrap();
        let mut v = vec![0.0; u.len()];
        d.inverse_weighted_mass(&a, &au, &mut v).unwrap();
        for (x, y) in u.iter().zip(&v) {
            assert!((x - y).abs() < 1e-9, "{mode:?}: {x} {y}");
        }
    }
}

#[test]
fn consistent_and_collocated_agree_for_constant_density_on_affine_cells() {
    let d = disc(2, 3, false, false, false);
    let rho = vec![1.1; d.scalar_len()];
    let u = random(d.vector_len(), 4);
    let mut out = [vec![0.0; u.len()], vec![0.0; u.len()]];
    for (k, mode) in [IntegrationMode::Consistent, IntegrationMode::Collocated].into_iter().enumerate() {
        let a = d.weighted_mass(&rho, mode).unwrap();
        d.apply_weighted_mass(&a, &u, &mut out[k]).unwrap();
    }
    for (x, y) in out[0].iter().zip(&out[1]) {
        assert!((x - y).abs() < 1e-8 * x.abs().max(1.0));
    }
}

#[test]
fn collocated_weighted_mass_aliases_variable_density() {
    let d = disc(2, 2, false, false, false);
    let rho = nodal(&d, |x| 1.0 + 0.5 * (x[0] / 700.0).sin() * (x[1] / 900.0).cos());
    let u = random(d.vector_len(), 5);
    let ac = d.weighted_mass(&rho, IntegrationMode::Consistent).unwrap();
    let al = d.weighted_mass(&rho, IntegrationMode::Collocated).unwrap();
    let (mut x, mut y) = (vec![0.0; u.len()], vec![0.0; u.len()]);
    d.apply_weighted_mass(&ac, &u, &mut x).unwrap();
    d.apply_weighted_mass(&al, &u, &mut y).unwrap();
    let diff: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-6 * x.iter().map(|v| v.abs()).fold(0.0, f64::max));
}

#[test]
fn weighted_mass_rejects_negative_density() {
    let d = disc(2, 1, false, false, false);
    let mut rho = vec![1.0; d.scalar_len()];
    rho[3] = -2.0;
    assert!(matches!(
        d.weighted_mass(&rho, IntegrationMode::Consistent),
        Err(Error::StateInvalid(_))
    ));
}

#[test]
fn gradient_and_divergence_are_adjoint() {
    for (dim, terrain, pz) in [(2, false, true), (2, false, false), (3, false, false), (2, true, false)] {
        let d = disc(dim, 2, terrain, pz, false);
        let p = random(d.scalar_len(), 6);
        let q = random(d.vector_len(), 7);
        let ones = vec![1.0; d.scalar_len()];
        let mut bp = vec![0.0; q.len()];
        d.apply_pressure_gradient(&p, &mut bp).unwrap();
        let mut cq = vec![0.0; p.len()];
        d.apply_energy_divergence(&ones, &q, &mut cq).unwrap();
        let lhs = dot(&q, &bp);
        let rhs = -dot(&p, &cq);
        let scale = lhs.abs().max(1e-3 * d.mesh.volume().cbrt());
        assert!((lhs - rhs).abs() < 1e-10 * scale, "dim {dim} terrain {terrain}: {lhs} {rhs}");
    }
}

#[test]
fn constant_pressure_has_no_gradient_on_terrain() {
    for dim in [2, 3] {
        let d = disc(dim, 3, true, false, false);
        let p = vec![1e5; d.scalar_len()];
        let mut bp = vec![0.0; d.vector_len()];
        d.apply_pressure_gradient(&p, &mut bp).unwrap();
        let scale = 1e5 * d.mesh.volume() / d.n_cells() as f64 / 1000.0;
        let worst = bp.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-11 * scale, "dim {dim}: {worst:e}");
    }
}

#[test]
fn free_stream_is_preserved_on_periodic_mesh() {
    let d = disc(3, 2, false, true, false);
    let rho = vec![1.2; d.scalar_len()];
    let mut u = vec![0.0; d.vector_len()];
    let nd = d.n_dofs();
    for c in 0..d.n_cells() {
        for (a, v) in [10.0, -3.0, 2.0].iter().enumerate() {
            u[(c * 3 + a) * nd..(c * 3 + a + 1) * nd].iter_mut().for_each(|x| *x = *v);
        }
    }
    let rhs = d.explicit_advective_rhs(&rho, &u).unwrap();
    let scale = 1.2 * 100.0 * d.mesh.volume() / d.n_cells() as f64 / 1000.0;
    for v in rhs.density.iter().chain(&rhs.momentum).chain(&rhs.kinetic) {
        assert!(v.abs() < 1e-10 * scale, "{v:e}");
    }
}

#[test]
fn explicit_rhs_conserves_on_walls() {
    let d = disc(2, 3, true, false, true);
    let rho = nodal(&d, |x| 1.2 * (-x[1] / 8000.0).exp());
    let mut u = random(d.vector_len(), 8);
    u.iter_mut().for_each(|v| *v *= 10.0);
    let rhs = d.explicit_advective_rhs(&rho, &u).unwrap();
    let total: f64 = rhs.density.iter().sum();
    let scale: f64 = rhs.density.iter().map(|v| v.abs()).sum();
    assert!(total.abs() < 1e-12 * scale, "{total:e} vs {scale:e}");
    let nd = d.n_dofs();
    let (r0, u0) = (vec![1.0; d.scalar_len()], vec![0.0; d.vector_len()]);
    let still = d.explicit_advective_rhs(&r0, &u0).unwrap();
    let mut grav = 0.0;
    for c in 0..d.n_cells() {
        grav += still.momentum[(c * 2 + 1) * nd..(c * 2 + 2) * nd].iter().sum::<f64>();
    }
    assert!((grav - 9.81 * d.mesh.volume()).abs() < 1e-9 * grav);
}

#[test]
fn integrate_recovers_volume() {
    let d = disc(3, 2, true, false, false);
    let v = d.integrate(&vec![1.0; d.scalar_len()]);
    assert!((v - d.mesh.volume()).abs() < 1e-9 * v);
    let mut m1 = vec![0.0; d.scalar_len()];
    d.apply_mass(&vec![1.0; d.scalar_len()], &mut m1).unwrap();
    assert!((d.dual_total(&m1) - v).abs() < 1e-9 * v);
}

#[test]
fn kinetic_dual_of_uniform_flow() {
    let d = disc(2, 2, true, false, false);
    let rho = vec![2.0; d.scalar_len()];
    let mut u = vec![0.0; d.vector_len()];
    let nd = d.n_dofs();
    for c in 0..d.n_cells() {
        u[c * 2 * nd..(c * 2 + 1) * nd].iter_mut().for_each(|x| *x = 3.0);
    }
    let k = d.kinetic_dual(&rho, &u).unwrap();
    let total: f64 = k.iter().sum();
    assert!((total - 9.0 * d.mesh.volume()).abs() < 1e-9 * total);
}

#[test]
fn helmholtz_diagonal_matches_pointwise_oracle() {
    let d = disc(2, 2, true, false, false);
    let rho = nodal(&d, |x| 1.2 * (-x[1] / 8000.0).exp());
    let p = nodal(&d, |x| 1e5 * (-x[1] / 9000.0).exp());
    let adt = 3.7;
    let diag = d.helmholtz_diagonal(&rho, &p, adt).unwrap();
    let mdiag = d.mass_diagonal();
    let b = &d.consistent;
    let n1 = b.n_nodes();
    let nq1 = b.n_quad();
    let m = &d.mesh.consistent;
    let nd = d.n_dofs();
    let gas = GasConstants::default();
    for cell in [0, 7] {
        for i in 0..nd {
            let mut acc = 0.0;
            for q in 0..m.n_q {
                let (px, py) = (b.rule.points[q % nq1], b.rule.points[q / nq1]);
                let (ix, iy) = (i % n1, i / n1);
                let g_ref = [b.derivative(ix, px) * b.value(iy, py), b.value(ix, px) * b.derivative(iy, py)];
                let gq = (cell * m.n_q + q) * 4;
                let inv = &m.inv_j[gq..gq + 4];
                let gx = inv[0] * g_ref[0] + inv[2] * g_ref[1];
                let gy = inv[1] * g_ref[0] + inv[3] * g_ref[1];
                let (mut rq, mut pq) = (0.0, 0.0);
                for j in 0..nd {
                    let phi = b.value(j % n1, px) * b.value(j / n1, py);
                    rq += rho[cell * nd + j] * phi;
                    pq += p[cell * nd + j] * phi;
                }
                acc += m.jxw[cell * m.n_q + q] * gas.enthalpy_factor() * pq / rq * (gx * gx + gy * gy);
            }
            let expect = mdiag[cell * nd + i] / (gas.gamma - 1.0) + adt * adt * acc;
            let got = diag[cell * nd + i];
            assert!((got - expect).abs() < 1e-10 * expect, "cell {cell} i {i}: {got} {expect}");
        }
    }
}

#[test]
fn length_mismatch_is_rejected() {
    let d = disc(2, 1, false, false, false);
    let mut out = vec![0.0; d.vector_len()];
    assert!(matches!(
        d.apply_pressure_gradient(&[1.0; 3], &mut out),
        Err(Error::InvalidArgument(_))
    ));
}
