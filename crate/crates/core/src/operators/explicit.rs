use super::{Discretization, Scratch};
use crate::error::Result;
use crate::mesh::Face;

/// Weak divergences of the advective fluxes plus the gravity source.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitRhs {
    /// `div(rho u)` tested against `phi_i`.
    pub density: Vec<f64>,
    /// `div(rho u (x) u) + rho g k`, one block per component.
    pub momentum: Vec<f64>,
    /// `div(rho k u) + rho g u_z` with `k = |u|^2 / 2`.
    pub kinetic: Vec<f64>,
}

/// Face traces of `(rho, u)` on both sides of a face.
struct Traces {
    rho: [Vec<f64>; 2],
    u: [Vec<Vec<f64>>; 2],
}

impl Discretization {
    /// Traces of a scalar and a vector field on both sides of `face`; a
    /// missing side is a slip wall and receives the mirrored state.
    pub(crate) fn face_traces(
        &self,
        face_id: usize,
        face: &Face,
        scalar: &[f64],
        vector: &[f64],
        s: &mut Scratch,
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.dim();
        let nfq = self.mesh.consistent.n_fq;
        let normals = &self.mesh.consistent.face_normal[face_id * nfq * d..(face_id + 1) * nfq * d];
        let fetch = |cell: usize, upper: bool, s: &mut Scratch| {
            let mut sc = vec![0.0; nfq];
            self.face_trace(scalar, 1, 0, cell, face.dir, upper, &mut sc, s);
            let mut vc = Vec::with_capacity(d);
            for a in 0..d {
                let mut v = vec![0.0; nfq];
                self.face_trace(vector, d, a, cell, face.dir, upper, &mut v, s);
                vc.push(v);
            }
            (sc, vc)
        };
        let mirror = |sc: &Vec<f64>, vc: &Vec<Vec<f64>>| {
            let mut w = vc.clone();
            for q in 0..nfq {
                let un: f64 = (0..d).map(|a| vc[a][q] * normals[q * d + a]).sum();
                for a in 0..d {
                    w[a][q] -= 2.0 * un * normals[q * d + a];
                }
            }
            (sc.clone(), w)
        };
        match (face.minus, face.plus) {
            (Some(m), Some(p)) => {
                let (sm, vm) = fetch(m, true, s);
                let (sp, vp) = fetch(p, false, s);
                (sm, sp, vm, vp)
            }
            (Some(m), None) => {
                let (sm, vm) = fetch(m, true, s);
                let (sp, vp) = mirror(&sm, &vm);
                (sm, sp, vm, vp)
            }
            (None, Some(p)) => {
                let (sp, vp) = fetch(p, false, s);
                let (sm, vm) = mirror(&sp, &vp);
                (sm, sp, vm, vp)
            }
            (None, None) => unreachable!("face without cells"),
        }
    }

    fn explicit_face_flux(&self, face_id: usize, density: &[f64], velocity: &[f64], out: &mut [f64], s: &mut Scratch) {
        let d = self.dim();
        let m = &self.mesh.consistent;
        let nfq = m.n_fq;
        let face = self.mesh.faces[face_id];
        let (rm, rp, um, up) = self.face_traces(face_id, &face, density, velocity, s);
        let tr = Traces {
            rho: [rm, rp],
            u: [um, up],
        };
        for q in 0..nfq {
            let n = &m.face_normal[(face_id * nfq + q) * d..(face_id * nfq + q + 1) * d];
            let w = m.face_jxw[face_id * nfq + q];
            let mut un = [0.0; 2];
            let mut ke = [0.0; 2];
            for side in 0..2 {
                for a in 0..d {
                    un[side] += tr.u[side][a][q] * n[a];
                    ke[side] += 0.5 * tr.u[side][a][q] * tr.u[side][a][q];
                }
            }
            let lambda = un[0].abs().max(un[1].abs());
            let (r0, r1) = (tr.rho[0][q], tr.rho[1][q]);
            out[q] = w * (0.5 * (r0 * un[0] + r1 * un[1]) + 0.5 * lambda * (r0 - r1));
            for a in 0..d {
                let (v0, v1) = (tr.u[0][a][q], tr.u[1][a][q]);
                out[(1 + a) * nfq + q] = w
                    * (0.5 * (r0 * v0 * un[0] + r1 * v1 * un[1]) + 0.5 * lambda * (r0 * v0 - r1 * v1));
            }
            out[(1 + d) * nfq + q] = w
                * (0.5 * (r0 * ke[0] * un[0] + r1 * ke[1] * un[1]) + 0.5 * lambda * (r0 * ke[0] - r1 * ke[1]));
        }
    }

    /// Explicit right-hand side for nodal density and velocity.
    pub fn explicit_advective_rhs(&self, density: &[f64], velocity: &[f64]) -> Result<ExplicitRhs> {
        self.check_len(density, self.scalar_len(), "density")?;
        self.check_len(velocity, self.vector_len(), "velocity")?;
        let d = self.dim();
        let nd = self.n_dofs();
        let ncomp = d + 2;
        let m = &self.mesh.consistent;
        let nq = m.n_q;
        let g = self.gravity;
        let faces = self.face_pass(ncomp, |f, s, out| self.explicit_face_flux(f, density, velocity, out, s));
        let mut combined = vec![0.0; self.n_cells() * ncomp * nd];
        self.cell_loop(&mut combined, ncomp * nd, |c, o, s| {
            o.iter_mut().for_each(|v| *v = 0.0);
            let mut rq = std::mem::take(&mut s.q[4]);
            let mut uq: Vec<Vec<f64>> = (0..d).map(|a| std::mem::take(&mut s.q[5 + a])).collect();
            let mut flux = std::mem::take(&mut s.q[9]);
            if flux.len() < d * nq {
                flux.resize(d * nq, 0.0);
            }
            self.interp(&self.consistent, &density[c * nd..(c + 1) * nd], &mut rq[..nq], &mut s.ts);
            for (a, ua) in uq.iter_mut().enumerate() {
                let k = c * d + a;
                self.interp(&self.consistent, &velocity[k * nd..(k + 1) * nd], &mut ua[..nq], &mut s.ts);
            }
            // mass
            for b in 0..d {
                for q in 0..nq {
                    flux[b * nq + q] = rq[q] * uq[b][q];
                }
            }
            self.sub_weak_divergence(c, &flux, &mut o[..nd], s);
            // momentum
            for a in 0..d {
                for b in 0..d {
                    for q in 0..nq {
                        flux[b * nq + q] = rq[q] * uq[a][q] * uq[b][q];
                    }
                }
                self.sub_weak_divergence(c, &flux, &mut o[(1 + a) * nd..(2 + a) * nd], s);
            }
            // kinetic energy
            for q in 0..nq {
                let ke: f64 = 0.5 * (0..d).map(|a| uq[a][q] * uq[a][q]).sum::<f64>();
                for b in 0..d {
                    flux[b * nq + q] = rq[q] * ke * uq[b][q];
                }
            }
            self.sub_weak_divergence(c, &flux, &mut o[(1 + d) * nd..], s);
            if g != 0.0 {
                let mut tmp = std::mem::take(&mut s.n[5]);
                for q in 0..nq {
                    flux[q] = g * rq[q] * m.jxw[c * nq + q];
                }
                self.test(&self.consistent, &flux[..nq], &mut tmp[..nd], &mut s.ts);
                for (v, t) in o[d * nd..(d + 1) * nd].iter_mut().zip(&tmp[..nd]) {
                    *v += t;
                }
                for q in 0..nq {
                    flux[q] *= uq[d - 1][q];
                }
                self.test(&self.consistent, &flux[..nq], &mut tmp[..nd], &mut s.ts);
                for (v, t) in o[(1 + d) * nd..].iter_mut().zip(&tmp[..nd]) {
                    *v += t;
                }
                s.n[5] = tmp;
            }
            self.gather_faces(c, ncomp, &faces, o, s);
            s.q[4] = rq;
            for (a, ua) in uq.into_iter().enumerate() {
                s.q[5 + a] = ua;
            }
            s.q[9] = flux;
        });
        let mut rhs = ExplicitRhs {
            density: vec![0.0; self.scalar_len()],
            momentum: vec![0.0; self.vector_len()],
            kinetic: vec![0.0; self.scalar_len()],
        };
        for c in 0..self.n_cells() {
            let blk = &combined[c * ncomp * nd..(c + 1) * ncomp * nd];
            rhs.density[c * nd..(c + 1) * nd].copy_from_slice(&blk[..nd]);
            rhs.momentum[c * d * nd..(c + 1) * d * nd].copy_from_slice(&blk[nd..(1 + d) * nd]);
            rhs.kinetic[c * nd..(c + 1) * nd].copy_from_slice(&blk[(1 + d) * nd..]);
        }
        Ok(rhs)
    }
}
