use super::{Discretization, Scratch};
use crate::basis::Matrix1D;
use crate::error::Result;
use crate::kernels::apply_tensor;

impl Discretization {
    /// `B p`: weak pressure gradient with the centred face pressure; at a
    /// slip wall the interior pressure is used.
    pub fn apply_pressure_gradient(&self, pressure: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(pressure, self.scalar_len(), "pressure")?;
        self.check_len(out, self.vector_len(), "output")?;
        let d = self.dim();
        let nd = self.n_dofs();
        let m = &self.mesh.consistent;
        let nq = m.n_q;
        let nfq = m.n_fq;
        let faces = self.face_pass(d, |f, s, out| {
            let face = self.mesh.faces[f];
            let mut pm = vec![0.0; nfq];
            let mut pp = vec![0.0; nfq];
            match (face.minus, face.plus) {
                (Some(a), Some(b)) => {
                    self.face_trace(pressure, 1, 0, a, face.dir, true, &mut pm, s);
                    self.face_trace(pressure, 1, 0, b, face.dir, false, &mut pp, s);
                }
                (Some(a), None) => {
                    self.face_trace(pressure, 1, 0, a, face.dir, true, &mut pm, s);
                    pp.copy_from_slice(&pm);
                }
                (None, Some(b)) => {
                    self.face_trace(pressure, 1, 0, b, face.dir, false, &mut pp, s);
                    pm.copy_from_slice(&pp);
                }
                (None, None) => unreachable!("face without cells"),
            }
            for q in 0..nfq {
                let w = m.face_jxw[f * nfq + q] * 0.5 * (pm[q] + pp[q]);
                for a in 0..d {
                    out[a * nfq + q] = w * m.face_normal[(f * nfq + q) * d + a];
                }
            }
        });
        self.cell_loop(out, d * nd, |c, o, s| {
            o.iter_mut().for_each(|v| *v = 0.0);
            let mut pq = std::mem::take(&mut s.q[4]);
            let mut flux = std::mem::take(&mut s.q[9]);
            if flux.len() < d * nq {
                flux.resize(d * nq, 0.0);
            }
            self.interp(&self.consistent, &pressure[c * nd..(c + 1) * nd], &mut pq[..nq], &mut s.ts);
            for a in 0..d {
                flux[..d * nq].iter_mut().for_each(|v| *v = 0.0);
                flux[a * nq..(a + 1) * nq].copy_from_slice(&pq[..nq]);
                self.sub_weak_divergence(c, &flux, &mut o[a * nd..(a + 1) * nd], s);
            }
            self.gather_faces(c, d, &faces, o, s);
            s.q[4] = pq;
            s.q[9] = flux;
        });
        Ok(())
    }

    /// `C(rho h) u`: weak divergence of `rho h u` with centred fluxes; the
    /// wall flux vanishes.
    pub fn apply_energy_divergence(&self, rho_h: &[f64], velocity: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(rho_h, self.scalar_len(), "rho h")?;
        self.check_len(velocity, self.vector_len(), "velocity")?;
        self.check_len(out, self.scalar_len(), "output")?;
        let d = self.dim();
        let nd = self.n_dofs();
        let m = &self.mesh.consistent;
        let nfq = m.n_fq;
        let faces = self.face_pass(1, |f, s, out| {
            let face = self.mesh.faces[f];
            if face.is_boundary() {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            let (hm, hp, um, up) = self.face_traces(f, &face, rho_h, velocity, s);
            for q in 0..nfq {
                let n = &m.face_normal[(f * nfq + q) * d..(f * nfq + q + 1) * d];
                let mut fm = 0.0;
                let mut fp = 0.0;
                for a in 0..d {
                    fm += um[a][q] * n[a];
                    fp += up[a][q] * n[a];
                }
                out[q] = m.face_jxw[f * nfq + q] * 0.5 * (hm[q] * fm + hp[q] * fp);
            }
        });
        self.cell_loop(out, nd, |c, o, s| {
            o.iter_mut().for_each(|v| *v = 0.0);
            self.add_cell_divergence(c, rho_h, velocity, o, s);
            self.gather_faces(c, 1, &faces, o, s);
        });
        Ok(())
    }

    fn add_cell_divergence(&self, c: usize, scalar: &[f64], velocity: &[f64], o: &mut [f64], s: &mut Scratch) {
        let d = self.dim();
        let nd = self.n_dofs();
        let nq = self.mesh.consistent.n_q;
        let mut hq = std::mem::take(&mut s.q[4]);
        let mut uq = std::mem::take(&mut s.q[5]);
        let mut flux = std::mem::take(&mut s.q[9]);
        if flux.len() < d * nq {
            flux.resize(d * nq, 0.0);
        }
        self.interp(&self.consistent, &scalar[c * nd..(c + 1) * nd], &mut hq[..nq], &mut s.ts);
        for b in 0..d {
            let k = c * d + b;
            self.interp(&self.consistent, &velocity[k * nd..(k + 1) * nd], &mut uq[..nq], &mut s.ts);
            for q in 0..nq {
                flux[b * nq + q] = hq[q] * uq[q];
            }
        }
        self.sub_weak_divergence(c, &flux, o, s);
        s.q[4] = hq;
        s.q[5] = uq;
        s.q[9] = flux;
    }

    /// Diagonal of the Helmholtz-type operator
    /// `D + (a dt)^2 int (gamma/(gamma-1)) (p/rho) |grad psi_i|^2`
    /// (volume terms only).
    pub fn helmholtz_diagonal(&self, density: &[f64], pressure: &[f64], a_dt: f64) -> Result<Vec<f64>> {
        self.check_len(density, self.scalar_len(), "density")?;
        self.check_len(pressure, self.scalar_len(), "pressure")?;
        let d = self.dim();
        let nd = self.n_dofs();
        let m = &self.mesh.consistent;
        let nq = m.n_q;
        let factor = self.gas.enthalpy_factor() * a_dt * a_dt;
        let mut out = self.mass_diagonal();
        let inv_gm1 = 1.0 / (self.gas.gamma - 1.0);
        out.iter_mut().for_each(|v| *v *= inv_gm1);
        self.cell_loop(&mut out, nd, |c, o, s| {
            let mut rq = std::mem::take(&mut s.q[4]);
            let mut pq = std::mem::take(&mut s.q[5]);
            let mut wq = std::mem::take(&mut s.q[6]);
            let mut tmp = std::mem::take(&mut s.n[5]);
            self.interp(&self.consistent, &density[c * nd..(c + 1) * nd], &mut rq[..nq], &mut s.ts);
            self.interp(&self.consistent, &pressure[c * nd..(c + 1) * nd], &mut pq[..nq], &mut s.ts);
            for a in 0..d {
                for b in a..d {
                    for q in 0..nq {
                        let g = c * nq + q;
                        let inv = &m.inv_j[g * d * d..(g + 1) * d * d];
                        let mut gab = 0.0;
                        for k in 0..d {
                            gab += inv[a * d + k] * inv[b * d + k];
                        }
                        let mult = if a == b { 1.0 } else { 2.0 };
                        wq[q] = mult * factor * pq[q] / rq[q] * gab * m.jxw[g];
                    }
                    let f: Vec<&Matrix1D> = (0..d)
                        .map(|k| {
                            if k == a && k == b {
                                &self.cons_dd
                            } else if k == a || k == b {
                                &self.cons_sd
                            } else {
                                &self.cons_ss
                            }
                        })
                        .collect();
                    apply_tensor(&f, true, &wq[..nq], &mut tmp[..nd], &mut s.ts);
                    for (v, t) in o.iter_mut().zip(&tmp[..nd]) {
                        *v += t;
                    }
                }
            }
            s.q[4] = rq;
            s.q[5] = pq;
            s.q[6] = wq;
            s.n[5] = tmp;
        });
        Ok(out)
    }
}
