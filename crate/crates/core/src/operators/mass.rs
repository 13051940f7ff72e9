use rayon::prelude::*;

use super::{Discretization, Scratch};
use crate::error::{Error, Result};
use crate::state::IntegrationMode;

const CELL_CG_TOL: f64 = 1e-12;
const CELL_CG_MAX_ITER: usize = 200;

/// Density-weighted velocity mass matrix `A(rho)` for one density field.
///
/// The weights `w_q det J_q rho_q` are computed once at construction; the
/// matrix is then applied or inverted any number of times.
#[derive(Debug, Clone)]
pub struct WeightedMass {
    pub mode: IntegrationMode,
    weights: Vec<f64>,
    n_q: usize,
}

impl Discretization {
    /// Builds `A(rho)` for the given integration mode.
    pub fn weighted_mass(&self, density: &[f64], mode: IntegrationMode) -> Result<WeightedMass> {
        self.check_len(density, self.scalar_len(), "density")?;
        let (basis, metric) = self.rule(mode);
        let nq = metric.n_q;
        let nd = self.n_dofs();
        let mut weights = vec![0.0; self.n_cells() * nq];
        self.try_cell_loop(&mut weights, nq, |c, w, s| {
            let mut rq = std::mem::take(&mut s.q[1]);
            self.interp(basis, &density[c * nd..(c + 1) * nd], &mut rq[..nq], &mut s.ts);
            for q in 0..nq {
                if !(rq[q] > 0.0) {
                    let v = rq[q];
                    s.q[1] = rq;
                    return Err(Error::StateInvalid(format!(
                        "density {v:e} at quadrature point {q} of cell {c}"
                    )));
                }
                w[q] = metric.jxw[c * nq + q] * rq[q];
            }
            s.q[1] = rq;
            Ok(())
        })?;
        Ok(WeightedMass { mode, weights, n_q: nq })
    }

    /// Cell block of `S^T W S` for weights `w` on the rule of `mode`.
    fn weighted_block(&self, mode: IntegrationMode, w: &[f64], x: &[f64], out: &mut [f64], s: &mut Scratch) {
        let (basis, metric) = self.rule(mode);
        let nq = metric.n_q;
        let mut xq = std::mem::take(&mut s.q[2]);
        self.interp(basis, x, &mut xq[..nq], &mut s.ts);
        for q in 0..nq {
            xq[q] *= w[q];
        }
        self.test(basis, &xq[..nq], out, &mut s.ts);
        s.q[2] = xq;
    }

    /// `out = A(rho) u` for a velocity vector.
    pub fn apply_weighted_mass(&self, a: &WeightedMass, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(u, self.vector_len(), "velocity")?;
        self.check_len(out, self.vector_len(), "output")?;
        let nd = self.n_dofs();
        let d = self.dim();
        self.cell_loop(out, nd, |k, o, s| {
            let c = k / d;
            self.weighted_block(a.mode, &a.weights[c * a.n_q..(c + 1) * a.n_q], &u[k * nd..(k + 1) * nd], o, s);
        });
        Ok(())
    }

    /// `out = A(rho)^{-1} f`.
    ///
    /// Collocated mode uses the exact tensor inverse; consistent mode runs a
    /// conjugate-gradient solve per cell and component.
    pub fn inverse_weighted_mass(&self, a: &WeightedMass, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(f, self.vector_len(), "rhs")?;
        self.check_len(out, self.vector_len(), "output")?;
        let nd = self.n_dofs();
        let d = self.dim();
        match a.mode {
            IntegrationMode::Collocated => self.try_cell_loop(out, nd, |k, o, s| {
                let c = k / d;
                self.inverse
                    .apply(&a.weights[c * a.n_q..(c + 1) * a.n_q], &f[k * nd..(k + 1) * nd], o, &mut s.ts)
                    .map_err(|e| match e {
                        Error::SingularGeometry { index, value } => Error::SingularGeometry {
                            index: c * a.n_q + index,
                            value,
                        },
                        other => other,
                    })
            }),
            IntegrationMode::Consistent => self.try_cell_loop(out, nd, |k, o, s| {
                let c = k / d;
                let w = &a.weights[c * a.n_q..(c + 1) * a.n_q];
                self.cell_cg(c, w, &f[k * nd..(k + 1) * nd], o, s)
            }),
        }
    }

    fn cell_cg(&self, cell: usize, w: &[f64], b: &[f64], x: &mut [f64], s: &mut Scratch) -> Result<()> {
        let nd = b.len();
        let mut r = std::mem::take(&mut s.n[2]);
        let mut p = std::mem::take(&mut s.n[3]);
        let mut ap = std::mem::take(&mut s.n[4]);
        let result = (|| {
            x.iter_mut().for_each(|v| *v = 0.0);
            r[..nd].copy_from_slice(b);
            p[..nd].copy_from_slice(b);
            let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if b_norm == 0.0 {
                return Ok(());
            }
            let mut rr: f64 = r[..nd].iter().map(|v| v * v).sum();
            for _ in 0..CELL_CG_MAX_ITER {
                if rr.sqrt() <= CELL_CG_TOL * b_norm {
                    return Ok(());
                }
                self.weighted_block(IntegrationMode::Consistent, w, &p[..nd], &mut ap[..nd], s);
                let pap: f64 = p[..nd].iter().zip(&ap[..nd]).map(|(a, b)| a * b).sum();
                if !(pap > 0.0) {
                    return Err(Error::SolverFailure(format!(
                        "weighted mass of cell {cell} is not positive definite"
                    )));
                }
                let alpha = rr / pap;
                for i in 0..nd {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                let rr_new: f64 = r[..nd].iter().map(|v| v * v).sum();
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..nd {
                    p[i] = r[i] + beta * p[i];
                }
            }
            if rr.sqrt() <= CELL_CG_TOL * b_norm {
                Ok(())
            } else {
                Err(Error::SolverFailure(format!(
                    "weighted mass solve in cell {cell} did not converge in {CELL_CG_MAX_ITER} iterations (relative residual {:.3e})",
                    rr.sqrt() / b_norm
                )))
            }
        })();
        s.n[2] = r;
        s.n[3] = p;
        s.n[4] = ap;
        result
    }

    /// `out = M x` with the collocated rule, for `ncomp` components per cell.
    pub fn apply_mass(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ncomp = self.components_of(x)?;
        self.check_len(out, x.len(), "output")?;
        let nd = self.n_dofs();
        let nq = self.mesh.collocated.n_q;
        self.cell_loop(out, nd, |k, o, s| {
            let c = k / ncomp;
            self.weighted_block(
                IntegrationMode::Collocated,
                &self.mesh.collocated.jxw[c * nq..(c + 1) * nq],
                &x[k * nd..(k + 1) * nd],
                o,
                s,
            );
        });
        Ok(())
    }

    /// `out = M^{-1} f` through the tensor-product inverse.
    pub fn inverse_mass(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let ncomp = self.components_of(f)?;
        self.check_len(out, f.len(), "output")?;
        let nd = self.n_dofs();
        let nq = self.mesh.collocated.n_q;
        self.try_cell_loop(out, nd, |k, o, s| {
            let c = k / ncomp;
            self.inverse
                .apply(&self.mesh.collocated.jxw[c * nq..(c + 1) * nq], &f[k * nd..(k + 1) * nd], o, &mut s.ts)
        })
    }

    /// `out = D x = M x / (gamma - 1)`.
    pub fn apply_internal_energy_mass(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.apply_mass(x, out)?;
        let f = 1.0 / (self.gas.gamma - 1.0);
        out.par_iter_mut().for_each(|v| *v *= f);
        Ok(())
    }

    /// Diagonal of `M`.
    pub fn mass_diagonal(&self) -> Vec<f64> {
        let nd = self.n_dofs();
        let nq = self.mesh.collocated.n_q;
        let mut out = vec![0.0; self.scalar_len()];
        self.cell_loop(&mut out, nd, |c, o, s| {
            let f = vec![&self.colloc_sq; self.dim()];
            crate::kernels::apply_tensor(&f, true, &self.mesh.collocated.jxw[c * nq..(c + 1) * nq], o, &mut s.ts);
        });
        out
    }

    /// Kinetic-energy dual `int 1/2 rho |u|^2 psi_i` on the consistent rule.
    pub fn kinetic_dual(&self, density: &[f64], velocity: &[f64]) -> Result<Vec<f64>> {
        self.check_len(density, self.scalar_len(), "density")?;
        self.check_len(velocity, self.vector_len(), "velocity")?;
        let nd = self.n_dofs();
        let d = self.dim();
        let m = &self.mesh.consistent;
        let nq = m.n_q;
        let mut out = vec![0.0; self.scalar_len()];
        self.cell_loop(&mut out, nd, |c, o, s| {
            let mut rq = std::mem::take(&mut s.q[1]);
            let mut kq = std::mem::take(&mut s.q[2]);
            let mut uq = std::mem::take(&mut s.q[3]);
            self.interp(&self.consistent, &density[c * nd..(c + 1) * nd], &mut rq[..nq], &mut s.ts);
            kq[..nq].iter_mut().for_each(|v| *v = 0.0);
            for a in 0..d {
                let k = c * d + a;
                self.interp(&self.consistent, &velocity[k * nd..(k + 1) * nd], &mut uq[..nq], &mut s.ts);
                for q in 0..nq {
                    kq[q] += uq[q] * uq[q];
                }
            }
            for q in 0..nq {
                kq[q] *= 0.5 * rq[q] * m.jxw[c * nq + q];
            }
            self.test(&self.consistent, &kq[..nq], o, &mut s.ts);
            s.q[1] = rq;
            s.q[2] = kq;
            s.q[3] = uq;
        });
        Ok(out)
    }

    fn components_of(&self, x: &[f64]) -> Result<usize> {
        let n = self.scalar_len();
        if x.is_empty() || x.len() % n != 0 {
            return Err(Error::InvalidArgument(format!(
                "vector length {} is not a multiple of {n}",
                x.len()
            )));
        }
        Ok(x.len() / n)
    }
}
