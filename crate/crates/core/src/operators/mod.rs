//! Matrix-free DG operators of the IMEX stage system.
//!
//! Every operator is evaluated cell by cell with sum factorization; no
//! global matrix is ever assembled. Face terms are computed in a separate
//! pass into a per-face buffer and then gathered by each adjacent cell, so
//! the cell loop writes disjoint output blocks and the result does not
//! depend on how cells are distributed among worker threads.
//!
//! Output vectors are in "dual" form: entry `i` is the integral of the
//! operator's result against basis function `i`.

mod explicit;
mod implicit;
mod mass;

use rayon::prelude::*;

use crate::basis::{Basis1D, Matrix1D};
use crate::error::{Error, Result};
use crate::kernels::{apply_tensor, CollocatedInverse, TensorScratch};
use crate::mesh::{MeshGeometry, MetricData};
use crate::par::Reduction;
use crate::state::{GasConstants, IntegrationMode};

pub use explicit::ExplicitRhs;
pub use mass::WeightedMass;

/// Mesh, bases and constants shared by all operators.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: MeshGeometry,
    /// Basis evaluated on the `2r + 1`-point rule.
    pub consistent: Basis1D,
    /// Basis evaluated on the `r + 1`-point rule.
    pub collocated: Basis1D,
    pub gas: GasConstants,
    /// Magnitude of the downward gravitational acceleration; zero disables it.
    pub gravity: f64,
    pub reduction: Reduction,
    inverse: CollocatedInverse,
    /// Node indices of each face layer, indexed `2 * dir + upper`.
    layers: Vec<Vec<usize>>,
    colloc_sq: Matrix1D,
    cons_ss: Matrix1D,
    cons_sd: Matrix1D,
    cons_dd: Matrix1D,
}

/// Per-worker buffers.
#[derive(Default)]
pub(crate) struct Scratch {
    pub ts: TensorScratch,
    pub q: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
}

impl Scratch {
    /// Makes sure `nq` quad-sized and `nn` node-sized buffers exist.
    fn ensure(&mut self, nq: usize, q_len: usize, nn: usize, n_len: usize) {
        if self.q.len() < nq {
            self.q.resize_with(nq, Vec::new);
        }
        for v in self.q.iter_mut() {
            if v.len() < q_len {
                v.resize(q_len, 0.0);
            }
        }
        if self.n.len() < nn {
            self.n.resize_with(nn, Vec::new);
        }
        for v in self.n.iter_mut() {
            if v.len() < n_len {
                v.resize(n_len, 0.0);
            }
        }
    }
}

impl Discretization {
    pub fn new(mesh: MeshGeometry, gas: GasConstants, gravity_on: bool) -> Result<Self> {
        let r = mesh.degree;
        let consistent = Basis1D::consistent(r)?;
        let collocated = Basis1D::collocated(r)?;
        let inverse = CollocatedInverse::new(&collocated, mesh.dim)?;
        let n1 = r + 1;
        let d = mesh.dim;
        let mut layers = Vec::with_capacity(2 * d);
        for dir in 0..d {
            for upper in [false, true] {
                let li = if upper { r } else { 0 };
                let mut idx = Vec::with_capacity(n1.pow(d as u32 - 1));
                for node in 0..n1.pow(d as u32) {
                    let mut rem = node;
                    let mut on = false;
                    for a in 0..d {
                        if a == dir {
                            on = rem % n1 == li;
                        }
                        rem /= n1;
                    }
                    if on {
                        idx.push(node);
                    }
                }
                layers.push(idx);
            }
        }
        let colloc_sq = collocated.interp.hadamard(&collocated.interp);
        let cons_ss = consistent.interp.hadamard(&consistent.interp);
        let cons_sd = consistent.interp.hadamard(&consistent.deriv);
        let cons_dd = consistent.deriv.hadamard(&consistent.deriv);
        Ok(Self {
            gravity: if gravity_on { gas.g } else { 0.0 },
            mesh,
            consistent,
            collocated,
            gas,
            reduction: Reduction::default(),
            inverse,
            layers,
            colloc_sq,
            cons_ss,
            cons_sd,
            cons_dd,
        })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    /// Nodes per cell.
    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs_per_cell()
    }

    pub fn scalar_len(&self) -> usize {
        self.mesh.n_dofs()
    }

    pub fn vector_len(&self) -> usize {
        self.mesh.n_dofs() * self.dim()
    }

    pub(crate) fn rule(&self, mode: IntegrationMode) -> (&Basis1D, &MetricData) {
        match mode {
            IntegrationMode::Consistent => (&self.consistent, &self.mesh.consistent),
            IntegrationMode::Collocated => (&self.collocated, &self.mesh.collocated),
        }
    }

    pub(crate) fn check_len(&self, v: &[f64], expected: usize, what: &str) -> Result<()> {
        if v.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{what}: expected {expected} entries, got {}",
                v.len()
            )));
        }
        Ok(())
    }

    /// Values at the quadrature points of `basis`.
    pub(crate) fn interp(&self, basis: &Basis1D, nodal: &[f64], out: &mut [f64], ts: &mut TensorScratch) {
        let f = vec![&basis.interp; self.dim()];
        apply_tensor(&f, false, nodal, out, ts);
    }

    /// Integral of `qvals` against every basis function (`qvals` already
    /// carries the quadrature weights).
    pub(crate) fn test(&self, basis: &Basis1D, qvals: &[f64], out: &mut [f64], ts: &mut TensorScratch) {
        let f = vec![&basis.interp; self.dim()];
        apply_tensor(&f, true, qvals, out, ts);
    }

    /// Integral of `qvals` against the reference derivative along `axis`.
    pub(crate) fn test_grad_axis(
        &self,
        basis: &Basis1D,
        axis: usize,
        qvals: &[f64],
        out: &mut [f64],
        ts: &mut TensorScratch,
    ) {
        let f: Vec<&Matrix1D> = (0..self.dim())
            .map(|a| if a == axis { &basis.deriv } else { &basis.interp })
            .collect();
        apply_tensor(&f, true, qvals, out, ts);
    }

    /// `out -= sum_q jxw F . grad(phi_i)` with the consistent rule; `flux`
    /// holds `dim` physical components of length `n_q` for cell `cell`.
    pub(crate) fn sub_weak_divergence(&self, cell: usize, flux: &[f64], out: &mut [f64], s: &mut Scratch) {
        let d = self.dim();
        let m = &self.mesh.consistent;
        let nq = m.n_q;
        let nd = self.n_dofs();
        let mut contra = std::mem::take(&mut s.q[0]);
        let mut tmp = std::mem::take(&mut s.n[0]);
        for a in 0..d {
            for q in 0..nq {
                let g = cell * nq + q;
                let inv = &m.inv_j[g * d * d + a * d..g * d * d + a * d + d];
                let mut v = 0.0;
                for b in 0..d {
                    v += inv[b] * flux[b * nq + q];
                }
                contra[q] = m.jxw[g] * v;
            }
            self.test_grad_axis(&self.consistent, a, &contra[..nq], &mut tmp[..nd], &mut s.ts);
            for (o, t) in out.iter_mut().zip(&tmp[..nd]) {
                *o -= t;
            }
        }
        s.q[0] = contra;
        s.n[0] = tmp;
    }

    /// Values of component `comp` of `field` on the `upper`/lower face of
    /// `cell` in direction `dir`, at the consistent face points.
    pub(crate) fn face_trace(
        &self,
        field: &[f64],
        ncomp: usize,
        comp: usize,
        cell: usize,
        dir: usize,
        upper: bool,
        out: &mut [f64],
        s: &mut Scratch,
    ) {
        let nd = self.n_dofs();
        let base = (cell * ncomp + comp) * nd;
        let layer = &self.layers[2 * dir + usize::from(upper)];
        let mut slice = std::mem::take(&mut s.n[1]);
        for (k, &node) in layer.iter().enumerate() {
            slice[k] = field[base + node];
        }
        let f = vec![&self.consistent.interp; self.dim() - 1];
        apply_tensor(&f, false, &slice[..layer.len()], out, &mut s.ts);
        s.n[1] = slice;
    }

    /// Adds `sign * (face integral against phi_i)` into a cell block.
    pub(crate) fn face_lift(
        &self,
        vals: &[f64],
        dir: usize,
        upper: bool,
        sign: f64,
        cell_block: &mut [f64],
        s: &mut Scratch,
    ) {
        let layer = &self.layers[2 * dir + usize::from(upper)];
        let mut slice = std::mem::take(&mut s.n[1]);
        let f = vec![&self.consistent.interp; self.dim() - 1];
        apply_tensor(&f, true, vals, &mut slice[..layer.len()], &mut s.ts);
        for (k, &node) in layer.iter().enumerate() {
            cell_block[node] += sign * slice[k];
        }
        s.n[1] = slice;
    }

    fn scratch_sizes(&self) -> (usize, usize) {
        let nq = self.mesh.consistent.n_q.max(self.mesh.collocated.n_q);
        (nq, self.n_dofs())
    }

    pub(crate) fn new_scratch(&self) -> Scratch {
        let (q_len, n_len) = self.scratch_sizes();
        let mut s = Scratch::default();
        s.ensure(12, q_len, 6, n_len);
        s
    }

    /// Runs `f` for every face, producing `ncomp * n_fq` weighted normal
    /// fluxes per face.
    pub(crate) fn face_pass<F>(&self, ncomp: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut Scratch, &mut [f64]) + Sync + Send,
    {
        let nfq = self.mesh.consistent.n_fq;
        let mut buf = vec![0.0; self.mesh.faces.len() * ncomp * nfq];
        buf.par_chunks_mut(ncomp * nfq)
            .enumerate()
            .for_each_init(|| self.new_scratch(), |s, (face, out)| f(face, s, out));
        buf
    }

    /// Adds the face buffer contributions of `cell` to its `ncomp` blocks.
    pub(crate) fn gather_faces(&self, cell: usize, ncomp: usize, buf: &[f64], out: &mut [f64], s: &mut Scratch) {
        let nd = self.n_dofs();
        let nfq = self.mesh.consistent.n_fq;
        for dir in 0..self.dim() {
            for upper in [false, true] {
                let face = self.mesh.cell_face(cell, dir, upper);
                let sign = if upper { 1.0 } else { -1.0 };
                for comp in 0..ncomp {
                    let vals = &buf[(face * ncomp + comp) * nfq..(face * ncomp + comp + 1) * nfq];
                    self.face_lift(vals, dir, upper, sign, &mut out[comp * nd..(comp + 1) * nd], s);
                }
            }
        }
    }

    /// Parallel cell loop over `block`-sized output chunks.
    pub(crate) fn cell_loop<F>(&self, out: &mut [f64], block: usize, f: F)
    where
        F: Fn(usize, &mut [f64], &mut Scratch) + Sync + Send,
    {
        out.par_chunks_mut(block)
            .enumerate()
            .for_each_init(|| self.new_scratch(), |s, (c, o)| f(c, o, s));
    }

    pub(crate) fn try_cell_loop<F>(&self, out: &mut [f64], block: usize, f: F) -> Result<()>
    where
        F: Fn(usize, &mut [f64], &mut Scratch) -> Result<()> + Sync + Send,
    {
        out.par_chunks_mut(block)
            .enumerate()
            .try_for_each_init(|| self.new_scratch(), |s, (c, o)| f(c, o, s))
    }

    /// Integral of a nodal scalar field with the collocated rule (the
    /// functional under which mass is conserved). Vector fields return the
    /// sum over their components.
    pub fn integrate(&self, nodal: &[f64]) -> f64 {
        let m = &self.mesh.collocated;
        let nd = self.n_dofs();
        assert_eq!(nodal.len() % self.scalar_len(), 0, "field length is not a multiple of the scalar length");
        let ncomp = nodal.len() / self.scalar_len();
        let partial: Vec<f64> = nodal
            .par_chunks(nd)
            .enumerate()
            .map_init(
                || (vec![0.0; m.n_q], TensorScratch::new()),
                |(qv, ts), (k, block)| {
                    let c = k / ncomp;
                    self.interp(&self.collocated, block, qv, ts);
                    qv.iter().zip(&m.jxw[c * m.n_q..(c + 1) * m.n_q]).map(|(v, w)| v * w).sum::<f64>()
                },
            )
            .collect();
        partial.iter().sum()
    }

    /// Sum of the entries of a dual vector (the integral it represents).
    pub fn dual_total(&self, dual: &[f64]) -> f64 {
        Reduction { deterministic: true }.sum(dual)
    }
}

#[cfg(test)]
mod tests;
