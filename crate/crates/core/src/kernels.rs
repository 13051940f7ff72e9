//! Sum-factorization kernels for tensor-product cells.
//!
//! Tensors are stored lexicographically with the first coordinate direction
//! running fastest. A `d`-dimensional operator `M_{d-1} ⊗ ... ⊗ M_0` is
//! applied as `d` successive one-dimensional contractions.

use nalgebra::DMatrix;

use crate::basis::{Basis1D, Matrix1D};
use crate::error::{Error, Result};

/// Reusable buffers for tensor contractions.
#[derive(Debug, Default, Clone)]
pub struct TensorScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TensorScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Contracts axis `axis` of `src` (shape `shape`) with `mat`.
///
/// Without `transpose` the matrix maps `mat.cols -> mat.rows` along the
/// axis, otherwise `mat.rows -> mat.cols`.
fn contract_axis(
    src: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &Matrix1D,
    transpose: bool,
    dst: &mut [f64],
) -> usize {
    let (n_in, n_out) = if transpose {
        (mat.rows, mat.cols)
    } else {
        (mat.cols, mat.rows)
    };
    debug_assert_eq!(shape[axis], n_in);
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let out_len = inner * n_out * outer;
    let dst = &mut dst[..out_len];
    for o in 0..outer {
        let src_base = o * n_in * inner;
        let dst_base = o * n_out * inner;
        for q in 0..n_out {
            let d = &mut dst[dst_base + q * inner..dst_base + (q + 1) * inner];
            d.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n_in {
                let m = if transpose { mat.get(j, q) } else { mat.get(q, j) };
                if m == 0.0 {
                    continue;
                }
                let s = &src[src_base + j * inner..src_base + (j + 1) * inner];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += m * sv;
                }
            }
        }
    }
    out_len
}

/// Applies `factors[d-1] ⊗ ... ⊗ factors[0]` (or its transpose) to `input`.
///
/// `factors[a]` acts along axis `a`. The result overwrites `output`.
pub fn apply_tensor(
    factors: &[&Matrix1D],
    transpose: bool,
    input: &[f64],
    output: &mut [f64],
    scratch: &mut TensorScratch,
) {
    let dim = factors.len();
    let mut shape: Vec<usize> = factors
        .iter()
        .map(|m| if transpose { m.rows } else { m.cols })
        .collect();
    debug_assert_eq!(input.len(), shape.iter().product::<usize>());
    let max_len = {
        let mut best = input.len();
        let mut s = shape.clone();
        for (a, m) in factors.iter().enumerate() {
            s[a] = if transpose { m.cols } else { m.rows };
            best = best.max(s.iter().product());
        }
        best
    };
    if scratch.a.len() < max_len {
        scratch.a.resize(max_len, 0.0);
        scratch.b.resize(max_len, 0.0);
    }
    if dim == 1 {
        let n = contract_axis(input, &shape, 0, factors[0], transpose, &mut scratch.a);
        output[..n].copy_from_slice(&scratch.a[..n]);
        return;
    }
    let mut len = contract_axis(input, &shape, 0, factors[0], transpose, &mut scratch.a);
    shape[0] = if transpose {
        factors[0].cols
    } else {
        factors[0].rows
    };
    let mut in_a = true;
    for (a, m) in factors.iter().enumerate().skip(1) {
        if in_a {
            len = contract_axis(&scratch.a[..len], &shape, a, m, transpose, &mut scratch.b);
        } else {
            len = contract_axis(&scratch.b[..len], &shape, a, m, transpose, &mut scratch.a);
        }
        shape[a] = if transpose { m.cols } else { m.rows };
        in_a = !in_a;
    }
    let res = if in_a { &scratch.a } else { &scratch.b };
    output[..len].copy_from_slice(&res[..len]);
}

/// Values at the tensor-product quadrature points of `bases` from nodal
/// coefficients (one basis per direction).
pub fn sum_factorized_interpolate(bases: &[&Basis1D], coeffs: &[f64]) -> Result<Vec<f64>> {
    let dim = bases.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!(
            "direction count must be 1, 2 or 3, got {dim}"
        )));
    }
    let n_nodes: usize = bases.iter().map(|b| b.n_nodes()).product();
    if coeffs.len() != n_nodes {
        return Err(Error::InvalidArgument(format!(
            "expected {n_nodes} coefficients, got {}",
            coeffs.len()
        )));
    }
    let n_quad: usize = bases.iter().map(|b| b.n_quad()).product();
    let factors: Vec<&Matrix1D> = bases.iter().map(|b| &b.interp).collect();
    let mut out = vec![0.0; n_quad];
    apply_tensor(&factors, false, coeffs, &mut out, &mut TensorScratch::new());
    Ok(out)
}

/// Tensor-product quadrature weights, lexicographic.
pub fn tensor_weights(rule_weights: &[f64], dim: usize) -> Vec<f64> {
    let n = rule_weights.len();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut w = 1.0;
            for _ in 0..dim {
                w *= rule_weights[rem % n];
                rem /= n;
            }
            w
        })
        .collect()
}

/// Cell mass operator `S^T J S` for a diagonal quadrature weighting `J`.
pub fn mass_apply(
    basis: &Basis1D,
    dim: usize,
    jacobian_diag: &[f64],
    x: &[f64],
    out: &mut [f64],
    scratch: &mut TensorScratch,
) {
    let factors = vec![&basis.interp; dim];
    let mut at_q = vec![0.0; jacobian_diag.len()];
    apply_tensor(&factors, false, x, &mut at_q, scratch);
    at_q.iter_mut()
        .zip(jacobian_diag)
        .for_each(|(v, j)| *v *= j);
    apply_tensor(&factors, true, &at_q, out, scratch);
}

/// Inverse of the collocated cell mass matrix `S^T J S` applied as
/// `S^{-1} J^{-1} S^{-T}` through one-dimensional inverse factors.
#[derive(Debug, Clone)]
pub struct CollocatedInverse {
    pub dim: usize,
    s_inv: Matrix1D,
}

impl CollocatedInverse {
    /// Factorizes the square 1D evaluation matrix of a collocated basis.
    pub fn new(basis: &Basis1D, dim: usize) -> Result<Self> {
        let n = basis.n_nodes();
        if basis.n_quad() != n {
            return Err(Error::InvalidArgument(format!(
                "collocated inverse needs {n} quadrature points, basis has {}",
                basis.n_quad()
            )));
        }
        let s = DMatrix::from_row_slice(n, n, &basis.interp.data);
        let inv = s.lu().try_inverse().ok_or_else(|| {
            Error::InvalidArgument("1D evaluation matrix is singular".into())
        })?;
        let mut s_inv = Matrix1D::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s_inv.set(i, j, inv[(i, j)]);
            }
        }
        Ok(Self { dim, s_inv })
    }

    pub fn n_dofs(&self) -> usize {
        self.s_inv.rows.pow(self.dim as u32)
    }

    /// Applies the inverse mass matrix; `jacobian_diag` carries
    /// `w_q * det J_q * rho_q` at the collocated points.
    pub fn apply(
        &self,
        jacobian_diag: &[f64],
        rhs: &[f64],
        out: &mut [f64],
        scratch: &mut TensorScratch,
    ) -> Result<()> {
        let n = self.n_dofs();
        if jacobian_diag.len() != n || rhs.len() != n || out.len() != n {
            return Err(Error::InvalidArgument(format!(
                "collocated inverse expects {n} entries"
            )));
        }
        if let Some((index, &value)) = jacobian_diag
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0))
        {
            return Err(Error::SingularGeometry { index, value });
        }
        let factors = vec![&self.s_inv; self.dim];
        let mut tmp = vec![0.0; n];
        apply_tensor(&factors, true, rhs, &mut tmp, scratch);
        tmp.iter_mut()
            .zip(jacobian_diag)
            .for_each(|(v, j)| *v /= j);
        apply_tensor(&factors, false, &tmp, out, scratch);
        Ok(())
    }
}

/// Public form of the collocated inverse for a single cell.
pub fn tensor_block_inverse_apply(
    basis: &Basis1D,
    dim: usize,
    jacobian_diag: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let inv = CollocatedInverse::new(basis, dim)?;
    let mut out = vec![0.0; rhs.len()];
    inv.apply(jacobian_diag, rhs, &mut out, &mut TensorScratch::new())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_coefficients_interpolate_to_constant() {
        let b = Basis1D::consistent(3).unwrap();
        let c = vec![2.5; 16];
        let v = sum_factorized_interpolate(&[&b, &b], &c).unwrap();
        assert!(v.iter().all(|x| (x - 2.5).abs() < 1e-13));
    }

    #[test]
    fn bilinear_function_r1() {
        let b = Basis1D::consistent(1).unwrap();
        // nodes (-1,1), lexicographic: (x0,y0),(x1,y0),(x0,y1),(x1,y1)
        let c = vec![1.0, -1.0, -1.0, 1.0];
        let v = sum_factorized_interpolate(&[&b, &b], &c).unwrap();
        let nq = b.n_quad();
        for qy in 0..nq {
            for qx in 0..nq {
                let e = b.rule.points[qx] * b.rule.points[qy];
                assert!((v[qx + nq * qy] - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let b = Basis1D::consistent(2).unwrap();
        assert!(matches!(
            sum_factorized_interpolate(&[&b, &b], &[0.0; 8]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_positive_jacobian_is_singular() {
        let b = Basis1D::collocated(2).unwrap();
        let mut j = vec![1.0; 9];
        j[4] = 0.0;
        let err = tensor_block_inverse_apply(&b, 2, &j, &[1.0; 9]).unwrap_err();
        assert_eq!(err, Error::SingularGeometry { index: 4, value: 0.0 });
    }

    #[test]
    fn inverse_requires_collocated_rule() {
        let b = Basis1D::consistent(2).unwrap();
        assert!(CollocatedInverse::new(&b, 2).is_err());
    }
}
