//! Nodal Lagrange bases on Gauss-Lobatto points and their 1D evaluation
//! matrices at a chosen quadrature rule.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_lobatto, QuadratureRule};

/// Dense row-major matrix used as a 1D factor of tensor-product operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix1D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix1D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix1D) -> Matrix1D {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix1D {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn transpose(&self) -> Matrix1D {
        let mut t = Matrix1D::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// Degree-`r` Lagrange basis on the `r + 1` Gauss-Lobatto nodes, evaluated
/// at the points of a quadrature rule.
///
/// `interp` is `n_q x n_nodes` with `interp[q][j] = phi_j(x_q)`; `deriv`
/// holds `phi_j'(x_q)` in the same layout.
#[derive(Debug, Clone)]
pub struct Basis1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub node_weights: Vec<f64>,
    pub rule: QuadratureRule,
    pub interp: Matrix1D,
    pub deriv: Matrix1D,
}

impl Basis1D {
    /// Basis of degree `degree` evaluated on an arbitrary rule.
    pub fn new(degree: usize, rule: QuadratureRule) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument(format!(
                "basis degree must be at least 1, got {degree}"
            )));
        }
        let gll = gauss_lobatto(degree + 1)?;
        let n = degree + 1;
        let nq = rule.len();
        let mut interp = Matrix1D::zeros(nq, n);
        let mut deriv = Matrix1D::zeros(nq, n);
        for (q, &x) in rule.points.iter().enumerate() {
            for j in 0..n {
                interp.set(q, j, lagrange(&gll.points, j, x));
                deriv.set(q, j, lagrange_derivative(&gll.points, j, x));
            }
        }
        Ok(Self {
            degree,
            nodes: gll.points,
            node_weights: gll.weights,
            rule,
            interp,
            deriv,
        })
    }

    /// Basis evaluated on the `n`-point Gauss-Legendre rule.
    pub fn with_gauss(degree: usize, n_points: usize) -> Result<Self> {
        Self::new(degree, gauss_legendre(n_points)?)
    }

    /// Over-integration basis: `2r + 1` Gauss-Legendre points.
    pub fn consistent(degree: usize) -> Result<Self> {
        Self::with_gauss(degree, 2 * degree + 1)
    }

    /// Collocated basis: `r + 1` Gauss-Legendre points (square `interp`).
    pub fn collocated(degree: usize) -> Result<Self> {
        Self::with_gauss(degree, degree + 1)
    }

    pub fn n_nodes(&self) -> usize {
        self.degree + 1
    }

    pub fn n_quad(&self) -> usize {
        self.rule.len()
    }

    /// Value of basis function `j` at an arbitrary point.
    pub fn value(&self, j: usize, x: f64) -> f64 {
        lagrange(&self.nodes, j, x)
    }

    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        lagrange_derivative(&self.nodes, j, x)
    }
}

fn lagrange(nodes: &[f64], j: usize, x: f64) -> f64 {
    let xj = nodes[j];
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| (x - xk) / (xj - xk))
        .product()
}

fn lagrange_derivative(nodes: &[f64], j: usize, x: f64) -> f64 {
    let xj = nodes[j];
    let mut sum = 0.0;
    for (m, &xm) in nodes.iter().enumerate() {
        if m == j {
            continue;
        }
        let mut term = 1.0 / (xj - xm);
        for (k, &xk) in nodes.iter().enumerate() {
            if k != j && k != m {
                term *= (x - xk) / (xj - xk);
            }
        }
        sum += term;
    }
    sum
}
