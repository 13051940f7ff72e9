//! One-dimensional Gauss-Legendre and Gauss-Lobatto rules on [-1, 1].
//!
//! Abscissae are found by Newton iteration on Legendre polynomials (or their
//! derivatives for the Lobatto interior points) starting from Chebyshev
//! guesses. Points are symmetrized and returned in increasing order.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX: usize = 100;

/// A quadrature rule on the reference interval [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over [-1, 1].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates `(P_n(x), P_n'(x))` with the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = ±^(n+1) n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Gauss-Legendre rule with `n` points, exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Gauss-Legendre rule needs at least one point".into(),
        ));
    }
    let nf = n as f64;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..NEWTON_MAX {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = x;
        points[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(QuadratureRule { points, weights })
}

/// Gauss-Lobatto rule with `n` points (endpoints included), exact for degree `2n - 3`.
pub fn gauss_lobatto(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Lobatto rule needs at least two points, got {n}"
        )));
    }
    let deg = n - 1;
    let df = deg as f64;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    points[0] = -1.0;
    points[n - 1] = 1.0;
    // interior points are the roots of P'_deg; Newton on q = P'_deg with
    // q' = (2x P' - deg(deg+1) P) / (1 - x^2)
    for i in 1..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * i as f64 / df).cos();
        for _ in 0..NEWTON_MAX {
            let (p, dp) = legendre(deg, x);
            let ddp = (2.0 * x * dp - df * (df + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        points[i] = x;
        points[n - 1 - i] = -x;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    for i in 0..n.div_ceil(2) {
        let (p, _) = legendre(deg, points[i]);
        let w = 2.0 / (df * (df + 1.0) * p * p);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(QuadratureRule { points, weights })
}
