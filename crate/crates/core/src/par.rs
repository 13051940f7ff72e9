//! Vector kernels with an optional fixed-order reduction.
//!
//! In deterministic mode dot products are summed over fixed-size chunks and
//! the partial sums are combined sequentially, so results do not depend on
//! the number of worker threads.

use rayon::prelude::*;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reduction {
    pub deterministic: bool,
}

impl Default for Reduction {
    fn default() -> Self {
        Self { deterministic: true }
    }
}

impl Reduction {
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        if self.deterministic {
            let partial: Vec<f64> = a
                .par_chunks(CHUNK)
                .zip(b.par_chunks(CHUNK))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                .collect();
            partial.iter().sum()
        } else {
            a.par_iter().zip(b).map(|(p, q)| p * q).sum()
        }
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    pub fn sum(&self, a: &[f64]) -> f64 {
        if self.deterministic {
            let partial: Vec<f64> = a.par_chunks(CHUNK).map(|x| x.iter().sum::<f64>()).collect();
            partial.iter().sum()
        } else {
            a.par_iter().sum()
        }
    }
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `y = x + beta * y`
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi = xi + beta * *yi);
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .reduce(|| 0.0, f64::max)
}
