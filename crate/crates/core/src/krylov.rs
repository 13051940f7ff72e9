//! Krylov solvers for matrix-free operators.
//!
//! GMRES is right preconditioned, so the residual it reports is the true
//! residual of the unpreconditioned system. CG expects an SPD operator and
//! an SPD preconditioner.

use crate::error::{Error, Result};
use crate::par::{axpy, Reduction};

pub trait LinearOperator: Sync {
    fn len(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

/// Adapts a closure to [`LinearOperator`].
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn len(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

/// `z = r / diag`.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    pub inv_diag: Vec<f64>,
}

impl DiagonalPreconditioner {
    /// Fails on the first entry that is not strictly positive and finite.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::PreconditionerBuild { index, value });
        }
        Ok(Self {
            inv_diag: diag.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult {
    pub iterations: usize,
    /// Relative residual estimate after every iteration (entry 0 is the
    /// initial residual).
    pub residuals: Vec<f64>,
    /// Recomputed `||b - A x|| / ||b||` at exit.
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GmresParams {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresParams {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            restart: 30,
        }
    }
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
    op.apply(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(())
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// `x` holds the initial guess on entry.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    prec: &dyn Preconditioner,
    params: GmresParams,
    red: Reduction,
) -> Result<KrylovResult> {
    let n = op.len();
    if b.len() != n || x.len() != n {
        return Err(Error::InvalidArgument(format!("gmres: system size {n} does not match vectors")));
    }
    if params.restart == 0 || params.max_iter == 0 || !(params.tol > 0.0) {
        return Err(Error::InvalidArgument("gmres: restart, max_iter and tol must be positive".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("gmres: right-hand side is not finite".into()));
    }
    let b_norm = red.norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovResult {
            iterations: 0,
            residuals: vec![0.0],
            final_residual: 0.0,
        });
    }
    let m = params.restart;
    let mut residuals = Vec::new();
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    loop {
        residual(op, b, x, &mut r)?;
        let beta = red.norm(&r);
        let rel0 = beta / b_norm;
        if residuals.is_empty() {
            residuals.push(rel0);
        }
        if rel0 <= params.tol {
            return Ok(KrylovResult {
                iterations: total,
                residuals,
                final_residual: rel0,
            });
        }
        if total >= params.max_iter {
            return Err(Error::SolverFailure(format!(
                "gmres reached {} iterations with relative residual {rel0:.3e} (tol {:.1e})",
                params.max_iter, params.tol
            )));
        }
        v.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        let mut rel = rel0;
        for j in 0..m {
            prec.apply(&v[j], &mut z)?;
            op.apply(&z, &mut w)?;
            for i in 0..=j {
                let hij = red.dot(&w, &v[i]);
                h[i][j] = hij;
                axpy(-hij, &v[i], &mut w);
            }
            let hn = red.norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                return Err(Error::SolverFailure("gmres: Hessenberg column vanished".into()));
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k = j + 1;
            rel = g[j + 1].abs() / b_norm;
            residuals.push(rel);
            let breakdown = hn <= 1e-14 * beta;
            if rel <= params.tol || breakdown || total >= params.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the k x k triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        w.iter_mut().for_each(|wi| *wi = 0.0);
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &v[i], &mut w);
        }
        prec.apply(&w, &mut z)?;
        axpy(1.0, &z, x);
        if !(rel < rel0 * (1.0 - 1e-12)) {
            return Err(Error::SolverFailure(format!(
                "gmres stagnated over a restart cycle at relative residual {rel:.3e}"
            )));
        }
    }
}

/// Preconditioned conjugate gradients. `x` holds the initial guess.
pub fn cg(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    prec: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    red: Reduction,
) -> Result<KrylovResult> {
    let n = op.len();
    if b.len() != n || x.len() != n {
        return Err(Error::InvalidArgument(format!("cg: system size {n} does not match vectors")));
    }
    let b_norm = red.norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovResult {
            iterations: 0,
            residuals: vec![0.0],
            final_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    residual(op, b, x, &mut r)?;
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = red.dot(&r, &z);
    let mut residuals = vec![red.norm(&r) / b_norm];
    let mut it = 0;
    while *residuals.last().unwrap() > tol {
        if it >= max_iter {
            return Err(Error::SolverFailure(format!(
                "cg reached {max_iter} iterations with relative residual {:.3e}",
                residuals.last().unwrap()
            )));
        }
        op.apply(&p, &mut ap)?;
        let pap = red.dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SpdViolation {
                iteration: it,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        prec.apply(&r, &mut z)?;
        let rz_new = red.dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        it += 1;
        residuals.push(red.norm(&r) / b_norm);
    }
    residual(op, b, x, &mut r)?;
    Ok(KrylovResult {
        iterations: it,
        residuals,
        final_residual: red.norm(&r) / b_norm,
    })
}

/// Eigenvalue bounds `(lambda_max / 20, 1.2 lambda_max)` of `D^{-1} A` from
/// 20 power iterations.
pub fn estimate_eigenvalues(op: &dyn LinearOperator, inv_diag: &[f64], red: Reduction) -> Result<(f64, f64)> {
    let n = op.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..20 {
        let nx = red.norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut y)?;
        for (yi, di) in y.iter_mut().zip(inv_diag) {
            *yi *= di;
        }
        lambda = red.dot(&x, &y);
        std::mem::swap(&mut x, &mut y);
    }
    if !(lambda > 0.0) {
        return Err(Error::SolverFailure(format!(
            "power iteration gave non-positive eigenvalue estimate {lambda:e}"
        )));
    }
    let lmax = 1.2 * lambda;
    Ok((lmax / 20.0, lmax))
}

/// Chebyshev iteration on `D^{-1} A` targeting `[lambda_min, lambda_max]`,
/// used as a fixed polynomial preconditioner. Degree 0 is plain Jacobi.
pub struct ChebyshevSmoother<'a> {
    op: &'a dyn LinearOperator,
    inv_diag: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
    degree: usize,
}

/// Builds the smoother from the operator diagonal and an eigenvalue range.
pub fn chebyshev_smoother<'a>(
    op: &'a dyn LinearOperator,
    diag: &[f64],
    eig_range: (f64, f64),
    degree: usize,
) -> Result<ChebyshevSmoother<'a>> {
    let (lo, hi) = eig_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "chebyshev range needs 0 < min < max, got ({lo:e}, {hi:e})"
        )));
    }
    let inv_diag = DiagonalPreconditioner::from_diagonal(diag)?.inv_diag;
    Ok(ChebyshevSmoother {
        op,
        inv_diag,
        lambda_min: lo,
        lambda_max: hi,
        degree,
    })
}

impl ChebyshevSmoother<'_> {
    /// Analytic error reduction `1 / T_k((kappa + 1) / (kappa - 1))`.
    pub fn error_bound(&self) -> f64 {
        let kappa = self.lambda_max / self.lambda_min;
        1.0 / (self.degree as f64 * ((kappa + 1.0) / (kappa - 1.0)).acosh()).cosh()
    }
}

impl Preconditioner for ChebyshevSmoother<'_> {
    fn apply(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = b.len();
        if self.degree == 0 {
            for i in 0..n {
                x[i] = b[i] * self.inv_diag[i];
            }
            return Ok(());
        }
        let theta = 0.5 * (self.lambda_max + self.lambda_min);
        let delta = 0.5 * (self.lambda_max - self.lambda_min);
        let sigma = theta / delta;
        let mut rho_old = 1.0 / sigma;
        let mut d: Vec<f64> = (0..n).map(|i| b[i] * self.inv_diag[i] / theta).collect();
        x.copy_from_slice(&d);
        let mut r = vec![0.0; n];
        for _ in 1..self.degree {
            self.op.apply(x, &mut r)?;
            let rho = 1.0 / (2.0 * sigma - rho_old);
            for i in 0..n {
                let ri = b[i] - r[i];
                d[i] = rho * rho_old * d[i] + 2.0 * rho / delta * self.inv_diag[i] * ri;
                x[i] += d[i];
            }
            rho_old = rho;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Dense {
        n: usize,
        a: Vec<f64>,
    }

    impl LinearOperator for Dense {
        fn len(&self) -> usize {
            self.n
        }

        fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
            Ok(())
        }
    }

    fn random_spd(n: usize, seed: u64) -> Dense {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            a[i * n + i] += 1.0;
        }
        Dense { n, a }
    }

    fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(a.n, a.n, &a.a);
        let v = nalgebra::DVector::from_column_slice(b);
        m.lu().solve(&v).unwrap().iter().copied().collect()
    }

    /// 1D linear-element mass matrix on a geometrically stretched grid.
    fn stretched_mass(n: usize, ratio: f64) -> Dense {
        let mut a = vec![0.0; n * n];
        let mut h = 1.0;
        for e in 0..n - 1 {
            let (i, j) = (e, e + 1);
            a[i * n + i] += h / 3.0;
            a[j * n + j] += h / 3.0;
            a[i * n + j] += h / 6.0;
            a[j * n + i] += h / 6.0;
            h *= ratio;
        }
        a[0] += 1.0 / 3.0;
        a[n * n - 1] += h / 3.0;
        Dense { n, a }
    }

    #[test]
    fn gmres_identity_one_iteration() {
        let op = FnOperator {
            n: 5,
            f: |x: &[f64], y: &mut [f64]| {
                y.copy_from_slice(x);
                Ok(())
            },
        };
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = vec![0.0; 5];
        let res = gmres(&op, &b, &mut x, &IdentityPreconditioner, GmresParams::default(), Reduction::default()).unwrap();
        assert_eq!(res.iterations, 1);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gmres_two_by_two() {
        let op = Dense {
            n: 2,
            a: vec![2.0, 1.0, 0.0, 3.0],
        };
        let mut x = vec![0.0; 2];
        let params = GmresParams {
            tol: 1e-13,
            ..Default::default()
        };
        let res = gmres(&op, &[3.0, 3.0], &mut x, &IdentityPreconditioner, params, Reduction::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(res.final_residual <= 1e-13 * 10.0);
    }

    #[test]
    fn gmres_residuals_non_increasing_and_true() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = rng.gen_range(-0.3..0.3) / n as f64;
            }
            a[i * n + i] += 1.0 + i as f64 / 10.0;
        }
        let op = Dense { n, a };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let diag: Vec<f64> = (0..n).map(|i| op.a[i * n + i]).collect();
        let pre = DiagonalPreconditioner::from_diagonal(&diag).unwrap();
        let mut x = vec![0.0; n];
        let params = GmresParams {
            tol: 1e-10,
            max_iter: 200,
            restart: 5,
        };
        let res = gmres(&op, &b, &mut x, &pre, params, Reduction::default()).unwrap();
        assert!(res.final_residual <= 1e-10);
        for w in res.residuals.windows(2).take(5) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let mut r = vec![0.0; n];
        residual(&op, &b, &x, &mut r).unwrap();
        let red = Reduction::default();
        let true_rel = red.norm(&r) / red.norm(&b);
        assert!((true_rel - res.final_residual).abs() < 1e-14);
    }

    #[test]
    fn gmres_reports_iteration_limit() {
        let op = random_spd(30, 3);
        let b = vec![1.0; 30];
        let mut x = vec![0.0; 30];
        let params = GmresParams {
            tol: 1e-14,
            max_iter: 3,
            restart: 30,
        };
        let err = gmres(&op, &b, &mut x, &IdentityPreconditioner, params, Reduction::default()).unwrap_err();
        assert!(matches!(err, Error::SolverFailure(_)));
    }

    #[test]
    fn cg_diagonal_jacobi_converges_in_one() {
        let n = 10;
        let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let d2 = diag.clone();
        let op = FnOperator {
            n,
            f: move |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = d2[i] * x[i];
                }
                Ok(())
            },
        };
        let pre = DiagonalPreconditioner::from_diagonal(&diag).unwrap();
        let mut x = vec![0.0; n];
        let res = cg(&op, &[1.0; 10], &mut x, &pre, 1e-12, 50, Reduction::default()).unwrap();
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn cg_matches_direct_solve() {
        let op = random_spd(5, 5);
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut x = vec![0.0; 5];
        cg(&op, &b, &mut x, &IdentityPreconditioner, 1e-14, 100, Reduction::default()).unwrap();
        let e = dense_solve(&op, &b);
        for (a, b) in x.iter().zip(&e) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_finite_termination() {
        let op = random_spd(8, 9);
        let b = vec![1.0; 8];
        let mut x = vec![0.0; 8];
        let res = cg(&op, &b, &mut x, &IdentityPreconditioner, 1e-10, 100, Reduction::default()).unwrap();
        assert!(res.iterations <= 8 + 2, "{}", res.iterations);
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let op = Dense {
            n: 2,
            a: vec![1.0, 0.0, 0.0, -1.0],
        };
        let mut x = vec![0.0; 2];
        let err = cg(&op, &[0.0, 1.0], &mut x, &IdentityPreconditioner, 1e-12, 10, Reduction::default()).unwrap_err();
        assert!(matches!(err, Error::SpdViolation { .. }));
    }

    #[test]
    fn chebyshev_degree_zero_is_jacobi() {
        let op = random_spd(6, 1);
        let diag: Vec<f64> = (0..6).map(|i| op.a[i * 7]).collect();
        let ch = chebyshev_smoother(&op, &diag, (0.1, 2.0), 0).unwrap();
        let r = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut z = vec![0.0; 6];
        ch.apply(&r, &mut z).unwrap();
        for i in 0..6 {
            assert!((z[i] - r[i] / diag[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn chebyshev_meets_analytic_bound() {
        let n = 50;
        let (lo, hi) = (1.0, 10.0);
        let eig: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let e2 = eig.clone();
        let op = FnOperator {
            n,
            f: move |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = e2[i] * x[i];
                }
                Ok(())
            },
        };
        let ones = vec![1.0; n];
        let ch = chebyshev_smoother(&op, &ones, (lo, hi), 3).unwrap();
        // exact solution x* = 1, initial error 1 everywhere
        let b = eig.clone();
        let mut x = vec![0.0; n];
        ch.apply(&b, &mut x).unwrap();
        let reduction = x.iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max);
        let kappa: f64 = hi / lo;
        let bound = 1.0 / (3.0 * ((kappa + 1.0) / (kappa - 1.0)).acosh()).cosh();
        assert!((ch.error_bound() - bound).abs() < 1e-15);
        assert!(reduction <= bound * 1.1, "{reduction} > {bound}");
    }

    #[test]
    fn chebyshev_preconditioned_cg_beats_jacobi_on_stretched_mass() {
        let op = stretched_mass(200, 1.03);
        let n = op.n;
        let diag: Vec<f64> = (0..n).map(|i| op.a[i * n + i]).collect();
        let red = Reduction::default();
        let jac = DiagonalPreconditioner::from_diagonal(&diag).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.3).cos()).collect();
        let mut x = vec![0.0; n];
        let it_j = cg(&op, &b, &mut x, &jac, 1e-10, 1000, red).unwrap().iterations;
        let range = estimate_eigenvalues(&op, &jac.inv_diag, red).unwrap();
        let ch = chebyshev_smoother(&op, &diag, range, 4).unwrap();
        let mut x = vec![0.0; n];
        let it_c = cg(&op, &b, &mut x, &ch, 1e-10, 1000, red).unwrap().iterations;
        assert!(it_c <= it_j, "chebyshev {it_c} vs jacobi {it_j}");
    }

    #[test]
    fn invalid_chebyshev_range() {
        let op = random_spd(3, 2);
        assert!(chebyshev_smoother(&op, &[1.0; 3], (2.0, 1.0), 2).is_err());
        assert!(chebyshev_smoother(&op, &[1.0; 3], (0.0, 1.0), 2).is_err());
    }

    #[test]
    fn diagonal_build_reports_bad_entry() {
        let err = DiagonalPreconditioner::from_diagonal(&[1.0, 0.0, 2.0]).unwrap_err();
        assert_eq!(err, Error::PreconditionerBuild { index: 1, value: 0.0 });
    }
}
