//! Fixed-point solution of the coupled velocity/pressure stage system.
//!
//! With `c = a_ll dt` the stage equations read
//!
//! ```text
//! A U + c B P              = F
//! D P + K(U) + c C(rho h) U = e_hat
//! ```
//!
//! Eliminating `U` gives a non-symmetric pressure system. Each outer
//! iteration freezes `rho h = gamma/(gamma-1) P^k` and `K(U^k)`, solves the
//! linear system for `P^{k+1}` with GMRES and recovers `U^{k+1}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::krylov::{
    cg, chebyshev_smoother, estimate_eigenvalues, gmres, DiagonalPreconditioner, FnOperator, GmresParams,
    IdentityPreconditioner, KrylovResult, LinearOperator, Preconditioner,
};
use crate::operators::{Discretization, WeightedMass};
use crate::profile::{Block, Profiler, StageSolve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerKind {
    /// Inverse diagonal of `D`.
    InternalEnergy,
    /// Inverse diagonal of `D` plus the volume part of `c^2 int h grad psi . grad psi`.
    Helmholtz,
    /// No preconditioning.
    JacobiIdentity,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::InternalEnergy => "internal-energy",
            PreconditionerKind::Helmholtz => "helmholtz",
            PreconditionerKind::JacobiIdentity => "jacobi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Relative update norm that ends the outer iteration.
    pub tol: f64,
    pub max_outer: usize,
    pub krylov_tol: f64,
    pub krylov_max: usize,
    pub restart: usize,
    /// Chebyshev degree for SPD solves.
    pub cheby_degree: usize,
    /// Inflation of the largest eigenvalue estimate.
    pub eig_safety: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 20,
            krylov_tol: 1e-10,
            krylov_max: 2000,
            restart: 30,
            cheby_degree: 3,
            eig_safety: 1.2,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) || self.max_outer == 0 {
            return Err(Error::InvalidArgument(format!(
                "fixed point needs 0 < tol < 1 and max_outer >= 1, got tol={} max_outer={}",
                self.tol, self.max_outer
            )));
        }
        if !(self.krylov_tol > 0.0) || self.krylov_max == 0 || self.restart == 0 {
            return Err(Error::InvalidArgument("invalid Krylov settings".into()));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresParams {
        GmresParams {
            tol: self.krylov_tol,
            max_iter: self.krylov_max,
            restart: self.restart,
        }
    }
}

/// Diagonal preconditioner for the pressure system.
#[derive(Debug, Clone)]
pub enum StagePreconditioner {
    Diagonal(DiagonalPreconditioner),
    Identity,
}

impl StagePreconditioner {
    pub fn diagonal(&self) -> Option<&[f64]> {
        match self {
            StagePreconditioner::Diagonal(d) => Some(&d.inv_diag),
            StagePreconditioner::Identity => None,
        }
    }
}

impl Preconditioner for StagePreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        match self {
            StagePreconditioner::Diagonal(d) => d.apply(r, z),
            StagePreconditioner::Identity => IdentityPreconditioner.apply(r, z),
        }
    }
}

/// Builds the preconditioner of the given kind from the current density and
/// pressure iterate.
pub fn build_preconditioner(
    disc: &Discretization,
    kind: PreconditionerKind,
    density: &[f64],
    pressure: &[f64],
    dt: f64,
    a_ll: f64,
) -> Result<StagePreconditioner> {
    if let Some((k, _)) = density.iter().zip(pressure).enumerate().find(|(_, (r, p))| !(**r > 0.0 && **p > 0.0)) {
        return Err(Error::StateInvalid(format!(
            "preconditioner needs positive state, node {k} has rho={:e} p={:e}",
            density[k], pressure[k]
        )));
    }
    let diag = match kind {
        PreconditionerKind::JacobiIdentity => return Ok(StagePreconditioner::Identity),
        PreconditionerKind::InternalEnergy => {
            let f = 1.0 / (disc.gas.gamma - 1.0);
            let mut d = disc.mass_diagonal();
            d.iter_mut().for_each(|v| *v *= f);
            d
        }
        PreconditionerKind::Helmholtz => disc.helmholtz_diagonal(density, pressure, a_ll * dt)?,
    };
    Ok(StagePreconditioner::Diagonal(DiagonalPreconditioner::from_diagonal(&diag)?))
}

/// Result of [`solve_pressure_stage`].
#[derive(Debug, Clone)]
pub struct StageSolution {
    pub pressure: Vec<f64>,
    pub velocity: Vec<f64>,
    pub report: StageSolve,
}

/// Inputs of one implicit stage.
pub struct StageProblem<'a> {
    pub density: &'a [f64],
    pub weighted_mass: &'a WeightedMass,
    /// Dual momentum right-hand side `F`.
    pub momentum_rhs: &'a [f64],
    /// Dual energy right-hand side `e_hat`.
    pub energy_rhs: &'a [f64],
    /// Initial pressure iterate.
    pub pressure_guess: &'a [f64],
    pub dt: f64,
    pub a_ll: f64,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.par_iter().zip(b).map(|(x, y)| x - y).collect()
}

impl Discretization {
    fn inverse_a(&self, a: &WeightedMass, f: &[f64], out: &mut [f64], prof: &Profiler) -> Result<()> {
        let _s = prof.scope(Block::VelocityUpdate);
        self.inverse_weighted_mass(a, f, out)
    }

    /// `||A U + c B P - F||` and `||D P + K(U) + c C(rho h(P)) U - e_hat||`,
    /// each relative to the largest of its terms.
    pub fn stage_residuals(&self, prob: &StageProblem, pressure: &[f64], velocity: &[f64]) -> Result<(f64, f64)> {
        let red = self.reduction;
        let c = prob.a_ll * prob.dt;
        let mut au = vec![0.0; self.vector_len()];
        self.apply_weighted_mass(prob.weighted_mass, velocity, &mut au)?;
        let mut bp = vec![0.0; self.vector_len()];
        self.apply_pressure_gradient(pressure, &mut bp)?;
        bp.iter_mut().for_each(|v| *v *= c);
        let r1: Vec<f64> = (0..au.len()).map(|i| au[i] + bp[i] - prob.momentum_rhs[i]).collect();
        let s1 = red.norm(&au).max(red.norm(&bp)).max(red.norm(prob.momentum_rhs));
        let mut dp = vec![0.0; self.scalar_len()];
        self.apply_internal_energy_mass(pressure, &mut dp)?;
        let k = self.kinetic_dual(prob.density, velocity)?;
        let rho_h: Vec<f64> = pressure.iter().map(|p| self.gas.enthalpy_factor() * p).collect();
        let mut cu = vec![0.0; self.scalar_len()];
        self.apply_energy_divergence(&rho_h, velocity, &mut cu)?;
        cu.iter_mut().for_each(|v| *v *= c);
        let r2: Vec<f64> = (0..dp.len()).map(|i| dp[i] + k[i] + cu[i] - prob.energy_rhs[i]).collect();
        let s2 = red.norm(&dp).max(red.norm(&cu)).max(red.norm(prob.energy_rhs));
        let rel = |r: &[f64], s: f64| if s > 0.0 { red.norm(r) / s } else { red.norm(r) };
        Ok((rel(&r1, s1), rel(&r2, s2)))
    }
}

/// Solves one implicit stage by the fixed-point procedure. For `a_ll = 0`
/// the stage is explicit: `U = A^{-1} F` and `P = (gamma - 1) M^{-1} (e_hat - K)`.
pub fn solve_pressure_stage(
    disc: &Discretization,
    prob: &StageProblem,
    kind: PreconditionerKind,
    config: &FixedPointConfig,
    prof: &Profiler,
) -> Result<StageSolution> {
    config.validate()?;
    let n = disc.scalar_len();
    let nv = disc.vector_len();
    disc.check_len(prob.momentum_rhs, nv, "momentum rhs")?;
    disc.check_len(prob.energy_rhs, n, "energy rhs")?;
    disc.check_len(prob.pressure_guess, n, "pressure guess")?;
    if !(prob.dt >= 0.0) || !(prob.a_ll >= 0.0) {
        return Err(Error::InvalidArgument("dt and a_ll must be non-negative".into()));
    }
    let red = disc.reduction;
    let a = prob.weighted_mass;
    let c = prob.a_ll * prob.dt;
    let mut a_inv_f = vec![0.0; nv];
    disc.inverse_a(a, prob.momentum_rhs, &mut a_inv_f, prof)?;
    let mut report = StageSolve::default();

    if c == 0.0 {
        let _s = prof.scope(Block::PressureSolve);
        let k = disc.kinetic_dual(prob.density, &a_inv_f)?;
        let mut pressure = vec![0.0; n];
        disc.inverse_mass(&sub(prob.energy_rhs, &k), &mut pressure)?;
        let f = disc.gas.gamma - 1.0;
        pressure.par_iter_mut().for_each(|v| *v *= f);
        let (r1, r2) = disc.stage_residuals(prob, &pressure, &a_inv_f)?;
        report.momentum_residual = r1;
        report.energy_residual = r2;
        return Ok(StageSolution {
            pressure,
            velocity: a_inv_f,
            report,
        });
    }

    let mut pressure = prob.pressure_guess.to_vec();
    let mut velocity = vec![0.0; nv];
    let mut bp = vec![0.0; nv];
    {
        let _s = prof.scope(Block::PressureSolve);
        disc.apply_pressure_gradient(&pressure, &mut bp)?;
    }
    bp.par_iter_mut().for_each(|v| *v *= c);
    disc.inverse_a(a, &sub(prob.momentum_rhs, &bp), &mut velocity, prof)?;

    let mut converged = false;
    for _outer in 0..config.max_outer {
        let scope = prof.scope(Block::PressureSolve);
        let rho_h: Vec<f64> = pressure.par_iter().map(|p| disc.gas.enthalpy_factor() * p).collect();
        let k = disc.kinetic_dual(prob.density, &velocity)?;
        let mut c_ainv_f = vec![0.0; n];
        disc.apply_energy_divergence(&rho_h, &a_inv_f, &mut c_ainv_f)?;
        let rhs: Vec<f64> = (0..n).map(|i| prob.energy_rhs[i] - k[i] - c * c_ainv_f[i]).collect();
        let pre = build_preconditioner(disc, kind, prob.density, &pressure, prob.dt, prob.a_ll)?;
        let op = FnOperator {
            n,
            f: |x: &[f64], y: &mut [f64]| -> Result<()> {
                let mut bx = vec![0.0; nv];
                disc.apply_pressure_gradient(x, &mut bx)?;
                let mut ainv = vec![0.0; nv];
                disc.inverse_a(a, &bx, &mut ainv, prof)?;
                let mut cx = vec![0.0; n];
                disc.apply_energy_divergence(&rho_h, &ainv, &mut cx)?;
                disc.apply_internal_energy_mass(x, y)?;
                let c2 = c * c;
                y.par_iter_mut().zip(&cx).for_each(|(yi, ci)| *yi -= c2 * ci);
                Ok(())
            },
        };
        let mut next = pressure.clone();
        let res: KrylovResult = gmres(&op, &rhs, &mut next, &pre, config.gmres(), red)?;
        prof.add_iterations(Block::PressureSolve, res.iterations);
        report.krylov_iterations.push(res.iterations);
        report.residual_history.push(res.residuals);
        let diff = sub(&next, &pressure);
        let update = red.norm(&diff) / red.norm(&next);
        report.update_norms.push(update);
        report.outer_iterations += 1;
        pressure = next;
        disc.apply_pressure_gradient(&pressure, &mut bp)?;
        bp.par_iter_mut().for_each(|v| *v *= c);
        drop(scope);
        disc.inverse_a(a, &sub(prob.momentum_rhs, &bp), &mut velocity, prof)?;
        if update <= config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailure(format!(
            "pressure fixed point did not converge in {} iterations; update norms {:?}",
            config.max_outer, report.update_norms
        )));
    }
    let (r1, r2) = disc.stage_residuals(prob, &pressure, &velocity)?;
    report.momentum_residual = r1;
    report.energy_residual = r2;
    Ok(StageSolution {
        pressure,
        velocity,
        report,
    })
}

/// CG with a Chebyshev-Jacobi preconditioner for an SPD operator with
/// known diagonal.
pub fn solve_spd(
    op: &dyn LinearOperator,
    diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    config: &FixedPointConfig,
    red: crate::par::Reduction,
) -> Result<KrylovResult> {
    let jac = DiagonalPreconditioner::from_diagonal(diag)?;
    let (_, lmax) = estimate_eigenvalues(op, &jac.inv_diag, red)?;
    let lmax = lmax / 1.2 * config.eig_safety;
    let smoother = chebyshev_smoother(op, diag, (lmax / 20.0, lmax), config.cheby_degree)?;
    cg(op, rhs, x, &smoother, config.krylov_tol, config.krylov_max, red)
}
