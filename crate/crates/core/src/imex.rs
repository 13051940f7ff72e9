//! IMEX Runge-Kutta time stepping of the stage system.
//!
//! Advection and gravity are explicit; the pressure gradient and the
//! enthalpy flux are implicit. All right-hand sides are kept as dual
//! vectors (integrals against the test functions), so combining stages is
//! a plain linear combination and mass is conserved to round-off.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::helmholtz::{solve_pressure_stage, FixedPointConfig, PreconditionerKind, StageProblem};
use crate::operators::{Discretization, ExplicitRhs, WeightedMass};
use crate::profile::{Block, BlockTimes, Profiler, SolverReport, StageSolve};
use crate::state::{IntegrationMode, StateField};

const ROW_SUM_TOL: f64 = 1e-14;

/// Explicit and implicit tableaux sharing one stage count.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherPair {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub a_im: Vec<Vec<f64>>,
    pub b_im: Vec<f64>,
    pub c_im: Vec<f64>,
    /// Claimed order; `2` turns on the second-order checks.
    pub order: usize,
}

pub const TABLEAU_NAMES: [&str; 2] = ["ars222", "ssp2-332"];

impl ButcherPair {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        let bad = |m: String| Err(Error::InvalidArgument(format!("tableau {}: {m}", self.name)));
        if s == 0
            || self.a.len() != s
            || self.a_im.len() != s
            || self.c.len() != s
            || self.b_im.len() != s
            || self.c_im.len() != s
            || self.a.iter().chain(&self.a_im).any(|r| r.len() != s)
        {
            return bad("inconsistent sizes".into());
        }
        for l in 0..s {
            for m in l..s {
                if self.a[l][m] != 0.0 {
                    return bad(format!("explicit entry ({l},{m}) is not strictly lower"));
                }
                if m > l && self.a_im[l][m] != 0.0 {
                    return bad(format!("implicit entry ({l},{m}) is above the diagonal"));
                }
            }
            let rs: f64 = self.a[l].iter().sum();
            let rs_im: f64 = self.a_im[l].iter().sum();
            if (rs - self.c[l]).abs() > ROW_SUM_TOL || (rs_im - self.c_im[l]).abs() > ROW_SUM_TOL {
                return bad(format!("row {l} does not sum to c"));
            }
        }
        let sb: f64 = self.b.iter().sum();
        let sb_im: f64 = self.b_im.iter().sum();
        if (sb - 1.0).abs() > ROW_SUM_TOL || (sb_im - 1.0).abs() > ROW_SUM_TOL {
            return bad(format!("weights sum to {sb} and {sb_im}, expected 1"));
        }
        if self.order >= 2 {
            let bc: f64 = self.b.iter().zip(&self.c).map(|(x, y)| x * y).sum();
            let bc_im: f64 = self.b_im.iter().zip(&self.c_im).map(|(x, y)| x * y).sum();
            if (bc - 0.5).abs() > ROW_SUM_TOL || (bc_im - 0.5).abs() > ROW_SUM_TOL {
                return bad(format!("second-order condition fails: b.c = {bc}, b~.c~ = {bc_im}"));
            }
        }
        Ok(())
    }

    /// Both weight vectors equal the last tableau rows, so the last stage
    /// is the new solution.
    pub fn stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.b == self.a[s - 1] && self.b_im == self.a_im[s - 1]
    }
}

/// Looks up a tableau by name (`ars222`, `ssp2-332`; case and `_`/`-`
/// insensitive).
pub fn tableau(name: &str) -> Result<ButcherPair> {
    let key = name.to_ascii_lowercase().replace('_', "-");
    let pair = match key.as_str() {
        "ars222" => {
            let g = 1.0 - 1.0 / 2f64.sqrt();
            let d = 1.0 - 1.0 / (2.0 * g);
            ButcherPair {
                name: "ars222".into(),
                a: vec![vec![0.0, 0.0, 0.0], vec![g, 0.0, 0.0], vec![d, 1.0 - d, 0.0]],
                b: vec![d, 1.0 - d, 0.0],
                c: vec![0.0, g, 1.0],
                a_im: vec![vec![0.0, 0.0, 0.0], vec![0.0, g, 0.0], vec![0.0, 1.0 - g, g]],
                b_im: vec![0.0, 1.0 - g, g],
                c_im: vec![0.0, g, 1.0],
                order: 2,
            }
        }
        "ssp2-332" => ButcherPair {
            name: "ssp2-332".into(),
            a: vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![0.5, 0.5, 0.0]],
            b: vec![1.0 / 3.0; 3],
            c: vec![0.0, 0.5, 1.0],
            a_im: vec![
                vec![0.25, 0.0, 0.0],
                vec![0.0, 0.25, 0.0],
                vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            ],
            b_im: vec![1.0 / 3.0; 3],
            c_im: vec![0.25, 0.25, 1.0],
            order: 2,
        },
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown tableau '{name}', available: {}",
                TABLEAU_NAMES.join(", ")
            )))
        }
    };
    pair.validate()?;
    Ok(pair)
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub tableau: ButcherPair,
    pub mode: IntegrationMode,
    pub preconditioner: PreconditionerKind,
    pub fixed_point: FixedPointConfig,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tableau: tableau("ars222").expect("registered tableau"),
            mode: IntegrationMode::Collocated,
            preconditioner: PreconditionerKind::Helmholtz,
            fixed_point: FixedPointConfig::default(),
        }
    }
}

/// Primitive stage fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFields {
    pub density: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// Data of one time step: duals at `t^n` and the stored stage terms.
pub struct StageWorkspace<'a> {
    disc: &'a Discretization,
    pair: &'a ButcherPair,
    pub dt: f64,
    /// `M rho^n`.
    pub mass_n: Vec<f64>,
    /// `A(rho^n) U^n`.
    pub momentum_n: Vec<f64>,
    /// `D P^n + K(rho^n, U^n)`.
    pub energy_n: Vec<f64>,
    explicit: Vec<Option<ExplicitRhs>>,
    grad_p: Vec<Option<Vec<f64>>>,
    div_h: Vec<Option<Vec<f64>>>,
}

impl<'a> StageWorkspace<'a> {
    pub fn new(
        disc: &'a Discretization,
        pair: &'a ButcherPair,
        dt: f64,
        fields: &StageFields,
        mode: IntegrationMode,
    ) -> Result<Self> {
        let mut mass_n = vec![0.0; disc.scalar_len()];
        disc.apply_mass(&fields.density, &mut mass_n)?;
        let a = disc.weighted_mass(&fields.density, mode)?;
        let mut momentum_n = vec![0.0; disc.vector_len()];
        disc.apply_weighted_mass(&a, &fields.velocity, &mut momentum_n)?;
        let mut energy_n = vec![0.0; disc.scalar_len()];
        disc.apply_internal_energy_mass(&fields.pressure, &mut energy_n)?;
        let k = disc.kinetic_dual(&fields.density, &fields.velocity)?;
        energy_n.iter_mut().zip(&k).for_each(|(e, k)| *e += k);
        let s = pair.stages();
        Ok(Self {
            disc,
            pair,
            dt,
            mass_n,
            momentum_n,
            energy_n,
            explicit: vec![None; s],
            grad_p: vec![None; s],
            div_h: vec![None; s],
        })
    }

    /// Stores externally computed stage terms (explicit rhs, `B P`, `C(rho h) U`).
    pub fn insert_stage_terms(&mut self, l: usize, explicit: ExplicitRhs, grad_p: Vec<f64>, div_h: Vec<f64>) {
        self.explicit[l] = Some(explicit);
        self.grad_p[l] = Some(grad_p);
        self.div_h[l] = Some(div_h);
    }

    /// Evaluates and stores the terms of completed stage `l`.
    pub fn store_stage(&mut self, l: usize, f: &StageFields) -> Result<()> {
        let d = self.disc;
        let ex = d.explicit_advective_rhs(&f.density, &f.velocity)?;
        let mut bp = vec![0.0; d.vector_len()];
        d.apply_pressure_gradient(&f.pressure, &mut bp)?;
        let rho_h: Vec<f64> = f.pressure.iter().map(|p| d.gas.enthalpy_factor() * p).collect();
        let mut cu = vec![0.0; d.scalar_len()];
        d.apply_energy_divergence(&rho_h, &f.velocity, &mut cu)?;
        self.insert_stage_terms(l, ex, bp, cu);
        Ok(())
    }

    fn term<'b>(v: &'b [Option<Vec<f64>>], m: usize) -> &'b [f64] {
        v[m].as_deref().expect("stage term used before it was stored")
    }

    fn explicit_of(&self, m: usize) -> &ExplicitRhs {
        self.explicit[m].as_ref().expect("stage term used before it was stored")
    }

    fn weights_before(row: &[f64], l: usize) -> Vec<f64> {
        row.iter().take(l).copied().collect()
    }

    /// Dual of the stage density `M rho^(l)`.
    pub fn stage_density_dual(&self, l: usize) -> Vec<f64> {
        self.density_dual_with(&Self::weights_before(&self.pair.a[l], l))
    }

    fn density_dual_with(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.mass_n.clone();
        for (m, &wm) in w.iter().enumerate() {
            if wm != 0.0 {
                let f = self.dt * wm;
                out.iter_mut().zip(&self.explicit_of(m).density).for_each(|(o, t)| *o -= f * t);
            }
        }
        out
    }

    /// Nodal stage density; `None` weights mean the stage equals `rho^n`.
    pub fn stage_density(&self, l: usize, rho_n: &[f64]) -> Result<Vec<f64>> {
        let w = Self::weights_before(&self.pair.a[l], l);
        if w.iter().all(|&x| x == 0.0) {
            return Ok(rho_n.to_vec());
        }
        let dual = self.density_dual_with(&w);
        let mut rho = vec![0.0; dual.len()];
        self.disc.inverse_mass(&dual, &mut rho)?;
        check_density(&rho, self.disc.n_dofs())?;
        Ok(rho)
    }

    /// `(F, e_hat)` of stage `l`.
    pub fn assemble_stage_rhs(&self, l: usize) -> (Vec<f64>, Vec<f64>) {
        let we = Self::weights_before(&self.pair.a[l], l);
        let wi = Self::weights_before(&self.pair.a_im[l], l);
        self.combination(&we, &wi)
    }

    fn combination(&self, we: &[f64], wi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dt = self.dt;
        let mut f = self.momentum_n.clone();
        let mut e = self.energy_n.clone();
        for m in 0..we.len().max(wi.len()) {
            let a = we.get(m).copied().unwrap_or(0.0);
            let ai = wi.get(m).copied().unwrap_or(0.0);
            if a != 0.0 {
                let ex = self.explicit_of(m);
                f.iter_mut().zip(&ex.momentum).for_each(|(o, t)| *o -= dt * a * t);
                e.iter_mut().zip(&ex.kinetic).for_each(|(o, t)| *o -= dt * a * t);
            }
            if ai != 0.0 {
                f.iter_mut().zip(Self::term(&self.grad_p, m)).for_each(|(o, t)| *o -= dt * ai * t);
                e.iter_mut().zip(Self::term(&self.div_h, m)).for_each(|(o, t)| *o -= dt * ai * t);
            }
        }
        (f, e)
    }
}

fn check_density(rho: &[f64], n_dofs: usize) -> Result<()> {
    let (k, &min) = rho
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty density");
    if !(min > 0.0) {
        return Err(Error::TimeStepRejected {
            min_rho: min,
            cell: k / n_dofs,
            node: k % n_dofs,
        });
    }
    Ok(())
}

/// Velocity `A(rho)^{-1} mu` and pressure `(gamma-1) M^{-1} (eps - K)` from duals.
fn recover(
    disc: &Discretization,
    density: Vec<f64>,
    momentum: &[f64],
    energy: &[f64],
    mode: IntegrationMode,
    prof: &Profiler,
) -> Result<StageFields> {
    let a = disc.weighted_mass(&density, mode)?;
    let mut velocity = vec![0.0; disc.vector_len()];
    {
        let _s = prof.scope(Block::VelocityUpdate);
        disc.inverse_weighted_mass(&a, momentum, &mut velocity)?;
    }
    let k = disc.kinetic_dual(&density, &velocity)?;
    let r: Vec<f64> = energy.iter().zip(&k).map(|(e, k)| e - k).collect();
    let mut pressure = vec![0.0; r.len()];
    disc.inverse_mass(&r, &mut pressure)?;
    let f = disc.gas.gamma - 1.0;
    pressure.iter_mut().for_each(|p| *p *= f);
    Ok(StageFields {
        density,
        velocity,
        pressure,
    })
}

/// Advances the primitive fields by one step.
pub fn advance_fields(
    disc: &Discretization,
    fields: &StageFields,
    dt: f64,
    config: &IntegratorConfig,
    step: usize,
    prof: &Profiler,
) -> Result<(StageFields, SolverReport)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let t0 = Instant::now();
    let pair = &config.tableau;
    let s = pair.stages();
    let gsa = pair.stiffly_accurate();
    prof.set_position(step, 0);
    let mut ws = {
        let _s = prof.scope(Block::RhsAssembly);
        StageWorkspace::new(disc, pair, dt, fields, config.mode)?
    };
    let mut stages: Vec<StageSolve> = Vec::with_capacity(s);
    let mut last: Option<StageFields> = None;
    for l in 0..s {
        prof.set_position(step, l);
        let run = |ws: &StageWorkspace| -> Result<(StageFields, StageSolve)> {
            let empty_explicit = pair.a[l][..l].iter().all(|&x| x == 0.0);
            let empty_implicit = pair.a_im[l][..l].iter().all(|&x| x == 0.0);
            if empty_explicit && empty_implicit && pair.a_im[l][l] == 0.0 {
                return Ok((fields.clone(), StageSolve { stage: l, ..Default::default() }));
            }
            let (density, f, e) = {
                let _s = prof.scope(Block::RhsAssembly);
                let density = ws.stage_density(l, &fields.density)?;
                let (f, e) = ws.assemble_stage_rhs(l);
                (density, f, e)
            };
            let a: WeightedMass = disc.weighted_mass(&density, config.mode)?;
            let prob = StageProblem {
                density: &density,
                weighted_mass: &a,
                momentum_rhs: &f,
                energy_rhs: &e,
                pressure_guess: &fields.pressure,
                dt,
                a_ll: pair.a_im[l][l],
            };
            let sol = solve_pressure_stage(disc, &prob, config.preconditioner, &config.fixed_point, prof)?;
            let mut rep = sol.report;
            rep.stage = l;
            Ok((
                StageFields {
                    density,
                    velocity: sol.velocity,
                    pressure: sol.pressure,
                },
                rep,
            ))
        };
        let (sf, rep) = run(&ws).map_err(|e| e.at_stage(l))?;
        check_density(&sf.density, disc.n_dofs()).map_err(|e| e.at_stage(l))?;
        stages.push(rep);
        if !(gsa && l == s - 1) {
            let _sc = prof.scope(Block::RhsAssembly);
            ws.store_stage(l, &sf).map_err(|e| e.at_stage(l))?;
        }
        last = Some(sf);
    }
    let next = if gsa {
        last.expect("at least one stage")
    } else {
        prof.set_position(step, s);
        let (density, mu, eps) = {
            let _sc = prof.scope(Block::RhsAssembly);
            let dual = ws.density_dual_with(&pair.b);
            let mut density = vec![0.0; dual.len()];
            disc.inverse_mass(&dual, &mut density)?;
            check_density(&density, disc.n_dofs())?;
            let (mu, eps) = ws.combination(&pair.b, &pair.b_im);
            (density, mu, eps)
        };
        recover(disc, density, &mu, &eps, config.mode, prof)?
    };
    let total = t0.elapsed().as_secs_f64();
    let timings = prof.take_records();
    let mut blocks = BlockTimes::default();
    for r in &timings {
        if r.block != Block::Other {
            blocks.add(r.block, r.seconds);
        }
    }
    blocks.other = (total - blocks.tracked()).max(0.0);
    Ok((
        next,
        SolverReport {
            stages,
            timings,
            blocks,
            total_seconds: total,
        },
    ))
}

/// Advances a conserved state by one step.
pub fn advance_step(
    disc: &Discretization,
    state: &StateField,
    dt: f64,
    config: &IntegratorConfig,
    step: usize,
    prof: &Profiler,
) -> Result<(StateField, SolverReport)> {
    state.validate()?;
    let fields = StageFields {
        density: state.density.clone(),
        velocity: state.velocity(),
        pressure: state.pressure.clone(),
    };
    let (next, report) = advance_fields(disc, &fields, dt, config, step, prof)?;
    let out = StateField::from_primitive(
        state.dim,
        state.n_dofs,
        next.density,
        &next.velocity,
        next.pressure,
        &disc.gas,
    )?;
    Ok((out, report))
}
