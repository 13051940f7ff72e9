//! Run orchestration: time loop, conservation bookkeeping, artifacts.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use imexdg_core::imex::{advance_step, tableau, IntegratorConfig};
use imexdg_core::operators::Discretization;
use imexdg_core::profile::{Block, BlockTimes, Profiler, SolverReport};
use imexdg_core::state::StateField;

use crate::case::{build_discretization, initial_state, mass_inverse_name, BackgroundState, Case, RunConfig};
use crate::output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub case: String,
    pub unknowns_per_scalar: usize,
    pub mass_drift_rel: f64,
    pub energy_drift_rel: f64,
    pub final_max_velocity: f64,
    pub outer_iters_total: usize,
    pub gmres_iters_total: usize,
    pub wall_clock_s: f64,
    pub steps: usize,
    pub degree: usize,
    pub cells: Vec<usize>,
    pub threads: usize,
    pub preconditioner: String,
    pub mass_inverse: String,
    pub tableau: String,
    pub acoustic_cfl: f64,
    pub max_mass_drift_per_step: f64,
    pub max_momentum_residual: f64,
    pub max_energy_residual: f64,
    pub final_density_l2: f64,
    pub final_pressure_l2: f64,
    pub block_seconds: BlockSeconds,
    pub block_shares: BlockSeconds,
    pub final_checksum: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observed_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density_error_l2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockSeconds {
    pub pressure_solve: f64,
    pub velocity_update: f64,
    pub rhs_assembly: f64,
    pub other: f64,
}

impl From<BlockTimes> for BlockSeconds {
    fn from(b: BlockTimes) -> Self {
        Self {
            pressure_solve: b.pressure_solve,
            velocity_update: b.velocity_update,
            rhs_assembly: b.rhs_assembly,
            other: b.other,
        }
    }
}

impl From<[f64; 4]> for BlockSeconds {
    fn from(s: [f64; 4]) -> Self {
        Self {
            pressure_solve: s[0],
            velocity_update: s[1],
            rhs_assembly: s[2],
            other: s[3],
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub initial: StateField,
    pub final_state: StateField,
    pub reports: Vec<SolverReport>,
    pub blocks: BlockTimes,
    pub summary: Summary,
}

/// Totals of mass and energy (the latter including potential energy when
/// gravity is active).
pub fn conserved_totals(disc: &Discretization, s: &StateField) -> (f64, f64) {
    let mass = disc.integrate(&s.density);
    let mut energy = disc.integrate(&s.energy);
    if disc.gravity != 0.0 {
        let d = disc.dim();
        let pot: Vec<f64> = s
            .density
            .iter()
            .enumerate()
            .map(|(k, &r)| r * disc.gravity * disc.mesh.node_coords[k * d + d - 1])
            .collect();
        energy += disc.integrate(&pot);
    }
    (mass, energy)
}

fn l2(disc: &Discretization, f: &[f64]) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    disc.integrate(&sq).max(0.0).sqrt()
}

pub fn integrator_config(cfg: &RunConfig) -> Result<IntegratorConfig> {
    Ok(IntegratorConfig {
        tableau: tableau(&cfg.tableau)?,
        mode: cfg.mass_inverse,
        preconditioner: cfg.preconditioner,
        fixed_point: cfg.fixed_point,
    })
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")
}

/// Runs a case in memory without writing artifacts.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| simulate_in_pool(cfg))
}

fn simulate_in_pool(cfg: &RunConfig) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let disc = build_discretization(cfg)?;
    let bg = BackgroundState::default();
    let initial = initial_state(cfg, &disc, &bg)?;
    let icfg = integrator_config(cfg)?;
    let prof = Profiler::new();
    let (m0, e0) = conserved_totals(&disc, &initial);
    let cfl = crate::case::acoustic_cfl(&disc, &initial, cfg.dt);
    let mut state = initial.clone();
    let mut reports = Vec::new();
    let mut blocks = BlockTimes::default();
    let mut prev_mass = m0;
    let mut max_step_drift: f64 = 0.0;
    for (step, dt) in cfg.steps().into_iter().enumerate() {
        let (next, report) = advance_step(&disc, &state, dt, &icfg, step, &prof)
            .with_context(|| format!("case {} failed in step {step}", cfg.case))?;
        if cfg.verbose_solver {
            for st in &report.stages {
                eprintln!(
                    "step {step} stage {}: outer {} gmres {:?} updates {:?} res ({:.2e}, {:.2e})",
                    st.stage,
                    st.outer_iterations,
                    st.krylov_iterations,
                    st.update_norms,
                    st.momentum_residual,
                    st.energy_residual
                );
            }
        }
        let m = disc.integrate(&next.density);
        max_step_drift = max_step_drift.max(((m - prev_mass) / m0).abs());
        prev_mass = m;
        blocks.merge(&report.blocks);
        reports.push(report);
        state = next;
    }
    let (m1, e1) = conserved_totals(&disc, &state);
    let wall = t0.elapsed().as_secs_f64();
    // setup and bookkeeping outside the steps count as untracked time
    blocks.other += (wall - blocks.total()).max(0.0);
    let summary = Summary {
        case: cfg.case.name().into(),
        unknowns_per_scalar: disc.scalar_len(),
        mass_drift_rel: ((m1 - m0) / m0).abs(),
        energy_drift_rel: ((e1 - e0) / e0).abs(),
        final_max_velocity: state.max_velocity(),
        outer_iters_total: reports.iter().map(SolverReport::outer_iterations).sum(),
        gmres_iters_total: reports.iter().map(SolverReport::gmres_iterations).sum(),
        wall_clock_s: wall,
        steps: reports.len(),
        degree: cfg.degree,
        cells: cfg.cells.clone(),
        threads: cfg.threads,
        preconditioner: cfg.preconditioner.name().into(),
        mass_inverse: mass_inverse_name(cfg.mass_inverse).into(),
        tableau: icfg.tableau.name.to_string(),
        acoustic_cfl: cfl,
        max_mass_drift_per_step: max_step_drift,
        max_momentum_residual: reports.iter().map(SolverReport::max_momentum_residual).fold(0.0, f64::max),
        max_energy_residual: reports.iter().map(SolverReport::max_energy_residual).fold(0.0, f64::max),
        final_density_l2: l2(&disc, &state.density),
        final_pressure_l2: l2(&disc, &state.pressure),
        block_seconds: blocks.into(),
        block_shares: blocks.shares().into(),
        final_checksum: format!("{:016x}", state.checksum()),
        observed_order: None,
        density_error_l2: None,
    };
    let mut out = RunOutcome {
        config: cfg.clone(),
        initial,
        final_state: state,
        reports,
        blocks,
        summary,
    };
    if cfg.case == Case::ConvergenceSpatial {
        out.summary.density_error_l2 = Some(spatial_error(&disc, &out.final_state, cfg.t_final));
    }
    Ok(out)
}

/// L2 distance of the density to the exactly translated profile.
pub fn spatial_error(disc: &Discretization, s: &StateField, t: f64) -> f64 {
    let d = disc.dim();
    let diff: Vec<f64> = s
        .density
        .iter()
        .enumerate()
        .map(|(k, &r)| r - crate::case::advected_density(&disc.mesh.node_coords[k * d..(k + 1) * d], t))
        .collect();
    l2(disc, &diff)
}

/// Self-convergence in time: runs at `dt`, `dt/2`, `dt/4` and returns the
/// velocity differences of successive levels and the observed order.
pub fn temporal_self_convergence(cfg: &RunConfig) -> Result<(Vec<f64>, f64)> {
    let runs: Vec<RunOutcome> = [1.0, 2.0, 4.0]
        .iter()
        .map(|f| {
            let mut c = cfg.clone();
            c.dt = cfg.dt / f;
            simulate(&c)
        })
        .collect::<Result<_>>()?;
    let disc = build_discretization(cfg)?;
    let diffs: Vec<f64> = runs
        .windows(2)
        .map(|w| {
            let a = w[0].final_state.velocity();
            let b = w[1].final_state.velocity();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            l2(&disc, &d)
        })
        .collect();
    let order = (diffs[0] / diffs[1]).log2();
    Ok((diffs, order))
}

/// Runs a case and writes all artifacts into `cfg.output_dir` when set.
pub fn run_case(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut out = simulate(cfg)?;
    if cfg.case == Case::ConvergenceTemporal {
        let (_, order) = temporal_self_convergence(cfg)?;
        out.summary.observed_order = Some(order);
    }
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(&out, dir)?;
    }
    Ok(out)
}

pub fn write_artifacts(out: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let disc = build_discretization(&out.config)?;
    output::write_vtk(&dir.join("initial.vtk"), &disc, &out.initial)?;
    output::write_vtk(&dir.join("final.vtk"), &disc, &out.final_state)?;
    output::write_dump(&dir.join("initial"), &out.initial)?;
    output::write_dump(&dir.join("final"), &out.final_state)?;
    std::fs::write(
        dir.join("timing.csv"),
        timing_csv(out.config.case, out.config.threads, &out.reports),
    )?;
    let json = serde_json::to_string_pretty(&out.summary)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

pub const TIMING_COLUMNS: [&str; 6] = ["case", "threads", "step", "stage", "block", "seconds"];

/// Rows `case,threads,step,stage,block,seconds`. Untracked time of a step
/// is reported as block `other` on stage 0.
pub fn timing_csv(case: Case, threads: usize, reports: &[SolverReport]) -> String {
    let mut s = TIMING_COLUMNS.join(",");
    s.push('\n');
    for (step, rep) in reports.iter().enumerate() {
        for r in &rep.timings {
            s.push_str(&format!("{case},{threads},{},{},{},{}\n", r.step, r.stage, r.block.name(), r.seconds));
        }
        s.push_str(&format!("{case},{threads},{step},0,{},{}\n", Block::Other.name(), rep.blocks.other));
    }
    s
}
