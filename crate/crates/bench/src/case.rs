//! Test-case construction: meshes, background atmosphere, initial states.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imexdg_core::helmholtz::{FixedPointConfig, PreconditionerKind};
use imexdg_core::mesh::{build_mesh, BoundaryTag, HillParams, Mapping};
use imexdg_core::operators::Discretization;
use imexdg_core::state::{GasConstants, IntegrationMode, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    UniformRest,
    Hydrostatic,
    GravityWave,
    HillFlow2d,
    HillFlow3d,
    ConvergenceTemporal,
    ConvergenceSpatial,
}

impl Case {
    pub const ALL: [Case; 7] = [
        Case::UniformRest,
        Case::Hydrostatic,
        Case::GravityWave,
        Case::HillFlow2d,
        Case::HillFlow3d,
        Case::ConvergenceTemporal,
        Case::ConvergenceSpatial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::UniformRest => "uniform_rest",
            Case::Hydrostatic => "hydrostatic",
            Case::GravityWave => "gravity_wave",
            Case::HillFlow2d => "hill_flow_2d",
            Case::HillFlow3d => "hill_flow_3d",
            Case::ConvergenceTemporal => "convergence_temporal",
            Case::ConvergenceSpatial => "convergence_spatial",
        }
    }

    pub fn dim(self) -> usize {
        if self == Case::HillFlow3d {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Case::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Case::ALL.iter().map(|c| c.name()).collect();
                anyhow!("unknown case '{s}', expected one of {}", names.join(", "))
            })
    }
}

pub fn parse_preconditioner(s: &str) -> Result<PreconditionerKind> {
    match s {
        "internal-energy" | "internal_energy" => Ok(PreconditionerKind::InternalEnergy),
        "helmholtz" => Ok(PreconditionerKind::Helmholtz),
        "jacobi" | "jacobi_identity" => Ok(PreconditionerKind::JacobiIdentity),
        _ => bail!("unknown preconditioner '{s}', expected internal-energy, helmholtz or jacobi"),
    }
}

pub fn parse_mass_inverse(s: &str) -> Result<IntegrationMode> {
    match s {
        "consistent" => Ok(IntegrationMode::Consistent),
        "fast" | "collocated" => Ok(IntegrationMode::Collocated),
        _ => bail!("unknown mass inverse '{s}', expected consistent or fast"),
    }
}

pub fn mass_inverse_name(m: IntegrationMode) -> &'static str {
    match m {
        IntegrationMode::Consistent => "consistent",
        IntegrationMode::Collocated => "fast",
    }
}

/// Parameters of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub degree: usize,
    pub cells: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    pub preconditioner: PreconditionerKind,
    pub mass_inverse: IntegrationMode,
    pub tableau: String,
    pub threads: usize,
    pub deterministic: bool,
    pub output_dir: Option<std::path::PathBuf>,
    pub seed: u64,
    pub verbose_solver: bool,
    pub fixed_point: FixedPointConfig,
}

impl RunConfig {
    /// Defaults sized for a desktop machine.
    pub fn for_case(case: Case) -> Self {
        let (degree, cells, dt, t_final) = match case {
            Case::UniformRest => (2, vec![4, 4], 10.0, 100.0),
            Case::Hydrostatic => (2, vec![2, 8], 2.0, 20.0),
            Case::GravityWave => (3, vec![10, 4], 2.0, 200.0),
            Case::HillFlow2d => (3, vec![30, 8], 4.0, 120.0),
            Case::HillFlow3d => (3, vec![30, 20, 8], 4.0, 40.0),
            Case::ConvergenceTemporal => (3, vec![8, 8], 1.0, 32.0),
            Case::ConvergenceSpatial => (2, vec![4, 4], 1.0, 20.0),
        };
        Self {
            case,
            degree,
            cells,
            dt,
            t_final,
            preconditioner: PreconditionerKind::Helmholtz,
            mass_inverse: IntegrationMode::Collocated,
            tableau: "ars222".into(),
            threads: 1,
            deterministic: true,
            output_dir: None,
            seed: 0,
            verbose_solver: false,
            fixed_point: FixedPointConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            bail!("need t_final >= dt > 0, got dt={} t_final={}", self.dt, self.t_final);
        }
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        if self.cells.len() != self.case.dim() || self.cells.iter().any(|&c| c == 0) {
            bail!(
                "case {} needs {} positive cell counts, got {:?}",
                self.case,
                self.case.dim(),
                self.cells
            );
        }
        self.fixed_point.validate()?;
        if self.degree == 0 {
            bail!("degree must be at least 1");
        }
        Ok(())
    }

    /// Number of whole steps; the last step is shortened so that the run
    /// ends at `t_final` exactly.
    pub fn steps(&self) -> Vec<f64> {
        let n = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        let mut out = vec![self.dt; n];
        let last = self.t_final - self.dt * (n - 1) as f64;
        out[n - 1] = last;
        out
    }
}

/// Stratified background atmosphere with constant buoyancy frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundState {
    pub p_ref: f64,
    pub t_ref: f64,
    pub n_freq: f64,
    pub u_bar: f64,
    pub gas: GasConstants,
}

impl Default for BackgroundState {
    fn default() -> Self {
        Self {
            p_ref: 1e5,
            t_ref: 293.15,
            n_freq: 0.01,
            u_bar: 10.0,
            gas: GasConstants::default(),
        }
    }
}

impl BackgroundState {
    pub fn rho_ref(&self) -> f64 {
        self.p_ref / (self.gas.r_dry * self.t_ref)
    }

    /// `(p, rho)` at height `z`. The bracket carries `g^2 / N^2`, the form
    /// in exact hydrostatic balance `dp/dz = -rho g`.
    pub fn profile(&self, z: f64) -> Result<(f64, f64)> {
        let g = self.gas.g;
        let n2 = self.n_freq * self.n_freq;
        let big_gamma = self.gas.big_gamma();
        let decay = (-n2 * z / g).exp();
        let bracket = 1.0 - g * g / n2 * big_gamma * self.rho_ref() / self.p_ref * (1.0 - decay);
        if !(bracket > 0.0) || !decay.is_finite() {
            bail!("background profile is undefined at z = {z} m");
        }
        let p = self.p_ref * bracket.powf(1.0 / big_gamma);
        let rho = self.rho_ref() * (p / self.p_ref).powf(1.0 / self.gas.gamma) * decay;
        if !(p > 0.0 && rho > 0.0 && p.is_finite() && rho.is_finite()) {
            bail!("background profile under- or overflows at z = {z} m");
        }
        Ok((p, rho))
    }
}

struct Geometry {
    extents: Vec<f64>,
    tags: Vec<BoundaryTag>,
    mapping: Mapping,
    gravity: bool,
}

fn bell_hill() -> HillParams {
    HillParams {
        h_c: 400.0,
        a_c: 1000.0,
        x_c: 30_000.0,
        y_c: 20_000.0,
    }
}

fn geometry(case: Case) -> Geometry {
    use BoundaryTag::{Periodic, SlipWall};
    match case {
        Case::UniformRest => Geometry {
            extents: vec![10_000.0, 10_000.0],
            tags: vec![Periodic, SlipWall],
            mapping: Mapping::Identity,
            gravity: false,
        },
        Case::Hydrostatic => Geometry {
            extents: vec![4_000.0, 16_000.0],
            tags: vec![Periodic, SlipWall],
            mapping: Mapping::Identity,
            gravity: true,
        },
        Case::GravityWave => Geometry {
            extents: vec![30_000.0, 10_000.0],
            tags: vec![Periodic, SlipWall],
            mapping: Mapping::Identity,
            gravity: true,
        },
        Case::HillFlow2d => Geometry {
            extents: vec![60_000.0, 16_000.0],
            tags: vec![Periodic, SlipWall],
            mapping: Mapping::TerrainFollowing(bell_hill()),
            gravity: true,
        },
        Case::HillFlow3d => Geometry {
            extents: vec![60_000.0, 40_000.0, 16_000.0],
            tags: vec![Periodic, Periodic, SlipWall],
            mapping: Mapping::TerrainFollowing(bell_hill()),
            gravity: true,
        },
        Case::ConvergenceTemporal => Geometry {
            extents: vec![10_000.0, 10_000.0],
            tags: vec![Periodic, Periodic],
            mapping: Mapping::Identity,
            gravity: false,
        },
        Case::ConvergenceSpatial => Geometry {
            extents: vec![10_000.0, 10_000.0],
            tags: vec![Periodic, Periodic],
            mapping: Mapping::Identity,
            gravity: false,
        },
    }
}

/// Builds the discretization for a run.
pub fn build_discretization(cfg: &RunConfig) -> Result<Discretization> {
    cfg.validate()?;
    let g = geometry(cfg.case);
    let mesh = build_mesh(cfg.case.dim(), &g.extents, &cfg.cells, g.mapping, &g.tags, cfg.degree)?;
    let mut disc = Discretization::new(mesh, GasConstants::default(), g.gravity)?;
    disc.reduction.deterministic = cfg.deterministic;
    Ok(disc)
}

/// Smooth localized bump used by the perturbed cases.
fn bump(x: &[f64], centre: &[f64], radius: f64) -> f64 {
    let r2: f64 = x.iter().zip(centre).map(|(a, b)| (a - b).powi(2)).sum();
    (-r2 / (radius * radius)).exp()
}

/// Smooth periodic bump with unit peak.
fn periodic_bump(x: &[f64], centre: &[f64], ext: &[f64]) -> f64 {
    let s: f64 = x
        .iter()
        .zip(centre)
        .zip(ext)
        .map(|((a, b), l)| 1.0 - (2.0 * std::f64::consts::PI * (a - b) / l).cos())
        .sum();
    (-s).exp()
}

/// Exact solution of the density-advection case at time `t`.
pub fn advected_density(x: &[f64], t: f64) -> f64 {
    let (u, w) = advection_velocity();
    let lx = 10_000.0;
    let k = 2.0 * std::f64::consts::PI / lx;
    let xs = x[0] - u * t;
    let zs = x[1] - w * t;
    1.0 + 0.2 * (k * xs).sin() * (k * zs).cos()
}

pub fn advection_velocity() -> (f64, f64) {
    (20.0, -10.0)
}

/// Nodal initial state for a case. `seed` moves the perturbation of the
/// perturbed cases.
pub fn initial_state(cfg: &RunConfig, disc: &Discretization, bg: &BackgroundState) -> Result<StateField> {
    let dim = disc.dim();
    let nd = disc.n_dofs();
    let n = disc.scalar_len();
    let coords = &disc.mesh.node_coords;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ext = &disc.mesh.extents;
    let mut density = vec![0.0; n];
    let mut pressure = vec![0.0; n];
    let mut velocity = vec![0.0; n * dim];
    let (centre, radius, amp) = match cfg.case {
        Case::GravityWave => {
            let cx = ext[0] * rng.gen_range(0.35..0.65);
            let cz = ext[dim - 1] * rng.gen_range(0.35..0.55);
            (vec![cx, cz], ext[dim - 1] * 0.15, 0.01 * rng.gen_range(0.8..1.2))
        }
        Case::ConvergenceTemporal => {
            let cx = ext[0] * rng.gen_range(0.3..0.7);
            let cz = ext[dim - 1] * rng.gen_range(0.3..0.7);
            (vec![cx, cz], 1.0, 0.01)
        }
        _ => (vec![0.0; dim], 1.0, 0.0),
    };
    let u_bar = match cfg.case {
        Case::GravityWave | Case::HillFlow2d | Case::HillFlow3d => bg.u_bar,
        _ => 0.0,
    };
    for k in 0..n {
        let x = &coords[k * dim..(k + 1) * dim];
        let z = x[dim - 1];
        let cell = k / nd;
        let node = k % nd;
        let (p, rho, u) = match cfg.case {
            Case::UniformRest => (1e5, 1.2, [0.0; 3]),
            Case::ConvergenceSpatial => {
                let (u, w) = advection_velocity();
                (1e5, advected_density(x, 0.0), [u, w, 0.0])
            }
            // acoustic and entropy pulse in a uniform oblique flow; the flow
            // keeps u.n away from zero so the upwind flux stays smooth
            Case::ConvergenceTemporal => {
                let b = periodic_bump(x, &centre, ext);
                let (u, w) = advection_velocity();
                (1e5 * (1.0 + amp * b), 1.2 * (1.0 + 0.5 * amp * b), [u, w, 0.0])
            }
            _ => {
                let (p, rho) = bg.profile(z)?;
                // density perturbation at fixed pressure (buoyant bubble)
                let rho = rho * (1.0 - amp * bump(x, &centre, radius));
                (p, rho, [u_bar, 0.0, 0.0])
            }
        };
        density[k] = rho;
        pressure[k] = p;
        for a in 0..dim {
            velocity[(cell * dim + a) * nd + node] = u[a];
        }
    }
    Ok(StateField::from_primitive(dim, nd, density, &velocity, pressure, &disc.gas)?)
}

/// Acoustic Courant number `max(|u| + c) dt r / h_min` on node spacing.
pub fn acoustic_cfl(disc: &Discretization, state: &StateField, dt: f64) -> f64 {
    let c = state
        .density
        .iter()
        .zip(&state.pressure)
        .map(|(&r, &p)| disc.gas.sound_speed(p, r))
        .fold(0.0, f64::max);
    let u = state.max_velocity();
    (u + c) * dt * disc.mesh.degree as f64 / disc.mesh.min_cell_width()
}

/// Advective Courant number `max|u| dt r / h_min`.
pub fn advective_cfl(disc: &Discretization, state: &StateField, dt: f64) -> f64 {
    state.max_velocity() * dt * disc.mesh.degree as f64 / disc.mesh.min_cell_width()
}
