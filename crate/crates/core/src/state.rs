//! Conserved-variable storage and the ideal-gas equation of state.

use crate::error::{Error, Result};

/// Thermodynamic constants. `Gamma = (gamma - 1) / gamma` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants {
    pub gamma: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Specific gas constant of dry air (J/(kg K)).
    pub r_dry: f64,
}

impl Default for GasConstants {
    fn default() -> Self {
        Self {
            gamma: 1.4,
            g: 9.81,
            r_dry: 287.05,
        }
    }
}

impl GasConstants {
    pub fn big_gamma(&self) -> f64 {
        (self.gamma - 1.0) / self.gamma
    }

    /// `rho h / p = gamma / (gamma - 1)` for an ideal gas.
    pub fn enthalpy_factor(&self) -> f64 {
        self.gamma / (self.gamma - 1.0)
    }

    pub fn sound_speed(&self, p: f64, rho: f64) -> f64 {
        (self.gamma * p / rho).sqrt()
    }
}

/// Specific internal energy `e = p / ((gamma - 1) rho)` (J/kg).
pub fn eos_internal_energy(p: f64, rho: f64, gas: &GasConstants) -> Result<f64> {
    if !(p > 0.0) || !(rho > 0.0) {
        return Err(Error::StateInvalid(format!(
            "internal energy needs p > 0 and rho > 0, got p={p:e} rho={rho:e}"
        )));
    }
    Ok(p / ((gas.gamma - 1.0) * rho))
}

/// Pressure from conserved variables `p = (gamma - 1)(rho E - |rho u|^2 / (2 rho))`.
pub fn pressure_from_state(rho: f64, momentum: &[f64], energy: f64, gas: &GasConstants) -> f64 {
    let m2: f64 = momentum.iter().map(|m| m * m).sum();
    (gas.gamma - 1.0) * (energy - 0.5 * m2 / rho)
}

/// Which quadrature integrates the density-weighted velocity mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegrationMode {
    /// `2r + 1` Gauss-Legendre points per direction (no aliasing).
    Consistent,
    /// `r + 1` Gauss-Legendre points per direction (fast tensor inverse).
    Collocated,
}

/// Nodal values of `(rho, rho u, rho E)` plus the derived pressure.
///
/// Scalars are cell-major with `n_dofs` lexicographic nodes per cell;
/// momentum stores `dim` component blocks per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub dim: usize,
    pub n_cells: usize,
    pub n_dofs: usize,
    pub density: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl StateField {
    /// Builds the conserved state from nodal density, velocity and pressure.
    pub fn from_primitive(
        dim: usize,
        n_dofs: usize,
        density: Vec<f64>,
        velocity: &[f64],
        pressure: Vec<f64>,
        gas: &GasConstants,
    ) -> Result<Self> {
        let n = density.len();
        if n % n_dofs != 0 || pressure.len() != n || velocity.len() != n * dim {
            return Err(Error::InvalidArgument("inconsistent field sizes".into()));
        }
        let n_cells = n / n_dofs;
        let mut momentum = vec![0.0; n * dim];
        let mut energy = vec![0.0; n];
        for c in 0..n_cells {
            for i in 0..n_dofs {
                let k = c * n_dofs + i;
                let mut ke = 0.0;
                for a in 0..dim {
                    let v = velocity[(c * dim + a) * n_dofs + i];
                    momentum[(c * dim + a) * n_dofs + i] = density[k] * v;
                    ke += v * v;
                }
                energy[k] = pressure[k] / (gas.gamma - 1.0) + 0.5 * density[k] * ke;
            }
        }
        let state = Self {
            dim,
            n_cells,
            n_dofs,
            density,
            momentum,
            energy,
            pressure,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Nodal velocity `u = (rho u) / rho`, same layout as `momentum`.
    pub fn velocity(&self) -> Vec<f64> {
        let mut u = self.momentum.clone();
        for c in 0..self.n_cells {
            for a in 0..self.dim {
                for i in 0..self.n_dofs {
                    u[(c * self.dim + a) * self.n_dofs + i] /= self.density[c * self.n_dofs + i];
                }
            }
        }
        u
    }

    /// Recomputes nodal pressure from the conserved variables.
    pub fn refresh_pressure(&mut self, gas: &GasConstants) {
        let mut m = vec![0.0; self.dim];
        for c in 0..self.n_cells {
            for i in 0..self.n_dofs {
                for (a, ma) in m.iter_mut().enumerate() {
                    *ma = self.momentum[(c * self.dim + a) * self.n_dofs + i];
                }
                let k = c * self.n_dofs + i;
                self.pressure[k] = pressure_from_state(self.density[k], &m, self.energy[k], gas);
            }
        }
    }

    /// Checks `rho > 0` and `p > 0` at every node.
    pub fn validate(&self) -> Result<()> {
        for (k, (&r, &p)) in self.density.iter().zip(&self.pressure).enumerate() {
            if !(r > 0.0) || !(p > 0.0) {
                return Err(Error::StateInvalid(format!(
                    "non-positive state at cell {} node {}: rho={r:e} p={p:e}",
                    k / self.n_dofs,
                    k % self.n_dofs
                )));
            }
        }
        Ok(())
    }

    /// Largest nodal speed `|u|`.
    pub fn max_velocity(&self) -> f64 {
        let u = self.velocity();
        let mut best: f64 = 0.0;
        for c in 0..self.n_cells {
            for i in 0..self.n_dofs {
                let s: f64 = (0..self.dim)
                    .map(|a| u[(c * self.dim + a) * self.n_dofs + i].powi(2))
                    .sum();
                best = best.max(s.sqrt());
            }
        }
        best
    }

    /// Order-sensitive FNV-1a hash of the raw bits of every field.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self
            .density
            .iter()
            .chain(&self.momentum)
            .chain(&self.energy)
            .chain(&self.pressure)
        {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}
