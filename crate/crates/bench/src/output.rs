//! Field snapshots: legacy ASCII VTK and flat binary dumps with a JSON sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use imexdg_core::operators::Discretization;
use imexdg_core::state::StateField;

/// Writes the nodal fields on a sub-cell tessellation of every element.
pub fn write_vtk(path: &Path, disc: &Discretization, s: &StateField) -> Result<()> {
    let d = disc.dim();
    let nd = disc.n_dofs();
    let n = disc.scalar_len();
    let r = disc.mesh.degree;
    let r1 = r + 1;
    let coords = &disc.mesh.node_coords;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nimexdg snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for k in 0..n {
        let x = &coords[k * d..(k + 1) * d];
        let z = if d == 3 { x[2] } else { 0.0 };
        let _ = writeln!(out, "{:e} {:e} {:e}", x[0], x[1], z);
    }
    let sub = r.pow(d as u32);
    let corners = 1usize << d;
    let n_sub = disc.n_cells() * sub;
    let _ = writeln!(out, "CELLS {n_sub} {}", n_sub * (corners + 1));
    let idx = |i: usize, j: usize, k: usize| i + r1 * (j + r1 * k);
    for c in 0..disc.n_cells() {
        let base = c * nd;
        let kmax = if d == 3 { r } else { 1 };
        for k in 0..kmax {
            for j in 0..r {
                for i in 0..r {
                    let mut v = vec![
                        idx(i, j, k),
                        idx(i + 1, j, k),
                        idx(i + 1, j + 1, k),
                        idx(i, j + 1, k),
                    ];
                    if d == 3 {
                        v.extend([idx(i, j, k + 1), idx(i + 1, j, k + 1), idx(i + 1, j + 1, k + 1), idx(i, j + 1, k + 1)]);
                    }
                    let _ = write!(out, "{corners}");
                    for p in v {
                        let _ = write!(out, " {}", base + p);
                    }
                    out.push('\n');
                }
            }
        }
    }
    let _ = writeln!(out, "CELL_TYPES {n_sub}");
    let ty = if d == 3 { 12 } else { 9 };
    for _ in 0..n_sub {
        let _ = writeln!(out, "{ty}");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, f) in [("density", &s.density), ("pressure", &s.pressure), ("energy", &s.energy)] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.iter() {
            let _ = writeln!(out, "{v:e}");
        }
    }
    let vel = s.velocity();
    let _ = writeln!(out, "VECTORS velocity double");
    for k in 0..n {
        let (c, i) = (k / nd, k % nd);
        let mut u = [0.0; 3];
        for (a, ua) in u.iter_mut().enumerate().take(d) {
            *ua = vel[(c * d + a) * nd + i];
        }
        let _ = writeln!(out, "{:e} {:e} {:e}", u[0], u[1], u[2]);
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Sidecar describing a binary dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub dim: usize,
    pub n_cells: usize,
    pub n_dofs: usize,
    /// Field names in file order; each is little-endian f64.
    pub fields: Vec<DumpField>,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpField {
    pub name: String,
    pub len: usize,
}

fn dump_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `stem.bin` and `stem.json`.
pub fn write_dump(stem: &Path, s: &StateField) -> Result<()> {
    let (bin, json) = dump_paths(stem);
    let fields: [(&str, &Vec<f64>); 4] = [
        ("density", &s.density),
        ("momentum", &s.momentum),
        ("energy", &s.energy),
        ("pressure", &s.pressure),
    ];
    let mut bytes = Vec::with_capacity(8 * fields.iter().map(|f| f.1.len()).sum::<usize>());
    for (_, f) in &fields {
        for v in f.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = DumpHeader {
        dim: s.dim,
        n_cells: s.n_cells,
        n_dofs: s.n_dofs,
        fields: fields
            .iter()
            .map(|(n, f)| DumpField {
                name: (*n).into(),
                len: f.len(),
            })
            .collect(),
        checksum: format!("{:016x}", s.checksum()),
    };
    std::fs::write(&bin, bytes).with_context(|| format!("writing {}", bin.display()))?;
    std::fs::write(&json, serde_json::to_string_pretty(&header)? + "\n")
        .with_context(|| format!("writing {}", json.display()))?;
    Ok(())
}

/// Reads a dump written by [`write_dump`] and checks its checksum.
pub fn read_dump(stem: &Path) -> Result<StateField> {
    let (bin, json) = dump_paths(stem);
    let header: DumpHeader = serde_json::from_str(&std::fs::read_to_string(&json)?)?;
    let bytes = std::fs::read(&bin).with_context(|| format!("reading {}", bin.display()))?;
    let total: usize = header.fields.iter().map(|f| f.len).sum();
    if bytes.len() != 8 * total {
        bail!("{} holds {} bytes, sidecar announces {}", bin.display(), bytes.len(), 8 * total);
    }
    let mut vals = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |name: &str| -> Result<Vec<f64>> {
        let f = header
            .fields
            .iter()
            .find(|f| f.name == name)
            .with_context(|| format!("dump lacks field {name}"))?;
        Ok(vals.by_ref().take(f.len).collect())
    };
    let s = StateField {
        dim: header.dim,
        n_cells: header.n_cells,
        n_dofs: header.n_dofs,
        density: take("density")?,
        momentum: take("momentum")?,
        energy: take("energy")?,
        pressure: take("pressure")?,
    };
    let sum = format!("{:016x}", s.checksum());
    if sum != header.checksum {
        bail!("checksum mismatch in {}: {} vs {}", bin.display(), sum, header.checksum);
    }
    Ok(s)
}
