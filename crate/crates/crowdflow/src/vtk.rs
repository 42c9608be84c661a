//! Legacy ASCII VTK output for 2D stationary fields.
//!
//! Every triangle gets its own three points, so the discontinuous density
//! is written faithfully: the scalar `rho` lives on the duplicated points,
//! the vector `velocity` on the cells.

use crate::dg::DgFunction;
use crate::numfmt::g15;
use crate::velocity::VelocityField;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("VTK output needs a triangle mesh, got a {0}-dimensional one")]
    NeedsTriangles(usize),
    #[error("velocity field carries {got} cell values but the mesh has {want} cells")]
    VelocityMismatch { got: usize, want: usize },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Renders the density and velocity as a legacy VTK unstructured grid.
pub fn vtk_string(rho: &DgFunction, velocity: &VelocityField) -> Result<String, VtkError> {
    let mesh = rho.mesh();
    if mesh.dim != 2 {
        return Err(VtkError::NeedsTriangles(mesh.dim));
    }
    if velocity.cell_velocity.len() != mesh.n_cells() {
        return Err(VtkError::VelocityMismatch {
            got: velocity.cell_velocity.len(),
            want: mesh.n_cells(),
        });
    }
    let nc = mesh.n_cells();
    let np = 3 * nc;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("stationary crowd density\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {np} double");
    for c in 0..nc {
        for &v in mesh.cell_vertices(c) {
            let p = mesh.vertices[v];
            let _ = writeln!(s, "{} {} 0", g15(p[0]), g15(p[1]));
        }
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in 0..nc {
        let _ = writeln!(s, "3 {} {} {}", 3 * c, 3 * c + 1, 3 * c + 2);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {np}");
    s.push_str("SCALARS rho double 1\n");
    s.push_str("LOOKUP_TABLE default\n");
    for v in &rho.values {
        s.push_str(&g15(*v));
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    s.push_str("VECTORS velocity double\n");
    for u in &velocity.cell_velocity {
        let _ = writeln!(s, "{} {} 0", g15(u[0]), g15(u[1]));
    }
    Ok(s)
}

/// Writes the VTK rendering of `rho` and `velocity` to `path`.
pub fn write_vtk(
    path: &Path,
    rho: &DgFunction,
    velocity: &VelocityField,
) -> Result<(), VtkError> {
    let text = vtk_string(rho, velocity)?;
    std::fs::write(path, text).map_err(|source| VtkError::Io {
        path: path.display().to_string(),
        source,
    })
}
