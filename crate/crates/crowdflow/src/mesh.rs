//! Interval and corridor meshes with tagged boundary faces.
//!
//! A mesh is a list of vertices, cells (segments in 1D, triangles in 2D), and
//! derived faces. Every boundary face carries a tag name ("inflow", "wall",
//! door names, ...); solver-side boundary conditions are bound to tags by
//! name, so the mesh itself stores no rates.
//!
//! Face orientation is deterministic: faces are discovered by walking cells
//! in index order, the first adjacent cell becomes side one, and the stored
//! unit normal points from side one to side two (outward on the boundary).

use thiserror::Error;

/// Tag used for impermeable boundary faces.
pub const WALL_TAG: &str = "wall";

/// Length of the corridor domain `[0, CORRIDOR_LENGTH] x [0, 1]`.
pub const CORRIDOR_LENGTH: f64 = 2.0;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh must contain at least one cell")]
    Empty,
    #[error("cell {cell} references vertex {vertex} but there are only {n_vertices} vertices")]
    VertexOutOfRange { cell: usize, vertex: usize, n_vertices: usize },
    #[error("cell {cell} is degenerate (measure {measure:.3e})")]
    DegenerateCell { cell: usize, measure: f64 },
    #[error("face between vertices {v0} and {v1} is shared by more than two cells")]
    NonManifold { v0: usize, v1: usize },
    #[error("boundary face between vertices {v0} and {v1} carries no tag")]
    UntaggedBoundary { v0: usize, v1: usize },
    #[error("door span [{lo}, {hi}] is invalid: {reason}")]
    BadDoor { lo: f64, hi: f64, reason: String },
    #[error("obstacle disk (center ({cx}, {cy}), radius {r}) {reason}")]
    BadObstacle { cx: f64, cy: f64, r: f64, reason: String },
    #[error("mesh interior is disconnected ({reachable} of {total} cells reachable)")]
    Disconnected { reachable: usize, total: usize },
    #[error("grid resolution {nx}x{ny} is invalid: {reason}")]
    BadResolution { nx: usize, ny: usize, reason: String },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A mesh face: a vertex in 1D, an edge in 2D.
#[derive(Debug, Clone)]
pub struct Face {
    /// Global vertex ids; in 1D the second entry is `usize::MAX`.
    pub vertices: [usize; 2],
    /// Adjacent cells; boundary faces have `usize::MAX` as second entry.
    pub cells: [usize; 2],
    /// Unit normal pointing from `cells[0]` toward `cells[1]` (outward on the
    /// boundary).
    pub normal: [f64; 2],
    /// Face measure: 1 in 1D, edge length in 2D.
    pub measure: f64,
    /// Local length scale: mean of the adjacent cell diameters.
    pub h: f64,
    /// Index into [`Mesh::tags`] for boundary faces, `None` for interior.
    pub tag: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells[1] == usize::MAX
    }
}

/// Geometry requests understood by [`build`].
#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    /// Uniform subdivision of `[0, 1]` into `cells` segments, boundary tags
    /// "inflow" at 0 and "outflow" at 1.
    Interval { cells: usize },
    /// Structured triangulation of the corridor with doors on the short ends.
    Corridor { nx: usize, ny: usize, doors: DoorLayout },
    /// Corridor with a circular obstacle removed.
    CorridorWithObstacle { nx: usize, ny: usize, doors: DoorLayout, center: [f64; 2], radius: f64 },
}

/// A door: a span of the left or right corridor end, with its tag name.
#[derive(Debug, Clone, PartialEq)]
pub struct Door {
    /// Lower end of the span in `y`.
    pub lo: f64,
    /// Upper end of the span in `y`.
    pub hi: f64,
    pub tag: String,
}

/// Door placement on the corridor: inflow doors sit on the left end
/// (`x = 0`), outflow doors on the right end (`x = CORRIDOR_LENGTH`).
#[derive(Debug, Clone, PartialEq)]
pub struct DoorLayout {
    pub inflow: Vec<Door>,
    pub outflow: Vec<Door>,
}

impl DoorLayout {
    /// Two doors per end: spans `(0.15, 0.35)` and `(0.65, 0.85)`.
    pub fn standard() -> Self {
        DoorLayout {
            inflow: vec![
                Door { lo: 0.15, hi: 0.35, tag: "inflow_lower".to_string() },
                Door { lo: 0.65, hi: 0.85, tag: "inflow_upper".to_string() },
            ],
            outflow: vec![
                Door { lo: 0.15, hi: 0.35, tag: "outflow_lower".to_string() },
                Door { lo: 0.65, hi: 0.85, tag: "outflow_upper".to_string() },
            ],
        }
    }
}

/// Conforming simplicial mesh in one or two dimensions.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    /// Vertex coordinates; the second component is zero in 1D.
    pub vertices: Vec<[f64; 2]>,
    /// Cell connectivity; the third entry is `usize::MAX` in 1D.
    cells: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// Cell measures: lengths in 1D, areas in 2D.
    pub cell_measures: Vec<f64>,
    /// Cell diameters (longest edge).
    pub cell_diameters: Vec<f64>,
    /// Boundary tag names; faces refer to these by index.
    pub tags: Vec<String>,
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Degrees of freedom per cell for piecewise-linear fields.
    pub fn dofs_per_cell(&self) -> usize {
        self.dim + 1
    }

    /// Vertex ids of cell `c` (two in 1D, three in 2D).
    pub fn cell_vertices(&self, c: usize) -> &[usize] {
        let row = &self.cells[c];
        &row[..self.dim + 1]
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 2] {
        let vs = self.cell_vertices(c);
        let mut x = 0.0;
        let mut y = 0.0;
        for &v in vs {
            x += self.vertices[v][0];
            y += self.vertices[v][1];
        }
        let k = vs.len() as f64;
        [x / k, y / k]
    }

    pub fn tag_index(&self, name: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == name)
    }

    /// Total measure of boundary faces carrying the given tag.
    pub fn boundary_measure(&self, tag: &str) -> f64 {
        match self.tag_index(tag) {
            None => 0.0,
            Some(ti) => self
                .faces
                .iter()
                .filter(|f| f.tag == Some(ti))
                .map(|f| f.measure)
                .sum(),
        }
    }

    /// Barycentric gradients of the vertex basis functions of cell `c`.
    ///
    /// In 1D the second component is zero; in 2D these are the usual
    /// piecewise-linear hat gradients.
    pub fn basis_gradients(&self, c: usize) -> [[f64; 2]; 3] {
        let vs = self.cell_vertices(c);
        if self.dim == 1 {
            let x0 = self.vertices[vs[0]][0];
            let x1 = self.vertices[vs[1]][0];
            let h = x1 - x0;
            [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]]
        } else {
            let p = [self.vertices[vs[0]], self.vertices[vs[1]], self.vertices[vs[2]]];
            let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let a = p[(i + 1) % 3];
                let b = p[(i + 2) % 3];
                g[i] = [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a];
            }
            g
        }
    }

    /// True when every cell can be reached from cell 0 through interior faces.
    pub fn interior_connected(&self) -> bool {
        self.n_cells() > 0 && self.reachable_cells() == self.n_cells()
    }

    /// Number of cells reachable from cell 0 through interior faces.
    fn reachable_cells(&self) -> usize {
        let n = self.n_cells();
        if n == 0 {
            return 0;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for f in &self.faces {
            if !f.is_boundary() {
                adj[f.cells[0]].push(f.cells[1]);
                adj[f.cells[1]].push(f.cells[0]);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = stack.pop() {
            for &d in &adj[c] {
                if !seen[d] {
                    seen[d] = true;
                    count += 1;
                    stack.push(d);
                }
            }
        }
        count
    }

    /// Assembles a mesh from vertices, cells, and a tag for each boundary
    /// face, keyed by its (sorted) vertex ids.
    ///
    /// Faces are derived from the cells; every derived boundary face must
    /// appear in `boundary_tags`.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary_tags: &[( [usize; 2], String )],
    ) -> Result<Mesh, MeshError> {
        let mut mesh = assemble(dim, vertices, cells)?;
        let mut lookup: std::collections::HashMap<[usize; 2], &String> =
            std::collections::HashMap::new();
        for (key, tag) in boundary_tags {
            lookup.insert(sorted_pair(*key), tag);
        }
        let mut names: Vec<String> = Vec::new();
        let mut face_tags: Vec<Option<usize>> = vec![None; mesh.faces.len()];
        for (fi, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() {
                let key = if dim == 1 {
                    [face.vertices[0], face.vertices[0]]
                } else {
                    sorted_pair(face.vertices)
                };
                match lookup.get(&key) {
                    Some(tag) => {
                        let ti = match names.iter().position(|n| n == *tag) {
                            Some(i) => i,
                            None => {
                                names.push((*tag).clone());
                                names.len() - 1
                            }
                        };
                        face_tags[fi] = Some(ti);
                    }
                    None => {
                        return Err(MeshError::UntaggedBoundary {
                            v0: face.vertices[0],
                            v1: if dim == 1 { face.vertices[0] } else { face.vertices[1] },
                        });
                    }
                }
            }
        }
        for (face, tag) in mesh.faces.iter_mut().zip(face_tags) {
            face.tag = tag;
        }
        mesh.tags = names;
        Ok(mesh)
    }
}

fn sorted_pair(p: [usize; 2]) -> [usize; 2] {
    if p[0] <= p[1] { p } else { [p[1], p[0]] }
}

/// Derives faces, measures, and diameters; boundary faces are left untagged.
fn assemble(dim: usize, vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> Result<Mesh, MeshError> {
    if cells.is_empty() {
        return Err(MeshError::Empty);
    }
    for (ci, cell) in cells.iter().enumerate() {
        for &v in &cell[..dim + 1] {
            if v >= vertices.len() {
                return Err(MeshError::VertexOutOfRange {
                    cell: ci,
                    vertex: v,
                    n_vertices: vertices.len(),
                });
            }
        }
    }

    let mut cell_measures = Vec::with_capacity(cells.len());
    let mut cell_diameters = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        if dim == 1 {
            let h = vertices[cell[1]][0] - vertices[cell[0]][0];
            if h <= 0.0 || !h.is_finite() {
                return Err(MeshError::DegenerateCell { cell: ci, measure: h });
            }
            cell_measures.push(h);
            cell_diameters.push(h);
        } else {
            let p = [vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]];
            let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = 0.5 * two_a;
            if area <= 0.0 || !area.is_finite() {
                return Err(MeshError::DegenerateCell { cell: ci, measure: area });
            }
            cell_measures.push(area);
            let d = edge_len(p[0], p[1]).max(edge_len(p[1], p[2])).max(edge_len(p[2], p[0]));
            cell_diameters.push(d);
        }
    }

    // Faces in first-encounter order: cells by index, local faces in a fixed
    // local order, so the numbering is reproducible.
    let mut face_of: std::collections::HashMap<[usize; 2], usize> = std::collections::HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let local_faces: Vec<[usize; 2]> = if dim == 1 {
            vec![[cell[0], cell[0]], [cell[1], cell[1]]]
        } else {
            vec![
                [cell[0], cell[1]],
                [cell[1], cell[2]],
                [cell[2], cell[0]],
            ]
        };
        for lf in local_faces {
            let key = sorted_pair(lf);
            match face_of.get(&key) {
                None => {
                    face_of.insert(key, faces.len());
                    faces.push(Face {
                        vertices: if dim == 1 { [lf[0], usize::MAX] } else { lf },
                        cells: [ci, usize::MAX],
                        normal: [0.0, 0.0],
                        measure: 0.0,
                        h: 0.0,
                        tag: None,
                    });
                }
                Some(&fi) => {
                    if faces[fi].cells[1] != usize::MAX {
                        return Err(MeshError::NonManifold { v0: key[0], v1: key[1] });
                    }
                    faces[fi].cells[1] = ci;
                }
            }
        }
    }

    let centroid = |cell: &[usize; 3]| -> [f64; 2] {
        let k = dim + 1;
        let mut x = 0.0;
        let mut y = 0.0;
        for &v in &cell[..k] {
            x += vertices[v][0];
            y += vertices[v][1];
        }
        [x / k as f64, y / k as f64]
    };

    for face in &mut faces {
        let c1 = face.cells[0];
        if dim == 1 {
            let xf = vertices[face.vertices[0]][0];
            let cen = centroid(&cells[c1]);
            face.normal = [if xf > cen[0] { 1.0 } else { -1.0 }, 0.0];
            face.measure = 1.0;
        } else {
            let p0 = vertices[face.vertices[0]];
            let p1 = vertices[face.vertices[1]];
            let len = edge_len(p0, p1);
            let mut n = [(p1[1] - p0[1]) / len, -(p1[0] - p0[0]) / len];
            let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
            let cen = centroid(&cells[c1]);
            if n[0] * (mid[0] - cen[0]) + n[1] * (mid[1] - cen[1]) < 0.0 {
                n = [-n[0], -n[1]];
            }
            face.normal = n;
            face.measure = len;
        }
        face.h = if face.is_boundary() {
            cell_diameters[c1]
        } else {
            0.5 * (cell_diameters[c1] + cell_diameters[face.cells[1]])
        };
    }

    Ok(Mesh {
        dim,
        vertices,
        cells,
        faces,
        cell_measures,
        cell_diameters,
        tags: Vec::new(),
    })
}

fn edge_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Builds the mesh requested by a [`GeometrySpec`].
pub fn build(spec: &GeometrySpec) -> Result<Mesh, MeshError> {
    match spec {
        GeometrySpec::Interval { cells } => build_interval_mesh(*cells),
        GeometrySpec::Corridor { nx, ny, doors } => build_corridor_mesh(*nx, *ny, doors),
        GeometrySpec::CorridorWithObstacle { nx, ny, doors, center, radius } => {
            build_obstacle_mesh(*nx, *ny, doors, *center, *radius)
        }
    }
}

/// Uniform interval mesh on `[0, 1]` with tags "inflow" (left) and
/// "outflow" (right).
pub fn build_interval_mesh(cells: usize) -> Result<Mesh, MeshError> {
    if cells == 0 {
        return Err(MeshError::BadResolution {
            nx: cells,
            ny: 0,
            reason: "need at least one cell".to_string(),
        });
    }
    let n = cells;
    let vertices: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
    let cells_v: Vec<[usize; 3]> = (0..n).map(|i| [i, i + 1, usize::MAX]).collect();
    let tags = vec![([0usize, 0usize], "inflow".to_string()), ([n, n], "outflow".to_string())];
    Mesh::from_parts(1, vertices, cells_v, &tags)
}

/// A door span snapped to grid rows: `(j_lo, j_hi, tag name)`.
type SnappedDoor = (usize, usize, String);

/// Snaps door spans to the `1/ny` grid and validates them.
fn snap_doors(doors: &[Door], ny: usize) -> Result<Vec<SnappedDoor>, MeshError> {
    let mut snapped: Vec<SnappedDoor> = Vec::new();
    for d in doors {
        if !(0.0..=1.0).contains(&d.lo) || !(0.0..=1.0).contains(&d.hi) || d.lo >= d.hi {
            return Err(MeshError::BadDoor {
                lo: d.lo,
                hi: d.hi,
                reason: "span must satisfy 0 <= lo < hi <= 1".to_string(),
            });
        }
        let jlo = (d.lo * ny as f64).round() as usize;
        let jhi = (d.hi * ny as f64).round() as usize;
        if jlo >= jhi {
            return Err(MeshError::BadDoor {
                lo: d.lo,
                hi: d.hi,
                reason: format!("span collapses on the 1/{ny} grid"),
            });
        }
        snapped.push((jlo, jhi, d.tag.clone()));
    }
    let mut spans: Vec<(usize, usize)> = snapped.iter().map(|s| (s.0, s.1)).collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(MeshError::BadDoor {
                lo: w[1].0 as f64 / ny as f64,
                hi: w[1].1 as f64 / ny as f64,
                reason: "door spans overlap after snapping".to_string(),
            });
        }
    }
    Ok(snapped)
}

fn corridor_parts(nx: usize, ny: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([CORRIDOR_LENGTH * i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    (vertices, cells)
}

/// Tags the boundary faces of a corridor-shaped cell set.
///
/// Faces on `x = 0` inside an inflow door span get that door's tag, faces on
/// `x = CORRIDOR_LENGTH` inside an outflow span get that door's tag, and
/// every other boundary face (including obstacle faces) becomes a wall.
fn tag_corridor_boundary(
    vertices: &[[f64; 2]],
    cells: &[[usize; 3]],
    ny: usize,
    doors: &DoorLayout,
) -> Result<(Mesh, Vec<SnappedDoor>, Vec<SnappedDoor>), MeshError> {
    let inflow = snap_doors(&doors.inflow, ny)?;
    let outflow = snap_doors(&doors.outflow, ny)?;
    let mut mesh = assemble(2, vertices.to_vec(), cells.to_vec())?;

    let mut names: Vec<String> = Vec::new();
    let intern = |name: &str, names: &mut Vec<String>| -> usize {
        match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                names.push(name.to_string());
                names.len() - 1
            }
        }
    };

    let tol = 1e-9;
    let mut assignments: Vec<(usize, usize)> = Vec::new();
    for (fi, face) in mesh.faces.iter().enumerate() {
        if !face.is_boundary() {
            continue;
        }
        let p0 = mesh.vertices[face.vertices[0]];
        let p1 = mesh.vertices[face.vertices[1]];
        let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
        let mut tag_name: &str = WALL_TAG;
        if mid[0].abs() < tol {
            for (jlo, jhi, name) in &inflow {
                let lo = *jlo as f64 / ny as f64;
                let hi = *jhi as f64 / ny as f64;
                if mid[1] > lo + tol && mid[1] < hi - tol {
                    tag_name = name;
                    break;
                }
            }
        } else if (mid[0] - CORRIDOR_LENGTH).abs() < tol {
            for (jlo, jhi, name) in &outflow {
                let lo = *jlo as f64 / ny as f64;
                let hi = *jhi as f64 / ny as f64;
                if mid[1] > lo + tol && mid[1] < hi - tol {
                    tag_name = name;
                    break;
                }
            }
        }
        let ti = intern(tag_name, &mut names);
        assignments.push((fi, ti));
    }
    for (fi, ti) in assignments {
        mesh.faces[fi].tag = Some(ti);
    }
    mesh.tags = names;
    Ok((mesh, inflow, outflow))
}

/// Checks that each door's tagged measure matches its snapped span.
fn check_door_measures(
    mesh: &Mesh,
    ny: usize,
    spans: &[(usize, usize, String)],
) -> Result<(), MeshError> {
    for (jlo, jhi, name) in spans {
        let want = (*jhi - *jlo) as f64 / ny as f64;
        let got = mesh.boundary_measure(name);
        if (got - want).abs() > 1e-9 {
            return Err(MeshError::BadDoor {
                lo: *jlo as f64 / ny as f64,
                hi: *jhi as f64 / ny as f64,
                reason: format!(
                    "door '{name}' covers measure {got} instead of {want} (blocked or clipped)"
                ),
            });
        }
    }
    Ok(())
}

/// Structured corridor triangulation with tagged doors.
///
/// The corridor is `[0, 2] x [0, 1]`, split into `nx` by `ny` rectangles and
/// each rectangle into two triangles. Door spans snap to the `1/ny` grid.
pub fn build_corridor_mesh(nx: usize, ny: usize, doors: &DoorLayout) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadResolution {
            nx,
            ny,
            reason: "both directions need at least one cell".to_string(),
        });
    }
    let (vertices, cells) = corridor_parts(nx, ny);
    let (mesh, inflow, outflow) = tag_corridor_boundary(&vertices, &cells, ny, doors)?;
    check_door_measures(&mesh, ny, &inflow)?;
    check_door_measures(&mesh, ny, &outflow)?;
    Ok(mesh)
}

/// Corridor mesh with a circular obstacle removed.
///
/// Triangles whose centroid lies inside the disk are dropped; the newly
/// exposed faces become walls. The disk must stay strictly inside the
/// corridor, must not block any door, and must leave the interior connected.
pub fn build_obstacle_mesh(
    nx: usize,
    ny: usize,
    doors: &DoorLayout,
    center: [f64; 2],
    radius: f64,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadResolution {
            nx,
            ny,
            reason: "both directions need at least one cell".to_string(),
        });
    }
    let [cx, cy] = center;
    if radius <= 0.0 {
        return Err(MeshError::BadObstacle { cx, cy, r: radius, reason: "has non-positive radius".to_string() });
    }
    if cx - radius <= 0.0
        || cx + radius >= CORRIDOR_LENGTH
        || cy - radius <= 0.0
        || cy + radius >= 1.0
    {
        return Err(MeshError::BadObstacle {
            cx,
            cy,
            r: radius,
            reason: "must lie strictly inside the corridor".to_string(),
        });
    }

    let (vertices, cells) = corridor_parts(nx, ny);
    let kept: Vec<[usize; 3]> = cells
        .iter()
        .filter(|cell| {
            let x = (vertices[cell[0]][0] + vertices[cell[1]][0] + vertices[cell[2]][0]) / 3.0;
            let y = (vertices[cell[0]][1] + vertices[cell[1]][1] + vertices[cell[2]][1]) / 3.0;
            (x - cx).powi(2) + (y - cy).powi(2) > radius * radius
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(MeshError::Empty);
    }
    if kept.len() == cells.len() {
        return Err(MeshError::BadObstacle {
            cx,
            cy,
            r: radius,
            reason: "removes no cells at this resolution".to_string(),
        });
    }

    // Compact the vertex list to the vertices still referenced.
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut new_vertices: Vec<[f64; 2]> = Vec::new();
    let mut new_cells: Vec<[usize; 3]> = Vec::with_capacity(kept.len());
    for cell in &kept {
        let mut nc = [usize::MAX; 3];
        for (k, &v) in cell.iter().enumerate() {
            if remap[v] == usize::MAX {
                remap[v] = new_vertices.len();
                new_vertices.push(vertices[v]);
            }
            nc[k] = remap[v];
        }
        new_cells.push(nc);
    }

    let (mesh, inflow, outflow) = tag_corridor_boundary(&new_vertices, &new_cells, ny, doors)?;
    check_door_measures(&mesh, ny, &inflow)?;
    check_door_measures(&mesh, ny, &outflow)?;
    let reachable = mesh.reachable_cells();
    if reachable != mesh.n_cells() {
        return Err(MeshError::Disconnected { reachable, total: mesh.n_cells() });
    }
    Ok(mesh)
}
