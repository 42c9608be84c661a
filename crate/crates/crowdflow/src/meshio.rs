//! Plain-text mesh files.
//!
//! The format is line oriented with four sections:
//!
//! ```text
//! # optional comments anywhere
//! SEGMENTS
//! 0 inflow
//! 1 outflow
//! NODES
//! 0 0 0
//! 1 0.25 0
//! CELLS
//! 0 0 1
//! BOUNDARY
//! 0 inflow
//! 1 outflow
//! ```
//!
//! `SEGMENTS` declares the boundary tag names, `NODES` lists vertex
//! coordinates, `CELLS` lists vertex ids per cell (two for segments, three
//! for triangles), and `BOUNDARY` assigns a declared tag to each boundary
//! face by its vertex ids (one id in 1D, two in 2D). Indices in `SEGMENTS`,
//! `NODES`, and `CELLS` must count up from zero. Faces are re-derived from
//! the cells on read, and every boundary face must be assigned exactly one
//! tag.

use crate::mesh::{Mesh, MeshError};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

/// Writes a mesh to the text format.
pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    out.push_str("SEGMENTS\n");
    for (i, tag) in mesh.tags.iter().enumerate() {
        out.push_str(&format!("{i} {tag}\n"));
    }
    out.push_str("NODES\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        // Shortest round-trip form: coordinates survive a write/read cycle
        // bit for bit.
        out.push_str(&format!("{i} {} {}\n", v[0], v[1]));
    }
    out.push_str("CELLS\n");
    for c in 0..mesh.n_cells() {
        let vs = mesh.cell_vertices(c);
        let ids: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{c} {}\n", ids.join(" ")));
    }
    out.push_str("BOUNDARY\n");
    for f in &mesh.faces {
        if let Some(ti) = f.tag {
            let verts = if mesh.dim == 1 {
                f.vertices[0].to_string()
            } else {
                format!("{} {}", f.vertices[0], f.vertices[1])
            };
            out.push_str(&format!("{verts} {}\n", mesh.tags[ti]));
        }
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })?;
    file.write_all(out.as_bytes())
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Segments,
    Nodes,
    Cells,
    Boundary,
}

/// Reads a mesh from the text format.
pub fn read_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })?;
    parse_mesh(&text, &path.display().to_string())
}

/// Parses the text format; `path` only labels error messages.
pub fn parse_mesh(text: &str, path: &str) -> Result<Mesh, MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse { path: path.to_string(), line, msg };

    let mut section = Section::None;
    let mut tags: Vec<String> = Vec::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut arity: Option<usize> = None;
    let mut boundary: Vec<(usize, [usize; 2], String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "SEGMENTS" => {
                section = Section::Segments;
                continue;
            }
            "NODES" => {
                section = Section::Nodes;
                continue;
            }
            "CELLS" => {
                section = Section::Cells;
                continue;
            }
            "BOUNDARY" => {
                section = Section::Boundary;
                continue;
            }
            _ => {}
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::None => {
                return Err(err(lineno, format!("unexpected content before any section: '{line}'")));
            }
            Section::Segments => {
                if fields.len() != 2 {
                    return Err(err(lineno, "expected 'index name'".to_string()));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid segment index '{}'", fields[0])))?;
                if i != tags.len() {
                    return Err(err(lineno, format!("segment index {i} out of order (expected {})", tags.len())));
                }
                let name = fields[1].to_string();
                if tags.contains(&name) {
                    return Err(err(lineno, format!("segment name '{name}' declared twice")));
                }
                tags.push(name);
            }
            Section::Nodes => {
                if fields.len() != 2 && fields.len() != 3 {
                    return Err(err(lineno, "expected 'index x [y]'".to_string()));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid node index '{}'", fields[0])))?;
                if i != nodes.len() {
                    return Err(err(lineno, format!("node index {i} out of order (expected {})", nodes.len())));
                }
                let x: f64 = fields[1]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid coordinate '{}'", fields[1])))?;
                let y: f64 = if fields.len() == 3 {
                    fields[2]
                        .parse()
                        .map_err(|_| err(lineno, format!("invalid coordinate '{}'", fields[2])))?
                } else {
                    0.0
                };
                nodes.push([x, y]);
            }
            Section::Cells => {
                if fields.len() != 3 && fields.len() != 4 {
                    return Err(err(lineno, "expected 'index v0 v1 [v2]'".to_string()));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid cell index '{}'", fields[0])))?;
                if i != cells.len() {
                    return Err(err(lineno, format!("cell index {i} out of order (expected {})", cells.len())));
                }
                let this_arity = fields.len() - 1;
                match arity {
                    None => arity = Some(this_arity),
                    Some(a) if a != this_arity => {
                        return Err(err(lineno, format!("cell has {this_arity} vertices but earlier cells have {a}")));
                    }
                    _ => {}
                }
                let mut cell = [usize::MAX; 3];
                for (k, f) in fields[1..].iter().enumerate() {
                    cell[k] = f
                        .parse()
                        .map_err(|_| err(lineno, format!("invalid vertex id '{f}'")))?;
                }
                cells.push(cell);
            }
            Section::Boundary => {
                if fields.len() < 2 {
                    return Err(err(lineno, "expected vertex ids followed by a tag name".to_string()));
                }
                let tag = fields[fields.len() - 1].to_string();
                if !tags.contains(&tag) {
                    return Err(err(lineno, format!("tag '{tag}' is not declared in SEGMENTS")));
                }
                let vert_fields = &fields[..fields.len() - 1];
                let want = match arity {
                    Some(2) => 1,
                    Some(3) => 2,
                    _ => {
                        return Err(err(lineno, "BOUNDARY section must come after CELLS".to_string()));
                    }
                };
                if vert_fields.len() != want {
                    return Err(err(lineno, format!("expected {want} vertex id(s) and a tag name")));
                }
                let mut key = [0usize; 2];
                for (k, f) in vert_fields.iter().enumerate() {
                    key[k] = f
                        .parse()
                        .map_err(|_| err(lineno, format!("invalid vertex id '{f}'")))?;
                }
                if want == 1 {
                    key[1] = key[0];
                }
                boundary.push((lineno, key, tag));
            }
        }
    }

    if cells.is_empty() {
        return Err(err(text.lines().count(), "no cells defined".to_string()));
    }
    let dim = match arity {
        Some(2) => 1,
        Some(3) => 2,
        _ => unreachable!("arity fixed by the first cell"),
    };

    let mut seen: HashMap<[usize; 2], usize> = HashMap::new();
    for (lineno, key, _) in &boundary {
        let k = sorted(*key);
        if let Some(prev) = seen.insert(k, *lineno) {
            return Err(err(
                *lineno,
                format!("boundary face already tagged on line {prev}"),
            ));
        }
    }

    let tag_pairs: Vec<([usize; 2], String)> =
        boundary.iter().map(|(_, key, tag)| (*key, tag.clone())).collect();
    let mut mesh = Mesh::from_parts(dim, nodes, cells, &tag_pairs)?;

    // Every BOUNDARY line must have matched a derived boundary face.
    let n_boundary_faces = mesh.faces.iter().filter(|f| f.is_boundary()).count();
    if n_boundary_faces != boundary.len() {
        let face_keys: std::collections::HashSet<[usize; 2]> = mesh
            .faces
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| {
                if dim == 1 {
                    [f.vertices[0], f.vertices[0]]
                } else {
                    sorted(f.vertices)
                }
            })
            .collect();
        for (lineno, key, _) in &boundary {
            if !face_keys.contains(&sorted(*key)) {
                return Err(err(*lineno, "vertex ids do not form a boundary face".to_string()));
            }
        }
    }

    // Re-key face tags to the declared SEGMENTS order so files round-trip
    // verbatim; declared-but-unused tags are kept.
    let remap: Vec<usize> = mesh
        .tags
        .iter()
        .map(|name| tags.iter().position(|t| t == name).expect("tag declared"))
        .collect();
    for f in &mut mesh.faces {
        if let Some(ti) = f.tag {
            f.tag = Some(remap[ti]);
        }
    }
    mesh.tags = tags;
    Ok(mesh)
}

fn sorted(p: [usize; 2]) -> [usize; 2] {
    if p[0] <= p[1] { p } else { [p[1], p[0]] }
}
