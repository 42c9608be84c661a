//! Interior-penalty discontinuous Galerkin discretization and pseudo-time
//! driver.
//!
//! Densities are broken piecewise-linear functions. Each pseudo-time step
//! solves
//!
//! ```text
//!   (M + tau A(rho_n)) rho_{n+1} = M rho_n + tau f,
//! ```
//!
//! where `A` collects three parts:
//!
//! - symmetric interior-penalty diffusion on interior faces (penalty
//!   `eta eps / h_F`),
//! - advection with the crowding factor frozen at the previous iterate:
//!   the volume term `-int rho (1 - rho_n) u . grad v`, a centered face
//!   flux `(1 - avg(rho_n)) (u.n) avg(rho) [v]`, and the upwind
//!   stabilization `1/2 |(1 - avg(rho_n)) u.n| [rho][v]`,
//! - Robin boundary terms `alpha int rho v` (inflow) and `beta int rho v`
//!   (outflow), with the load `alpha int v`; walls contribute nothing, which
//!   is exactly the no-flux condition.
//!
//! Summing the equations over all test functions telescopes the face terms
//! away, so the discrete stationary state balances total inflow
//! `int alpha (1 - rho)` against total outflow `int beta rho` up to the
//! stopping tolerance.

use crate::linalg::{solve_sparse, CsrMatrix, LinalgError};
use crate::mesh::Mesh;
use crate::model::{bind_segments, ModelError, ModelParams, SegmentKind};
use crate::quadrature::{GAUSS_2, TRI_MIDPOINT};
use crate::velocity::VelocityField;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Velocity(#[from] crate::velocity::VelocityError),
    #[error("pseudo-time step tau = {0} must be positive and finite")]
    BadTau(f64),
    #[error("penalty parameter eta = {0} must be positive")]
    BadEta(f64),
    #[error("stopping tolerance {0} must be positive")]
    BadTolerance(f64),
    #[error("initial density {0} must lie in [0, 1]")]
    BadInitialDensity(f64),
    #[error("velocity field carries {got} cell values but the mesh has {want} cells")]
    VelocityMismatch { got: usize, want: usize },
    #[error("field length {got} does not match {want} degrees of freedom")]
    FieldLength { got: usize, want: usize },
}

/// A broken piecewise-linear field: one value per cell vertex.
#[derive(Debug, Clone)]
pub struct DgFunction {
    mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl DgFunction {
    pub fn constant(mesh: Arc<Mesh>, value: f64) -> Self {
        let n = mesh.n_cells() * mesh.dofs_per_cell();
        DgFunction { mesh, values: vec![value; n] }
    }

    pub fn from_values(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, SolveError> {
        let want = mesh.n_cells() * mesh.dofs_per_cell();
        if values.len() != want {
            return Err(SolveError::FieldLength { got: values.len(), want });
        }
        Ok(DgFunction { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn cell_values(&self, c: usize) -> &[f64] {
        let d = self.mesh.dofs_per_cell();
        &self.values[c * d..(c + 1) * d]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at barycentric coordinates inside cell `c`.
    pub fn eval_in_cell(&self, c: usize, bary: &[f64]) -> f64 {
        let vals = self.cell_values(c);
        vals.iter().zip(bary).map(|(v, l)| v * l).sum()
    }

    /// Gradient inside cell `c` (constant per cell).
    pub fn gradient_in_cell(&self, c: usize) -> [f64; 2] {
        let vals = self.cell_values(c);
        let g = self.mesh.basis_gradients(c);
        let mut out = [0.0, 0.0];
        for (v, gk) in vals.iter().zip(g.iter()) {
            out[0] += v * gk[0];
            out[1] += v * gk[1];
        }
        out
    }
}

/// Local positions of a face's vertices within an adjacent cell, used to
/// evaluate traces along the face.
#[derive(Clone, Copy)]
struct FaceTrace {
    /// Local index of the face's first global vertex.
    l0: usize,
    /// Local index of the second, `usize::MAX` in 1D.
    l1: usize,
}

impl FaceTrace {
    fn of(mesh: &Mesh, face: usize, cell: usize) -> FaceTrace {
        let f = &mesh.faces[face];
        let vs = mesh.cell_vertices(cell);
        let pos = |gv: usize| vs.iter().position(|&v| v == gv).expect("face vertex in cell");
        if mesh.dim == 1 {
            FaceTrace { l0: pos(f.vertices[0]), l1: usize::MAX }
        } else {
            FaceTrace { l0: pos(f.vertices[0]), l1: pos(f.vertices[1]) }
        }
    }

    /// Trace of local basis `k` at face parameter `t` (measured from the
    /// face's first global vertex).
    fn basis(&self, k: usize, t: f64) -> f64 {
        if self.l1 == usize::MAX {
            if k == self.l0 { 1.0 } else { 0.0 }
        } else if k == self.l0 {
            1.0 - t
        } else if k == self.l1 {
            t
        } else {
            0.0
        }
    }

    /// Trace of a cell-local linear field at face parameter `t`.
    fn field(&self, vals: &[f64], t: f64) -> f64 {
        if self.l1 == usize::MAX {
            vals[self.l0]
        } else {
            vals[self.l0] * (1.0 - t) + vals[self.l1] * t
        }
    }
}

fn face_quadrature(dim: usize) -> &'static [(f64, f64)] {
    const POINT: [(f64, f64); 1] = [(0.0, 1.0)];
    if dim == 1 {
        &POINT
    } else {
        &GAUSS_2
    }
}

/// Average and jump of a broken field on a face at parameter `t`.
///
/// The jump is `side one minus side two` in the face's stored orientation;
/// on boundary faces both average and jump equal the single trace.
pub fn face_average_jump(f: &DgFunction, face: usize, t: f64) -> (f64, f64) {
    let mesh = f.mesh();
    let fc = &mesh.faces[face];
    let tr1 = FaceTrace::of(mesh, face, fc.cells[0]);
    let v1 = tr1.field(f.cell_values(fc.cells[0]), t);
    if fc.is_boundary() {
        (v1, v1)
    } else {
        let tr2 = FaceTrace::of(mesh, face, fc.cells[1]);
        let v2 = tr2.field(f.cell_values(fc.cells[1]), t);
        (0.5 * (v1 + v2), v1 - v2)
    }
}

fn volume_quadrature_1d() -> &'static [(f64, f64)] {
    &GAUSS_2
}

/// Consistent mass matrix.
pub fn mass_matrix(mesh: &Mesh) -> CsrMatrix {
    let d = mesh.dofs_per_cell();
    let n = mesh.n_cells() * d;
    let mut pairs = Vec::with_capacity(mesh.n_cells() * d * d);
    for c in 0..mesh.n_cells() {
        for i in 0..d {
            for j in 0..d {
                pairs.push((c * d + i, c * d + j));
            }
        }
    }
    let mut m = CsrMatrix::from_pattern(n, &pairs);
    mass_kernel(mesh, &mut |i, j, v| m.add_at(i, j, v));
    m
}

fn mass_kernel(mesh: &Mesh, add: &mut dyn FnMut(usize, usize, f64)) {
    let d = mesh.dofs_per_cell();
    for c in 0..mesh.n_cells() {
        let measure = mesh.cell_measures[c];
        if mesh.dim == 1 {
            for &(t, w) in volume_quadrature_1d() {
                let b = [1.0 - t, t];
                for i in 0..2 {
                    for j in 0..2 {
                        add(c * d + i, c * d + j, measure * w * b[i] * b[j]);
                    }
                }
            }
        } else {
            for &(l, w) in TRI_MIDPOINT.iter() {
                for i in 0..3 {
                    for j in 0..3 {
                        add(c * d + i, c * d + j, measure * w * l[i] * l[j]);
                    }
                }
            }
        }
    }
}

fn swip_kernel(mesh: &Mesh, epsilon: f64, eta: f64, add: &mut dyn FnMut(usize, usize, f64)) {
    let d = mesh.dofs_per_cell();
    // Volume diffusion.
    for c in 0..mesh.n_cells() {
        let g = mesh.basis_gradients(c);
        let measure = mesh.cell_measures[c];
        for i in 0..d {
            for j in 0..d {
                let v = epsilon * measure * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                add(c * d + i, c * d + j, v);
            }
        }
    }
    // Interior faces: consistency, symmetry, and penalty terms.
    for (fi, f) in mesh.faces.iter().enumerate() {
        if f.is_boundary() {
            continue;
        }
        let cells = [f.cells[0], f.cells[1]];
        let traces = [FaceTrace::of(mesh, fi, cells[0]), FaceTrace::of(mesh, fi, cells[1])];
        let grads = [mesh.basis_gradients(cells[0]), mesh.basis_gradients(cells[1])];
        let signs = [1.0, -1.0];
        let penalty = eta * epsilon / f.h;
        let nd = 2 * d;
        let mut local = vec![0.0; nd * nd];
        for &(t, w) in face_quadrature(mesh.dim) {
            let wq = w * f.measure;
            for a in 0..nd {
                let (sa, ka) = (a / d, a % d);
                let jump_a = signs[sa] * traces[sa].basis(ka, t);
                let gn_a = 0.5
                    * (grads[sa][ka][0] * f.normal[0] + grads[sa][ka][1] * f.normal[1]);
                for b in 0..nd {
                    let (sb, kb) = (b / d, b % d);
                    let jump_b = signs[sb] * traces[sb].basis(kb, t);
                    let gn_b = 0.5
                        * (grads[sb][kb][0] * f.normal[0] + grads[sb][kb][1] * f.normal[1]);
                    local[a * nd + b] += wq
                        * (-epsilon * (gn_b * jump_a + jump_b * gn_a)
                            + penalty * jump_b * jump_a);
                }
            }
        }
        for a in 0..nd {
            let ia = cells[a / d] * d + (a % d);
            for b in 0..nd {
                let ib = cells[b / d] * d + (b % d);
                let v = local[a * nd + b];
                if v != 0.0 {
                    add(ia, ib, v);
                }
            }
        }
    }
}

// Element kernels run double index loops over (test, trial) pairs.
#[allow(clippy::needless_range_loop)]
fn upwind_kernel(
    mesh: &Mesh,
    velocity: &VelocityField,
    rho_prev: &[f64],
    add: &mut dyn FnMut(usize, usize, f64),
) {
    let d = mesh.dofs_per_cell();
    // Volume advection: -int rho (1 - rho_n) u . grad v.
    for c in 0..mesh.n_cells() {
        let g = mesh.basis_gradients(c);
        let u = velocity.cell_velocity[c];
        let measure = mesh.cell_measures[c];
        let prev = &rho_prev[c * d..(c + 1) * d];
        let ugrad: Vec<f64> = (0..d).map(|i| u[0] * g[i][0] + u[1] * g[i][1]).collect();
        if mesh.dim == 1 {
            for &(t, w) in volume_quadrature_1d() {
                let b = [1.0 - t, t];
                let crowd = 1.0 - (prev[0] * b[0] + prev[1] * b[1]);
                for i in 0..2 {
                    for j in 0..2 {
                        add(c * d + i, c * d + j, -measure * w * crowd * b[j] * ugrad[i]);
                    }
                }
            }
        } else {
            for &(l, w) in TRI_MIDPOINT.iter() {
                let crowd = 1.0 - (prev[0] * l[0] + prev[1] * l[1] + prev[2] * l[2]);
                for i in 0..3 {
                    for j in 0..3 {
                        add(c * d + i, c * d + j, -measure * w * crowd * l[j] * ugrad[i]);
                    }
                }
            }
        }
    }
    // Interior faces: centered flux plus upwind stabilization.
    for (fi, f) in mesh.faces.iter().enumerate() {
        if f.is_boundary() {
            continue;
        }
        let cells = [f.cells[0], f.cells[1]];
        let traces = [FaceTrace::of(mesh, fi, cells[0]), FaceTrace::of(mesh, fi, cells[1])];
        let signs = [1.0, -1.0];
        let u = velocity.face_velocity(mesh, fi);
        let un = u[0] * f.normal[0] + u[1] * f.normal[1];
        let prev = [
            &rho_prev[cells[0] * d..(cells[0] + 1) * d],
            &rho_prev[cells[1] * d..(cells[1] + 1) * d],
        ];
        let nd = 2 * d;
        let mut local = vec![0.0; nd * nd];
        for &(t, w) in face_quadrature(mesh.dim) {
            let wq = w * f.measure;
            let rho_avg = 0.5 * (traces[0].field(prev[0], t) + traces[1].field(prev[1], t));
            let vn = (1.0 - rho_avg) * un;
            for a in 0..nd {
                let (sa, ka) = (a / d, a % d);
                let jump_a = signs[sa] * traces[sa].basis(ka, t);
                for b in 0..nd {
                    let (sb, kb) = (b / d, b % d);
                    let avg_b = 0.5 * traces[sb].basis(kb, t);
                    let jump_b = signs[sb] * traces[sb].basis(kb, t);
                    local[a * nd + b] +=
                        wq * (vn * avg_b * jump_a + 0.5 * vn.abs() * jump_b * jump_a);
                }
            }
        }
        for a in 0..nd {
            let ia = cells[a / d] * d + (a % d);
            for b in 0..nd {
                let ib = cells[b / d] * d + (b % d);
                let v = local[a * nd + b];
                if v != 0.0 {
                    add(ia, ib, v);
                }
            }
        }
    }
}

fn boundary_kernel(
    mesh: &Mesh,
    kinds: &[SegmentKind],
    add: &mut dyn FnMut(usize, usize, f64),
    load: &mut [f64],
) {
    let d = mesh.dofs_per_cell();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let Some(ti) = f.tag else { continue };
        let c = f.cells[0];
        let trace = FaceTrace::of(mesh, fi, c);
        match kinds[ti] {
            SegmentKind::Inflow { rate } => {
                for &(t, w) in face_quadrature(mesh.dim) {
                    let wq = w * f.measure;
                    for i in 0..d {
                        let tri = trace.basis(i, t);
                        if tri == 0.0 {
                            continue;
                        }
                        load[c * d + i] += wq * rate * tri;
                        for j in 0..d {
                            add(c * d + i, c * d + j, wq * rate * trace.basis(j, t) * tri);
                        }
                    }
                }
            }
            SegmentKind::Outflow { rate } => {
                for &(t, w) in face_quadrature(mesh.dim) {
                    let wq = w * f.measure;
                    for i in 0..d {
                        let tri = trace.basis(i, t);
                        if tri == 0.0 {
                            continue;
                        }
                        for j in 0..d {
                            add(c * d + i, c * d + j, wq * rate * trace.basis(j, t) * tri);
                        }
                    }
                }
            }
            SegmentKind::Wall => {}
        }
    }
}

/// Sparsity pattern coupling each cell with itself and its face neighbors.
fn coupling_pattern(mesh: &Mesh) -> Vec<(usize, usize)> {
    let d = mesh.dofs_per_cell();
    let mut pairs = Vec::new();
    for c in 0..mesh.n_cells() {
        for i in 0..d {
            for j in 0..d {
                pairs.push((c * d + i, c * d + j));
            }
        }
    }
    for f in &mesh.faces {
        if f.is_boundary() {
            continue;
        }
        let (a, b) = (f.cells[0], f.cells[1]);
        for i in 0..d {
            for j in 0..d {
                pairs.push((a * d + i, b * d + j));
                pairs.push((b * d + i, a * d + j));
            }
        }
    }
    pairs
}

/// Diffusion part of the system matrix (volume and interior faces).
pub fn assemble_swip(mesh: &Mesh, epsilon: f64, eta: f64) -> CsrMatrix {
    let n = mesh.n_cells() * mesh.dofs_per_cell();
    let mut m = CsrMatrix::from_pattern(n, &coupling_pattern(mesh));
    swip_kernel(mesh, epsilon, eta, &mut |i, j, v| m.add_at(i, j, v));
    m
}

/// Advection part of the system matrix, crowding frozen at `rho_prev`.
pub fn assemble_upwind(mesh: &Mesh, velocity: &VelocityField, rho_prev: &DgFunction) -> CsrMatrix {
    let n = mesh.n_cells() * mesh.dofs_per_cell();
    let mut m = CsrMatrix::from_pattern(n, &coupling_pattern(mesh));
    upwind_kernel(mesh, velocity, &rho_prev.values, &mut |i, j, v| m.add_at(i, j, v));
    m
}

/// Robin boundary matrix and load vector.
pub fn assemble_boundary(
    mesh: &Mesh,
    segments: &[crate::model::BoundarySegment],
) -> Result<(CsrMatrix, Vec<f64>), ModelError> {
    let kinds = bind_segments(mesh, segments)?;
    let d = mesh.dofs_per_cell();
    let n = mesh.n_cells() * d;
    let mut pairs = Vec::new();
    for c in 0..mesh.n_cells() {
        for i in 0..d {
            for j in 0..d {
                pairs.push((c * d + i, c * d + j));
            }
        }
    }
    let mut m = CsrMatrix::from_pattern(n, &pairs);
    let mut load = vec![0.0; n];
    boundary_kernel(mesh, &kinds, &mut |i, j, v| m.add_at(i, j, v), &mut load);
    Ok((m, load))
}

/// Controls for the pseudo-time iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationConfig {
    /// Pseudo-time step.
    pub tau: f64,
    /// Stop when `||rho_{n+1} - rho_n||_{L2} / tau` drops below this.
    pub tol: f64,
    /// Interior penalty scale.
    pub eta: f64,
    pub max_iter: usize,
    /// Constant starting density when no warm start is given.
    pub initial_density: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig { tau: 0.01, tol: 1e-8, eta: 10.0, max_iter: 200_000, initial_density: 0.5 }
    }
}

impl IterationConfig {
    /// Default configuration with the pseudo-time step tied to the diffusion
    /// coefficient, `tau = clamp(epsilon, 0.01, 0.1)`.
    ///
    /// The stationary state does not depend on `tau`, but the path towards
    /// it does: overly large steps at small `epsilon` can freeze an interior
    /// layer in a metastable position whose residual drift (of order
    /// `exp(-c/epsilon)`) falls below the stopping threshold and is then
    /// mistaken for convergence. Keeping `tau` at or below `epsilon` tracks
    /// the transient closely enough to avoid such traps, while the larger
    /// steps at moderate `epsilon` cut the iteration count considerably.
    pub fn scaled_to(epsilon: f64) -> Self {
        IterationConfig { tau: epsilon.clamp(0.01, 0.1), ..IterationConfig::default() }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SolveError::BadTau(self.tau));
        }
        if self.eta.is_nan() || self.eta <= 0.0 {
            return Err(SolveError::BadEta(self.eta));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolveError::BadTolerance(self.tol));
        }
        if !(0.0..=1.0).contains(&self.initial_density) {
            return Err(SolveError::BadInitialDensity(self.initial_density));
        }
        Ok(())
    }
}

/// Assembled operators for one stationary problem, reused across steps.
pub struct DgSystem {
    mesh: Arc<Mesh>,
    velocity: VelocityField,
    tau: f64,
    mass: CsrMatrix,
    /// `M + tau (diffusion + boundary)`; the advection part is refilled each
    /// step on top of this.
    base: CsrMatrix,
    load: Vec<f64>,
    block: usize,
}

impl DgSystem {
    pub fn new(
        mesh: Arc<Mesh>,
        params: &ModelParams,
        velocity: &VelocityField,
        cfg: &IterationConfig,
    ) -> Result<Self, SolveError> {
        params.validate()?;
        cfg.validate()?;
        if velocity.cell_velocity.len() != mesh.n_cells() {
            return Err(SolveError::VelocityMismatch {
                got: velocity.cell_velocity.len(),
                want: mesh.n_cells(),
            });
        }
        let kinds = bind_segments(&mesh, &params.segments)?;
        let d = mesh.dofs_per_cell();
        let n = mesh.n_cells() * d;
        let pattern = coupling_pattern(&mesh);

        let mut mass = CsrMatrix::from_pattern(n, &pattern);
        mass_kernel(&mesh, &mut |i, j, v| mass.add_at(i, j, v));

        let mut base = mass.clone();
        let tau = cfg.tau;
        swip_kernel(&mesh, params.epsilon, cfg.eta, &mut |i, j, v| {
            base.add_at(i, j, tau * v)
        });
        let mut load = vec![0.0; n];
        boundary_kernel(&mesh, &kinds, &mut |i, j, v| base.add_at(i, j, tau * v), &mut load);

        Ok(DgSystem {
            mesh,
            velocity: velocity.clone(),
            tau,
            mass,
            base,
            load,
            block: d,
        })
    }

    pub fn ndof(&self) -> usize {
        self.mesh.n_cells() * self.mesh.dofs_per_cell()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// L2 norm of a coefficient vector through the mass matrix.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let mut mv = vec![0.0; v.len()];
        self.mass.mul_vec(v, &mut mv);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// One semi-implicit pseudo-time step from `rho_prev`.
    pub fn step(&mut self, rho_prev: &[f64]) -> Result<Vec<f64>, SolveError> {
        let n = self.ndof();
        if rho_prev.len() != n {
            return Err(SolveError::FieldLength { got: rho_prev.len(), want: n });
        }
        let mut system = self.base.clone();
        let tau = self.tau;
        upwind_kernel(&self.mesh, &self.velocity, rho_prev, &mut |i, j, v| {
            system.add_at(i, j, tau * v)
        });
        let mut rhs = vec![0.0; n];
        self.mass.mul_vec(rho_prev, &mut rhs);
        for (r, f) in rhs.iter_mut().zip(&self.load) {
            *r += tau * f;
        }
        let next = solve_sparse(&system, &rhs, Some(rho_prev), self.block)?;
        Ok(next)
    }
}

/// Result of a stationary solve.
#[derive(Debug, Clone)]
pub struct StationaryOutcome {
    pub rho: DgFunction,
    pub iterations: usize,
    /// `||rho_{n+1} - rho_n||_{L2} / tau` at the last step.
    pub final_update_norm: f64,
    pub converged: bool,
}

/// Drives the pseudo-time iteration to a steady state.
///
/// Starts from `initial` when given (length must match the mesh), otherwise
/// from the constant `cfg.initial_density`. Non-convergence within
/// `cfg.max_iter` steps is reported through the `converged` flag, not as an
/// error, so callers can still inspect the last iterate.
pub fn solve_stationary(
    mesh: &Arc<Mesh>,
    params: &ModelParams,
    velocity: &VelocityField,
    cfg: &IterationConfig,
    initial: Option<Vec<f64>>,
) -> Result<StationaryOutcome, SolveError> {
    let mut system = DgSystem::new(Arc::clone(mesh), params, velocity, cfg)?;
    let n = system.ndof();
    let mut rho = match initial {
        Some(v) => {
            if v.len() != n {
                return Err(SolveError::FieldLength { got: v.len(), want: n });
            }
            v
        }
        None => vec![cfg.initial_density; n],
    };
    let mut rate = f64::INFINITY;
    let mut delta = vec![0.0; n];
    for it in 1..=cfg.max_iter {
        let next = system.step(&rho)?;
        for (d, (a, b)) in delta.iter_mut().zip(next.iter().zip(&rho)) {
            *d = a - b;
        }
        rate = system.l2_norm(&delta) / cfg.tau;
        rho = next;
        if rate <= cfg.tol {
            return Ok(StationaryOutcome {
                rho: DgFunction::from_values(Arc::clone(mesh), rho)?,
                iterations: it,
                final_update_norm: rate,
                converged: true,
            });
        }
    }
    Ok(StationaryOutcome {
        rho: DgFunction::from_values(Arc::clone(mesh), rho)?,
        iterations: cfg.max_iter,
        final_update_norm: rate,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_corridor_mesh, build_interval_mesh, DoorLayout};
    use crate::model::{BoundarySegment, ModelParams, VelocitySpec};
    use crate::velocity::resolve;

    fn interval_setup(
        n: usize,
        eps: f64,
        alpha: f64,
        beta: f64,
    ) -> (Arc<Mesh>, ModelParams, VelocityField) {
        let mesh = Arc::new(build_interval_mesh(n).unwrap());
        let params = ModelParams::interval(eps, alpha, beta);
        let vel = resolve(&params.velocity, &mesh, &params.segments).unwrap();
        (mesh, params, vel)
    }

    #[test]
    fn mass_matrix_rows_sum_to_cell_volume_shares() {
        let mesh = build_interval_mesh(4).unwrap();
        let m = mass_matrix(&mesh);
        // Row sums of the consistent mass matrix integrate the basis, h/2.
        for i in 0..m.n() {
            let sum: f64 = (0..m.n()).map(|j| m.get(i, j)).sum();
            assert!((sum - 0.125).abs() < 1e-15);
        }
        let total: f64 = m.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn swip_matrix_is_symmetric_and_kills_constants() {
        for mesh in [
            build_interval_mesh(6).unwrap(),
            build_corridor_mesh(4, 5, &DoorLayout::standard()).unwrap(),
        ] {
            let a = assemble_swip(&mesh, 0.3, 10.0);
            let n = a.n();
            for (i, j, v) in a.iter() {
                assert!((v - a.get(j, i)).abs() < 1e-13, "asymmetry at ({i},{j})");
            }
            let ones = vec![1.0; n];
            let mut y = vec![0.0; n];
            a.mul_vec(&ones, &mut y);
            for v in &y {
                assert!(v.abs() < 1e-12, "constant not in kernel: {v}");
            }
        }
    }

    #[test]
    fn swip_matrix_is_positive_semidefinite_by_rayleigh_probes() {
        let mesh = build_corridor_mesh(3, 5, &DoorLayout::standard()).unwrap();
        let a = assemble_swip(&mesh, 0.2, 10.0);
        let n = a.n();
        let mut seed = 7u64;
        let mut rand = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut y = vec![0.0; n];
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rand()).collect();
            a.mul_vec(&x, &mut y);
            let q: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(q > -1e-10, "negative Rayleigh quotient {q}");
        }
    }

    #[test]
    fn upwind_rows_and_boundary_rows_telescope_to_balance() {
        // Summing all rows of the advection matrix must give zero: the
        // volume terms vanish because basis gradients sum to zero, and the
        // face terms cancel between the two sides.
        let (mesh, params, vel) = interval_setup(8, 0.1, 0.3, 0.8);
        let rho = DgFunction::constant(Arc::clone(&mesh), 0.37);
        let up = assemble_upwind(&mesh, &vel, &rho);
        let n = up.n();
        let mut colsum = vec![0.0; n];
        for (_, j, v) in up.iter() {
            colsum[j] += v;
        }
        for (j, v) in colsum.iter().enumerate() {
            assert!(v.abs() < 1e-13, "column {j} sums to {v}");
        }
        // The boundary matrix column sums reproduce the Robin fluxes for the
        // constant test function.
        let (bnd, load) = assemble_boundary(&mesh, &params.segments).unwrap();
        let mut bsum = vec![0.0; n];
        for (_, j, v) in bnd.iter() {
            bsum[j] += v;
        }
        // Left end (dof of first cell at x=0) gets alpha, right end beta.
        assert!((bsum[0] - 0.3).abs() < 1e-14);
        assert!((bsum[n - 1] - 0.8).abs() < 1e-14);
        let ltot: f64 = load.iter().sum();
        assert!((ltot - 0.3).abs() < 1e-14);
    }

    #[test]
    fn upwind_matches_hand_assembled_two_cell_interval() {
        // Two cells of width 1/2, u = 1, previous density constant 0.4: the
        // crowding factor is 0.6 everywhere.
        //
        // Volume entries: -0.6 * (d lambda_i / dx) * int lambda_j dx with
        // slopes -+2 and int lambda_j = 1/4, so +-0.3 within each cell.
        //
        // Shared face at x = 1/2 (normal +1 from cell 0 to cell 1, speed
        // vn = 0.6): only dofs 1 and 2 have nonzero traces, with jumps
        // +1 and -1 and averages 1/2 each. Per pair the entry is
        // vn * avg(trial) * jump(test) + 0.5 vn * jump(trial) * jump(test):
        //   (1,1): 0.3 + 0.3 = 0.6    (1,2): 0.3 - 0.3 = 0
        //   (2,1): -0.3 - 0.3 = -0.6  (2,2): -0.3 + 0.3 = 0
        let mesh = Arc::new(build_interval_mesh(2).unwrap());
        let vel = resolve(&VelocitySpec::Constant([1.0, 0.0]), &mesh, &[]).unwrap();
        let rho = DgFunction::constant(Arc::clone(&mesh), 0.4);
        let up = assemble_upwind(&mesh, &vel, &rho);
        let expected = [
            [0.3, 0.3, 0.0, 0.0],
            [-0.3, 0.3, 0.0, 0.0],
            [0.0, -0.6, 0.3, 0.3],
            [0.0, 0.0, -0.3, -0.3],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                let got = up.get(i, j);
                assert!((got - want).abs() < 1e-14, "entry ({i},{j}) = {got}, want {want}");
            }
        }
    }

    #[test]
    fn constant_density_is_a_fixed_point_when_rates_are_complementary() {
        let (mesh, params, vel) = interval_setup(16, 0.05, 0.3, 0.7);
        let cfg = IterationConfig::default();
        let mut system = DgSystem::new(Arc::clone(&mesh), &params, &vel, &cfg).unwrap();
        let rho = vec![0.3; system.ndof()];
        let next = system.step(&rho).unwrap();
        for v in &next {
            assert!((v - 0.3).abs() < 1e-12, "fixed point drifted to {v}");
        }
    }

    #[test]
    fn stationary_solve_reaches_constant_profile() {
        let (mesh, params, vel) = interval_setup(32, 0.1, 0.3, 0.7);
        let cfg = IterationConfig { tol: 1e-12, ..Default::default() };
        let out = solve_stationary(&mesh, &params, &vel, &cfg, None).unwrap();
        assert!(out.converged);
        assert!(out.iterations > 1);
        for v in &out.rho.values {
            assert!((v - 0.3).abs() < 1e-8, "density {v}");
        }
    }

    #[test]
    fn face_average_jump_reports_traces() {
        let mesh = Arc::new(build_interval_mesh(2).unwrap());
        let mut vals = vec![0.0; 4];
        vals[1] = 2.0; // right end of cell 0
        vals[2] = 0.5; // left end of cell 1
        let f = DgFunction::from_values(Arc::clone(&mesh), vals).unwrap();
        // The shared face is the one whose vertex is the midpoint.
        let fi = mesh
            .faces
            .iter()
            .position(|f| !f.is_boundary())
            .unwrap();
        let (avg, jump) = face_average_jump(&f, fi, 0.0);
        assert!((avg - 1.25).abs() < 1e-15);
        assert!((jump - 1.5).abs() < 1e-15);
    }

    #[test]
    fn iteration_config_rejects_bad_values() {
        let bad_tau = IterationConfig { tau: 0.0, ..Default::default() };
        assert!(matches!(bad_tau.validate(), Err(SolveError::BadTau(_))));
        let bad_eta = IterationConfig { eta: -1.0, ..Default::default() };
        assert!(matches!(bad_eta.validate(), Err(SolveError::BadEta(_))));
        let bad_init = IterationConfig { initial_density: 1.5, ..Default::default() };
        assert!(matches!(bad_init.validate(), Err(SolveError::BadInitialDensity(_))));
    }

    #[test]
    fn solver_recovers_linear_diffusion_profile_without_advection() {
        // With u = 0, eps = 0.2 and rates 0.6/0.6 the stationary problem is
        // -eps rho'' = 0 with Robin data, whose solution is the straight
        // line rho(x) = 0.8 - 0.6 x (constant flux 0.12 = 0.6 * rho(1) =
        // 0.6 * (1 - rho(0))). A piecewise-linear scheme reproduces a
        // globally linear solution exactly, so only solver and stopping
        // tolerances enter the comparison.
        let mesh = Arc::new(build_interval_mesh(16).unwrap());
        let params = ModelParams {
            epsilon: 0.2,
            velocity: VelocitySpec::Constant([0.0, 0.0]),
            segments: vec![
                BoundarySegment::inflow("inflow", 0.6),
                BoundarySegment::outflow("outflow", 0.6),
            ],
        };
        let vel = resolve(&params.velocity, &mesh, &params.segments).unwrap();
        let cfg = IterationConfig { tol: 1e-12, ..Default::default() };
        let out = solve_stationary(&mesh, &params, &vel, &cfg, None).unwrap();
        assert!(out.converged);
        for c in 0..mesh.n_cells() {
            for (k, &gv) in mesh.cell_vertices(c).iter().enumerate() {
                let x = mesh.vertices[gv][0];
                let want = 0.8 - 0.6 * x;
                let got = out.rho.values[c * 2 + k];
                assert!((got - want).abs() < 1e-7, "rho({x}) = {got}, want {want}");
            }
        }
    }
}
