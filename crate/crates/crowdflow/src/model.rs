//! Model data: rates, boundary segments, and the entropy structure.
//!
//! The density `rho` lives in `[0, 1]`. Its entropy variable is
//! `psi = log(rho) - log(1 - rho) - V` for a potential `V`; the map is
//! inverted by a logistic and stays finite for every real `psi`. The mobility
//! `rho (1 - rho)`, written in the entropy variable, is
//! `1 / (2 (1 + cosh(psi + V)))`, bounded by `1/4`.

use crate::mesh::Mesh;
use crate::quadrature::{GAUSS_5, TRI_DEG5};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{name} = {value} is outside the admissible range [0, 1]")]
    RateOutOfRange { name: String, value: f64 },
    #[error("epsilon = {0} must be a positive finite number")]
    BadEpsilon(f64),
    #[error("density {0} has no entropy variable: it must lie strictly inside (0, 1)")]
    DensityNotInterior(f64),
    #[error("boundary tag '{0}' appears in more than one segment")]
    DuplicateTag(String),
    #[error("mesh boundary tag '{0}' is not covered by any segment")]
    UnboundTag(String),
    #[error("field length {got} does not match {want} degrees of freedom")]
    FieldLength { got: usize, want: usize },
}

/// Boundary condition kind attached to a tagged boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    /// Entrance with rate `alpha`: the inward normal flux is `alpha (1 - rho)`.
    Inflow { rate: f64 },
    /// Exit with rate `beta`: the outward normal flux is `beta rho`.
    Outflow { rate: f64 },
    /// Impermeable wall: zero normal flux.
    Wall,
}

impl SegmentKind {
    pub fn rate(&self) -> Option<f64> {
        match *self {
            SegmentKind::Inflow { rate } | SegmentKind::Outflow { rate } => Some(rate),
            SegmentKind::Wall => None,
        }
    }
}

/// A named boundary segment carrying one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    /// Mesh boundary tag this condition binds to.
    pub tag: String,
    pub kind: SegmentKind,
}

impl BoundarySegment {
    pub fn inflow(tag: &str, rate: f64) -> Self {
        BoundarySegment { tag: tag.to_string(), kind: SegmentKind::Inflow { rate } }
    }

    pub fn outflow(tag: &str, rate: f64) -> Self {
        BoundarySegment { tag: tag.to_string(), kind: SegmentKind::Outflow { rate } }
    }

    pub fn wall(tag: &str) -> Self {
        BoundarySegment { tag: tag.to_string(), kind: SegmentKind::Wall }
    }
}

/// Velocity field selection.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocitySpec {
    /// Spatially constant velocity.
    Constant([f64; 2]),
    /// Gradient of the linear potential `V = g . x`, i.e. the constant `g`.
    GradientOfLinear([f64; 2]),
    /// Gradient of the harmonic potential with unit inflow/outflow normal
    /// velocity on doors and zero on walls.
    GradientOfHarmonic,
}

/// Full problem description for a stationary solve.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub epsilon: f64,
    pub velocity: VelocitySpec,
    pub segments: Vec<BoundarySegment>,
}

impl ModelParams {
    /// Parameters for the unit interval with constant unit velocity,
    /// entrance rate `alpha` on the left and exit rate `beta` on the right.
    pub fn interval(epsilon: f64, alpha: f64, beta: f64) -> Self {
        ModelParams {
            epsilon,
            velocity: VelocitySpec::Constant([1.0, 0.0]),
            segments: vec![
                BoundarySegment::inflow("inflow", alpha),
                BoundarySegment::outflow("outflow", beta),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ModelError::BadEpsilon(self.epsilon));
        }
        let mut seen: Vec<&str> = Vec::new();
        for seg in &self.segments {
            if seen.contains(&seg.tag.as_str()) {
                return Err(ModelError::DuplicateTag(seg.tag.clone()));
            }
            seen.push(&seg.tag);
            if let Some(rate) = seg.kind.rate() {
                if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
                    let name = match seg.kind {
                        SegmentKind::Inflow { .. } => format!("inflow rate on '{}'", seg.tag),
                        _ => format!("outflow rate on '{}'", seg.tag),
                    };
                    return Err(ModelError::RateOutOfRange { name, value: rate });
                }
            }
        }
        Ok(())
    }
}

/// Maps every mesh boundary tag to its segment kind.
///
/// Fails if a mesh tag has no segment or a segment tag is duplicated.
/// Segments that match no mesh tag are ignored, so one segment list can
/// serve several door layouts.
pub fn bind_segments(
    mesh: &Mesh,
    segments: &[BoundarySegment],
) -> Result<Vec<SegmentKind>, ModelError> {
    let mut kinds: Vec<Option<SegmentKind>> = vec![None; mesh.tags.len()];
    for seg in segments {
        if let Some(ti) = mesh.tag_index(&seg.tag) {
            if kinds[ti].is_some() {
                return Err(ModelError::DuplicateTag(seg.tag.clone()));
            }
            kinds[ti] = Some(seg.kind);
        }
    }
    kinds
        .into_iter()
        .enumerate()
        .map(|(ti, k)| k.ok_or_else(|| ModelError::UnboundTag(mesh.tags[ti].clone())))
        .collect()
}

/// Entropy variable of a density at potential value `v`.
///
/// Defined for `rho` strictly inside `(0, 1)`.
pub fn rho_to_psi(rho: f64, v: f64) -> Result<f64, ModelError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(ModelError::DensityNotInterior(rho));
    }
    Ok(rho.ln() - (1.0 - rho).ln() - v)
}

/// Density recovered from the entropy variable at potential value `v`.
///
/// Evaluated on the branch that avoids overflow, so the result is a valid
/// density for every finite input and saturates to 0 or 1 in the limits.
pub fn psi_to_rho(psi: f64, v: f64) -> f64 {
    let z = psi + v;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mobility `rho (1 - rho)` expressed through the entropy variable.
///
/// Computed as the product of the two stable logistic branches; agrees with
/// [`mobility_cosh`] and is bounded by `1/4`.
pub fn mobility(psi: f64, v: f64) -> f64 {
    let z = psi + v;
    sigma(z) * sigma(-z)
}

/// Mobility written as `1 / (2 (1 + cosh(psi + V)))`.
///
/// Algebraically identical to [`mobility`]; kept as an independent route for
/// cross-checking.
pub fn mobility_cosh(psi: f64, v: f64) -> f64 {
    let z = psi + v;
    1.0 / (2.0 * (1.0 + z.cosh()))
}

fn sigma(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Density and entropy variable paired with the local potential value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyState {
    pub rho: f64,
    pub psi: f64,
    pub v: f64,
}

impl EntropyState {
    pub fn from_density(rho: f64, v: f64) -> Result<Self, ModelError> {
        Ok(EntropyState { rho, psi: rho_to_psi(rho, v)?, v })
    }

    pub fn from_entropy_variable(psi: f64, v: f64) -> Self {
        EntropyState { rho: psi_to_rho(psi, v), psi, v }
    }
}

/// Integrand of the entropy functional with densities clipped away from the
/// logarithm singularities.
fn entropy_density(rho: f64, v: f64) -> f64 {
    const CLIP: f64 = 1e-12;
    let r = rho.clamp(CLIP, 1.0 - CLIP);
    r * r.ln() - r * v + (1.0 - r) * (1.0 - r).ln()
}

/// Entropy functional of a piecewise-linear density and potential.
///
/// Integrates `rho log rho - rho V + (1 - rho) log(1 - rho)` over the mesh.
/// `rho` and `v` hold one value per cell vertex in cell order (the usual
/// discontinuous layout; a continuous field just repeats shared values).
pub fn entropy(mesh: &Mesh, rho: &[f64], v: &[f64]) -> Result<f64, ModelError> {
    let d = mesh.dofs_per_cell();
    let want = mesh.n_cells() * d;
    if rho.len() != want {
        return Err(ModelError::FieldLength { got: rho.len(), want });
    }
    if v.len() != want {
        return Err(ModelError::FieldLength { got: v.len(), want });
    }
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let rv = &rho[c * d..(c + 1) * d];
        let vv = &v[c * d..(c + 1) * d];
        let mut cell = 0.0;
        if mesh.dim == 1 {
            for &(t, w) in GAUSS_5.iter() {
                let r = rv[0] * (1.0 - t) + rv[1] * t;
                let p = vv[0] * (1.0 - t) + vv[1] * t;
                cell += w * entropy_density(r, p);
            }
        } else {
            for &(l, w) in TRI_DEG5.iter() {
                let r = rv[0] * l[0] + rv[1] * l[1] + rv[2] * l[2];
                let p = vv[0] * l[0] + vv[1] * l[1] + vv[2] * l[2];
                cell += w * entropy_density(r, p);
            }
        }
        total += cell * mesh.cell_measures[c];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn entropy_variable_at_half_is_minus_potential() {
        assert_eq!(rho_to_psi(0.5, 0.0).unwrap(), 0.0);
        assert_eq!(rho_to_psi(0.5, 2.0).unwrap(), -2.0);
    }

    #[test]
    fn entropy_variable_of_four_fifths_is_log_four() {
        // log(0.8 / 0.2) = log 4.
        let psi = rho_to_psi(0.8, 0.0).unwrap();
        assert!((psi - 1.3862943611198906).abs() < 1e-15);
    }

    #[test]
    fn transform_rejects_boundary_densities() {
        assert!(rho_to_psi(0.0, 0.0).is_err());
        assert!(rho_to_psi(1.0, 0.0).is_err());
        assert!(rho_to_psi(-0.1, 0.0).is_err());
    }

    #[test]
    fn inverse_transform_saturates_without_overflow() {
        assert_eq!(psi_to_rho(800.0, 0.0), 1.0);
        assert_eq!(psi_to_rho(-800.0, 0.0), 0.0);
        assert!(psi_to_rho(0.0, 0.0) == 0.5);
    }

    #[test]
    fn roundtrip_is_tight_across_the_interior() {
        for i in 1..200 {
            let rho = i as f64 / 200.0;
            for v in [-3.0, 0.0, 1.7] {
                let psi = rho_to_psi(rho, v).unwrap();
                let back = psi_to_rho(psi, v);
                assert!((back - rho).abs() < 1e-12, "rho={rho} v={v}: {back}");
            }
        }
    }

    #[test]
    fn mobility_at_z_five_matches_cosh_value() {
        // cosh 5 = 74.20994852478785, so the mobility is
        // 1 / (2 * 75.20994852478785) = 0.006648056670790156.
        let m = mobility(5.0, 0.0);
        assert!((m - 0.006648056670790156).abs() < 1e-15);
        let mc = mobility_cosh(5.0, 0.0);
        assert!((m - mc).abs() < 1e-17);
    }

    #[test]
    fn mobility_peaks_at_one_quarter() {
        assert_eq!(mobility(0.0, 0.0), 0.25);
        for z in [-30.0, -2.0, -0.5, 0.3, 7.0, 25.0] {
            let m = mobility(z, 0.0);
            assert!(m > 0.0 && m <= 0.25);
        }
    }

    #[test]
    fn entropy_state_roundtrip() {
        let s = EntropyState::from_density(0.73, 1.2).unwrap();
        let t = EntropyState::from_entropy_variable(s.psi, 1.2);
        assert!((t.rho - 0.73).abs() < 1e-14);
    }

    #[test]
    fn entropy_of_constant_half_is_minus_log_two() {
        let mesh = build_interval_mesh(8).unwrap();
        let n = mesh.n_cells() * 2;
        let rho = vec![0.5; n];
        let v = vec![0.0; n];
        // 0.5 log 0.5 + 0.5 log 0.5 = -log 2.
        let e = entropy(&mesh, &rho, &v).unwrap();
        assert!((e + std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn entropy_with_unit_potential_shifts_by_mean_density() {
        let mesh = build_interval_mesh(8).unwrap();
        let n = mesh.n_cells() * 2;
        let rho = vec![0.5; n];
        let v = vec![1.0; n];
        let e = entropy(&mesh, &rho, &v).unwrap();
        assert!((e - (-1.1931471805599453)).abs() < 1e-14);
    }

    #[test]
    fn entropy_of_linear_ramp_matches_closed_form() {
        // With rho(x) = x and V = 0 the integral over [0, 1] is
        // 2 * int_0^1 x log x dx = -1/2.
        let mesh = build_interval_mesh(64).unwrap();
        let mut rho = Vec::with_capacity(mesh.n_cells() * 2);
        for c in 0..mesh.n_cells() {
            let vs = mesh.cell_vertices(c);
            rho.push(mesh.vertices[vs[0]][0]);
            rho.push(mesh.vertices[vs[1]][0]);
        }
        let v = vec![0.0; rho.len()];
        let e = entropy(&mesh, &rho, &v).unwrap();
        // The clipped endpoints and the quadrature near the singular ends
        // keep the error at the 1e-5 level on this mesh.
        assert!((e - (-0.5)).abs() < 2e-5, "entropy {e}");
    }

    #[test]
    fn rate_validation_names_the_offending_segment() {
        let mut p = ModelParams::interval(0.1, 0.5, 1.5);
        match p.validate() {
            Err(ModelError::RateOutOfRange { name, value }) => {
                assert!(name.contains("outflow"));
                assert_eq!(value, 1.5);
            }
            other => panic!("expected rate error, got {other:?}"),
        }
        p = ModelParams::interval(-1.0, 0.5, 0.5);
        assert!(matches!(p.validate(), Err(ModelError::BadEpsilon(_))));
    }

    #[test]
    fn bind_segments_requires_full_coverage() {
        let mesh = build_interval_mesh(4).unwrap();
        let segs = vec![BoundarySegment::inflow("inflow", 0.3)];
        match bind_segments(&mesh, &segs) {
            Err(ModelError::UnboundTag(tag)) => assert_eq!(tag, "outflow"),
            other => panic!("expected unbound tag, got {other:?}"),
        }
        let full = vec![
            BoundarySegment::inflow("inflow", 0.3),
            BoundarySegment::outflow("outflow", 0.7),
            BoundarySegment::wall("unused_tag"),
        ];
        let kinds = bind_segments(&mesh, &full).unwrap();
        assert_eq!(kinds.len(), 2);
    }
}
