//! Closed-form stationary profiles on the unit interval and a shooting oracle.
//!
//! For constant unit velocity on `[0, 1]` the stationary problem reduces to
//! the first-order equation `eps rho' = rho (1 - rho) - j` with an unknown
//! constant flux `j`, closed by the two Robin conditions
//! `j = alpha (1 - rho(0))` and `j = beta rho(1)`. Depending on `j` the
//! solutions are:
//!
//! - constant profiles `rho = alpha` when `alpha + beta = 1` (flux
//!   `alpha (1 - alpha)`),
//! - the quarter-flux family `rho = 1/2 + eps / (x + c)` at exactly
//!   `j = 1/4`,
//! - tangent profiles `rho = 1/2 - (s/2) tan((s/2)(x + c)/eps)` with
//!   `s = sqrt(4 j - 1)` for `j > 1/4`,
//! - hyperbolic profiles built on `tanh` (inside the strip
//!   `|rho - 1/2| < s'/2`) or `coth` (outside), `s' = sqrt(1 - 4 j)`, for
//!   `j < 1/4`.
//!
//! The flux of a maximal-current profile solves a scalar arctangent equation
//! handled by [`solve_flux_newton`]; the general flux is found by
//! [`shooting_solve`], a bisection on the landing residual of a Runge-Kutta
//! integration, deliberately independent of the closed forms so the two
//! routes cross-check each other.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("rate {rate} makes the profile constant in the limit only; the quarter-flux family needs rates away from 1/2")]
    DivergentConstant { rate: f64 },
    #[error("no quarter-flux profile matches both rates: left constant {c1}, right constant {c2}")]
    ConstantsMismatch { c1: f64, c2: f64 },
    #[error("quarter-flux constant {c} puts the pole inside the interval")]
    PoleInsideDomain { c: f64 },
    #[error("alpha = {alpha} is outside ({lo}, {hi}), where the quarter-flux boundary is defined")]
    OutsideValidity { alpha: f64, lo: f64, hi: f64 },
    #[error("no flux above 1/4 satisfies both boundary conditions (alpha = {alpha}, beta = {beta})")]
    NoMaximalCurrentRoot { alpha: f64, beta: f64 },
    #[error("flux {j} is not below 1/4; the hyperbolic family needs j < 1/4")]
    NotSubcritical { j: f64 },
    #[error("density {rho0} sits exactly on an equilibrium; the profile is constant and carries no branch information")]
    DegenerateBranch { rho0: f64 },
    #[error("shooting needs strictly positive rates, got alpha = {alpha}, beta = {beta}")]
    UnsupportedRates { alpha: f64, beta: f64 },
    #[error("shooting found no sign change for the landing residual in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("boundary residual {residual:.3e} after the flux solve; the parameters are at the edge of the family")]
    ResidualTooLarge { residual: f64 },
}

/// Branch of the hyperbolic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperbolicBranch {
    /// `rho = 1/2 + (s'/2) tanh((s'/2)(x + c)/eps)`, inside the strip.
    Tanh,
    /// `rho = 1/2 + (s'/2) coth((s'/2)(x + c)/eps)`, outside the strip.
    Coth,
}

/// The four closed-form profile families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileForm {
    Constant { rho: f64 },
    /// `rho = 1/2 + eps/(x + c)` with flux exactly 1/4.
    QuarterFlux { c: f64 },
    /// `rho = 1/2 - (s/2) tan((s/2)(x + c)/eps)`, `s = sqrt(4j - 1)`.
    Trig { j: f64, c: f64 },
    /// `s' = sqrt(1 - 4j)`; see [`HyperbolicBranch`].
    Hyperbolic { j: f64, c: f64, branch: HyperbolicBranch },
}

/// A closed-form stationary profile on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitSolution1d {
    pub epsilon: f64,
    pub form: ProfileForm,
}

impl ExplicitSolution1d {
    /// Density at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        match self.form {
            ProfileForm::Constant { rho } => rho,
            ProfileForm::QuarterFlux { c } => 0.5 + eps / (x + c),
            ProfileForm::Trig { j, c } => {
                let s = (4.0 * j - 1.0).max(0.0).sqrt();
                0.5 - 0.5 * s * ((0.5 * s) * (x + c) / eps).tan()
            }
            ProfileForm::Hyperbolic { j, c, branch } => {
                let s = (1.0 - 4.0 * j).sqrt();
                let u = (0.5 * s) * (x + c) / eps;
                let t = match branch {
                    HyperbolicBranch::Tanh => u.tanh(),
                    HyperbolicBranch::Coth => 1.0 / u.tanh(),
                };
                0.5 + 0.5 * s * t
            }
        }
    }

    /// Spatial derivative of the density at `x`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        match self.form {
            ProfileForm::Constant { .. } => 0.0,
            ProfileForm::QuarterFlux { c } => -eps / ((x + c) * (x + c)),
            ProfileForm::Trig { j, c } => {
                let s = (4.0 * j - 1.0).max(0.0).sqrt();
                let u = (0.5 * s) * (x + c) / eps;
                let sec2 = 1.0 + u.tan() * u.tan();
                -(s * s) / (4.0 * eps) * sec2
            }
            ProfileForm::Hyperbolic { j, c, branch } => {
                let s = (1.0 - 4.0 * j).sqrt();
                let u = (0.5 * s) * (x + c) / eps;
                match branch {
                    HyperbolicBranch::Tanh => {
                        let sech2 = 1.0 - u.tanh() * u.tanh();
                        (s * s) / (4.0 * eps) * sech2
                    }
                    HyperbolicBranch::Coth => {
                        let csch2 = 1.0 / u.tanh() / u.tanh() - 1.0;
                        -(s * s) / (4.0 * eps) * csch2
                    }
                }
            }
        }
    }

    /// The constant flux carried by the profile.
    pub fn flux(&self) -> f64 {
        match self.form {
            ProfileForm::Constant { rho } => rho * (1.0 - rho),
            ProfileForm::QuarterFlux { .. } => 0.25,
            ProfileForm::Trig { j, .. } | ProfileForm::Hyperbolic { j, .. } => j,
        }
    }

    /// Residual of `eps rho' - rho (1 - rho) + j` at `x`; zero for a true
    /// stationary profile.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let rho = self.eval(x);
        self.epsilon * self.eval_deriv(x) - rho * (1.0 - rho) + self.flux()
    }
}

/// The constant profile `rho = alpha`, available exactly when
/// `alpha + beta = 1`.
pub fn constant_solution(epsilon: f64, alpha: f64, beta: f64) -> Option<ExplicitSolution1d> {
    if (alpha + beta - 1.0).abs() <= 1e-14 {
        Some(ExplicitSolution1d { epsilon, form: ProfileForm::Constant { rho: alpha } })
    } else {
        None
    }
}

/// Integration constants of the quarter-flux family fitted to each rate.
///
/// The left condition fixes `c1 = 4 alpha eps / (2 alpha - 1)`, the right one
/// `c2 = 4 beta eps / (1 - 2 beta) - 1`; a quarter-flux profile exists when
/// they agree.
pub fn quarterflux_constants(
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64), AnalyticError> {
    if (2.0 * alpha - 1.0).abs() < 1e-14 {
        return Err(AnalyticError::DivergentConstant { rate: alpha });
    }
    if (2.0 * beta - 1.0).abs() < 1e-14 {
        return Err(AnalyticError::DivergentConstant { rate: beta });
    }
    let c1 = 4.0 * alpha * epsilon / (2.0 * alpha - 1.0);
    let c2 = 4.0 * beta * epsilon / (1.0 - 2.0 * beta) - 1.0;
    Ok((c1, c2))
}

/// The quarter-flux profile when both rates pin the same constant.
pub fn quarterflux_solution(
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<ExplicitSolution1d, AnalyticError> {
    let (c1, c2) = quarterflux_constants(epsilon, alpha, beta)?;
    if (c1 - c2).abs() > 1e-10 * (1.0 + c1.abs().max(c2.abs())) {
        return Err(AnalyticError::ConstantsMismatch { c1, c2 });
    }
    let c = c1;
    // The pole at x = -c must avoid [0, 1].
    if (-1.0..=0.0).contains(&c) {
        return Err(AnalyticError::PoleInsideDomain { c });
    }
    Ok(ExplicitSolution1d { epsilon, form: ProfileForm::QuarterFlux { c } })
}

/// Smallest `alpha` for which the quarter-flux matching has a solution.
pub fn phase_boundary_alpha_min(epsilon: f64) -> f64 {
    (1.0 + 2.0 * epsilon) / (2.0 * (4.0 * epsilon + 1.0))
}

/// The `alpha` at which the quarter-flux boundary reaches `beta = 1`.
pub fn phase_boundary_alpha_at_unit_beta(epsilon: f64) -> f64 {
    (4.0 * epsilon + 1.0) / (2.0 * (6.0 * epsilon + 1.0))
}

/// Exit rate on the maximal-current phase boundary for `alpha` below 1/2.
///
/// Setting the two quarter-flux constants equal and solving for `beta` gives
///
/// ```text
/// beta = (4 alpha eps + 2 alpha - 1) / (2 (8 alpha eps + 2 alpha - 2 eps - 1))
/// ```
///
/// defined for `alpha` strictly between [`phase_boundary_alpha_min`] and
/// `1/2`. Equivalently, `alpha/(1/2 - alpha) - beta/(beta - 1/2)` equals
/// `1/(2 eps)` along the curve. Near the lower end the formula exceeds one
/// and stops describing an admissible rate; use
/// [`phase_boundary_alpha_at_unit_beta`] to find the usable range.
pub fn phase_boundary_beta(epsilon: f64, alpha: f64) -> Result<f64, AnalyticError> {
    let lo = phase_boundary_alpha_min(epsilon);
    if !(alpha > lo && alpha < 0.5) {
        return Err(AnalyticError::OutsideValidity { alpha, lo, hi: 0.5 });
    }
    let num = 4.0 * alpha * epsilon + 2.0 * alpha - 1.0;
    let den = 2.0 * (8.0 * alpha * epsilon + 2.0 * alpha - 2.0 * epsilon - 1.0);
    Ok(num / den)
}

/// Entrance rate on the phase boundary for `beta` below 1/2 (the mirror
/// branch of [`phase_boundary_beta`]).
pub fn phase_boundary_alpha(epsilon: f64, beta: f64) -> Result<f64, AnalyticError> {
    phase_boundary_beta(epsilon, beta)
}

/// Which rate sits below 1/2 on a phase-boundary sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryBranch {
    AlphaBelowHalf,
    BetaBelowHalf,
}

impl std::fmt::Display for BoundaryBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryBranch::AlphaBelowHalf => "alpha_below_half",
            BoundaryBranch::BetaBelowHalf => "beta_below_half",
        })
    }
}

/// One point of the maximal-current phase boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBoundarySample {
    pub alpha: f64,
    pub beta: f64,
    pub branch: BoundaryBranch,
}

/// Samples the admissible phase boundary, both branches, through the corner
/// at `(1/2, 1/2)`.
///
/// Each branch gets `samples_per_branch` points with rates inside `(0, 1]`,
/// ordered by increasing `alpha`.
pub fn phase_boundary_curve(
    epsilon: f64,
    samples_per_branch: usize,
) -> Result<Vec<PhaseBoundarySample>, AnalyticError> {
    let n = samples_per_branch.max(2);
    let start = phase_boundary_alpha_at_unit_beta(epsilon);
    let gap = (0.5 - start) * 1e-9;
    let mut samples = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let alpha = start + (0.5 - gap - start) * t;
        let beta = phase_boundary_beta(epsilon, alpha)?.min(1.0);
        samples.push(PhaseBoundarySample { alpha, beta, branch: BoundaryBranch::AlphaBelowHalf });
    }
    samples.push(PhaseBoundarySample { alpha: 0.5, beta: 0.5, branch: BoundaryBranch::BetaBelowHalf });
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let beta = (0.5 - gap) - (0.5 - gap - start) * t;
        let alpha = phase_boundary_alpha(epsilon, beta)?.min(1.0);
        samples.push(PhaseBoundarySample { alpha, beta, branch: BoundaryBranch::BetaBelowHalf });
    }
    Ok(samples)
}

/// Left-hand side of the maximal-current flux equation.
///
/// With `s = sqrt(4j - 1)` and `g_r = (2j - r)/(r s)`, a tangent profile
/// matches both Robin conditions exactly when
///
/// ```text
/// F(j) = atan(g_alpha) + atan(g_beta) + s/(2 eps) = 0.
/// ```
fn flux_equation(epsilon: f64, alpha: f64, beta: f64, j: f64) -> (f64, f64) {
    let s = (4.0 * j - 1.0).sqrt();
    let g = |r: f64| (2.0 * j - r) / (r * s);
    let gp = |r: f64| 2.0 / (r * s) - 2.0 * (2.0 * j - r) / (r * s * s * s);
    let ga = g(alpha);
    let gb = g(beta);
    let f = ga.atan() + gb.atan() + s / (2.0 * epsilon);
    let fp = gp(alpha) / (1.0 + ga * ga) + gp(beta) / (1.0 + gb * gb) + 1.0 / (epsilon * s);
    (f, fp)
}

/// Solves the maximal-current flux equation for `j > 1/4` and returns the
/// tangent profile.
///
/// For `alpha = beta = 1/2` every flux equation value is positive and the
/// stationary profile is the constant `1/2`, returned as the degenerate
/// tangent profile with `j = 1/4`. Outside the maximal-current phase there
/// is no root and an error is returned.
pub fn solve_flux_newton(
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<ExplicitSolution1d, AnalyticError> {
    if (alpha - 0.5).abs() < 1e-14 && (beta - 0.5).abs() < 1e-14 {
        return Ok(ExplicitSolution1d { epsilon, form: ProfileForm::Trig { j: 0.25, c: -0.5 } });
    }
    let j_cap = alpha.min(beta).min(0.25 + PI * PI * epsilon * epsilon);
    if j_cap <= 0.25 {
        return Err(AnalyticError::NoMaximalCurrentRoot { alpha, beta });
    }

    // Geometric ladder of probes above 1/4 to bracket the sign change.
    let mut lo = 0.25 + 1e-13;
    let (mut flo, _) = flux_equation(epsilon, alpha, beta, lo);
    if flo >= 0.0 {
        return Err(AnalyticError::NoMaximalCurrentRoot { alpha, beta });
    }
    let mut hi = j_cap;
    let mut fhi = f64::NAN;
    let mut delta = 1e-12;
    let mut bracketed = false;
    while lo + delta < j_cap {
        let probe = lo + delta;
        let (f, _) = flux_equation(epsilon, alpha, beta, probe);
        if f >= 0.0 {
            hi = probe;
            fhi = f;
            bracketed = true;
            break;
        }
        lo = probe;
        flo = f;
        delta *= 3.0;
    }
    if !bracketed {
        let (f, _) = flux_equation(epsilon, alpha, beta, j_cap);
        if f >= 0.0 {
            hi = j_cap;
            fhi = f;
        } else {
            return Err(AnalyticError::NoMaximalCurrentRoot { alpha, beta });
        }
    }
    debug_assert!(flo < 0.0 && fhi >= 0.0);

    // Newton iteration safeguarded by the bracket.
    let mut j = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, fp) = flux_equation(epsilon, alpha, beta, j);
        if f < 0.0 {
            lo = j;
        } else {
            hi = j;
        }
        if f.abs() <= 1e-14 {
            break;
        }
        let mut next = j - f / fp;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - j).abs() <= f64::EPSILON * j.abs() {
            j = next;
            break;
        }
        j = next;
    }

    let s = (4.0 * j - 1.0).sqrt();
    let theta1 = -((2.0 * j - beta) / (beta * s)).atan();
    let c = (2.0 * epsilon / s) * theta1 - 1.0;
    let sol = ExplicitSolution1d { epsilon, form: ProfileForm::Trig { j, c } };
    let res_left = (alpha * (1.0 - sol.eval(0.0)) - j).abs();
    let res_right = (beta * sol.eval(1.0) - j).abs();
    let residual = res_left.max(res_right);
    if residual > 1e-9 {
        return Err(AnalyticError::ResidualTooLarge { residual });
    }
    Ok(sol)
}

/// Hyperbolic profile through the point `rho(0) = rho0` with flux `j < 1/4`.
///
/// The branch is chosen by where `rho0` sits relative to the equilibrium
/// strip `|rho - 1/2| < s'/2`.
pub fn hyperbolic_from_point(
    epsilon: f64,
    j: f64,
    rho0: f64,
) -> Result<ExplicitSolution1d, AnalyticError> {
    if j.is_nan() || j >= 0.25 {
        return Err(AnalyticError::NotSubcritical { j });
    }
    let s = (1.0 - 4.0 * j).sqrt();
    let r0 = 2.0 * rho0 - 1.0;
    let ratio = r0 / s;
    let (branch, c) = if ratio.abs() < 1.0 - 1e-13 {
        let c = (2.0 * epsilon / s) * ratio.atanh();
        (HyperbolicBranch::Tanh, c)
    } else if ratio.abs() > 1.0 + 1e-13 {
        let c = (2.0 * epsilon / s) * (1.0 / ratio).atanh();
        (HyperbolicBranch::Coth, c)
    } else {
        return Err(AnalyticError::DegenerateBranch { rho0 });
    };
    if branch == HyperbolicBranch::Coth && (-c) >= 0.0 && (-c) <= 1.0 {
        return Err(AnalyticError::PoleInsideDomain { c });
    }
    Ok(ExplicitSolution1d { epsilon, form: ProfileForm::Hyperbolic { j, c, branch } })
}

/// Best explicit representation of the stationary profile for one rate pair.
///
/// Tries the families in order: the constant profile (complementary rates),
/// the quarter-flux family (rates exactly on the phase boundary), the
/// tangent family through the flux equation (maximal-current regime), and
/// finally a hyperbolic profile fitted through the shooting oracle's
/// `rho(0) = 1 - j/alpha`. The last route inherits the oracle's flux
/// accuracy rather than being fully closed-form.
pub fn explicit_profile(
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<ExplicitSolution1d, AnalyticError> {
    if let Some(sol) = constant_solution(epsilon, alpha, beta) {
        return Ok(sol);
    }
    if let Ok(sol) = quarterflux_solution(epsilon, alpha, beta) {
        return Ok(sol);
    }
    if let Ok(sol) = solve_flux_newton(epsilon, alpha, beta) {
        return Ok(sol);
    }
    let shot = shooting_solve(epsilon, alpha, beta)?;
    hyperbolic_from_point(epsilon, shot.j, 1.0 - shot.j / alpha)
}

/// Result of the shooting oracle.
#[derive(Debug, Clone)]
pub struct ShootingSolution {
    /// Stationary flux.
    pub j: f64,
    /// Sample abscissae (uniform grid including both ends).
    pub xs: Vec<f64>,
    /// Densities along the shot at the final flux.
    pub rho: Vec<f64>,
    /// |beta rho(1) - j| of the accepted flux. Small for well-conditioned
    /// parameters; grows when the forward integration amplifies the landing
    /// error (small eps in the influx-limited phase), in which case the flux
    /// is still sharp but the tail of the profile is not.
    pub landing_residual: f64,
    /// Largest profile difference against a half-step integration.
    pub richardson_gap: f64,
}

const SHOOTING_STEPS: usize = 10_000;
/// Densities beyond this magnitude are treated as blown up; integration
/// saturates there, preserving the residual sign.
const BLOWUP_GUARD: f64 = 5.0;

/// Integrates `eps rho' = rho(1 - rho) - j` from `rho(0) = 1 - j/alpha` with
/// classical Runge-Kutta and `n` fixed steps. Returns the landing value.
fn shoot(epsilon: f64, alpha: f64, j: f64, n: usize, profile: Option<&mut Vec<f64>>) -> f64 {
    let f = |r: f64| (r * (1.0 - r) - j) / epsilon;
    let h = 1.0 / n as f64;
    let mut rho = 1.0 - j / alpha;
    let mut out = profile;
    if let Some(p) = out.as_deref_mut() {
        p.clear();
        p.push(rho);
    }
    for _ in 0..n {
        if rho.abs() > BLOWUP_GUARD || (rho - 1.0).abs() > BLOWUP_GUARD {
            rho = rho.clamp(-BLOWUP_GUARD, 1.0 + BLOWUP_GUARD);
            if let Some(p) = out.as_deref_mut() {
                p.push(rho);
            }
            continue;
        }
        let k1 = f(rho);
        let k2 = f(rho + 0.5 * h * k1);
        let k3 = f(rho + 0.5 * h * k2);
        let k4 = f(rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if let Some(p) = out.as_deref_mut() {
            p.push(rho);
        }
    }
    rho
}

/// Landing residual `rho(1) - j/beta` as a function of the flux guess.
fn landing_residual(epsilon: f64, alpha: f64, beta: f64, j: f64) -> f64 {
    shoot(epsilon, alpha, j, SHOOTING_STEPS, None) - j / beta
}

/// Finds the stationary flux by bisecting the landing residual.
///
/// The residual is positive for vanishing flux and negative at
/// `j = min(alpha, beta)`, and strictly decreasing in between, so bisection
/// converges to the unique stationary flux regardless of the closed-form
/// families. Rates must be strictly positive.
pub fn shooting_solve(
    epsilon: f64,
    alpha: f64,
    beta: f64,
) -> Result<ShootingSolution, AnalyticError> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(AnalyticError::UnsupportedRates { alpha, beta });
    }
    let mut lo = 1e-12;
    let mut hi = alpha.min(beta);
    let rlo = landing_residual(epsilon, alpha, beta, lo);
    let rhi = landing_residual(epsilon, alpha, beta, hi);
    if !(rlo > 0.0 && rhi < 0.0) {
        return Err(AnalyticError::NoSignChange { lo, hi });
    }
    let mut best_j = 0.5 * (lo + hi);
    let mut best_r = f64::INFINITY;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = landing_residual(epsilon, alpha, beta, mid);
        if r.abs() < best_r {
            best_r = r.abs();
            best_j = mid;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    let j = best_j;
    let mut rho = Vec::with_capacity(SHOOTING_STEPS + 1);
    shoot(epsilon, alpha, j, SHOOTING_STEPS, Some(&mut rho));
    let mut rho_fine = Vec::with_capacity(2 * SHOOTING_STEPS + 1);
    shoot(epsilon, alpha, j, 2 * SHOOTING_STEPS, Some(&mut rho_fine));
    let richardson_gap = rho
        .iter()
        .enumerate()
        .map(|(i, r)| (r - rho_fine[2 * i]).abs())
        .fold(0.0_f64, f64::max);
    let xs: Vec<f64> = (0..=SHOOTING_STEPS)
        .map(|i| i as f64 / SHOOTING_STEPS as f64)
        .collect();
    let landing = (rho[SHOOTING_STEPS] - j / beta).abs();
    Ok(ShootingSolution { j, xs, rho, landing_residual: landing, richardson_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_requires_complementary_rates() {
        let sol = constant_solution(0.1, 0.3, 0.7).unwrap();
        assert_eq!(sol.eval(0.3), 0.3);
        assert_eq!(sol.flux(), 0.3 * 0.7);
        assert_eq!(sol.ode_residual(0.5), 0.0);
        assert!(constant_solution(0.1, 0.3, 0.6).is_none());
    }

    #[test]
    fn quarterflux_constants_match_on_the_phase_boundary() {
        let (c1, c2) = quarterflux_constants(0.01, 0.4912, 0.6037735849056604).unwrap();
        assert!((c1 - (-1.1163636363636364)).abs() < 1e-12, "c1 = {c1}");
        assert!((c1 - c2).abs() < 1e-12, "c2 = {c2}");
    }

    #[test]
    fn quarterflux_profile_satisfies_both_boundary_conditions() {
        let alpha = 0.4912;
        let beta = phase_boundary_beta(0.01, alpha).unwrap();
        let sol = quarterflux_solution(0.01, alpha, beta).unwrap();
        assert!((alpha * (1.0 - sol.eval(0.0)) - 0.25).abs() < 1e-12);
        assert!((beta * sol.eval(1.0) - 0.25).abs() < 1e-12);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!(sol.ode_residual(x).abs() < 1e-12);
        }
    }

    #[test]
    fn quarterflux_rejects_half_rates_and_pole_positions() {
        assert!(matches!(
            quarterflux_constants(0.01, 0.5, 0.7),
            Err(AnalyticError::DivergentConstant { .. })
        ));
        assert!(matches!(
            quarterflux_solution(0.01, 0.4912, 0.7),
            Err(AnalyticError::ConstantsMismatch { .. })
        ));
    }

    #[test]
    fn phase_boundary_beta_matches_frozen_value() {
        let beta = phase_boundary_beta(0.01, 0.4912).unwrap();
        assert!((beta - 0.6037735849056604).abs() < 1e-12, "beta = {beta}");
    }

    #[test]
    fn phase_boundary_domain_endpoints() {
        // Lower validity endpoint at eps = 0.01.
        let lo = phase_boundary_alpha_min(0.01);
        assert!((lo - 0.4903846153846154).abs() < 1e-15);
        assert!(matches!(
            phase_boundary_beta(0.01, 0.49),
            Err(AnalyticError::OutsideValidity { .. })
        ));
        assert!(matches!(
            phase_boundary_beta(0.01, 0.5),
            Err(AnalyticError::OutsideValidity { .. })
        ));
        // The curve hits beta = 1 at alpha = 0.4375 for eps = 0.1.
        let a1 = phase_boundary_alpha_at_unit_beta(0.1);
        assert!((a1 - 0.4375).abs() < 1e-15);
        let b = phase_boundary_beta(0.1, a1).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_boundary_obeys_the_rate_ratio_identity() {
        // Along the curve, alpha/(1/2 - alpha) - beta/(beta - 1/2) is exactly
        // 1/(2 eps); this is an algebraic identity of the closed form, checked
        // here as an independent route to the same curve.
        for eps in [0.01, 0.05, 0.1] {
            let lo = phase_boundary_alpha_min(eps);
            for i in 1..40 {
                let alpha = lo + (0.5 - lo) * i as f64 / 40.0;
                let beta = phase_boundary_beta(eps, alpha).unwrap();
                let q = alpha / (0.5 - alpha) - beta / (beta - 0.5);
                assert!(
                    (q - 1.0 / (2.0 * eps)).abs() < 1e-6 / eps,
                    "eps={eps} alpha={alpha}: {q}"
                );
            }
        }
    }

    #[test]
    fn phase_boundary_curve_is_ordered_and_admissible() {
        let samples = phase_boundary_curve(0.1, 60).unwrap();
        assert_eq!(samples.len(), 121);
        for w in samples.windows(2) {
            assert!(w[1].alpha >= w[0].alpha - 1e-12);
        }
        for s in &samples {
            assert!(s.alpha > 0.0 && s.alpha <= 1.0);
            assert!(s.beta > 0.0 && s.beta <= 1.0);
        }
        // Mirror symmetry of the two branches.
        let first = samples.first().unwrap();
        let last = samples.last().unwrap();
        assert!((first.alpha - last.beta).abs() < 1e-9);
        assert!((first.beta - last.alpha).abs() < 1e-9);
    }

    #[test]
    fn newton_flux_for_equal_rates_is_symmetric() {
        let sol = solve_flux_newton(0.1, 0.7, 0.7).unwrap();
        let j = sol.flux();
        assert!(j > 0.25 && j < 0.7);
        assert!((j - 0.2692).abs() < 5e-4, "j = {j}");
        // Equal rates give a profile antisymmetric about x = 1/2.
        assert!((sol.eval(0.0) + sol.eval(1.0) - 1.0).abs() < 1e-10);
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert!(sol.ode_residual(x).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn newton_flux_handles_half_half_exactly() {
        let sol = solve_flux_newton(0.37, 0.5, 0.5).unwrap();
        assert_eq!(sol.flux(), 0.25);
        assert!((sol.eval(0.3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn newton_flux_rejects_influx_limited_rates() {
        assert!(matches!(
            solve_flux_newton(0.1, 0.2, 0.4),
            Err(AnalyticError::NoMaximalCurrentRoot { .. })
        ));
    }

    #[test]
    fn newton_flux_satisfies_boundary_conditions_off_symmetry() {
        for (eps, a, b) in [(0.1, 0.6, 0.9), (0.05, 0.55, 0.7), (0.1, 0.9, 0.6)] {
            let sol = solve_flux_newton(eps, a, b).unwrap();
            let j = sol.flux();
            assert!((a * (1.0 - sol.eval(0.0)) - j).abs() < 1e-10);
            assert!((b * sol.eval(1.0) - j).abs() < 1e-10);
        }
    }

    #[test]
    fn hyperbolic_branches_solve_the_ode() {
        // Inside the strip: rising tanh profile.
        let tanh_sol = hyperbolic_from_point(0.1, 0.2, 0.45).unwrap();
        assert!(matches!(
            tanh_sol.form,
            ProfileForm::Hyperbolic { branch: HyperbolicBranch::Tanh, .. }
        ));
        // Outside the strip: falling coth profile.
        let coth_sol = hyperbolic_from_point(0.1, 0.2, 0.95).unwrap();
        assert!(matches!(
            coth_sol.form,
            ProfileForm::Hyperbolic { branch: HyperbolicBranch::Coth, .. }
        ));
        for sol in [tanh_sol, coth_sol] {
            for i in 0..=40 {
                let x = i as f64 / 40.0;
                assert!(sol.ode_residual(x).abs() < 1e-10, "x={x} res={}", sol.ode_residual(x));
            }
        }
        assert!((tanh_sol.eval(0.0) - 0.45).abs() < 1e-12);
        assert!((coth_sol.eval(0.0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_rejects_supercritical_flux_and_equilibria() {
        assert!(matches!(
            hyperbolic_from_point(0.1, 0.3, 0.5),
            Err(AnalyticError::NotSubcritical { .. })
        ));
        let s = (1.0f64 - 4.0 * 0.2).sqrt();
        let on_equilibrium = 0.5 + 0.5 * s;
        assert!(matches!(
            hyperbolic_from_point(0.1, 0.2, on_equilibrium),
            Err(AnalyticError::DegenerateBranch { .. })
        ));
    }

    #[test]
    fn shooting_agrees_with_newton_in_the_maximal_phase() {
        let newton = solve_flux_newton(0.1, 0.7, 0.7).unwrap();
        let shot = shooting_solve(0.1, 0.7, 0.7).unwrap();
        assert!(
            (newton.flux() - shot.j).abs() < 1e-8,
            "newton {} vs shooting {}",
            newton.flux(),
            shot.j
        );
        assert!(shot.landing_residual < 1e-9);
        assert!(shot.richardson_gap < 1e-9);
    }

    #[test]
    fn shooting_matches_constant_solution() {
        let shot = shooting_solve(0.1, 0.3, 0.7).unwrap();
        assert!((shot.j - 0.21).abs() < 1e-9, "j = {}", shot.j);
        for r in shot.rho.iter().step_by(500) {
            assert!((r - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn shooting_profile_matches_hyperbolic_closed_form() {
        let (eps, alpha, beta) = (0.1, 0.2, 0.4);
        let shot = shooting_solve(eps, alpha, beta).unwrap();
        assert!(shot.j < 0.25);
        let closed = hyperbolic_from_point(eps, shot.j, 1.0 - shot.j / alpha).unwrap();
        for (x, r) in shot.xs.iter().zip(&shot.rho).step_by(100) {
            assert!(
                (closed.eval(*x) - r).abs() < 1e-6,
                "x={x}: closed {} vs shot {r}",
                closed.eval(*x)
            );
        }
        // The closed form lands on the outflow condition as well.
        assert!((beta * closed.eval(1.0) - shot.j).abs() < 1e-6);
    }

    #[test]
    fn shooting_rejects_zero_rates() {
        assert!(matches!(
            shooting_solve(0.1, 0.0, 0.5),
            Err(AnalyticError::UnsupportedRates { .. })
        ));
    }

    #[test]
    fn shooting_flux_is_monotone_in_the_entrance_rate() {
        let mut prev = 0.0;
        for i in 1..=8 {
            let alpha = i as f64 / 10.0;
            let shot = shooting_solve(0.1, alpha, 0.9).unwrap();
            assert!(shot.j > prev, "alpha={alpha}: {} !> {prev}", shot.j);
            prev = shot.j;
        }
    }

    #[test]
    fn explicit_profile_picks_the_right_family_per_regime() {
        let constant = explicit_profile(0.1, 0.3, 0.7).unwrap();
        assert!(matches!(constant.form, ProfileForm::Constant { rho } if rho == 0.3));

        let beta = phase_boundary_beta(0.01, 0.4912).unwrap();
        let quarter = explicit_profile(0.01, 0.4912, beta).unwrap();
        assert!(matches!(quarter.form, ProfileForm::QuarterFlux { .. }));
        assert!((quarter.flux() - 0.25).abs() < 1e-15);

        let maximal = explicit_profile(0.1, 0.7, 0.7).unwrap();
        assert!(matches!(maximal.form, ProfileForm::Trig { .. }));
        assert!(maximal.flux() > 0.25);

        let limited = explicit_profile(0.1, 0.2, 0.4).unwrap();
        assert!(matches!(limited.form, ProfileForm::Hyperbolic { .. }));
        assert!(limited.flux() < 0.25);
        // Every dispatched profile satisfies the stationary equation.
        for sol in [constant, quarter, maximal, limited] {
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                assert!(sol.ode_residual(x).abs() < 1e-8, "residual at {x}");
            }
        }
    }
}
