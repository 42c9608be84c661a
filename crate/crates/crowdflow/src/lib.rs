//! Steady-state solvers for crowded transport through bounded domains.
//!
//! The model is a drift-diffusion equation for a density rho in [0, 1] whose
//! advective flux is damped by crowding,
//!
//! ```text
//!   -div(eps grad rho) + div(rho (1 - rho) u) = 0        in the domain,
//!   flux . n = -alpha (1 - rho)                           on inflow boundaries,
//!   flux . n =  beta rho                                  on outflow boundaries,
//!   flux . n = 0                                          on walls,
//! ```
//!
//! with inflow rate `alpha` and outflow rate `beta` in [0, 1] and a divergence-free
//! velocity field `u`. The crate provides
//!
//! - closed-form stationary solutions on the unit interval and a shooting oracle
//!   for the stationary flux ([`analytic`]),
//! - interval and corridor meshes with tagged boundaries ([`mesh`]),
//! - velocity fields, including a potential-flow field between doors ([`velocity`]),
//! - an interior-penalty discontinuous Galerkin discretization with upwinded
//!   advection, driven to steady state by semi-implicit pseudo-time stepping
//!   ([`dg`]),
//! - flux accounting, phase classification over the rate square, and contour
//!   extraction for the maximal-current region ([`analysis`]),
//! - a command line front end (`crowdflow`) with CSV/VTK output ([`config`]).

pub mod analysis;
pub mod analytic;
pub mod app;
pub mod config;
pub mod dg;
pub mod linalg;
pub mod mesh;
pub mod meshio;
pub mod model;
pub mod numfmt;
pub mod quadrature;
pub mod velocity;
pub mod vtk;
