//! Command-line front end: argument parsing, run orchestration, and output
//! files.
//!
//! Exit codes: 0 for a converged run, 2 when the iteration stopped at its
//! budget without converging (outputs are still written), 1 for usage or
//! runtime errors.

use crate::analysis::{
    check_phase_estimates, extract_quarter_contour, rate_samples, scan_phase_diagram,
    solve_stationary_with_report, EstimateReport, PhaseGrid, SolveReport,
};
use crate::analytic::{explicit_profile, phase_boundary_curve, AnalyticError};
use crate::config::{
    parse_config, ConfigError, RunConfig, Solve1dConfig, Solve2dConfig,
};
use crate::dg::{DgFunction, IterationConfig, SolveError};
use crate::mesh::{
    build_corridor_mesh, build_interval_mesh, build_obstacle_mesh, Door, DoorLayout, Mesh,
    MeshError, WALL_TAG,
};
use crate::meshio::write_mesh;
use crate::model::{BoundarySegment, ModelError, ModelParams};
use crate::numfmt::g15;
use crate::velocity::{resolve, VelocityError, VelocityField};
use crate::vtk::{write_vtk, VtkError};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Vtk(#[from] VtkError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to serialize the report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("the config file requests mode \"{found}\", but this is the {command} command")]
    ModeMismatch { command: &'static str, found: &'static str },
    #[error("{0}")]
    Usage(String),
}

/// Stationary solvers and phase diagrams for crowded corridor transport.
#[derive(Debug, Parser)]
#[command(name = "crowdflow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the stationary 1D problem with uniform drift
    Solve1d {
        /// Diffusion coefficient
        #[arg(long)]
        epsilon: f64,
        /// Inflow rate at x = 0
        #[arg(long)]
        alpha: f64,
        /// Outflow rate at x = 1
        #[arg(long)]
        beta: f64,
        /// Number of mesh cells
        #[arg(long, default_value_t = 200)]
        cells: usize,
        /// Pseudo-time step
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        /// Stopping tolerance on the update rate
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Interior penalty scale
        #[arg(long, default_value_t = 10.0)]
        eta: f64,
        /// Iteration budget
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Output directory (profile.csv, report.json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the stationary 2D corridor problem from a JSON config
    Solve2d {
        /// JSON configuration file with mode "solve2d"
        #[arg(long)]
        config: PathBuf,
        /// Output directory (solution.vtk, report.json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan the rate plane and extract the quarter-flux contour
    Phase {
        /// Diffusion coefficient
        #[arg(long)]
        epsilon: f64,
        /// Rate increment of the scan grid
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// Number of 1D mesh cells per sample
        #[arg(long, default_value_t = 200)]
        cells: usize,
        /// Worker threads for the scan (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (phase.csv, contour.csv)
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form 1D profiles and the quarter-flux boundary curve
    Analytic {
        /// Diffusion coefficient
        #[arg(long)]
        epsilon: f64,
        /// Inflow rate (with --beta: also emit the profile)
        #[arg(long)]
        alpha: Option<f64>,
        /// Outflow rate
        #[arg(long)]
        beta: Option<f64>,
        /// Samples per curve branch and per profile
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Output directory (curve.csv and optionally profile.csv)
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a corridor or obstacle mesh file
    Mesh {
        /// Geometry kind: corridor or obstacle
        #[arg(long)]
        geometry: String,
        /// Cells along the corridor
        #[arg(long)]
        nx: usize,
        /// Cells across the corridor
        #[arg(long)]
        ny: usize,
        /// Obstacle disk as "cx,cy,r" (obstacle geometry only)
        #[arg(long)]
        obstacle: Option<String>,
        /// Output mesh file
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one parsed command, returning the process exit code.
pub fn run(cli: Cli) -> Result<i32, AppError> {
    match cli.command {
        Command::Solve1d { epsilon, alpha, beta, cells, tau, tol, eta, max_iter, out } => {
            let cfg = Solve1dConfig {
                epsilon,
                alpha,
                beta,
                cells,
                solver: IterationConfig {
                    tau,
                    tol,
                    eta,
                    max_iter,
                    ..IterationConfig::default()
                },
            };
            run_solve1d(&cfg, &out)
        }
        Command::Solve2d { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|source| AppError::Io {
                path: config.display().to_string(),
                source,
            })?;
            match parse_config(&text)? {
                RunConfig::Solve2d(cfg) => run_solve2d(&cfg, &out),
                other => Err(AppError::ModeMismatch {
                    command: "solve2d",
                    found: mode_name(&other),
                }),
            }
        }
        Command::Phase { epsilon, step, cells, jobs, out } => {
            run_phase(epsilon, step, cells, jobs, &out)
        }
        Command::Analytic { epsilon, alpha, beta, samples, out } => {
            run_analytic(epsilon, alpha, beta, samples, &out)
        }
        Command::Mesh { geometry, nx, ny, obstacle, out } => {
            run_mesh(&geometry, nx, ny, obstacle.as_deref(), &out)
        }
    }
}

fn mode_name(cfg: &RunConfig) -> &'static str {
    match cfg {
        RunConfig::Solve1d(_) => "solve1d",
        RunConfig::Solve2d(_) => "solve2d",
        RunConfig::Phase(_) => "phase",
        RunConfig::Analytic(_) => "analytic",
        RunConfig::Mesh(_) => "mesh",
    }
}

#[derive(Serialize)]
struct FullReport<'a> {
    solve: &'a SolveReport,
    estimates: &'a EstimateReport,
}

fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|source| AppError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text).map_err(|source| AppError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_report(
    dir: &Path,
    solve: &SolveReport,
    estimates: &EstimateReport,
) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(&FullReport { solve, estimates })?;
    text.push('\n');
    write_file(&dir.join("report.json"), &text)
}

/// Density and pointwise flux along a 1D solution, one row per degree of
/// freedom (two per cell, so jumps at cell interfaces stay visible).
fn profile_csv(rho: &DgFunction, epsilon: f64, velocity: &VelocityField) -> String {
    let mesh = rho.mesh();
    let mut s = String::from("x,rho,j\n");
    for c in 0..mesh.n_cells() {
        let vals = rho.cell_values(c);
        let slope = rho.gradient_in_cell(c)[0];
        let u = velocity.cell_velocity[c][0];
        for (k, &gv) in mesh.cell_vertices(c).iter().enumerate() {
            let x = mesh.vertices[gv][0];
            let r = vals[k];
            let j = -epsilon * slope + r * (1.0 - r) * u;
            s.push_str(&format!("{},{},{}\n", g15(x), g15(r), g15(j)));
        }
    }
    s
}

fn run_solve1d(cfg: &Solve1dConfig, out: &Path) -> Result<i32, AppError> {
    cfg.solver.validate().map_err(AppError::Solve)?;
    let mesh = Arc::new(build_interval_mesh(cfg.cells)?);
    let params = ModelParams::interval(cfg.epsilon, cfg.alpha, cfg.beta);
    params.validate()?;
    let velocity = resolve(&params.velocity, &mesh, &params.segments)?;
    let (rho, report) =
        solve_stationary_with_report(&mesh, &params, &velocity, &cfg.solver, None)?;
    let estimates = check_phase_estimates(&rho, &params, &velocity)?;
    ensure_dir(out)?;
    write_file(&out.join("profile.csv"), &profile_csv(&rho, cfg.epsilon, &velocity))?;
    write_report(out, &report, &estimates)?;
    Ok(if report.converged { 0 } else { 2 })
}

fn corridor_mesh_for(cfg: &Solve2dConfig) -> Result<Mesh, MeshError> {
    let layout = DoorLayout {
        inflow: cfg.inflow.iter().map(|d| d.span.clone()).collect::<Vec<Door>>(),
        outflow: cfg.outflow.iter().map(|d| d.span.clone()).collect(),
    };
    match cfg.obstacle {
        Some(obs) => build_obstacle_mesh(cfg.nx, cfg.ny, &layout, obs.center, obs.radius),
        None => build_corridor_mesh(cfg.nx, cfg.ny, &layout),
    }
}

fn run_solve2d(cfg: &Solve2dConfig, out: &Path) -> Result<i32, AppError> {
    cfg.solver.validate().map_err(AppError::Solve)?;
    let mesh = Arc::new(corridor_mesh_for(cfg)?);
    let mut segments: Vec<BoundarySegment> = Vec::new();
    for d in &cfg.inflow {
        segments.push(BoundarySegment::inflow(&d.span.tag, d.rate));
    }
    for d in &cfg.outflow {
        segments.push(BoundarySegment::outflow(&d.span.tag, d.rate));
    }
    segments.push(BoundarySegment::wall(WALL_TAG));
    let params = ModelParams {
        epsilon: cfg.epsilon,
        velocity: cfg.velocity.clone(),
        segments,
    };
    params.validate()?;
    let velocity = resolve(&params.velocity, &mesh, &params.segments)?;
    let (rho, report) =
        solve_stationary_with_report(&mesh, &params, &velocity, &cfg.solver, None)?;
    let estimates = check_phase_estimates(&rho, &params, &velocity)?;
    ensure_dir(out)?;
    write_vtk(&out.join("solution.vtk"), &rho, &velocity)?;
    write_report(out, &report, &estimates)?;
    Ok(if report.converged { 0 } else { 2 })
}

fn phase_csv(grid: &PhaseGrid) -> String {
    let mut s = String::from("alpha,beta,j,phase,converged\n");
    for (ia, &alpha) in grid.alphas.iter().enumerate() {
        for (ib, &beta) in grid.betas.iter().enumerate() {
            let (j, phase, converged) = grid.at(ia, ib);
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                g15(alpha),
                g15(beta),
                g15(j),
                phase,
                converged
            ));
        }
    }
    s
}

fn contour_csv(chains: &[Vec<[f64; 2]>]) -> String {
    let mut s = String::from("chain,alpha,beta\n");
    for (k, chain) in chains.iter().enumerate() {
        for p in chain {
            s.push_str(&format!("{k},{},{}\n", g15(p[0]), g15(p[1])));
        }
    }
    s
}

fn run_phase(
    epsilon: f64,
    step: f64,
    cells: usize,
    jobs: Option<usize>,
    out: &Path,
) -> Result<i32, AppError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(AppError::Usage(format!("scan step {step} must lie in (0, 0.5]")));
    }
    if cells == 0 {
        return Err(AppError::Usage("cell count must be at least 1".into()));
    }
    let samples = rate_samples(step);
    // The fixed points do not depend on the pseudo-time step, and the larger
    // (diffusion-scaled) step speeds up the slowly equilibrating samples on
    // the alpha = beta coexistence diagonal considerably.
    let cfg = IterationConfig::scaled_to(epsilon);
    let grid = match jobs {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| AppError::Usage(format!("cannot build a {k}-thread pool: {e}")))?;
            pool.install(|| scan_phase_diagram(epsilon, &samples, &samples, cells, &cfg))?
        }
        None => scan_phase_diagram(epsilon, &samples, &samples, cells, &cfg)?,
    };
    let chains = extract_quarter_contour(&grid);
    ensure_dir(out)?;
    write_file(&out.join("phase.csv"), &phase_csv(&grid))?;
    write_file(&out.join("contour.csv"), &contour_csv(&chains))?;
    Ok(if grid.converged.iter().all(|&c| c) { 0 } else { 2 })
}

fn run_analytic(
    epsilon: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    samples: usize,
    out: &Path,
) -> Result<i32, AppError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AppError::Usage(format!(
            "diffusion coefficient {epsilon} must be positive and finite"
        )));
    }
    if samples < 2 {
        return Err(AppError::Usage("sample count must be at least 2".into()));
    }
    if alpha.is_some() != beta.is_some() {
        return Err(AppError::Usage(
            "give both --alpha and --beta for a profile, or neither for the curve only".into(),
        ));
    }
    ensure_dir(out)?;
    let curve = phase_boundary_curve(epsilon, samples)?;
    let mut s = String::from("alpha,beta,branch\n");
    for p in &curve {
        s.push_str(&format!("{},{},{}\n", g15(p.alpha), g15(p.beta), p.branch));
    }
    write_file(&out.join("curve.csv"), &s)?;
    if let (Some(alpha), Some(beta)) = (alpha, beta) {
        let sol = explicit_profile(epsilon, alpha, beta)?;
        let j = sol.flux();
        let mut s = String::from("x,rho,j\n");
        for i in 0..=samples {
            let x = i as f64 / samples as f64;
            s.push_str(&format!("{},{},{}\n", g15(x), g15(sol.eval(x)), g15(j)));
        }
        write_file(&out.join("profile.csv"), &s)?;
    }
    Ok(0)
}

fn run_mesh(
    geometry: &str,
    nx: usize,
    ny: usize,
    obstacle: Option<&str>,
    out: &Path,
) -> Result<i32, AppError> {
    let layout = DoorLayout::standard();
    let mesh = match geometry {
        "corridor" => {
            if obstacle.is_some() {
                return Err(AppError::Usage(
                    "--obstacle only applies to the obstacle geometry".into(),
                ));
            }
            build_corridor_mesh(nx, ny, &layout)?
        }
        "obstacle" => {
            let spec = obstacle.ok_or_else(|| {
                AppError::Usage("the obstacle geometry needs --obstacle cx,cy,r".into())
            })?;
            let parts: Vec<f64> = spec
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    AppError::Usage(format!("cannot parse --obstacle \"{spec}\" as cx,cy,r"))
                })?;
            if parts.len() != 3 {
                return Err(AppError::Usage(format!(
                    "--obstacle needs exactly three numbers, got {}",
                    parts.len()
                )));
            }
            build_obstacle_mesh(nx, ny, &layout, [parts[0], parts[1]], parts[2])?
        }
        other => {
            return Err(AppError::Usage(format!(
                "unknown geometry \"{other}\"; expected corridor or obstacle"
            )))
        }
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_mesh(&mesh, out)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_csv_reports_pointwise_flux() {
        let mesh = Arc::new(build_interval_mesh(2).unwrap());
        let params = ModelParams::interval(0.1, 0.3, 0.7);
        let velocity = resolve(&params.velocity, &mesh, &params.segments).unwrap();
        let rho = DgFunction::constant(Arc::clone(&mesh), 0.3);
        let text = profile_csv(&rho, 0.1, &velocity);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,rho,j");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0.3,0.21");
        assert!(lines[4].starts_with("1,0.3,"));
    }

    #[test]
    fn contour_csv_orders_chains() {
        let chains = vec![
            vec![[0.0, 0.25], [0.25, 0.0]],
            vec![[0.5, 0.5], [0.6, 0.6]],
        ];
        let text = contour_csv(&chains);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "chain,alpha,beta");
        assert_eq!(lines[1], "0,0,0.25");
        assert_eq!(lines[3], "1,0.5,0.5");
    }

    #[test]
    fn mesh_command_rejects_bad_obstacle_strings() {
        let err = run_mesh("obstacle", 10, 10, Some("1.0,0.5"), Path::new("/tmp/unused"))
            .unwrap_err();
        assert!(err.to_string().contains("three numbers"), "{err}");
        let err =
            run_mesh("obstacle", 10, 10, Some("a,b,c"), Path::new("/tmp/unused")).unwrap_err();
        assert!(err.to_string().contains("cannot parse"), "{err}");
        let err = run_mesh("spiral", 10, 10, None, Path::new("/tmp/unused")).unwrap_err();
        assert!(err.to_string().contains("spiral"), "{err}");
    }
}
