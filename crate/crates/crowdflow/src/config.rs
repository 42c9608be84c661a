//! JSON run configuration: parsing, defaults, and validation.
//!
//! A configuration selects one of five run modes and carries the model,
//! geometry, and solver settings for it. Unknown keys are rejected and
//! validation failures name the offending key.

use crate::dg::IterationConfig;
use crate::mesh::Door;
use crate::model::VelocitySpec;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing required key \"{key}\" for mode \"{mode}\"")]
    Missing { key: &'static str, mode: String },
    #[error("invalid value for \"{key}\": {msg}")]
    Invalid { key: String, msg: String },
}

/// One inflow or outflow opening on the corridor boundary.
#[derive(Debug, Clone)]
pub struct DoorConfig {
    pub span: Door,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct Solve1dConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub cells: usize,
    pub solver: IterationConfig,
}

#[derive(Debug, Clone)]
pub struct Solve2dConfig {
    pub epsilon: f64,
    pub nx: usize,
    pub ny: usize,
    pub inflow: Vec<DoorConfig>,
    pub outflow: Vec<DoorConfig>,
    pub velocity: VelocitySpec,
    pub obstacle: Option<ObstacleConfig>,
    pub solver: IterationConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct ObstacleConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub epsilon: f64,
    pub step: f64,
    pub cells: usize,
    pub solver: IterationConfig,
}

#[derive(Debug, Clone)]
pub struct AnalyticConfig {
    pub epsilon: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub obstacle: Option<ObstacleConfig>,
}

/// A fully validated run request.
#[derive(Debug, Clone)]
pub enum RunConfig {
    Solve1d(Solve1dConfig),
    Solve2d(Solve2dConfig),
    Phase(PhaseConfig),
    Analytic(AnalyticConfig),
    Mesh(MeshConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: String,
    epsilon: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    cells: Option<usize>,
    samples: Option<usize>,
    nx: Option<usize>,
    ny: Option<usize>,
    doors: Option<RawDoors>,
    velocity: Option<RawVelocity>,
    obstacle: Option<RawObstacle>,
    solver: Option<RawSolver>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoors {
    inflow: Vec<RawDoor>,
    outflow: Vec<RawDoor>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoor {
    lo: f64,
    hi: f64,
    rate: f64,
    tag: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawVelocity {
    Name(String),
    Linear { linear: [f64; 2] },
    Constant { constant: [f64; 2] },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    center: [f64; 2],
    radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tau: Option<f64>,
    tol: Option<f64>,
    eta: Option<f64>,
    max_iter: Option<usize>,
    initial_density: Option<f64>,
}

fn require<T>(v: Option<T>, key: &'static str, mode: &str) -> Result<T, ConfigError> {
    v.ok_or(ConfigError::Missing { key, mode: mode.to_string() })
}

/// Checks a boundary rate against the admissible range.
pub fn validate_rate(key: &str, value: f64) -> Result<f64, ConfigError> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(ConfigError::Invalid {
            key: key.to_string(),
            msg: format!("rate {value} lies outside the admissible range [0, 1]"),
        });
    }
    Ok(value)
}

fn validate_epsilon(value: f64) -> Result<f64, ConfigError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(ConfigError::Invalid {
            key: "epsilon".to_string(),
            msg: format!("diffusion coefficient {value} must be positive and finite"),
        });
    }
    Ok(value)
}

fn solver_config(raw: Option<RawSolver>) -> Result<IterationConfig, ConfigError> {
    let mut cfg = IterationConfig::default();
    let Some(raw) = raw else { return Ok(cfg) };
    if let Some(tau) = raw.tau {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "solver.tau".into(),
                msg: format!("pseudo-time step {tau} must be positive and finite"),
            });
        }
        cfg.tau = tau;
    }
    if let Some(tol) = raw.tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(ConfigError::Invalid {
                key: "solver.tol".into(),
                msg: format!("tolerance {tol} must be positive"),
            });
        }
        cfg.tol = tol;
    }
    if let Some(eta) = raw.eta {
        if eta.is_nan() || eta <= 0.0 {
            return Err(ConfigError::Invalid {
                key: "solver.eta".into(),
                msg: format!("penalty {eta} must be positive"),
            });
        }
        cfg.eta = eta;
    }
    if let Some(mi) = raw.max_iter {
        if mi == 0 {
            return Err(ConfigError::Invalid {
                key: "solver.max_iter".into(),
                msg: "iteration budget must be at least 1".into(),
            });
        }
        cfg.max_iter = mi;
    }
    if let Some(rho0) = raw.initial_density {
        if !(0.0..=1.0).contains(&rho0) {
            return Err(ConfigError::Invalid {
                key: "solver.initial_density".into(),
                msg: format!("starting density {rho0} must lie in [0, 1]"),
            });
        }
        cfg.initial_density = rho0;
    }
    Ok(cfg)
}

fn door_configs(
    raw: Vec<RawDoor>,
    side: &str,
) -> Result<Vec<DoorConfig>, ConfigError> {
    let mut out = Vec::with_capacity(raw.len());
    for (i, d) in raw.into_iter().enumerate() {
        let key = format!("doors.{side}[{i}]");
        if !(d.lo.is_finite() && d.hi.is_finite() && 0.0 <= d.lo && d.lo < d.hi && d.hi <= 1.0) {
            return Err(ConfigError::Invalid {
                key: format!("{key}.lo/hi"),
                msg: format!("span [{}, {}] must satisfy 0 <= lo < hi <= 1", d.lo, d.hi),
            });
        }
        validate_rate(&format!("{key}.rate"), d.rate)?;
        let tag = d.tag.unwrap_or_else(|| format!("{side}_{i}"));
        out.push(DoorConfig { span: Door { lo: d.lo, hi: d.hi, tag }, rate: d.rate });
    }
    Ok(out)
}

fn velocity_spec(raw: Option<RawVelocity>) -> Result<VelocitySpec, ConfigError> {
    match raw {
        None => Ok(VelocitySpec::GradientOfHarmonic),
        Some(RawVelocity::Name(name)) => match name.as_str() {
            "harmonic" => Ok(VelocitySpec::GradientOfHarmonic),
            other => Err(ConfigError::Invalid {
                key: "velocity".into(),
                msg: format!(
                    "unknown velocity \"{other}\"; use \"harmonic\", {{\"linear\": [gx, gy]}}, \
                     or {{\"constant\": [ux, uy]}}"
                ),
            }),
        },
        Some(RawVelocity::Linear { linear }) => Ok(VelocitySpec::GradientOfLinear(linear)),
        Some(RawVelocity::Constant { constant }) => Ok(VelocitySpec::Constant(constant)),
    }
}

fn obstacle_config(raw: Option<RawObstacle>) -> Result<Option<ObstacleConfig>, ConfigError> {
    let Some(raw) = raw else { return Ok(None) };
    if !(raw.radius > 0.0 && raw.radius.is_finite()) {
        return Err(ConfigError::Invalid {
            key: "obstacle.radius".into(),
            msg: format!("radius {} must be positive", raw.radius),
        });
    }
    Ok(Some(ObstacleConfig { center: raw.center, radius: raw.radius }))
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let mode = raw.mode.clone();
    let solver = solver_config(raw.solver)?;
    match mode.as_str() {
        "solve1d" => {
            let epsilon = validate_epsilon(require(raw.epsilon, "epsilon", &mode)?)?;
            let alpha = validate_rate("alpha", require(raw.alpha, "alpha", &mode)?)?;
            let beta = validate_rate("beta", require(raw.beta, "beta", &mode)?)?;
            let cells = raw.cells.unwrap_or(200);
            if cells == 0 {
                return Err(ConfigError::Invalid {
                    key: "cells".into(),
                    msg: "cell count must be at least 1".into(),
                });
            }
            Ok(RunConfig::Solve1d(Solve1dConfig { epsilon, alpha, beta, cells, solver }))
        }
        "solve2d" => {
            let epsilon = validate_epsilon(require(raw.epsilon, "epsilon", &mode)?)?;
            let nx = require(raw.nx, "nx", &mode)?;
            let ny = require(raw.ny, "ny", &mode)?;
            if nx == 0 || ny == 0 {
                return Err(ConfigError::Invalid {
                    key: "nx/ny".into(),
                    msg: "grid resolution must be at least 1 in each direction".into(),
                });
            }
            let doors = require(raw.doors, "doors", &mode)?;
            let inflow = door_configs(doors.inflow, "inflow")?;
            let outflow = door_configs(doors.outflow, "outflow")?;
            if inflow.is_empty() || outflow.is_empty() {
                return Err(ConfigError::Invalid {
                    key: "doors".into(),
                    msg: "at least one inflow and one outflow door are required".into(),
                });
            }
            let mut tags: Vec<&str> = inflow
                .iter()
                .chain(outflow.iter())
                .map(|d| d.span.tag.as_str())
                .collect();
            tags.sort_unstable();
            if tags.windows(2).any(|w| w[0] == w[1]) {
                return Err(ConfigError::Invalid {
                    key: "doors".into(),
                    msg: "door tags must be unique".into(),
                });
            }
            Ok(RunConfig::Solve2d(Solve2dConfig {
                epsilon,
                nx,
                ny,
                inflow,
                outflow,
                velocity: velocity_spec(raw.velocity)?,
                obstacle: obstacle_config(raw.obstacle)?,
                solver,
            }))
        }
        "phase" => {
            let epsilon = validate_epsilon(require(raw.epsilon, "epsilon", &mode)?)?;
            let step = raw.step.unwrap_or(0.02);
            if !(step > 0.0 && step <= 0.5) {
                return Err(ConfigError::Invalid {
                    key: "step".into(),
                    msg: format!("scan step {step} must lie in (0, 0.5]"),
                });
            }
            let cells = raw.cells.unwrap_or(200);
            if cells == 0 {
                return Err(ConfigError::Invalid {
                    key: "cells".into(),
                    msg: "cell count must be at least 1".into(),
                });
            }
            Ok(RunConfig::Phase(PhaseConfig { epsilon, step, cells, solver }))
        }
        "analytic" => {
            let epsilon = validate_epsilon(require(raw.epsilon, "epsilon", &mode)?)?;
            let alpha = raw.alpha.map(|a| validate_rate("alpha", a)).transpose()?;
            let beta = raw.beta.map(|b| validate_rate("beta", b)).transpose()?;
            if alpha.is_some() != beta.is_some() {
                return Err(ConfigError::Invalid {
                    key: "alpha/beta".into(),
                    msg: "give both rates for a profile, or neither for the curve only".into(),
                });
            }
            let samples = raw.samples.unwrap_or(200);
            if samples < 2 {
                return Err(ConfigError::Invalid {
                    key: "samples".into(),
                    msg: "sample count must be at least 2".into(),
                });
            }
            Ok(RunConfig::Analytic(AnalyticConfig { epsilon, alpha, beta, samples }))
        }
        "mesh" => {
            let nx = require(raw.nx, "nx", &mode)?;
            let ny = require(raw.ny, "ny", &mode)?;
            if nx == 0 || ny == 0 {
                return Err(ConfigError::Invalid {
                    key: "nx/ny".into(),
                    msg: "grid resolution must be at least 1 in each direction".into(),
                });
            }
            Ok(RunConfig::Mesh(MeshConfig {
                nx,
                ny,
                obstacle: obstacle_config(raw.obstacle)?,
            }))
        }
        other => Err(ConfigError::Invalid {
            key: "mode".into(),
            msg: format!(
                "unknown mode \"{other}\"; expected solve1d, solve2d, phase, analytic, or mesh"
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_solve1d_fills_defaults() {
        let cfg = parse_config(
            r#"{"mode":"solve1d","epsilon":0.1,"alpha":0.5,"beta":0.5,"cells":200}"#,
        )
        .unwrap();
        let RunConfig::Solve1d(c) = cfg else { panic!("wrong mode") };
        assert_eq!(c.cells, 200);
        assert_eq!(c.solver.tau, 0.01);
        assert_eq!(c.solver.tol, 1e-8);
        assert_eq!(c.solver.eta, 10.0);
        assert_eq!(c.solver.initial_density, 0.5);
    }

    #[test]
    fn out_of_range_rate_is_rejected_with_key() {
        let err = parse_config(r#"{"mode":"solve1d","epsilon":0.1,"alpha":1.5,"beta":0.5}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha"), "{msg}");
        assert!(msg.contains("[0, 1]"), "{msg}");
    }

    #[test]
    fn missing_epsilon_is_reported() {
        let err = parse_config(r#"{"mode":"solve1d","alpha":0.5,"beta":0.5}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { key: "epsilon", .. }), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(
            r#"{"mode":"solve1d","epsilon":0.1,"alpha":0.5,"beta":0.5,"alpa":0.2}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Json(_)), "{err}");
        assert!(err.to_string().contains("alpa"), "{err}");
    }

    #[test]
    fn full_corridor_config_parses() {
        let text = r#"{
            "mode": "solve2d",
            "epsilon": 0.1,
            "nx": 40, "ny": 20,
            "doors": {
                "inflow": [
                    {"lo": 0.15, "hi": 0.35, "rate": 0.2},
                    {"lo": 0.65, "hi": 0.85, "rate": 0.4, "tag": "upper_in"}
                ],
                "outflow": [
                    {"lo": 0.15, "hi": 0.35, "rate": 0.4},
                    {"lo": 0.65, "hi": 0.85, "rate": 0.2}
                ]
            },
            "velocity": "harmonic",
            "solver": {"tau": 0.02, "max_iter": 5000}
        }"#;
        let RunConfig::Solve2d(c) = parse_config(text).unwrap() else { panic!("wrong mode") };
        assert_eq!(c.inflow.len(), 2);
        assert_eq!(c.inflow[0].span.tag, "inflow_0");
        assert_eq!(c.inflow[1].span.tag, "upper_in");
        assert_eq!(c.outflow[1].rate, 0.2);
        assert!(matches!(c.velocity, VelocitySpec::GradientOfHarmonic));
        assert_eq!(c.solver.tau, 0.02);
        assert_eq!(c.solver.max_iter, 5000);
        assert_eq!(c.solver.tol, 1e-8);
    }

    #[test]
    fn duplicate_door_tags_are_rejected() {
        let text = r#"{
            "mode": "solve2d", "epsilon": 0.1, "nx": 10, "ny": 10,
            "doors": {
                "inflow": [{"lo": 0.1, "hi": 0.3, "rate": 0.2, "tag": "door"}],
                "outflow": [{"lo": 0.1, "hi": 0.3, "rate": 0.2, "tag": "door"}]
            }
        }"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("unique"), "{err}");
    }

    #[test]
    fn bad_door_span_names_the_door() {
        let text = r#"{
            "mode": "solve2d", "epsilon": 0.1, "nx": 10, "ny": 10,
            "doors": {
                "inflow": [{"lo": 0.5, "hi": 0.3, "rate": 0.2}],
                "outflow": [{"lo": 0.1, "hi": 0.3, "rate": 0.2}]
            }
        }"#;
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("doors.inflow[0]"), "{msg}");
    }

    #[test]
    fn velocity_variants_parse() {
        let base = |v: &str| {
            format!(
                r#"{{"mode":"solve2d","epsilon":0.1,"nx":4,"ny":5,"velocity":{v},
                "doors":{{"inflow":[{{"lo":0.2,"hi":0.4,"rate":0.5}}],
                          "outflow":[{{"lo":0.2,"hi":0.4,"rate":0.5}}]}}}}"#
            )
        };
        let RunConfig::Solve2d(c) = parse_config(&base("{\"linear\":[1.0,0.5]}")).unwrap()
        else {
            panic!()
        };
        assert!(matches!(c.velocity, VelocitySpec::GradientOfLinear([1.0, 0.5])));
        let RunConfig::Solve2d(c) = parse_config(&base("{\"constant\":[0.0,1.0]}")).unwrap()
        else {
            panic!()
        };
        assert!(matches!(c.velocity, VelocitySpec::Constant([0.0, 1.0])));
        let err = parse_config(&base("\"rotational\"")).unwrap_err();
        assert!(err.to_string().contains("rotational"), "{err}");
    }

    #[test]
    fn phase_and_analytic_and_mesh_modes_parse() {
        let RunConfig::Phase(p) =
            parse_config(r#"{"mode":"phase","epsilon":0.1,"step":0.05}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(p.step, 0.05);
        assert_eq!(p.cells, 200);
        let RunConfig::Analytic(a) =
            parse_config(r#"{"mode":"analytic","epsilon":0.01,"alpha":0.7,"beta":0.7}"#)
                .unwrap()
        else {
            panic!()
        };
        assert_eq!(a.alpha, Some(0.7));
        let RunConfig::Mesh(m) = parse_config(
            r#"{"mode":"mesh","nx":40,"ny":20,"obstacle":{"center":[1.0,0.5],"radius":0.2}}"#,
        )
        .unwrap() else {
            panic!()
        };
        assert_eq!(m.nx, 40);
        assert!(m.obstacle.is_some());
        let err =
            parse_config(r#"{"mode":"analytic","epsilon":0.1,"alpha":0.5}"#).unwrap_err();
        assert!(err.to_string().contains("both rates"), "{err}");
    }

    #[test]
    fn unknown_mode_is_rejected() {
        let err = parse_config(r#"{"mode":"simulate"}"#).unwrap_err();
        assert!(err.to_string().contains("simulate"), "{err}");
    }
}
