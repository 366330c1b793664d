//! Run configuration: flat `key=value` text files with `#` comments, plus
//! command-line overrides whose flag names mirror the keys (`mesh-sizes` in
//! a file is `--mesh-sizes` on the command line). Arrays are comma
//! separated. No external config dependency on purpose: the format stays
//! diff-friendly and language agnostic.

use crate::basis::Method;
use crate::mesh::{CvKind, Mesh};
use crate::problem::{self, Problem};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("UnknownKey: {0}")]
    UnknownKey(String),
    #[error("InvalidValue: key {key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("MalformedLine: line {line}: expected key=value, got {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("InvalidConfig: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Example1,
    Example2,
    Custom,
}

/// Which methods a study runs; `Both` expands to FEM and SGFEM series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    Fem,
    Sgfem,
    Both,
}

impl MethodSelection {
    pub fn methods(&self) -> Vec<Method> {
        match self {
            MethodSelection::Fem => vec![Method::Fem],
            MethodSelection::Sgfem => vec![Method::Sgfem],
            MethodSelection::Both => vec![Method::Fem, Method::Sgfem],
        }
    }
}

/// Source families available to custom problems: `scale`, `scale * x`, or
/// `scale * sin(pi x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Constant,
    Linear,
    SinPi,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub params: Option<Vec<f64>>,
    pub method: MethodSelection,
    pub orders: Vec<usize>,
    pub mesh_sizes: Vec<usize>,
    pub constrained: bool,
    pub volumes: CvKind,
    pub tol: f64,
    pub max_iter: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    // custom-problem description: piecewise-constant kappa
    pub kappa: Vec<f64>,
    pub interfaces: Vec<f64>,
    pub source_kind: SourceKind,
    pub source_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemKind::Example1,
            params: None,
            method: MethodSelection::Sgfem,
            orders: vec![1],
            mesh_sizes: vec![10, 20, 40, 80, 160],
            constrained: false,
            volumes: CvKind::DualMidpoint,
            tol: 1e-10,
            max_iter: 50,
            output_dir: PathBuf::from("."),
            seed: 0,
            kappa: vec![1.0],
            interfaces: vec![],
            source_kind: SourceKind::Constant,
            source_scale: 1.0,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| ConfigError::InvalidValue {
                key: key.into(),
                message: format!("cannot parse {s:?}"),
            })
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| ConfigError::InvalidValue {
            key: key.into(),
            message: format!("cannot parse {value:?}"),
        })
}

impl RunConfig {
    /// Parse a `key=value` file; later lines win.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine {
                line: lineno + 1,
                content: raw.to_string(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Set one key. Flag overrides funnel through here as well.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "problem" => {
                self.problem = match value {
                    "example1" => ProblemKind::Example1,
                    "example2" => ProblemKind::Example2,
                    "custom" => ProblemKind::Custom,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            message: format!("unknown problem {other:?}"),
                        })
                    }
                }
            }
            "params" => self.params = Some(parse_list(key, value)?),
            "method" => {
                self.method = match value {
                    "fem" => MethodSelection::Fem,
                    "sgfem" => MethodSelection::Sgfem,
                    "both" => MethodSelection::Both,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            message: format!("unknown method {other:?}"),
                        })
                    }
                }
            }
            "orders" => self.orders = parse_list(key, value)?,
            "mesh-sizes" => self.mesh_sizes = parse_list(key, value)?,
            "constrained" => self.constrained = parse_scalar(key, value)?,
            "volumes" => {
                self.volumes = match value {
                    "whole-domain" => CvKind::WholeDomain,
                    "per-subdomain" => CvKind::PerSubdomain,
                    "dual-midpoint" => CvKind::DualMidpoint,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            message: format!("unknown control-volume kind {other:?}"),
                        })
                    }
                }
            }
            "tol" => self.tol = parse_scalar(key, value)?,
            "max-iter" => self.max_iter = parse_scalar(key, value)?,
            "output-dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_scalar(key, value)?,
            "kappa" => self.kappa = parse_list(key, value)?,
            "interfaces" => self.interfaces = parse_list(key, value)?,
            "source-kind" => {
                self.source_kind = match value {
                    "constant" => SourceKind::Constant,
                    "linear" => SourceKind::Linear,
                    "sinpi" => SourceKind::SinPi,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            message: format!("unknown source kind {other:?}"),
                        })
                    }
                }
            }
            "source-scale" => self.source_scale = parse_scalar(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Cross-field validation: admissible orders, strictly increasing mesh
    /// sizes, and every (N, interfaces) pair building a legal mesh.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.orders.is_empty() || self.orders.iter().any(|&p| p == 0 || p > 4) {
            return Err(ConfigError::Invalid(format!(
                "orders must be within 1..=4, got {:?}",
                self.orders
            )));
        }
        if self.mesh_sizes.is_empty() {
            return Err(ConfigError::Invalid("mesh-sizes must be nonempty".into()));
        }
        if !self.mesh_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(ConfigError::Invalid(format!(
                "mesh-sizes must be strictly increasing, got {:?}",
                self.mesh_sizes
            )));
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        let problem = self.build_problem()?;
        for &n in &self.mesh_sizes {
            Mesh::uniform(problem.domain_length, n, &problem.interfaces)?;
        }
        Ok(())
    }

    /// Instantiate the configured problem.
    pub fn build_problem(&self) -> Result<Problem, ConfigError> {
        match self.problem {
            ProblemKind::Example1 => {
                let a = match &self.params {
                    None => [0.01, -6.0, 1.0],
                    Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
                    Some(v) => {
                        return Err(ConfigError::Invalid(format!(
                            "example1 takes 3 parameters, got {}",
                            v.len()
                        )))
                    }
                };
                Ok(problem::example1(a)?)
            }
            ProblemKind::Example2 => {
                let a = match &self.params {
                    None => [1.0, 0.05, 100.0, 0.1],
                    Some(v) if v.len() == 4 => [v[0], v[1], v[2], v[3]],
                    Some(v) => {
                        return Err(ConfigError::Invalid(format!(
                            "example2 takes 4 parameters, got {}",
                            v.len()
                        )))
                    }
                };
                Ok(problem::example2(a)?)
            }
            ProblemKind::Custom => {
                let scale = self.source_scale;
                let source: problem::SourceFn = match self.source_kind {
                    SourceKind::Constant => Arc::new(move |_| scale),
                    SourceKind::Linear => Arc::new(move |x| scale * x),
                    SourceKind::SinPi => {
                        Arc::new(move |x| scale * (std::f64::consts::PI * x).sin())
                    }
                };
                Ok(problem::piecewise_constant_problem(
                    self.interfaces.clone(),
                    self.kappa.clone(),
                    source,
                    1.0,
                )?)
            }
        }
    }
}
