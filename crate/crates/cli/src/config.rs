//! Run configuration files: the JSON manifest describing a job, plus
//! command-line overrides and validation into ready-to-run pieces.

use affabs::abstraction::{AbstractionConfig, OutputMode, StartRegion};
use affabs::funcs::{
    estimate_smoothness_bound, instantiate_builtin, parse_function_spec, ConstantProvenance,
    SmoothnessClass, SmoothnessInfo,
};
use affabs::mesh::{build_mesh, DomainBox, GridIndex, UniformMesh};
use affabs::FunctionSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not valid JSON: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Onestep,
    Incremental,
    Both,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "onestep" => Ok(Method::Onestep),
            "incremental" => Ok(Method::Incremental),
            "both" => Ok(Method::Both),
            other => Err(format!("unknown method `{other}` (onestep|incremental|both)")),
        }
    }
}

impl Method {
    pub fn runs_onestep(self) -> bool {
        matches!(self, Method::Onestep | Method::Both)
    }
    pub fn runs_incremental(self) -> bool {
        matches!(self, Method::Incremental | Method::Both)
    }
}

/// Where the vector field comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSource {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    DslFile { dsl_file: PathBuf },
    DslInline { dsl: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub dim_input: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsPerDim {
    Same(usize),
    PerDim(Vec<usize>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessConfig {
    pub class: SmoothnessClass,
    /// User-supplied constant; sound sigma when correct.
    pub constant: Option<f64>,
    /// Estimate the constant by sampling instead; flagged unsound.
    pub estimate_samples: Option<usize>,
}

/// One experiment manifest. Optional fields fall back to defaults; command
/// line flags override after parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub function: FunctionSource,
    /// Absent for builtins that define their own bounds.
    pub domain: Option<DomainConfig>,
    pub points_per_dim: PointsPerDim,
    pub method: Method,
    pub budget: Option<usize>,
    pub memory_cap: Option<usize>,
    #[serde(default)]
    pub start_region: Option<StartRegion>,
    #[serde(default)]
    pub warm_start_points: Vec<Vec<usize>>,
    #[serde(default)]
    pub expansion_order: Option<Vec<usize>>,
    #[serde(default)]
    pub smoothness: Option<SmoothnessConfig>,
    #[serde(default)]
    pub output_mode: Option<OutputMode>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Flag-level overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub budget: Option<usize>,
    pub method: Option<Method>,
    pub memory_cap: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Everything needed to run: the field, mesh, and driver configuration.
pub struct Job {
    pub spec: FunctionSpec,
    pub mesh: UniformMesh,
    pub method: Method,
    pub config: AbstractionConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| ConfigError::Json { path: path.to_path_buf(), message: e.to_string() })
}

pub fn apply_overrides(config: &mut RunConfig, overrides: &Overrides) {
    if let Some(v) = overrides.budget {
        config.budget = Some(v);
    }
    if let Some(v) = overrides.method {
        config.method = v;
    }
    if let Some(v) = overrides.memory_cap {
        config.memory_cap = Some(v);
    }
    if let Some(v) = overrides.seed {
        config.seed = Some(v);
    }
    if let Some(v) = &overrides.out_dir {
        config.out_dir = Some(v.clone());
    }
}

fn build_spec(source: &FunctionSource) -> Result<FunctionSpec, ConfigError> {
    match source {
        FunctionSource::Builtin { builtin, params } => {
            instantiate_builtin(builtin, params).map_err(|e| invalid(e.to_string()))
        }
        FunctionSource::DslFile { dsl_file } => {
            let text = std::fs::read_to_string(dsl_file)
                .map_err(|source| ConfigError::Io { path: dsl_file.clone(), source })?;
            parse_function_spec(&text).map_err(|e| invalid(e.to_string()))
        }
        FunctionSource::DslInline { dsl } => {
            parse_function_spec(dsl).map_err(|e| invalid(e.to_string()))
        }
    }
}

/// Validate the manifest and assemble the runnable job.
pub fn prepare(config: &RunConfig) -> Result<Job, ConfigError> {
    let mut spec = build_spec(&config.function)?;

    let domain = match &config.domain {
        Some(d) => {
            if d.lower.len() != d.upper.len() {
                return Err(invalid("domain lower/upper lengths differ"));
            }
            if d.dim_input > d.lower.len() {
                return Err(invalid("dim_input exceeds the domain dimension"));
            }
            let dim_state = d.lower.len() - d.dim_input;
            DomainBox::new(d.lower.clone(), d.upper.clone(), dim_state, d.dim_input)
                .map_err(|e| invalid(e.to_string()))?
        }
        None => affabs::funcs::builtin_default_domain(&spec)
            .ok_or_else(|| invalid("no domain given and the function has no default bounds"))?,
    };
    if domain.dim() != spec.arity_in() {
        // A DSL spec may reference fewer variables than the domain spans.
        spec = spec
            .with_dims(domain.dim_state(), domain.dim_input())
            .map_err(|e| invalid(e.to_string()))?;
    }

    let points = match &config.points_per_dim {
        PointsPerDim::Same(n) => vec![*n; domain.dim()],
        PointsPerDim::PerDim(v) => v.clone(),
    };
    let mesh = build_mesh(domain.clone(), points).map_err(|e| invalid(e.to_string()))?;

    let seed = config.seed.unwrap_or(0);
    let smoothness = match &config.smoothness {
        None => None,
        Some(s) => match (s.constant, s.estimate_samples) {
            (Some(c), None) => {
                if c <= 0.0 {
                    return Err(invalid("smoothness constant must be positive"));
                }
                Some(SmoothnessInfo {
                    class: s.class,
                    constant: c,
                    provenance: ConstantProvenance::UserSupplied,
                })
            }
            (None, Some(samples)) => {
                if samples < 1000 {
                    return Err(invalid("estimate_samples must be at least 1000"));
                }
                let constant = estimate_smoothness_bound(&spec, &domain, s.class, samples, seed)
                    .map_err(|e| invalid(e.to_string()))?;
                Some(SmoothnessInfo {
                    class: s.class,
                    constant,
                    provenance: ConstantProvenance::Estimated,
                })
            }
            (Some(_), Some(_)) => {
                return Err(invalid("give either a smoothness constant or estimate_samples"));
            }
            (None, None) => {
                return Err(invalid("smoothness needs a constant or estimate_samples"));
            }
        },
    };
    if let Some(info) = &smoothness {
        spec.smoothness = Some(*info);
    }

    match (config.method.runs_incremental(), config.budget) {
        (true, None) => return Err(invalid("incremental runs need a budget")),
        (false, Some(_)) => return Err(invalid("budget is only meaningful for incremental runs")),
        _ => {}
    }
    if let (Some(cap), Some(budget)) = (config.memory_cap, config.budget) {
        if cap < budget {
            return Err(invalid(format!("memory_cap {cap} below budget {budget}")));
        }
    }

    let mut abs_config = AbstractionConfig::new(config.budget.unwrap_or(mesh.s_max()));
    abs_config.expansion_order = config.expansion_order.clone();
    abs_config.start_region = config.start_region.clone().unwrap_or(StartRegion::LeftCorner);
    abs_config.warm_start_points =
        config.warm_start_points.iter().map(|c| GridIndex(c.clone())).collect();
    abs_config.smoothness = smoothness;
    abs_config.output_mode = config.output_mode.unwrap_or(OutputMode::Scalar);
    abs_config.memory_cap = config.memory_cap;

    Ok(Job {
        spec,
        mesh,
        method: config.method,
        config: abs_config,
        out_dir: config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        seed,
    })
}
