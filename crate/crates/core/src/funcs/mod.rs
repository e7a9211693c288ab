//! Vector field definitions: expression-DSL functions, builtins and
//! smoothness-constant handling.

pub mod builtins;
pub mod expr;
mod smoothness;

pub use smoothness::estimate_smoothness_bound;

use crate::mesh::DomainBox;
use expr::Expr;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuncError {
    #[error("parse error at line {line}, column {col}: {message}")]
    ParseError { line: usize, col: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("bad parameter for builtin: {0}")]
    BadParameter(String),
    #[error("missing smoothness constant for class {0:?}")]
    MissingConstant(SmoothnessClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessClass {
    C0,
    Lipschitz,
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantProvenance {
    UserSupplied,
    /// Finite-difference sampling estimate; not sound.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessInfo {
    pub class: SmoothnessClass,
    pub constant: f64,
    pub provenance: ConstantProvenance,
}

#[derive(Debug, Clone)]
pub enum Body {
    Rastrigin { d: usize },
    SwarmRendezvous { agents: usize },
    Exprs(Vec<Expr>),
}

/// A vector field f : X x U -> R^p with optional smoothness metadata.
#[derive(Debug, Clone)]
pub struct FunctionSpec {
    dim_state: usize,
    dim_input: usize,
    arity_out: usize,
    body: Body,
    pub smoothness: Option<SmoothnessInfo>,
}

impl FunctionSpec {
    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_input(&self) -> usize {
        self.dim_input
    }

    pub fn arity_in(&self) -> usize {
        self.dim_state + self.dim_input
    }

    pub fn arity_out(&self) -> usize {
        self.arity_out
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn with_smoothness(mut self, info: SmoothnessInfo) -> Self {
        assert!(info.constant > 0.0, "smoothness constant must be positive");
        self.smoothness = Some(info);
        self
    }

    /// Override the inferred variable counts, e.g. when the domain has more
    /// dimensions than the expressions reference.
    pub fn with_dims(mut self, dim_state: usize, dim_input: usize) -> Result<Self, FuncError> {
        if let Body::Exprs(exprs) = &self.body {
            let (mut mx, mut mu) = (None, None);
            for e in exprs {
                e.max_var_indices(&mut mx, &mut mu);
            }
            if mx.map_or(false, |m| m >= dim_state) || mu.map_or(false, |m| m >= dim_input) {
                return Err(FuncError::ArityMismatch(format!(
                    "expressions reference variables beyond x0..x{} / u0..u{}",
                    dim_state.saturating_sub(1),
                    dim_input.saturating_sub(1)
                )));
            }
            self.dim_state = dim_state;
            self.dim_input = dim_input;
            Ok(self)
        } else {
            Err(FuncError::ArityMismatch("dimensions of builtins are fixed".into()))
        }
    }
}

/// Parse the component DSL into a function spec. State and input arities are
/// inferred from the highest referenced indices.
pub fn parse_function_spec(text: &str) -> Result<FunctionSpec, FuncError> {
    let exprs = expr::parse_components(text)?;
    let (mut mx, mut mu) = (None, None);
    for e in &exprs {
        e.max_var_indices(&mut mx, &mut mu);
    }
    Ok(FunctionSpec {
        dim_state: mx.map_or(1, |m| m + 1),
        dim_input: mu.map_or(0, |m| m + 1),
        arity_out: exprs.len(),
        body: Body::Exprs(exprs),
        smoothness: None,
    })
}

/// Instantiate a builtin by name. `rastrigin` takes `d`; `swarm_rendezvous`
/// takes `N`.
pub fn instantiate_builtin(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<FunctionSpec, FuncError> {
    let int_param = |key: &str| -> Result<usize, FuncError> {
        let v = *params
            .get(key)
            .ok_or_else(|| FuncError::BadParameter(format!("missing parameter `{key}`")))?;
        if v.fract() != 0.0 || v < 1.0 {
            return Err(FuncError::BadParameter(format!("`{key}` must be a positive integer")));
        }
        Ok(v as usize)
    };
    match name {
        "rastrigin" => {
            let d = int_param("d")?;
            Ok(FunctionSpec {
                dim_state: d,
                dim_input: 0,
                arity_out: 1,
                body: Body::Rastrigin { d },
                smoothness: None,
            })
        }
        "swarm_rendezvous" => {
            let agents = int_param("N")?;
            if agents < 2 {
                return Err(FuncError::BadParameter("`N` must be at least 2".into()));
            }
            Ok(FunctionSpec {
                dim_state: 3 * agents,
                dim_input: 0,
                arity_out: 3 * agents,
                body: Body::SwarmRendezvous { agents },
                smoothness: None,
            })
        }
        other => Err(FuncError::UnknownBuiltin(other.to_string())),
    }
}

/// Evaluate the vector field at a position laid out as state then input.
pub fn evaluate(spec: &FunctionSpec, position: &[f64]) -> Result<Vec<f64>, FuncError> {
    assert_eq!(position.len(), spec.arity_in(), "position arity mismatch");
    let (state, input) = position.split_at(spec.dim_state);
    match &spec.body {
        Body::Rastrigin { .. } => Ok(vec![builtins::rastrigin(state)]),
        Body::SwarmRendezvous { agents } => Ok(builtins::swarm_rendezvous(*agents, state)),
        Body::Exprs(exprs) => exprs.iter().map(|e| e.eval(state, input)).collect(),
    }
}

/// Default domain for a builtin, when one is defined.
pub fn builtin_default_domain(spec: &FunctionSpec) -> Option<DomainBox> {
    match &spec.body {
        Body::Rastrigin { d } => Some(builtins::rastrigin_domain(*d)),
        Body::SwarmRendezvous { agents } if *agents == 3 || *agents == 5 => {
            Some(builtins::swarm_domain(*agents))
        }
        _ => None,
    }
}
