//! Affine abstractions of bounded-domain nonlinear vector fields.
//!
//! Computes pairs of affine hyperplanes that bracket a nonlinear function
//! over a gridded box domain, either with a single linear program over all
//! grid points or with a memory-bounded incremental procedure that expands
//! an operating region across a sequence of linear programs.

pub mod abstraction;
pub mod funcs;
pub mod lp;
pub mod mesh;
pub mod verify;

pub use abstraction::{
    AbstractionConfig, AbstractionError, FinalAbstraction, IncrementLog, OutputMode, StartRegion,
};
pub use funcs::{FuncError, FunctionSpec, SmoothnessClass};
pub use lp::{AffinePlanePair, LpError, PlaneDims, SolveReport, SolveStatus};
pub use mesh::{BoxRegion, DomainBox, GridIndex, MeshError, SamplePoint, UniformMesh};
